/*
 * Copyright 2026 The Praetorian Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "instances.hpp"
#include "oracles.hpp"
#include "praetorian/divergence.hpp"
#include "praetorian/harness.hpp"
#include "test_support.hpp"

namespace praetorian {
namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string fmt_opt(const std::optional<double>& x) { return x ? fmt("%.2f", *x) : std::string("n/a"); }

nn::Classifier small_classifier(const AttributedGraph& g, std::uint64_t seed) {
  nn::ModelConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 30;
  cfg.seed = seed;
  return nn::train_classifier(g, g.train_nodes(), cfg);
}

Verdict harsanyi_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst_sum = 0, worst_closed = 0;
  int instances = 0;
  for (std::uint64_t gseed = 0; gseed < 10; ++gseed) {
    const AttributedGraph g = testing::random_graph(30, 0.1, 4, 3, 500 + gseed);
    const nn::Classifier clf = small_classifier(g, gseed);
    for (int k = 0; k < 20; ++k, ++instances) {
      const NodeId victim = std::uniform_int_distribution<NodeId>(0, 29)(rng);
      const Perturbation pert = instances::random_perturbation(g, victim, 6, rng);
      const DividendMap dm = harsanyi_decomposition(clf, pert);
      const RowVector& delta = dm.deltas.at(pert.full_mask());
      const double scale = std::max(delta.norm(), 1e-300);
      RowVector sum = RowVector::Zero(delta.size());
      for (const auto& [s, v] : dm.dividends) sum += v;
      worst_sum = std::max(worst_sum, (sum - delta).norm() / std::max(scale, 1.0));
      std::vector<RowVector> table(std::size_t{1} << pert.size());
      for (const auto& [s, v] : dm.deltas) table[s] = v;
      for (const auto& [s, v] : dm.dividends) {
        worst_closed = std::max(worst_closed, (v - oracle::dividend(s, table)).norm() / std::max(scale, 1.0));
      }
    }
  }
  const double t = seconds_since(t0);
  return {instances == 200 && worst_sum <= 1e-9 && worst_closed <= 1e-9 && t < 60,
          fmt("%d instances, sum error %.1e, closed-form error %.1e, %.1f s", instances, worst_sum, worst_closed, t)};
}

Verdict dichotomy() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> atoms(1, 8), dim(2, 6);
  std::uniform_real_distribution<double> theta(0.01, 10.0), excess(1.0, 3.0);
  int violations = 0, checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double th = theta(rng);
    const DividendMap dm = instances::random_dividend_map(atoms(rng), dim(rng), th * excess(rng), rng);
    if (dm.total.norm() < th) continue;
    ++checked;
    if (std::max(dm.ei.norm(), dm.ic.norm()) < th / 2) ++violations;
  }
  return {checked == 1000 && violations == 0,
          fmt("%d maps, %d violations, %.2f s", checked, violations, seconds_since(t0))};
}

Verdict divergence_kernels() {
  std::mt19937_64 rng(303);
  std::gamma_distribution<double> mass(0.5, 1.0);
  std::uniform_int_distribution<int> dim(2, 8);
  auto draw = [&](int d) {
    std::vector<double> p(static_cast<std::size_t>(d));
    double total = 0;
    for (auto& x : p) total += (x = mass(rng) + 1e-6);
    for (auto& x : p) x /= total;
    return p;
  };
  double worst_self = 0, worst_sym = 0, worst_bound = 0;
  for (int i = 0; i < 10000; ++i) {
    const int d = dim(rng);
    const auto p = draw(d), q = draw(d);
    const Divergence self = kl_js(p, p);
    worst_self = std::max({worst_self, self.kl, self.js});
    worst_sym = std::max(worst_sym, std::abs(kl_js(p, q).js - kl_js(q, p).js));
    worst_bound = std::max(worst_bound, kl_js(p, q).js - std::log(2.0));
  }
  const Divergence hand = kl_js(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5});
  // m = (3/4, 1/4): JS = (ln(4/3) + ln(4/3) / 2) / 2.
  const double js_expected = 0.75 * std::log(4.0 / 3.0);
  const double hand_err = std::max(std::abs(hand.kl - std::log(2.0)), std::abs(hand.js - js_expected));
  return {worst_self == 0 && worst_sym <= 1e-12 && worst_bound <= 0 && hand_err <= 1e-6,
          fmt("10000 pairs; KL(p,p) max %.1e, JS asymmetry %.1e, JS - ln2 max %.3f; hand KL %.6f JS %.6f",
              worst_self, worst_sym, worst_bound, hand.kl, hand.js)};
}

Verdict fast_path() {
  const auto t0 = Clock::now();
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AttributedGraph g = testing::random_graph(200, 0.03, 8, 3, 700 + seed);
    nn::ModelConfig cfg;
    cfg.architecture = seed % 2 ? nn::Architecture::kMeanAggregate : nn::Architecture::kAttention;
    cfg.hidden = 8;
    cfg.epochs = 15;
    cfg.seed = seed;
    const nn::Classifier clf = nn::train_classifier(g, g.train_nodes(), cfg);
    for (NodeId v : g.all_nodes()) {
      worst = std::max(worst, std::abs(external_score(clf, g, v, true) - external_score_full(clf, g, v)));
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 120, fmt("20 graphs x 200 nodes, max difference %.1e, %.1f s", worst, t)};
}

Verdict localization_oracles() {
  LocalizationParams p;
  std::mt19937_64 rng(404);
  int prop_bad = 0, valley_bad = 0, trig_bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(4, 10)(rng);
    AttributedGraph g = testing::random_graph(n, 0.35, 2, 3, 900 + trial);
    std::vector<Split> splits(static_cast<std::size_t>(n));
    for (auto& s : splits) s = std::bernoulli_distribution(0.6)(rng) ? Split::kTrain : Split::kNone;
    g = g.with_splits(splits);
    std::vector<double> s(static_cast<std::size_t>(n));
    for (auto& x : s) x = std::uniform_real_distribution<double>(0, 2)(rng);

    const NodeSet train = g.train_nodes();
    const auto prop = propagate_scores(s, g, train, p).full;
    const auto ref = oracle::propagate(g, train, s, p.r, p.hops);
    for (int i = 0; i < n; ++i) prop_bad += std::abs(prop[i] - ref[i]) > 1e-12 * std::max(1.0, std::abs(ref[i]));

    std::vector<double> levels(static_cast<std::size_t>(n));
    for (auto& x : levels) x = std::uniform_int_distribution<int>(0, 6)(rng);
    std::sort(levels.begin(), levels.end(), std::greater<>());
    const Cutoff c = valley_cutoff(levels, 1.0);
    const auto [k, theta] = oracle::valley(levels, 1.0);
    valley_bad += c.k != k || c.theta != theta;

    std::vector<VictimGroup> groups(2);
    for (NodeId v = 0; v < n; ++v) {
      if (std::bernoulli_distribution(0.3)(rng)) groups[v % 2].victims.push_back(v);
    }
    const NodeSet all = set_union(groups[0].victims, groups[1].victims);
    recover_triggers(groups, g, ref, p.hops);
    for (const auto& grp : groups) trig_bad += grp.triggers != oracle::triggers(g, grp.victims, all, ref, p.hops);
  }
  return {prop_bad == 0 && valley_bad == 0 && trig_bad == 0,
          fmt("50 instances; mismatches: propagation %d, cutoff %d, triggers %d", prop_bad, valley_bad, trig_bad)};
}

double max_gradient_error(nn::NetParams& params, const nn::NetParams& analytic, const std::function<double()>& f) {
  double worst = 0;
  auto ps = params.tensors();
  const auto as = analytic.tensors();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    if (ps[k]->size() == 0) continue;
    worst = std::max(worst, testing::relative_error(*as[k], testing::numeric_gradient(*ps[k], f)));
  }
  return worst;
}

Verdict gradients() {
  double ae_err = 0, ce_err = 0, joint_err = 0;
  for (auto arch : {nn::Architecture::kAttention, nn::Architecture::kMeanAggregate}) {
    nn::ModelConfig cfg;
    cfg.architecture = arch;
    cfg.hidden = 4;
    cfg.seed = 17;

    const AttributedGraph g5 = testing::random_graph(5, 0.6, 4, 3, 41);
    nn::MaskedAutoencoder ae(cfg, g5.feature_dim());
    ae.mask_token() = RowVector::LinSpaced(4, -0.4, 0.6);
    const nn::GraphContext ctx5(g5);
    const NodeSet mask = {0, 3};
    nn::AutoencoderGrads ag{ae.net().params().zeros_like(), RowVector::Zero(4)};
    nn::autoencoder_loss(ae, ctx5, mask, &ag);
    ae_err = std::max(ae_err, max_gradient_error(ae.net().params(), ag.net, [&] {
      return nn::autoencoder_loss(ae, ctx5, mask, nullptr).loss;
    }));
    Matrix token = ae.mask_token();
    const Matrix num_token = testing::numeric_gradient(token, [&] {
      ae.mask_token() = token.row(0);
      return nn::autoencoder_loss(ae, ctx5, mask, nullptr).loss;
    });
    ae.mask_token() = token.row(0);
    ae_err = std::max(ae_err, testing::relative_error(ag.token, num_token));

    nn::Classifier clf(cfg, g5.feature_dim(), 3);
    const std::vector<int> labels = {g5.label(0), g5.label(1), g5.label(2), g5.label(4)};
    const NodeSet nodes = {0, 1, 2, 4};
    const nn::CrossEntropyGroup grp{nodes, labels, 0.25};
    nn::NetParams cg = clf.net().params().zeros_like();
    nn::cross_entropy(clf.net(), ctx5, grp, &cg);
    ce_err = std::max(ce_err, max_gradient_error(clf.net().params(), cg, [&] {
      return nn::cross_entropy(clf.net(), ctx5, grp, nullptr).loss;
    }));

    const AttributedGraph g6 = testing::random_graph(6, 0.5, 3, 3, 42);
    DetectionResult det;
    det.abstained = false;
    det.groups = {{1, {2}, {5}}};
    const FilteredGraph f = filter_graph(g6, det);
    const RobustObjective obj(g6, f, det);
    nn::Classifier jc(cfg, g6.feature_dim(), 3);
    nn::NetParams jg = jc.net().params().zeros_like();
    obj.evaluate(jc.net(), &jg);
    joint_err = std::max(joint_err, max_gradient_error(jc.net().params(), jg, [&] {
      return obj.evaluate(jc.net(), nullptr).total();
    }));
  }
  return {std::max({ae_err, ce_err, joint_err}) <= 1e-4,
          fmt("max relative error: reconstruction %.1e, cross-entropy %.1e, joint defense loss %.1e", ae_err, ce_err,
              joint_err)};
}

// End-to-end runs on the Cora graph ($PRAETORIAN_CORA_DIR) or its synthetic
// stand-in, with default settings.
ExperimentConfig cora_config(std::optional<AttackSpec> attack) {
  ExperimentConfig cfg;
  cfg.attack = std::move(attack);
  cfg.repeats = 5;
  return cfg;
}

DefenseReport run_logged(const ExperimentConfig& cfg, const char* tag) {
  return run_pipeline(cfg, {}, [&](const RunReport& r) {
    std::printf("  [%s] seed %llu: abstained=%d bc=%.3f CA %.2f -> %.2f ASR %s -> %s\n", tag,
                static_cast<unsigned long long>(r.seed), r.abstained, r.bimodality, r.ca_before, r.ca_after,
                fmt_opt(r.asr_before).c_str(), fmt_opt(r.asr_after).c_str());
    std::fflush(stdout);
  });
}

Verdict clean_abstention() {
  const ExperimentConfig cfg = cora_config(std::nullopt);
  const DefenseReport rep = run_logged(cfg, "clean");
  int gate_abstained = 0;
  double worst = 0;
  for (const auto& r : rep.runs) {
    gate_abstained += r.bimodality <= cfg.localization.bimodality_threshold;
    worst = std::max(worst, std::abs(r.ca_after - r.ca_before));
  }
  return {gate_abstained >= 4 && worst <= 0.5,
          fmt("gate abstained %d/5 (pipeline %d/5), max |defended CA - standard CA| %.2f", gate_abstained,
              summarize(rep.runs).abstentions, worst)};
}

AttackSpec sba() {
  AttackSpec a;
  a.trigger_size = 3;
  a.victim_size = 10;
  return a;
}

struct SbaResult {
  ReportSummary s;
  double seconds = 0;
};

const SbaResult& sba_row() {
  static const SbaResult result = [] {
    const auto t0 = Clock::now();
    const DefenseReport rep = run_logged(cora_config(sba()), "sba");
    return SbaResult{summarize(rep.runs), seconds_since(t0)};
  }();
  return result;
}

Verdict sba_table_row() {
  const SbaResult& r = sba_row();
  const ReportSummary& s = r.s;
  auto at_least = [](const std::optional<double>& x, double v) { return x && *x >= v; };
  const bool pass = at_least(s.asr_before, 35) && s.asr_after && *s.asr_after <= 5 && s.ca_after && s.ca_clean_baseline &&
                    *s.ca_after >= *s.ca_clean_baseline - 2 && at_least(s.victim_precision, 85) &&
                    at_least(s.victim_recall, 85) && at_least(s.trigger_precision, 85) &&
                    at_least(s.trigger_recall, 85) && r.seconds < 15 * 60;
  return {pass, fmt("ASR %s -> %s, CA %s (clean %s), victims P/R %s/%s, triggers P/R %s/%s, %.0f s",
                    fmt_opt(s.asr_before).c_str(), fmt_opt(s.asr_after).c_str(), fmt_opt(s.ca_after).c_str(),
                    fmt_opt(s.ca_clean_baseline).c_str(), fmt_opt(s.victim_precision).c_str(),
                    fmt_opt(s.victim_recall).c_str(), fmt_opt(s.trigger_precision).c_str(),
                    fmt_opt(s.trigger_recall).c_str(), r.seconds)};
}

Verdict ablation_direction() {
  const ReportSummary& s = sba_row().s;
  const bool pass = s.asr_removal_only && s.asr_after && *s.asr_removal_only - *s.asr_after >= 20;
  return {pass, fmt("removal-only ASR %s vs full defense ASR %s", fmt_opt(s.asr_removal_only).c_str(),
                    fmt_opt(s.asr_after).c_str())};
}

Verdict clean_label_stress() {
  ReportSummary by_vs[2];
  int k = 0;
  for (int vs : {10, 40}) {
    AttackSpec a;
    a.kind = AttackKind::kCleanLabelOneNode;
    a.trigger_size = 1;
    a.victim_size = vs;
    ExperimentConfig cfg = cora_config(a);
    cfg.removal_only_ablation = false;
    cfg.clean_baseline = false;
    by_vs[k++] = summarize(run_logged(cfg, vs == 10 ? "clean-label VS=10" : "clean-label VS=40").runs);
  }
  const auto& [s10, s40] = by_vs;
  const bool pass = s10.asr_after && s40.asr_after && *s40.asr_after <= *s10.asr_after && s10.trigger_recall &&
                    s40.trigger_recall && *s40.trigger_recall >= *s10.trigger_recall;
  return {pass, fmt("defended ASR %s (VS=10) vs %s (VS=40); trigger recall %s vs %s",
                    fmt_opt(s10.asr_after).c_str(), fmt_opt(s40.asr_after).c_str(),
                    fmt_opt(s10.trigger_recall).c_str(), fmt_opt(s40.trigger_recall).c_str())};
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*check)();
};

constexpr Criterion kCriteria[] = {
    {1, "Harsanyi exactness", harsanyi_exactness},
    {2, "EI/IC dichotomy", dichotomy},
    {3, "divergence kernels", divergence_kernels},
    {4, "fast-path equivalence", fast_path},
    {5, "localization oracle equivalence", localization_oracles},
    {6, "clean-graph abstention", clean_abstention},
    {7, "SBA desk-scale row", sba_table_row},
    {8, "ablation direction", ablation_direction},
    {9, "gradient checks", gradients},
    {10, "clean-label stress trend", clean_label_stress},
};

}  // namespace
}  // namespace praetorian

int main(int argc, char** argv) {
  using namespace praetorian;
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}

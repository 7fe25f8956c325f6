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

// Experiment orchestration: inductive split, poisoning, scoring,
// localization, defended training and evaluation, plus the metrics and the
// JSON report. Ground truth (PoisonRecord) flows only into the metric
// functions.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <type_traits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/attack.hpp"
#include "praetorian/graph_io.hpp"
#include "praetorian/localization.hpp"
#include "praetorian/nn/checkpoint.hpp"
#include "praetorian/robust.hpp"
#include "praetorian/scoring.hpp"
#include "praetorian/synthetic.hpp"

namespace praetorian {

// A failure inside one pipeline stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct ExperimentConfig {
  std::string graph = "cora";  // graph directory, or "cora" / "synthetic:cora"
  std::uint64_t graph_seed = 0;
  CitationGraphParams synthetic;  // used by the built-in graph only
  double train_fraction = 0.8;
  std::optional<AttackSpec> attack;
  nn::ModelConfig classifier = default_classifier_config();
  nn::ModelConfig autoencoder = default_autoencoder_config();
  LocalizationParams localization;
  bool fast = true;
  bool removal_only_ablation = true;
  bool clean_baseline = true;
  int repeats = 1;
  std::uint64_t seed = 0;

  static nn::ModelConfig default_classifier_config() {
    nn::ModelConfig c;
    c.architecture = nn::Architecture::kMeanAggregate;
    c.learning_rate = 0.01;
    c.epochs = 200;
    c.weight_decay = 5e-4;
    return c;
  }
  static nn::ModelConfig default_autoencoder_config() {
    nn::ModelConfig c;
    c.architecture = nn::Architecture::kAttention;
    c.learning_rate = 1e-4;
    c.epochs = 400;
    return c;
  }

  void validate() const {
    if (!(train_fraction >= 0 && train_fraction <= 1)) throw ConfigError("train fraction must lie in [0, 1]");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    classifier.validate();
    autoencoder.validate();
    localization.validate();
    if (attack) attack->validate();
    if (!is_builtin_graph() && !std::filesystem::is_directory(graph)) {
      throw ConfigError("graph directory '" + graph + "' does not exist");
    }
  }

  bool is_builtin_graph() const { return graph == "cora" || graph == "synthetic:cora"; }
};

inline nlohmann::json to_json(const LocalizationParams& p) {
  return {{"r", p.r},
          {"hops", p.hops},
          {"top_fraction", p.top_fraction},
          {"min_support", p.min_support},
          {"stop_run", p.stop_run},
          {"bimodality_threshold", p.bimodality_threshold}};
}

inline LocalizationParams localization_params_from_json(const nlohmann::json& j, LocalizationParams p = {}) {
  try {
    if (j.contains("r")) p.r = j.at("r");
    if (j.contains("hops")) p.hops = j.at("hops");
    if (j.contains("top_fraction")) p.top_fraction = j.at("top_fraction");
    if (j.contains("min_support")) p.min_support = j.at("min_support");
    if (j.contains("stop_run")) p.stop_run = j.at("stop_run");
    if (j.contains("bimodality_threshold")) p.bimodality_threshold = j.at("bimodality_threshold");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("localization params: ") + e.what());
  }
  return p;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = {{"graph", c.graph},
                      {"graph_seed", c.graph_seed},
                      {"synthetic", to_json(c.synthetic)},
                      {"train_fraction", c.train_fraction},
                      {"classifier", nn::to_json(c.classifier)},
                      {"autoencoder", nn::to_json(c.autoencoder)},
                      {"localization", to_json(c.localization)},
                      {"fast", c.fast},
                      {"removal_only_ablation", c.removal_only_ablation},
                      {"clean_baseline", c.clean_baseline},
                      {"repeats", c.repeats},
                      {"seed", c.seed}};
  j["attack"] = c.attack ? to_json(*c.attack) : nlohmann::json(nullptr);
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("graph")) c.graph = j.at("graph");
    if (j.contains("graph_seed")) c.graph_seed = j.at("graph_seed");
    if (j.contains("synthetic")) c.synthetic = citation_params_from_json(j.at("synthetic"));
    if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction");
    if (j.contains("attack") && !j.at("attack").is_null()) c.attack = attack_spec_from_json(j.at("attack"));
    if (j.contains("classifier")) c.classifier = nn::model_config_from_json(j.at("classifier"), c.classifier);
    if (j.contains("autoencoder")) c.autoencoder = nn::model_config_from_json(j.at("autoencoder"), c.autoencoder);
    if (j.contains("localization")) c.localization = localization_params_from_json(j.at("localization"));
    if (j.contains("fast")) c.fast = j.at("fast");
    if (j.contains("removal_only_ablation")) c.removal_only_ablation = j.at("removal_only_ablation");
    if (j.contains("clean_baseline")) c.clean_baseline = j.at("clean_baseline");
    if (j.contains("repeats")) c.repeats = j.at("repeats");
    if (j.contains("seed")) c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

// "cora" loads $PRAETORIAN_CORA_DIR when set and otherwise generates the
// Cora-statistics synthetic graph; anything else is a graph directory.
inline AttributedGraph load_experiment_graph(const ExperimentConfig& cfg) {
  if (cfg.graph == "cora") {
    if (const char* dir = std::getenv("PRAETORIAN_CORA_DIR"); dir && *dir) return load_graph(dir);
  }
  if (cfg.is_builtin_graph()) {
    CitationGraphParams p = cfg.synthetic;
    p.seed = cfg.graph_seed;
    return generate_citation_graph(p);
  }
  return load_graph(cfg.graph);
}

struct GraphSplit {
  Subgraph train;
  Subgraph test;
};

// Node-induced disjoint train/test graphs; cross edges are dropped.
inline GraphSplit split_graph(const AttributedGraph& g, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0 && train_fraction <= 1)) throw InvalidArgument("train fraction must lie in [0, 1]");
  std::vector<NodeId> order = g.all_nodes();
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * g.num_nodes()));
  NodeSet train = make_node_set({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)});
  NodeSet test = make_node_set({order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end()});
  auto tagged = [&](const NodeSet& keep, Split s) {
    Subgraph sg = induced_subgraph(g, keep);
    sg.graph = sg.graph.with_splits(std::vector<Split>(keep.size(), s));
    return sg;
  };
  return {tagged(train, Split::kTrain), tagged(test, Split::kTest)};
}

struct TestHalves {
  NodeSet clean;   // CA
  NodeSet attack;  // triggered for ASR
};

inline TestHalves split_test_halves(const AttributedGraph& g_test, std::uint64_t seed) {
  std::vector<NodeId> order = g_test.all_nodes();
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t half = order.size() / 2;
  return {make_node_set({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half)}),
          make_node_set({order.begin() + static_cast<std::ptrdiff_t>(half), order.end()})};
}

inline std::vector<int> predictions(const nn::Classifier& c, const AttributedGraph& g) {
  const Matrix logits = c.logits(g);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) logits.row(i).maxCoeff(&out[i]);
  return out;
}

// Percentage of filtered victims (true label != target) predicted as the
// target, macro-averaged over groups; nullopt when every group is empty.
inline std::optional<double> compute_asr(const nn::Classifier& c, const AttributedGraph& g_u,
                                         const PoisonRecord& record) {
  const std::vector<int> pred = predictions(c, g_u);
  std::map<int, std::pair<long, long>> per_group;  // group -> (hits, total)
  for (NodeId v : record.victims) {
    g_u.check_node(v);
    const auto it = record.victim_group.find(v);
    const int grp = it == record.victim_group.end() ? 0 : it->second;
    const int target = record.target_labels.at(grp);
    if (g_u.label(v) == target) continue;
    auto& [hits, total] = per_group[grp];
    ++total;
    hits += pred[v] == target ? 1 : 0;
  }
  if (per_group.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& [grp, ht] : per_group) sum += 100.0 * static_cast<double>(ht.first) / static_cast<double>(ht.second);
  return sum / static_cast<double>(per_group.size());
}

inline double compute_ca(const nn::Classifier& c, const AttributedGraph& g, const NodeSet& nodes) {
  std::vector<NodeId> labeled;
  for (NodeId v : nodes) {
    g.check_node(v);
    if (g.has_label(v)) labeled.push_back(v);
  }
  if (labeled.empty()) throw InvalidArgument("compute_ca: no labeled clean nodes");
  const std::vector<int> pred = predictions(c, g);
  long correct = 0;
  for (NodeId v : labeled) correct += pred[v] == g.label(v) ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labeled.size());
}

struct PrecisionRecall {
  std::optional<double> precision;
  double recall = 0.0;
};

inline PrecisionRecall precision_recall(const NodeSet& predicted, const NodeSet& truth) {
  PrecisionRecall pr;
  const double hit = static_cast<double>(set_intersection(predicted, truth).size());
  if (!predicted.empty()) pr.precision = 100.0 * hit / static_cast<double>(predicted.size());
  pr.recall = truth.empty() ? 0.0 : 100.0 * hit / static_cast<double>(truth.size());
  return pr;
}

struct DetectionMetrics {
  PrecisionRecall victims;
  PrecisionRecall triggers;
};

// Abstention: precision missing, recall 0.
inline DetectionMetrics detection_metrics(const DetectionResult& det, const PoisonRecord& record) {
  if (det.abstained) return {};
  return {precision_recall(det.all_victims(), record.victims),
          precision_recall(det.all_triggers(), record.all_triggers())};
}

struct RunReport {
  std::uint64_t seed = 0;
  bool attacked = false;
  bool abstained = true;
  double bimodality = 0.0;
  FusionWeights fusion;
  std::optional<double> asr_before, asr_after, asr_removal_only;
  double ca_before = 0.0, ca_after = 0.0;
  std::optional<double> ca_clean_baseline, ca_removal_only;
  std::optional<DetectionMetrics> detection;
  std::size_t detected_victims = 0, detected_triggers = 0;
  std::map<std::string, double> seconds;
};

struct RunArtifacts {
  ScoreTable scores;
  nlohmann::json histograms;
  DetectionResult detection;
  nlohmann::json training_log;
  PoisonRecord record;
};

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(&sink) {}

  template <class F>
  auto operator()(const std::string& stage, F&& f) -> decltype(f()) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record(stage, t0);
      } else {
        auto result = f();
        record(stage, t0);
        return result;
      }
    } catch (const StageError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point t0) {
    (*sink_)[stage] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::map<std::string, double>* sink_;
};

inline std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  double s = 0.0;
  int n = 0;
  for (const auto& x : xs) {
    if (x) {
      s += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

inline nlohmann::json opt(const std::optional<double>& x) {
  return x ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

}  // namespace detail

// Per-stage seeds of one run.
enum class StageSeed : std::uint64_t { kSplit = 1, kHalves, kAttack, kClassifier, kAutoencoder, kTestTriggers };

inline std::uint64_t stage_seed(std::uint64_t run_seed, StageSeed s) {
  return derive_seed(run_seed, static_cast<std::uint64_t>(s));
}

inline std::uint64_t run_seed(const ExperimentConfig& cfg, int repeat) {
  return derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(repeat));
}

inline nn::ModelConfig seeded(nn::ModelConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

// Split, test halves and (optional) poisoning of one run.
struct PreparedData {
  GraphSplit split;
  TestHalves halves;
  PoisonResult poisoned;  // the clean training graph with an empty record when unattacked
};

inline PreparedData prepare_data(const AttributedGraph& graph, const ExperimentConfig& cfg, std::uint64_t seed) {
  GraphSplit split = split_graph(graph, cfg.train_fraction, stage_seed(seed, StageSeed::kSplit));
  TestHalves halves = split_test_halves(split.test.graph, stage_seed(seed, StageSeed::kHalves));
  PoisonResult poisoned{split.train.graph, {}};
  if (cfg.attack) {
    AttackSpec spec = *cfg.attack;
    spec.seed = stage_seed(seed, StageSeed::kAttack);
    poisoned = poison_graph(split.train.graph, spec);
  }
  return {std::move(split), std::move(halves), std::move(poisoned)};
}

// G_U: full-strength triggers on every attack-half node, spread over the
// target groups round-robin. Feature statistics come from the clean
// training graph.
inline TestTriggering make_test_graph(const AttributedGraph& g_test, const TestHalves& halves,
                                      const AttributedGraph& g_train_clean, const AttackSpec& spec,
                                      std::uint64_t seed) {
  std::vector<NodeSet> groups(spec.target_labels.size());
  for (std::size_t k = 0; k < halves.attack.size(); ++k) groups[k % groups.size()].push_back(halves.attack[k]);
  return trigger_test_nodes(g_test, spec, FeatureStats::of(g_train_clean.features()), groups,
                            stage_seed(seed, StageSeed::kTestTriggers));
}

struct Localization {
  ScoreTable table;
  DetectionResult detection;
  FusionWeights fusion;
  double bimodality = 0.0;
};

inline Localization score_and_localize(const nn::MaskedAutoencoder& ae, const nn::Classifier& clf,
                                       const AttributedGraph& g_t, const LocalizationParams& params, bool fast,
                                       detail::StageTimer* timer = nullptr) {
  Localization out;
  auto timed = [&](const std::string& stage, auto&& f) {
    if (timer) return (*timer)(stage, f);
    return f();
  };
  out.table = timed("score", [&] { return score_all(ae, clf, g_t, default_candidates(g_t), fast); });
  IdentifyTrace trace;
  out.detection = timed("localize", [&] { return localize(out.table, g_t, params, &out.fusion, &trace); });
  out.bimodality = trace.bimodality;
  return out;
}

// One seeded end-to-end run on an already-loaded graph.
inline RunReport run_once(const AttributedGraph& graph, const ExperimentConfig& cfg, std::uint64_t seed,
                          RunArtifacts* artifacts = nullptr) {
  RunReport rep;
  rep.seed = seed;
  rep.attacked = cfg.attack.has_value();
  detail::StageTimer stage(rep.seconds);

  const PreparedData data = stage("prepare", [&] { return prepare_data(graph, cfg, seed); });
  const AttributedGraph& g_train = data.split.train.graph;
  const AttributedGraph& g_test = data.split.test.graph;
  const AttributedGraph& g_t = data.poisoned.graph;
  const nn::ModelConfig clf_cfg = seeded(cfg.classifier, stage_seed(seed, StageSeed::kClassifier));
  const nn::ModelConfig ae_cfg = seeded(cfg.autoencoder, stage_seed(seed, StageSeed::kAutoencoder));

  const nn::Classifier undefended = stage("train_classifier", [&] {
    return nn::train_classifier(g_t, g_t.train_nodes(), clf_cfg);
  });
  const nn::MaskedAutoencoder ae = stage("train_autoencoder", [&] { return nn::train_masked_autoencoder(g_t, ae_cfg); });
  Localization loc = score_and_localize(ae, undefended, g_t, cfg.localization, cfg.fast, &stage);
  const DetectionResult& det = loc.detection;
  rep.fusion = loc.fusion;
  rep.bimodality = loc.bimodality;
  rep.abstained = det.abstained;
  rep.detected_victims = det.num_victims();
  rep.detected_triggers = det.num_triggers();
  const DefenseOutcome defended = stage("defend", [&] { return robust_train(g_t, det, clf_cfg); });

  // Evaluation: everything below may read the ground truth.
  stage("evaluate", [&] {
    rep.ca_before = compute_ca(undefended, g_test, data.halves.clean);
    rep.ca_after = compute_ca(defended.model, g_test, data.halves.clean);
    if (cfg.clean_baseline) {
      if (cfg.attack) {
        const nn::Classifier clean = nn::train_classifier(g_train, g_train.train_nodes(), clf_cfg);
        rep.ca_clean_baseline = compute_ca(clean, g_test, data.halves.clean);
      } else {
        rep.ca_clean_baseline = rep.ca_before;
      }
    }
    if (!cfg.attack) return;
    rep.detection = detection_metrics(det, data.poisoned.record);
    const TestTriggering g_u = make_test_graph(g_test, data.halves, g_train, *cfg.attack, seed);
    rep.asr_before = compute_asr(undefended, g_u.graph, g_u.record);
    rep.asr_after = compute_asr(defended.model, g_u.graph, g_u.record);
    if (cfg.removal_only_ablation && !det.abstained) {
      const DefenseOutcome removal = robust_train(g_t, det, clf_cfg, /*unlearn=*/false);
      rep.asr_removal_only = compute_asr(removal.model, g_u.graph, g_u.record);
      rep.ca_removal_only = compute_ca(removal.model, g_test, data.halves.clean);
    } else if (cfg.removal_only_ablation) {
      rep.asr_removal_only = rep.asr_after;
      rep.ca_removal_only = rep.ca_after;
    }
  });

  if (artifacts) {
    artifacts->histograms = score_histograms(loc.table, data.poisoned.record.poisoned_nodes());
    artifacts->scores = std::move(loc.table);
    artifacts->detection = det;
    artifacts->training_log = training_log_json(defended);
    artifacts->record = data.poisoned.record;
  }
  return rep;
}

struct DefenseReport {
  ExperimentConfig config;
  std::vector<RunReport> runs;
};

inline nlohmann::json to_json(const RunReport& r) {
  using detail::opt;
  nlohmann::json det = nullptr;
  if (r.detection) {
    det = {{"victim_precision", opt(r.detection->victims.precision)},
           {"victim_recall", r.detection->victims.recall},
           {"trigger_precision", opt(r.detection->triggers.precision)},
           {"trigger_recall", r.detection->triggers.recall}};
  }
  return {{"seed", r.seed},
          {"attacked", r.attacked},
          {"abstained", r.abstained},
          {"bimodality", r.bimodality},
          {"fusion", {{"w_int", r.fusion.internal}, {"w_ext", r.fusion.external}, {"fallback", r.fusion.fallback}}},
          {"asr_before", opt(r.asr_before)},
          {"asr_after", opt(r.asr_after)},
          {"asr_removal_only", opt(r.asr_removal_only)},
          {"ca_before", r.ca_before},
          {"ca_after", r.ca_after},
          {"ca_clean_baseline", opt(r.ca_clean_baseline)},
          {"ca_removal_only", opt(r.ca_removal_only)},
          {"detection", det},
          {"detected_victims", r.detected_victims},
          {"detected_triggers", r.detected_triggers},
          {"seconds", r.seconds}};
}

struct ReportSummary {
  std::optional<double> asr_before, asr_after, asr_removal_only, ca_before, ca_after, ca_clean_baseline;
  std::optional<double> victim_precision, victim_recall, trigger_precision, trigger_recall;
  int abstentions = 0;
};

inline ReportSummary summarize(const std::vector<RunReport>& runs) {
  std::vector<std::optional<double>> ab, aa, ar, cb, ca, cc, vp, vr, tp, tr;
  ReportSummary s;
  for (const auto& r : runs) {
    ab.push_back(r.asr_before);
    aa.push_back(r.asr_after);
    ar.push_back(r.asr_removal_only);
    cb.push_back(r.ca_before);
    ca.push_back(r.ca_after);
    cc.push_back(r.ca_clean_baseline);
    if (r.detection) {
      vp.push_back(r.detection->victims.precision);
      vr.push_back(r.detection->victims.recall);
      tp.push_back(r.detection->triggers.precision);
      tr.push_back(r.detection->triggers.recall);
    }
    s.abstentions += r.abstained ? 1 : 0;
  }
  using detail::mean_of;
  s.asr_before = mean_of(ab);
  s.asr_after = mean_of(aa);
  s.asr_removal_only = mean_of(ar);
  s.ca_before = mean_of(cb);
  s.ca_after = mean_of(ca);
  s.ca_clean_baseline = mean_of(cc);
  s.victim_precision = mean_of(vp);
  s.victim_recall = mean_of(vr);
  s.trigger_precision = mean_of(tp);
  s.trigger_recall = mean_of(tr);
  return s;
}

inline nlohmann::json to_json(const DefenseReport& rep) {
  using detail::opt;
  const ReportSummary s = summarize(rep.runs);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rep.runs) runs.push_back(to_json(r));
  return {{"config", to_json(rep.config)},
          {"runs", runs},
          {"summary",
           {{"runs", rep.runs.size()},
            {"abstentions", s.abstentions},
            {"asr_before", opt(s.asr_before)},
            {"asr_after", opt(s.asr_after)},
            {"asr_removal_only", opt(s.asr_removal_only)},
            {"ca_before", opt(s.ca_before)},
            {"ca_after", opt(s.ca_after)},
            {"ca_clean_baseline", opt(s.ca_clean_baseline)},
            {"victim_precision", opt(s.victim_precision)},
            {"victim_recall", opt(s.victim_recall)},
            {"trigger_precision", opt(s.trigger_precision)},
            {"trigger_recall", opt(s.trigger_recall)}}}};
}

inline void write_run_artifacts(const RunArtifacts& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_score_table(a.scores, dir / "scores.csv");
  std::ofstream(dir / "histograms.json") << a.histograms.dump(2) << '\n';
  save_detection(a.detection, dir / "detection.json");
  std::ofstream(dir / "training_log.json") << a.training_log.dump(2) << '\n';
  if (!a.record.victims.empty()) save_poison_record(a.record, dir / "poison_record.json");
}

// Repeats with per-run seeds derived from the base seed; writes report.json
// and per-run artifacts when `out` is non-empty.
inline DefenseReport run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out = {},
                                  const std::function<void(const RunReport&)>& on_run = {}) {
  cfg.validate();
  DefenseReport rep{cfg, {}};
  AttributedGraph graph;
  try {
    graph = load_experiment_graph(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }
  for (int r = 0; r < cfg.repeats; ++r) {
    RunArtifacts artifacts;
    RunReport run = run_once(graph, cfg, run_seed(cfg, r),
                             out.empty() ? nullptr : &artifacts);
    if (!out.empty()) write_run_artifacts(artifacts, out / ("run_" + std::to_string(r)));
    if (on_run) on_run(run);
    rep.runs.push_back(std::move(run));
  }
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream(out / "report.json") << to_json(rep).dump(2) << '\n';
  }
  return rep;
}

}  // namespace praetorian

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

// Command-line driver. Staged commands exchange files through directories:
//
//   attack   --out D            D/{train,train_clean,test}/, poison_record.json, test_halves.json
//   score    --data D --out S   S/{autoencoder,classifier}.json, scores.csv
//   localize --data D --scores S/scores.csv --out L
//   defend   --data D --detection L/detection.json --out F
//   evaluate --data D --model F/defended.json [--detection ...] --out E
//   run      end-to-end with repeats, writes report.json
//   oracle   influence decomposition of one trigger insertion
//   generate synthetic citation graph directory
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "praetorian/harness.hpp"
#include "praetorian/theory.hpp"

namespace fs = std::filesystem;
using namespace praetorian;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  std::string out;
  std::optional<bool> fast;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_repeats = false) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "base seed (overrides the config)");
  if (with_repeats) cmd->add_option("--repeats", o.repeats, "number of seeded repeats");
  cmd->add_option("--out", o.out, "output directory")->required();
  cmd->add_flag("--fast,!--no-fast", o.fast, "restricted-subgraph external scoring");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.repeats) cfg.repeats = *o.repeats;
  if (o.fast) cfg.fast = *o.fast;
  cfg.validate();
  return cfg;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  fs::create_directories(path.parent_path());
  nn::detail::write_json(j, path);
}

nlohmann::json halves_json(const TestHalves& h) { return {{"clean", h.clean}, {"attack", h.attack}}; }

TestHalves halves_from_json(const nlohmann::json& j) {
  try {
    return {make_node_set(j.at("clean").get<std::vector<NodeId>>()),
            make_node_set(j.at("attack").get<std::vector<NodeId>>())};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("test_halves.json", 0, e.what());
  }
}

// Stage seed base shared by every staged command: run 0 of `run`.
std::uint64_t staged_seed(const ExperimentConfig& cfg) { return run_seed(cfg, 0); }

void cmd_attack(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve_config(o);
  const AttributedGraph graph = load_experiment_graph(cfg);
  const PreparedData data = prepare_data(graph, cfg, staged_seed(cfg));
  const fs::path out = o.out;
  save_graph(data.poisoned.graph, out / "train");
  save_graph(data.split.train.graph, out / "train_clean");
  save_graph(data.split.test.graph, out / "test");
  write_json(halves_json(data.halves), out / "test_halves.json");
  if (cfg.attack) save_poison_record(data.poisoned.record, out / "poison_record.json");
  std::cout << "train " << data.poisoned.graph.num_nodes() << " nodes, test " << data.split.test.graph.num_nodes()
            << " nodes, victims " << data.poisoned.record.victim_size() << '\n';
}

void cmd_score(const CommonOptions& o, const std::string& data_dir) {
  const ExperimentConfig cfg = resolve_config(o);
  const AttributedGraph g_t = load_graph(fs::path(data_dir) / "train");
  const std::uint64_t seed = staged_seed(cfg);
  const nn::Classifier clf =
      nn::train_classifier(g_t, g_t.train_nodes(), seeded(cfg.classifier, stage_seed(seed, StageSeed::kClassifier)));
  const nn::MaskedAutoencoder ae =
      nn::train_masked_autoencoder(g_t, seeded(cfg.autoencoder, stage_seed(seed, StageSeed::kAutoencoder)));
  const ScoreTable table = score_all(ae, clf, g_t, default_candidates(g_t), cfg.fast);
  const fs::path out = o.out;
  fs::create_directories(out);
  nn::save_checkpoint(clf, out / "classifier.json");
  nn::save_checkpoint(ae, out / "autoencoder.json");
  save_score_table(table, out / "scores.csv");
  std::cout << "scored " << table.size() << " candidates\n";
}

void cmd_localize(const CommonOptions& o, const std::string& data_dir, const std::string& scores) {
  const ExperimentConfig cfg = resolve_config(o);
  const AttributedGraph g_t = load_graph(fs::path(data_dir) / "train");
  ScoreTable table = load_score_table(scores);
  FusionWeights w;
  IdentifyTrace trace;
  const DetectionResult det = localize(table, g_t, cfg.localization, &w, &trace);
  const fs::path out = o.out;
  fs::create_directories(out);
  save_detection(det, out / "detection.json");
  save_score_table(table, out / "scores.csv");
  write_json({{"w_int", w.internal},
              {"w_ext", w.external},
              {"fallback", w.fallback},
              {"bimodality", trace.bimodality},
              {"gate_passed", trace.gate_passed},
              {"cutoff_k", trace.cutoff.k},
              {"cutoff_theta", trace.cutoff.theta},
              {"cutoff_region", trace.cutoff.region}},
             out / "localize.json");
  const fs::path record = fs::path(data_dir) / "poison_record.json";
  const NodeSet poisoned = fs::exists(record) ? load_poison_record(record).poisoned_nodes() : NodeSet{};
  write_json(score_histograms(table, poisoned), out / "histograms.json");
  std::cout << (det.abstained ? "abstained" : "detected " + std::to_string(det.num_victims()) + " victims, " +
                                                  std::to_string(det.num_triggers()) + " triggers")
            << '\n';
}

void cmd_defend(const CommonOptions& o, const std::string& data_dir, const std::string& detection,
                bool removal_only) {
  const ExperimentConfig cfg = resolve_config(o);
  const AttributedGraph g_t = load_graph(fs::path(data_dir) / "train");
  const DetectionResult det = load_detection(detection);
  const DefenseOutcome outcome = robust_train(
      g_t, det, seeded(cfg.classifier, stage_seed(staged_seed(cfg), StageSeed::kClassifier)), !removal_only);
  const fs::path out = o.out;
  fs::create_directories(out);
  nn::save_checkpoint(outcome.model, out / "defended.json");
  write_json(training_log_json(outcome), out / "training_log.json");
  std::cout << (det.abstained ? "standard training (detection abstained)" : "defended training") << '\n';
}

void cmd_evaluate(const CommonOptions& o, const std::string& data_dir, const std::string& model,
                  const std::string& detection) {
  const ExperimentConfig cfg = resolve_config(o);
  const fs::path data = data_dir;
  const AttributedGraph g_test = load_graph(data / "test");
  const TestHalves halves = halves_from_json(nn::detail::read_json(data / "test_halves.json"));
  const nn::Classifier clf = nn::load_classifier(model);
  nlohmann::json metrics = {{"ca", compute_ca(clf, g_test, halves.clean)}, {"asr", nullptr}};
  if (cfg.attack) {
    const AttributedGraph g_train = load_graph(data / "train_clean");
    const TestTriggering g_u = make_test_graph(g_test, halves, g_train, *cfg.attack, staged_seed(cfg));
    metrics["asr"] = detail::opt(compute_asr(clf, g_u.graph, g_u.record));
  }
  if (!detection.empty() && fs::exists(data / "poison_record.json")) {
    const DetectionMetrics m = detection_metrics(load_detection(detection), load_poison_record(data / "poison_record.json"));
    metrics["victim_precision"] = detail::opt(m.victims.precision);
    metrics["victim_recall"] = m.victims.recall;
    metrics["trigger_precision"] = detail::opt(m.triggers.precision);
    metrics["trigger_recall"] = m.triggers.recall;
  }
  write_json(metrics, fs::path(o.out) / "metrics.json");
  std::cout << metrics.dump(2) << '\n';
}

void cmd_run(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve_config(o);
  int k = 0;
  const DefenseReport rep = run_pipeline(cfg, o.out, [&](const RunReport& r) {
    std::cout << "run " << k++ << ": CA " << r.ca_before << " -> " << r.ca_after;
    if (r.asr_before) std::cout << ", ASR " << *r.asr_before << " -> " << r.asr_after.value_or(std::nan(""));
    std::cout << (r.abstained ? ", abstained" : "") << '\n';
  });
  std::cout << to_json(rep).at("summary").dump(2) << '\n';
}

struct OracleOptions {
  std::string graph;
  std::string model;
  std::optional<int> victim;
  int nodes = 30;
  double theta = 0.1;
};

// Decomposes the influence of one SBA trigger (one atom per trigger node) on
// a victim. Without --graph/--model a random instance is built from the seed.
void cmd_oracle(const CommonOptions& o, const OracleOptions& oo) {
  const ExperimentConfig cfg = resolve_config(o);
  const AttackSpec spec = cfg.attack.value_or(AttackSpec{});
  std::mt19937_64 rng(derive_seed(cfg.seed, 7));
  AttributedGraph g;
  std::optional<nn::Classifier> model;
  if (!oo.graph.empty()) {
    g = load_graph(oo.graph);
    if (oo.model.empty()) throw ConfigError("--graph requires --model");
    model = nn::load_classifier(oo.model);
  } else {
    if (oo.nodes < 2) throw ConfigError("--nodes must be >= 2");
    std::uniform_int_distribution<int> label(0, 2);
    std::bernoulli_distribution edge(4.0 / oo.nodes), bit(0.2);
    Matrix x(oo.nodes, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = bit(rng) ? 1.0 : 0.0;
    std::vector<Edge> edges;
    for (int a = 0; a < oo.nodes; ++a)
      for (int b = a + 1; b < oo.nodes; ++b)
        if (edge(rng)) edges.push_back({a, b});
    std::vector<int> labels(static_cast<std::size_t>(oo.nodes));
    for (auto& l : labels) l = label(rng);
    g = AttributedGraph(std::move(x), edges, std::move(labels),
                        std::vector<Split>(static_cast<std::size_t>(oo.nodes), Split::kTrain), 3);
    nn::ModelConfig mc = seeded(cfg.classifier, derive_seed(cfg.seed, 8));
    mc.epochs = std::min(mc.epochs, 100);
    model = nn::train_classifier(g, g.train_nodes(), mc);
  }
  const NodeId victim = oo.victim.value_or(0);
  g.check_node(victim);
  const TriggerSubgraph t =
      make_attack_trigger(spec, FeatureStats::of(g.features()), rng);
  std::vector<Atom> atoms;
  for (int k = 0; k < t.size(); ++k) {
    NodeInsertion ins;
    ins.features = t.features.row(k);
    const bool linked = spec.attach_mode == AttachMode::kAllEdges || k == 0;
    if (linked) ins.base_neighbors = {victim};
    for (const auto& [a, b] : t.edges) {
      if (a == k) ins.atom_neighbors.push_back(b);
      if (b == k) ins.atom_neighbors.push_back(a);
    }
    atoms.emplace_back(std::move(ins));
  }
  const Perturbation pert(g, victim, std::move(atoms));
  const DividendMap dm = harsanyi_decomposition(*model, pert);
  nlohmann::json j = to_json(dm);
  j["victim"] = victim;
  j["theta"] = oo.theta;
  j["dichotomy"] = to_string(dichotomy_check(dm, oo.theta));
  write_json(j, fs::path(o.out) / "oracle.json");
  std::cout << "|Delta(T)| " << dm.total.norm() << ", |EI| " << dm.ei.norm() << ", |IC| " << dm.ic.norm() << ", "
            << j["dichotomy"].get<std::string>() << '\n';
}

void cmd_generate(const CommonOptions& o, std::uint64_t graph_seed) {
  const ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  CitationGraphParams p = cfg.synthetic;
  p.seed = graph_seed;
  const AttributedGraph g = generate_citation_graph(p);
  save_graph(g, o.out);
  std::cout << g.num_nodes() << " nodes, " << g.num_edges() << " edges, " << g.feature_dim() << " features\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph backdoor localization and defense"};
  app.require_subcommand(1);

  CommonOptions attack_o, score_o, localize_o, defend_o, evaluate_o, run_o, oracle_o, generate_o;
  std::string data_dir, scores, detection, model;
  bool removal_only = false;
  OracleOptions oracle;
  std::uint64_t graph_seed = 0;

  auto* attack = app.add_subcommand("attack", "split and poison a graph");
  add_common(attack, attack_o);
  auto* score = app.add_subcommand("score", "train the models and score candidate nodes");
  add_common(score, score_o);
  score->add_option("--data", data_dir, "directory written by 'attack'")->required();
  auto* loc = app.add_subcommand("localize", "fuse scores and identify victims and triggers");
  add_common(loc, localize_o);
  loc->add_option("--data", data_dir, "directory written by 'attack'")->required();
  loc->add_option("--scores", scores, "scores.csv written by 'score'")->required();
  auto* defend = app.add_subcommand("defend", "train the defended classifier");
  add_common(defend, defend_o);
  defend->add_option("--data", data_dir, "directory written by 'attack'")->required();
  defend->add_option("--detection", detection, "detection.json written by 'localize'")->required();
  defend->add_flag("--removal-only", removal_only, "skip the unlearning term");
  auto* evaluate = app.add_subcommand("evaluate", "clean accuracy, attack success and detection quality");
  add_common(evaluate, evaluate_o);
  evaluate->add_option("--data", data_dir, "directory written by 'attack'")->required();
  evaluate->add_option("--model", model, "classifier checkpoint")->required();
  evaluate->add_option("--detection", detection, "detection.json for precision/recall");
  auto* run = app.add_subcommand("run", "end-to-end pipeline over seeded repeats");
  add_common(run, run_o, /*with_repeats=*/true);
  auto* orc = app.add_subcommand("oracle", "brute-force influence decomposition of a trigger");
  add_common(orc, oracle_o);
  orc->add_option("--graph", oracle.graph, "graph directory (default: random instance)");
  orc->add_option("--model", oracle.model, "classifier checkpoint for --graph");
  orc->add_option("--victim", oracle.victim, "victim node id");
  orc->add_option("--nodes", oracle.nodes, "random instance size");
  orc->add_option("--theta", oracle.theta, "dichotomy threshold");
  auto* gen = app.add_subcommand("generate", "write a synthetic citation graph");
  add_common(gen, generate_o);
  gen->add_option("--graph-seed", graph_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (attack->parsed()) cmd_attack(attack_o);
    if (score->parsed()) cmd_score(score_o, data_dir);
    if (loc->parsed()) cmd_localize(localize_o, data_dir, scores);
    if (defend->parsed()) cmd_defend(defend_o, data_dir, detection, removal_only);
    if (evaluate->parsed()) cmd_evaluate(evaluate_o, data_dir, model, detection);
    if (run->parsed()) cmd_run(run_o);
    if (orc->parsed()) cmd_oracle(oracle_o, oracle);
    if (gen->parsed()) cmd_generate(generate_o, graph_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}

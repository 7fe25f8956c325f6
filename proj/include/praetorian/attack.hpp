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

// Poisoning generators: random Erdos-Renyi triggers with host-like Gaussian
// features, plus the one-node clean-label, noise-disruption, asymmetric and
// multi-target variants. Every generator is a pure function of its inputs
// and seed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/graph.hpp"
#include "praetorian/graph_io.hpp"

namespace praetorian {

enum class AttackKind : std::uint8_t { kSba, kCleanLabelOneNode, kNoiseDisruption, kAsymmetric };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kSba: return "sba";
    case AttackKind::kCleanLabelOneNode: return "clean-label-one-node";
    case AttackKind::kNoiseDisruption: return "noise-disruption";
    default: return "asymmetric";
  }
}

inline AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "sba") return AttackKind::kSba;
  if (s == "clean-label-one-node") return AttackKind::kCleanLabelOneNode;
  if (s == "noise-disruption") return AttackKind::kNoiseDisruption;
  if (s == "asymmetric") return AttackKind::kAsymmetric;
  throw ConfigError("unknown attack kind '" + s + "'");
}

enum class VictimMode : std::uint8_t { kRandom, kCleanLabel };

struct AttackSpec {
  AttackKind kind = AttackKind::kSba;
  int trigger_size = 3;
  int victim_size = 10;               // per target group
  std::vector<int> target_labels{0};  // several entries: multi-target
  double er_p = 0.5;
  double noise_multiplier = 30.0;
  double removal_p = 0.0;
  double strength_q = 0.0;
  bool clean_label = false;           // forced for the one-node clean-label kind
  AttachMode attach_mode = AttachMode::kAllEdges;
  std::uint64_t seed = 0;

  VictimMode victim_mode() const {
    return clean_label || kind == AttackKind::kCleanLabelOneNode ? VictimMode::kCleanLabel
                                                                  : VictimMode::kRandom;
  }

  void validate(int num_classes = -1) const {
    if (trigger_size < 1) throw ConfigError("trigger size TS must be >= 1");
    if (victim_size < 1) throw ConfigError("victim size VS must be >= 1");
    if (!(er_p >= 0 && er_p <= 1)) throw ConfigError("ER probability must lie in [0, 1]");
    if (!(removal_p >= 0 && removal_p <= 1)) throw ConfigError("removal probability must lie in [0, 1]");
    if (!(strength_q >= 0)) throw ConfigError("strength exponent q must be >= 0");
    if (!(noise_multiplier > 0)) throw ConfigError("noise multiplier must be > 0");
    if (target_labels.empty()) throw ConfigError("at least one target label is required");
    if (kind == AttackKind::kCleanLabelOneNode && trigger_size != 1) {
      throw ConfigError("the one-node clean-label attack requires TS = 1");
    }
    std::vector<int> sorted = target_labels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("multi-target groups must use distinct target labels");
    }
    for (int y : target_labels) {
      if (y < 0 || (num_classes >= 0 && y >= num_classes)) {
        throw ConfigError("target label " + std::to_string(y) + " out of range");
      }
    }
  }
};

inline nlohmann::json to_json(const AttackSpec& s) {
  return {{"kind", to_string(s.kind)},         {"trigger_size", s.trigger_size},
          {"victim_size", s.victim_size},      {"target_labels", s.target_labels},
          {"er_p", s.er_p},                    {"noise_multiplier", s.noise_multiplier},
          {"removal_p", s.removal_p},          {"strength_q", s.strength_q},
          {"clean_label", s.clean_label},      {"attach_mode", to_string(s.attach_mode)},
          {"seed", s.seed}};
}

inline AttackSpec attack_spec_from_json(const nlohmann::json& j, AttackSpec s = {}) {
  try {
    if (j.contains("kind")) s.kind = attack_kind_from_string(j.at("kind"));
    if (j.contains("trigger_size")) s.trigger_size = j.at("trigger_size");
    if (j.contains("victim_size")) s.victim_size = j.at("victim_size");
    if (j.contains("target_label")) s.target_labels = {j.at("target_label").get<int>()};
    if (j.contains("target_labels")) s.target_labels = j.at("target_labels").get<std::vector<int>>();
    if (j.contains("er_p")) s.er_p = j.at("er_p");
    if (j.contains("noise_multiplier")) s.noise_multiplier = j.at("noise_multiplier");
    if (j.contains("removal_p")) s.removal_p = j.at("removal_p");
    if (j.contains("strength_q")) s.strength_q = j.at("strength_q");
    if (j.contains("clean_label")) s.clean_label = j.at("clean_label");
    if (j.contains("attach_mode")) s.attach_mode = attach_mode_from_string(j.at("attach_mode"));
    if (j.contains("seed")) s.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("attack spec: ") + e.what());
  }
  return s;
}

// Per-dimension statistics of the host features.
struct FeatureStats {
  RowVector mean, stddev, min, max;
  bool bounded = false;  // every entry lies in [0, 1]

  static FeatureStats of(const Matrix& x) {
    if (x.rows() == 0) throw InvalidArgument("feature statistics of an empty matrix");
    FeatureStats s;
    s.mean = x.colwise().mean();
    s.stddev = ((x.rowwise() - s.mean).array().square().colwise().sum() /
                static_cast<double>(x.rows()))
                   .sqrt()
                   .matrix();
    s.min = x.colwise().minCoeff();
    s.max = x.colwise().maxCoeff();
    s.bounded = x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0;
    return s;
  }
};

// ER(ts, er_p) structure with per-dimension Gaussian features; clipped to the
// host range when the host features are bounded.
inline TriggerSubgraph generate_sba_trigger(int ts, const FeatureStats& stats, double er_p,
                                            std::mt19937_64& rng) {
  if (ts < 1) throw InvalidArgument("trigger size must be >= 1");
  TriggerSubgraph t;
  std::bernoulli_distribution edge(er_p);
  for (int a = 0; a < ts; ++a) {
    for (int b = a + 1; b < ts; ++b) {
      if (edge(rng)) t.edges.emplace_back(a, b);
    }
  }
  const auto d = stats.mean.size();
  std::normal_distribution<double> gauss;
  t.features.resize(ts, d);
  for (int i = 0; i < ts; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double v = stats.mean(j) + stats.stddev(j) * gauss(rng);
      if (stats.bounded) v = std::clamp(v, stats.min(j), stats.max(j));
      t.features(i, j) = v;
    }
  }
  return t;
}

// Adds N(0, (multiplier * host std)^2) per dimension to every trigger row.
inline TriggerSubgraph apply_noise_disruption(TriggerSubgraph t, double multiplier,
                                              const RowVector& host_std, std::mt19937_64& rng) {
  if (!(multiplier > 0)) throw InvalidArgument("noise multiplier must be > 0");
  if (host_std.size() != t.features.cols()) throw InvalidArgument("host std dimension mismatch");
  std::normal_distribution<double> gauss;
  for (Eigen::Index i = 0; i < t.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.features.cols(); ++j) {
      t.features(i, j) += multiplier * host_std(j) * gauss(rng);
    }
  }
  return t;
}

// Drops each node (with its edges) with probability p and scales each
// surviving row by U^q. May return an empty trigger.
inline TriggerSubgraph apply_asymmetric_weakening(const TriggerSubgraph& t, double p, double q,
                                                  std::mt19937_64& rng) {
  if (!(p >= 0 && p <= 1)) throw InvalidArgument("removal probability must lie in [0, 1]");
  if (!(q >= 0)) throw InvalidArgument("strength exponent must be >= 0");
  std::bernoulli_distribution remove(p);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> new_index(static_cast<std::size_t>(t.size()), -1);
  std::vector<double> alpha;
  int kept = 0;
  for (int i = 0; i < t.size(); ++i) {
    const bool drop = remove(rng);
    const double a = std::pow(unit(rng), q);
    if (drop) continue;
    new_index[i] = kept++;
    alpha.push_back(a);
  }
  TriggerSubgraph out;
  out.features.resize(kept, t.features.cols());
  for (int i = 0; i < t.size(); ++i) {
    if (new_index[i] >= 0) out.features.row(new_index[i]) = alpha[new_index[i]] * t.features.row(i);
  }
  for (auto [a, b] : t.edges) {
    if (new_index[a] >= 0 && new_index[b] >= 0) out.edges.emplace_back(new_index[a], new_index[b]);
  }
  return out;
}

// `vs` distinct training nodes drawn from `eligible` minus `exclude`;
// clean-label mode keeps only nodes labeled `target`.
inline NodeSet select_victims(const AttributedGraph& g, int vs, VictimMode mode, int target,
                              std::mt19937_64& rng, const NodeSet& exclude = {}) {
  std::vector<NodeId> pool;
  for (NodeId v : g.train_nodes()) {
    if (contains(exclude, v)) continue;
    if (mode == VictimMode::kCleanLabel && g.label(v) != target) continue;
    pool.push_back(v);
  }
  if (vs < 0 || static_cast<std::size_t>(vs) > pool.size()) {
    throw InvalidArgument("select_victims: only " + std::to_string(pool.size()) +
                          " eligible nodes for VS = " + std::to_string(vs));
  }
  for (int i = 0; i < vs; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(static_cast<std::size_t>(vs));
  return make_node_set(std::move(pool));
}

// One trigger as the attack would place it at test time (full strength).
inline TriggerSubgraph make_attack_trigger(const AttackSpec& spec, const FeatureStats& stats,
                                           std::mt19937_64& rng) {
  TriggerSubgraph t = generate_sba_trigger(spec.trigger_size, stats, spec.er_p, rng);
  if (spec.kind == AttackKind::kNoiseDisruption) {
    t = apply_noise_disruption(std::move(t), spec.noise_multiplier, stats.stddev, rng);
  }
  return t;
}

struct PoisonResult {
  AttributedGraph graph;
  PoisonRecord record;
};

// Attaches a fresh trigger to every victim and relabels victims to their
// group's target (clean-label victims already carry it).
inline PoisonResult poison_graph(const AttributedGraph& g, const AttackSpec& spec) {
  spec.validate(g.num_classes());
  std::mt19937_64 rng(spec.seed);
  const FeatureStats stats = FeatureStats::of(g.features());
  PoisonRecord record;
  record.attach_mode = spec.attach_mode;
  std::vector<TriggerPlacement> placements;
  std::vector<int> labels = g.labels();
  NodeSet taken;
  for (std::size_t grp = 0; grp < spec.target_labels.size(); ++grp) {
    const int y = spec.target_labels[grp];
    const NodeSet victims = select_victims(g, spec.victim_size, spec.victim_mode(), y, rng, taken);
    taken = set_union(taken, victims);
    record.target_labels[static_cast<int>(grp)] = y;
    for (NodeId v : victims) {
      record.victim_group[v] = static_cast<int>(grp);
      labels[v] = y;
      TriggerSubgraph t = make_attack_trigger(spec, stats, rng);
      if (spec.kind == AttackKind::kAsymmetric) {
        t = apply_asymmetric_weakening(t, spec.removal_p, spec.strength_q, rng);
      }
      placements.push_back({v, std::move(t)});
    }
  }
  record.victims = taken;

  std::vector<TriggerPlacement> nonempty;
  std::vector<NodeId> owners;
  for (auto& p : placements) {
    if (p.trigger.size() == 0) {
      record.triggers[p.victim] = {};
      continue;
    }
    owners.push_back(p.victim);
    nonempty.push_back(std::move(p));
  }
  AttachResult attached = attach_triggers(g.with_labels(std::move(labels)), nonempty, spec.attach_mode);
  for (std::size_t k = 0; k < owners.size(); ++k) record.triggers[owners[k]] = attached.trigger_nodes[k];
  record.validate(&attached.graph);
  return {std::move(attached.graph), std::move(record)};
}

// Test-time attack: full-strength triggers on `victims`, grouped by target.
struct TestTriggering {
  AttributedGraph graph;
  PoisonRecord record;
};

inline TestTriggering trigger_test_nodes(const AttributedGraph& g, const AttackSpec& spec,
                                         const FeatureStats& stats,
                                         const std::vector<NodeSet>& victims_per_group,
                                         std::uint64_t seed) {
  if (victims_per_group.size() != spec.target_labels.size()) {
    throw InvalidArgument("one victim set per target group required");
  }
  std::mt19937_64 rng(seed);
  PoisonRecord record;
  record.attach_mode = spec.attach_mode;
  std::vector<TriggerPlacement> placements;
  for (std::size_t grp = 0; grp < victims_per_group.size(); ++grp) {
    record.target_labels[static_cast<int>(grp)] = spec.target_labels[grp];
    for (NodeId v : victims_per_group[grp]) {
      record.victim_group[v] = static_cast<int>(grp);
      record.victims.push_back(v);
      placements.push_back({v, make_attack_trigger(spec, stats, rng)});
    }
  }
  record.victims = make_node_set(std::move(record.victims));
  AttachResult attached = attach_triggers(g, placements, spec.attach_mode);
  for (std::size_t k = 0; k < placements.size(); ++k) {
    record.triggers[placements[k].victim] = attached.trigger_nodes[k];
  }
  return {std::move(attached.graph), std::move(record)};
}

}  // namespace praetorian

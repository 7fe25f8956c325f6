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

// Score-to-node conversion: propagate deviation scores onto training nodes,
// gate on bimodality, cut at the widest gap of the top region, group the
// seeds by observed label and recover each group's trigger nodes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/graph.hpp"
#include "praetorian/scoring.hpp"

namespace praetorian {

struct LocalizationParams {
  int r = 3;                      // emphasis exponent, L0 = s^r
  int hops = 2;                   // propagation steps P (classifier depth)
  double top_fraction = 0.1;      // cutoff search region
  int min_support = 5;            // tau
  int stop_run = 2;               // S
  // Above the uniform-distribution value 5/9: cubed scores are skewed and
  // heavy-tailed even on clean graphs, which inflates the coefficient.
  double bimodality_threshold = 0.8;

  void validate() const {
    if (r < 3) throw ConfigError("emphasis exponent r must be >= 3");
    if (hops < 1) throw ConfigError("hop count P must be >= 1");
    if (!(top_fraction > 0 && top_fraction <= 1)) throw ConfigError("top fraction must lie in (0, 1]");
    if (min_support < 1) throw ConfigError("support threshold tau must be >= 1");
    if (stop_run < 1) throw ConfigError("stop run-length S must be >= 1");
  }
};

struct VictimGroup {
  int label = kNoLabel;
  NodeSet victims;
  NodeSet triggers;
};

struct DetectionResult {
  bool abstained = true;
  std::vector<VictimGroup> groups;

  NodeSet all_victims() const {
    NodeSet out;
    for (const auto& g : groups) out = set_union(out, g.victims);
    return out;
  }
  NodeSet all_triggers() const {
    NodeSet out;
    for (const auto& g : groups) out = set_union(out, g.triggers);
    return out;
  }
  std::vector<int> target_labels() const {
    std::vector<int> out;
    for (const auto& g : groups) out.push_back(g.label);
    return out;
  }
  std::size_t num_victims() const { return all_victims().size(); }
  std::size_t num_triggers() const { return all_triggers().size(); }

  static DetectionResult abstain() { return {}; }
};

inline nlohmann::json to_json(const DetectionResult& d) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : d.groups) {
    groups.push_back({{"label", g.label}, {"victims", g.victims}, {"triggers", g.triggers}});
  }
  return {{"abstained", d.abstained}, {"groups", groups}};
}

inline DetectionResult detection_from_json(const nlohmann::json& j) {
  try {
    DetectionResult d;
    d.abstained = j.at("abstained").get<bool>();
    for (const auto& g : j.at("groups")) {
      d.groups.push_back({g.at("label").get<int>(),
                          make_node_set(g.at("victims").get<std::vector<NodeId>>()),
                          make_node_set(g.at("triggers").get<std::vector<NodeId>>())});
    }
    if (d.abstained && !d.groups.empty()) throw FormatError("detection", 0, "abstained result carries groups");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("detection", 0, e.what());
  }
}

inline void save_detection(const DetectionResult& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(d).dump(2) << '\n';
}

inline DetectionResult load_detection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), 0, "missing or unreadable file");
  try {
    return detection_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string(), 0, e.what());
  }
}

struct Propagation {
  std::vector<double> full;   // L^P over every node
  NodeSet train;              // training nodes, ascending id
  std::vector<double> train_scores;  // L^P restricted to `train`
};

// L0 = s^r, then P applications of the train-edge-free normalized operator.
inline Propagation propagate_scores(std::span<const double> scores, const AttributedGraph& g,
                                    const NodeSet& train_set, const LocalizationParams& params) {
  if (static_cast<int>(scores.size()) != g.num_nodes()) {
    throw InvalidArgument("propagate_scores: one score per node required");
  }
  const PropagationOperator op(g, train_set);
  std::vector<double> l(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) l[i] = std::pow(scores[i], params.r);
  for (int p = 0; p < params.hops; ++p) l = op.apply(l);
  Propagation out;
  out.train = train_set;
  out.train_scores.reserve(train_set.size());
  for (NodeId v : train_set) out.train_scores.push_back(l[v]);
  out.full = std::move(l);
  return out;
}

// Sample skewness g1 and excess kurtosis g2 (population moments).
struct Moments {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

inline Moments sample_moments(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 <= 0.0) return {0.0, 0.0};
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

// (g1^2 + 1) / (g2 + 3(n-1)^2 / ((n-2)(n-3))); 0 for constant samples.
inline double bimodality_coefficient(std::span<const double> x) {
  if (x.size() < 4) return 0.0;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) return 0.0;
  const Moments m = sample_moments(x);
  const double n = static_cast<double>(x.size());
  return (m.skewness * m.skewness + 1.0) /
         (m.excess_kurtosis + 3.0 * (n - 1) * (n - 1) / ((n - 2) * (n - 3)));
}

// True when the sample looks bimodal; false (abstain) below 4 samples.
inline bool bimodality_gate(std::span<const double> x,
                            double threshold = LocalizationParams{}.bimodality_threshold) {
  if (x.size() < 4) return false;
  return bimodality_coefficient(x) > threshold;
}

struct Cutoff {
  std::size_t k = 0;   // 1-based count of nodes above the gap
  double theta = 0.0;
  std::size_t region = 0;  // K
};

// Largest adjacent gap within the top ceil(fraction * m) of descending
// `sorted`; ties resolve to the smallest k.
inline Cutoff valley_cutoff(std::span<const double> sorted, double top_fraction) {
  const std::size_t m = sorted.size();
  const auto big_k = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(m)));
  if (big_k < 2 || big_k > m) throw InvalidArgument("valley_cutoff: fewer than 2 nodes in the search region");
  Cutoff c;
  c.region = big_k;
  double best = -1.0;
  for (std::size_t k = 1; k < big_k; ++k) {
    const double gap = sorted[k - 1] - sorted[k];
    if (gap < 0) throw InvalidArgument("valley_cutoff: scores are not sorted descending");
    if (gap > best) {
      best = gap;
      c.k = k;
    }
  }
  c.theta = 0.5 * (sorted[c.k - 1] + sorted[c.k]);
  return c;
}

// Training nodes ordered by descending propagated score (ties by id).
struct RankedNodes {
  std::vector<NodeId> nodes;
  std::vector<double> scores;
};

inline RankedNodes rank_descending(const NodeSet& nodes, std::span<const double> scores) {
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RankedNodes r;
  for (std::size_t k : order) {
    r.nodes.push_back(nodes[k]);
    r.scores.push_back(scores[k]);
  }
  return r;
}

// Groups the seed set by label, applies the support filter and the
// single-target run-length scan. An empty result means abstain.
inline std::vector<VictimGroup> form_victim_groups(const NodeSet& seeds, std::span<const NodeId> ranked,
                                                   std::span<const int> labels,
                                                   const LocalizationParams& params) {
  std::map<int, NodeSet> by_label;
  for (NodeId v : seeds) {
    if (labels[v] != kNoLabel) by_label[labels[v]].push_back(v);
  }
  std::vector<VictimGroup> groups;
  for (auto& [label, members] : by_label) {
    if (static_cast<int>(members.size()) >= params.min_support) {
      groups.push_back({label, make_node_set(std::move(members)), {}});
    }
  }
  if (groups.size() != 1) return groups;

  const int target = groups[0].label;
  std::vector<NodeId> victims;
  int run = 0;
  for (NodeId v : ranked) {
    if (labels[v] == target) {
      run = 0;
      victims.push_back(v);
    } else if (++run >= params.stop_run) {
      break;
    }
  }
  groups[0].victims = make_node_set(std::move(victims));
  return groups;
}

// Relative slack for comparing propagated scores. A trigger node can tie its
// victim exactly (same neighborhood shape), and summation order must not
// decide which side of the tie it lands on.
inline constexpr double kScoreTieTolerance = 1e-12;

// Per group: P-hop neighborhood in g minus every identified victim, kept when
// its propagated score reaches the group's smallest victim score.
inline void recover_triggers(std::vector<VictimGroup>& groups, const AttributedGraph& g,
                             std::span<const double> propagated, int hops) {
  NodeSet all_victims;
  for (const auto& grp : groups) all_victims = set_union(all_victims, grp.victims);
  for (auto& grp : groups) {
    grp.triggers.clear();
    if (grp.victims.empty()) continue;
    double floor = propagated[grp.victims.front()];
    for (NodeId v : grp.victims) floor = std::min(floor, propagated[v]);
    floor -= kScoreTieTolerance * std::abs(floor);
    for (NodeId u : set_difference(k_hop_neighborhood(g, grp.victims, hops), all_victims)) {
      if (propagated[u] >= floor) grp.triggers.push_back(u);
    }
  }
}

struct IdentifyTrace {
  Propagation propagation;
  double bimodality = 0.0;
  bool gate_passed = false;
  Cutoff cutoff;
  NodeSet seeds;
};

// propagate -> gate -> cutoff -> group -> recover, on one per-node score
// vector (length = number of nodes; unscored nodes carry 0).
inline DetectionResult identify(std::span<const double> scores, const AttributedGraph& g,
                                const LocalizationParams& params, IdentifyTrace* trace = nullptr) {
  params.validate();
  const NodeSet train = g.train_nodes();
  Propagation prop = propagate_scores(scores, g, train, params);
  const double bc = bimodality_coefficient(prop.train_scores);
  const bool gate = prop.train_scores.size() >= 4 && bc > params.bimodality_threshold;
  DetectionResult out;
  auto finish = [&](DetectionResult d) {
    if (trace) {
      trace->propagation = std::move(prop);
      trace->bimodality = bc;
      trace->gate_passed = gate;
    }
    return d;
  };
  if (!gate) return finish(DetectionResult::abstain());

  const RankedNodes ranked = rank_descending(prop.train, prop.train_scores);
  const auto region = static_cast<std::size_t>(
      std::ceil(params.top_fraction * static_cast<double>(ranked.nodes.size())));
  if (region < 2) return finish(DetectionResult::abstain());
  const Cutoff cut = valley_cutoff(ranked.scores, params.top_fraction);
  NodeSet seeds;
  for (std::size_t k = 0; k < ranked.nodes.size() && ranked.scores[k] >= cut.theta; ++k) {
    seeds.push_back(ranked.nodes[k]);
  }
  seeds = make_node_set(std::move(seeds));
  if (trace) {
    trace->cutoff = cut;
    trace->seeds = seeds;
  }

  std::vector<VictimGroup> groups = form_victim_groups(seeds, ranked.nodes, g.labels(), params);
  if (groups.empty()) return finish(DetectionResult::abstain());
  recover_triggers(groups, g, prop.full, params.hops);
  out.abstained = false;
  out.groups = std::move(groups);
  return finish(std::move(out));
}

struct FusionWeights {
  double internal = 0.0;
  double external = 0.0;
  bool fallback = false;
};

// Single-view runs on each column; weights N_v * N_t, equal if both vanish.
inline FusionWeights fusion_weights(const ScoreTable& table, const AttributedGraph& g,
                                    const LocalizationParams& params) {
  const int n = g.num_nodes();
  const DetectionResult di = identify(table.dense(table.s_int, n), g, params);
  const DetectionResult de = identify(table.dense(table.s_ext, n), g, params);
  FusionWeights w;
  w.internal = static_cast<double>(di.num_victims()) * static_cast<double>(di.num_triggers());
  w.external = static_cast<double>(de.num_victims()) * static_cast<double>(de.num_triggers());
  if (w.internal == 0.0 && w.external == 0.0) {
    w.internal = w.external = 1.0;
    w.fallback = true;
  }
  return w;
}

// Fills table.s_fused and returns the weights used.
inline FusionWeights fuse_scores(ScoreTable& table, const AttributedGraph& g,
                                 const LocalizationParams& params) {
  const FusionWeights w = fusion_weights(table, g, params);
  table.s_fused.resize(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    table.s_fused[k] = w.internal * table.s_int[k] + w.external * table.s_ext[k];
  }
  return w;
}

// Fuses, identifies on the fused column and fills table.s_prop.
inline DetectionResult localize(ScoreTable& table, const AttributedGraph& g,
                                const LocalizationParams& params, FusionWeights* weights = nullptr,
                                IdentifyTrace* trace_out = nullptr) {
  table.validate();
  const FusionWeights w = fuse_scores(table, g, params);
  if (weights) *weights = w;
  IdentifyTrace trace;
  DetectionResult d = identify(table.dense(table.s_fused, g.num_nodes()), g, params, &trace);
  table.s_prop.resize(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) {
    table.s_prop[k] = trace.propagation.full[table.nodes[k]];
  }
  if (trace_out) *trace_out = std::move(trace);
  return d;
}

}  // namespace praetorian

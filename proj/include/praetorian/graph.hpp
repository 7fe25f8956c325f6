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

// Attributed graph data model and the structural operators the defense is
// built from: trigger attachment, k-hop neighborhoods, feature masking and
// the symmetric-normalized propagation operator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "praetorian/error.hpp"

namespace praetorian {

using NodeId = int;
using NodeSet = std::vector<NodeId>;  // sorted, unique
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr int kNoLabel = -1;

enum class Split : std::uint8_t { kTrain, kTest, kNone };

// Unordered edge; canonical form has first < second.
struct Edge {
  NodeId first = 0;
  NodeId second = 0;

  static Edge canonical(NodeId a, NodeId b) {
    return a < b ? Edge{a, b} : Edge{b, a};
  }
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline NodeSet make_node_set(std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline bool contains(const NodeSet& set, NodeId v) {
  return std::binary_search(set.begin(), set.end(), v);
}

inline NodeSet set_union(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline NodeSet set_intersection(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Undirected simple graph with dense node features, optional labels and a
// per-node split tag. Immutable: every operation returns a new value. The
// feature matrix is shared between copies.
class AttributedGraph {
 public:
  AttributedGraph() : features_(std::make_shared<const Matrix>()) { offsets_.push_back(0); }

  AttributedGraph(Matrix features, std::span<const Edge> edges, std::vector<int> labels,
                  std::vector<Split> splits, int num_classes)
      : AttributedGraph(std::make_shared<const Matrix>(std::move(features)), edges,
                        std::move(labels), std::move(splits), num_classes) {}

  AttributedGraph(std::shared_ptr<const Matrix> features, std::span<const Edge> edges,
                  std::vector<int> labels, std::vector<Split> splits, int num_classes)
      : features_(std::move(features)),
        labels_(std::move(labels)),
        splits_(std::move(splits)),
        num_classes_(num_classes) {
    const auto n = static_cast<std::size_t>(features_->rows());
    if (labels_.empty()) labels_.assign(n, kNoLabel);
    if (splits_.empty()) splits_.assign(n, Split::kNone);
    if (labels_.size() != n || splits_.size() != n) {
      throw InvalidArgument("label/split vectors must have one entry per node");
    }
    if (num_classes_ < 0) throw InvalidArgument("num_classes must be non-negative");
    for (std::size_t v = 0; v < n; ++v) {
      if (labels_[v] != kNoLabel && (labels_[v] < 0 || labels_[v] >= num_classes_)) {
        throw InvalidArgument("label " + std::to_string(labels_[v]) + " of node " +
                              std::to_string(v) + " outside [0, " +
                              std::to_string(num_classes_) + ")");
      }
    }
    build_csr(edges);
  }

  int num_nodes() const { return static_cast<int>(features_->rows()); }
  int feature_dim() const { return static_cast<int>(features_->cols()); }
  int num_classes() const { return num_classes_; }
  std::size_t num_edges() const { return targets_.size() / 2; }

  const Matrix& features() const { return *features_; }
  const std::shared_ptr<const Matrix>& shared_features() const { return features_; }
  auto feature_row(NodeId v) const { return features_->row(v); }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  int degree(NodeId v) const { return static_cast<int>(offsets_[v + 1] - offsets_[v]); }

  bool has_edge(NodeId a, NodeId b) const {
    auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
  }

  bool contains_node(NodeId v) const { return v >= 0 && v < num_nodes(); }

  int label(NodeId v) const { return labels_[v]; }
  bool has_label(NodeId v) const { return labels_[v] != kNoLabel; }
  const std::vector<int>& labels() const { return labels_; }
  Split split(NodeId v) const { return splits_[v]; }
  const std::vector<Split>& splits() const { return splits_; }

  // Nodes tagged train that carry a label: the supervised training pool.
  NodeSet train_nodes() const {
    NodeSet out;
    for (NodeId v = 0; v < num_nodes(); ++v) {
      if (splits_[v] == Split::kTrain && labels_[v] != kNoLabel) out.push_back(v);
    }
    return out;
  }

  NodeSet all_nodes() const {
    NodeSet out(static_cast<std::size_t>(num_nodes()));
    std::iota(out.begin(), out.end(), 0);
    return out;
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (NodeId v = 0; v < num_nodes(); ++v) {
      for (NodeId u : neighbors(v)) {
        if (v < u) out.push_back({v, u});
      }
    }
    return out;
  }

  AttributedGraph with_labels(std::vector<int> labels) const {
    return AttributedGraph(features_, edges(), std::move(labels), splits_, num_classes_);
  }
  AttributedGraph with_splits(std::vector<Split> splits) const {
    return AttributedGraph(features_, edges(), labels_, std::move(splits), num_classes_);
  }
  AttributedGraph with_features(Matrix features) const {
    if (features.rows() != num_nodes()) {
      throw InvalidArgument("replacement feature matrix has wrong row count");
    }
    return AttributedGraph(std::move(features), edges(), labels_, splits_, num_classes_);
  }

  void check_node(NodeId v) const {
    if (!contains_node(v)) throw InvalidArgument("unknown node id " + std::to_string(v));
  }

 private:
  void build_csr(std::span<const Edge> edges) {
    const int n = num_nodes();
    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(n));
    for (const Edge& e : edges) {
      if (e.first < 0 || e.first >= n || e.second < 0 || e.second >= n) {
        throw InvalidArgument("edge (" + std::to_string(e.first) + ", " +
                              std::to_string(e.second) + ") references an unknown node");
      }
      if (e.first == e.second) {
        throw InvalidArgument("self-loop on node " + std::to_string(e.first));
      }
      adj[e.first].push_back(e.second);
      adj[e.second].push_back(e.first);
    }
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int v = 0; v < n; ++v) {
      auto& nb = adj[v];
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      offsets_[v + 1] = offsets_[v] + static_cast<std::int64_t>(nb.size());
    }
    targets_.reserve(static_cast<std::size_t>(offsets_.back()));
    for (auto& nb : adj) targets_.insert(targets_.end(), nb.begin(), nb.end());
  }

  std::shared_ptr<const Matrix> features_;
  std::vector<std::int64_t> offsets_;
  std::vector<NodeId> targets_;
  std::vector<int> labels_;
  std::vector<Split> splits_;
  int num_classes_ = 0;
};

enum class AttachMode : std::uint8_t { kSingleEdge, kAllEdges };

inline std::string to_string(AttachMode mode) {
  return mode == AttachMode::kSingleEdge ? "single-edge" : "all-edges";
}

inline AttachMode attach_mode_from_string(const std::string& s) {
  if (s == "single-edge") return AttachMode::kSingleEdge;
  if (s == "all-edges") return AttachMode::kAllEdges;
  throw ConfigError("unknown attach mode '" + s + "'");
}

// A trigger pattern expressed over local indices 0..size()-1.
struct TriggerSubgraph {
  Matrix features;                      // size() x d
  std::vector<std::pair<int, int>> edges;  // internal, local indices

  int size() const { return static_cast<int>(features.rows()); }

  void validate(int feature_dim) const {
    if (size() < 1) throw InvalidArgument("trigger must have at least one node");
    if (features.cols() != feature_dim) {
      throw InvalidArgument("trigger feature dimension " + std::to_string(features.cols()) +
                            " does not match host dimension " + std::to_string(feature_dim));
    }
    for (auto [a, b] : edges) {
      if (a < 0 || b < 0 || a >= size() || b >= size() || a == b) {
        throw InvalidArgument("trigger edge references an invalid local index");
      }
    }
  }
};

struct TriggerPlacement {
  NodeId victim = 0;
  TriggerSubgraph trigger;
};

struct AttachResult {
  AttributedGraph graph;
  std::vector<NodeSet> trigger_nodes;  // one entry per placement, new ids
};

// Attaches every trigger to its victim in one pass. Appended nodes take the
// next free ids in placement order, carry no label and split kNone. In
// single-edge mode the victim connects to local node 0 only.
inline AttachResult attach_triggers(const AttributedGraph& g,
                                    std::span<const TriggerPlacement> placements,
                                    AttachMode mode) {
  const int n = g.num_nodes();
  const int d = g.feature_dim();
  int added = 0;
  for (const auto& p : placements) {
    g.check_node(p.victim);
    p.trigger.validate(d);
    added += p.trigger.size();
  }
  Matrix features(n + added, d);
  features.topRows(n) = g.features();
  std::vector<Edge> edges = g.edges();
  std::vector<int> labels = g.labels();
  std::vector<Split> splits = g.splits();
  labels.resize(static_cast<std::size_t>(n + added), kNoLabel);
  splits.resize(static_cast<std::size_t>(n + added), Split::kNone);

  AttachResult result;
  NodeId next = n;
  for (const auto& p : placements) {
    const auto& t = p.trigger;
    NodeSet ids(static_cast<std::size_t>(t.size()));
    std::iota(ids.begin(), ids.end(), next);
    features.middleRows(next, t.size()) = t.features;
    for (auto [a, b] : t.edges) edges.push_back(Edge::canonical(next + a, next + b));
    if (mode == AttachMode::kSingleEdge) {
      edges.push_back(Edge::canonical(p.victim, next));
    } else {
      for (NodeId id : ids) edges.push_back(Edge::canonical(p.victim, id));
    }
    next += t.size();
    result.trigger_nodes.push_back(std::move(ids));
  }
  result.graph = AttributedGraph(std::move(features), edges, std::move(labels),
                                 std::move(splits), g.num_classes());
  return result;
}

inline AttachResult attach_trigger(const AttributedGraph& g, NodeId victim,
                                   const TriggerSubgraph& t,
                                   AttachMode mode = AttachMode::kAllEdges) {
  TriggerPlacement p{victim, t};
  return attach_triggers(g, std::span<const TriggerPlacement>(&p, 1), mode);
}

// All nodes within `hops` edges of any seed, seeds included.
inline NodeSet k_hop_neighborhood(const AttributedGraph& g, const NodeSet& seeds, int hops) {
  if (hops < 0) throw InvalidArgument("hop count must be non-negative");
  std::vector<char> seen(static_cast<std::size_t>(g.num_nodes()), 0);
  std::vector<NodeId> frontier;
  for (NodeId s : seeds) {
    g.check_node(s);
    if (!seen[s]) {
      seen[s] = 1;
      frontier.push_back(s);
    }
  }
  NodeSet out = frontier;
  for (int h = 0; h < hops && !frontier.empty(); ++h) {
    std::vector<NodeId> next;
    for (NodeId v : frontier) {
      for (NodeId u : g.neighbors(v)) {
        if (!seen[u]) {
          seen[u] = 1;
          next.push_back(u);
          out.push_back(u);
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Replaces the feature rows of `to_mask` with `token`; structure unchanged.
inline AttributedGraph mask_nodes(const AttributedGraph& g, const NodeSet& to_mask,
                                  const RowVector& token) {
  if (token.size() != g.feature_dim()) {
    throw InvalidArgument("mask token dimension " + std::to_string(token.size()) +
                          " != feature dimension " + std::to_string(g.feature_dim()));
  }
  if (to_mask.empty()) return g;
  Matrix features = g.features();
  for (NodeId v : to_mask) {
    g.check_node(v);
    features.row(v) = token;
  }
  return g.with_features(std::move(features));
}

// Node-induced subgraph over `keep` (sorted). Returns the graph and, for each
// new id, the original id.
struct Subgraph {
  AttributedGraph graph;
  std::vector<NodeId> original_ids;
};

inline Subgraph induced_subgraph(const AttributedGraph& g, const NodeSet& keep) {
  std::vector<NodeId> remap(static_cast<std::size_t>(g.num_nodes()), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    g.check_node(keep[i]);
    remap[keep[i]] = static_cast<NodeId>(i);
  }
  Matrix features(static_cast<Eigen::Index>(keep.size()), g.feature_dim());
  std::vector<int> labels;
  std::vector<Split> splits;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const NodeId v = keep[i];
    features.row(static_cast<Eigen::Index>(i)) = g.feature_row(v);
    labels.push_back(g.label(v));
    splits.push_back(g.split(v));
    for (NodeId u : g.neighbors(v)) {
      if (v < u && remap[u] >= 0) edges.push_back({remap[v], remap[u]});
    }
  }
  return {AttributedGraph(std::move(features), edges, std::move(labels), std::move(splits),
                          g.num_classes()),
          keep};
}

inline Subgraph remove_nodes(const AttributedGraph& g, const NodeSet& drop) {
  return induced_subgraph(g, set_difference(g.all_nodes(), drop));
}

// Sparse symmetric operator D'^{-1/2} A' D'^{-1/2} with A' = A - A_train + I:
// edges whose endpoints are both in the train set are dropped and every node
// gets a self-loop.
class PropagationOperator {
 public:
  PropagationOperator(const AttributedGraph& g, const NodeSet& train_set) {
    const int n = g.num_nodes();
    std::vector<char> is_train(static_cast<std::size_t>(n), 0);
    for (NodeId v : train_set) {
      g.check_node(v);
      is_train[v] = 1;
    }
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    std::vector<double> degree(static_cast<std::size_t>(n), 1.0);
    for (NodeId v = 0; v < n; ++v) {
      cols_.push_back(v);
      for (NodeId u : g.neighbors(v)) {
        if (is_train[v] && is_train[u]) continue;
        cols_.push_back(u);
        degree[v] += 1.0;
      }
      offsets_[v + 1] = static_cast<std::int64_t>(cols_.size());
    }
    values_.resize(cols_.size());
    for (NodeId v = 0; v < n; ++v) {
      for (auto k = offsets_[v]; k < offsets_[v + 1]; ++k) {
        values_[k] = 1.0 / std::sqrt(degree[v] * degree[cols_[k]]);
      }
    }
  }

  int size() const { return static_cast<int>(offsets_.size()) - 1; }

  std::vector<double> apply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != size()) {
      throw InvalidArgument("score vector length does not match operator size");
    }
    std::vector<double> y(x.size(), 0.0);
    for (int v = 0; v < size(); ++v) {
      double acc = 0.0;
      for (auto k = offsets_[v]; k < offsets_[v + 1]; ++k) acc += values_[k] * x[cols_[k]];
      y[v] = acc;
    }
    return y;
  }

  Matrix dense() const {
    Matrix m = Matrix::Zero(size(), size());
    for (int v = 0; v < size(); ++v) {
      for (auto k = offsets_[v]; k < offsets_[v + 1]; ++k) m(v, cols_[k]) = values_[k];
    }
    return m;
  }

 private:
  std::vector<std::int64_t> offsets_;
  std::vector<NodeId> cols_;
  std::vector<double> values_;
};

}  // namespace praetorian

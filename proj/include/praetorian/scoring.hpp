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

// Per-node deviation scores.
//
//   internal:  1 / L_int(i), the reciprocal reconstruction loss with i masked
//   external:  mean over neighbors j of KL + JS between j's prediction before
//              and after zeroing x_i
//
// The fast path reuses one cached first-layer projection and recomputes only
// the rows a masked node can reach in two layers; the slow path rebuilds the
// masked graph and runs a full forward pass.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/divergence.hpp"
#include "praetorian/graph_io.hpp"
#include "praetorian/nn/training.hpp"

namespace praetorian {

inline constexpr double kLossFloor = 1e-9;
inline constexpr int kModelDepth = 2;

inline double internal_score_from_loss(double loss) { return 1.0 / std::max(loss, kLossFloor); }

inline double internal_score(const nn::MaskedAutoencoder& ae, const AttributedGraph& g, NodeId i) {
  return internal_score_from_loss(nn::node_reconstruction_loss(ae, g, i));
}

namespace detail {

inline std::vector<double> row_to_vector(const RowVector& r) {
  return std::vector<double>(r.data(), r.data() + r.size());
}

inline double mean_divergence(const Matrix& before_logits, const Matrix& after_logits) {
  if (before_logits.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < before_logits.rows(); ++r) {
    const auto p = row_to_vector(nn::softmax(before_logits.row(r)));
    const auto q = row_to_vector(nn::softmax(after_logits.row(r)));
    const Divergence d = kl_js(p, q);
    total += d.kl + d.js;
  }
  return total / static_cast<double>(before_logits.rows());
}

}  // namespace detail

// Reference computation of the external score: zero x_i, run the classifier
// on the whole modified graph.
inline double external_score_full(const nn::Classifier& c, const AttributedGraph& g, NodeId i) {
  g.check_node(i);
  const auto nb = g.neighbors(i);
  if (nb.empty()) return 0.0;
  const Matrix before = c.logits(g);
  const Matrix after =
      c.logits(mask_nodes(g, NodeSet{i}, RowVector::Zero(g.feature_dim())));
  Matrix b(static_cast<Eigen::Index>(nb.size()), before.cols());
  Matrix a(b.rows(), b.cols());
  for (std::size_t k = 0; k < nb.size(); ++k) {
    b.row(static_cast<Eigen::Index>(k)) = before.row(nb[k]);
    a.row(static_cast<Eigen::Index>(k)) = after.row(nb[k]);
  }
  return detail::mean_divergence(b, a);
}

// Scores many nodes against one (autoencoder, classifier, graph) triple with
// cached projections and baseline logits.
class Scorer {
 public:
  Scorer(const nn::MaskedAutoencoder& ae, const nn::Classifier& c, const AttributedGraph& g)
      : ae_(&ae), c_(&c), g_(&g), mg_(g), x_(g.features()), all_(nn::RowSet::all(g.num_nodes())) {
    c.check_graph(g);
    if (g.feature_dim() != ae.feature_dim()) throw InvalidArgument("autoencoder feature dimension mismatch");
    ae_z1_ = x_.project_all(ae.net().params().w1);
    token_proj_ = ae.token_projection();
    clf_z1_ = x_.project_all(c.net().params().w1);
    baseline_ = c.logits_at(mg_, clf_z1_, all_, g.all_nodes());
  }

  double internal(NodeId i) {
    g_->check_node(i);
    const RowVector keep = ae_z1_.row(i);
    ae_z1_.row(i) = token_proj_;
    nn::ForwardPass pass;
    const NodeSet target{i};
    ae_->net().forward(mg_, ae_z1_, all_, target, pass, target);
    ae_z1_.row(i) = keep;
    const double loss = nn::cosine_term(g_->feature_row(i), pass.out.row(0), ae_->gamma()).loss;
    return internal_score_from_loss(loss);
  }

  double external(NodeId i) {
    g_->check_node(i);
    const auto nb = g_->neighbors(i);
    if (nb.empty()) return 0.0;
    const NodeSet targets(nb.begin(), nb.end());
    const RowVector keep = clf_z1_.row(i);
    clf_z1_.row(i).setZero();
    const Matrix after = c_->logits_at(mg_, clf_z1_, all_, targets);
    clf_z1_.row(i) = keep;
    Matrix before(after.rows(), after.cols());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      before.row(static_cast<Eigen::Index>(k)) = baseline_.row(targets[k]);
    }
    return detail::mean_divergence(before, after);
  }

 private:
  const nn::MaskedAutoencoder* ae_;
  const nn::Classifier* c_;
  const AttributedGraph* g_;
  nn::MessageGraph mg_;
  nn::FeatureInput x_;
  nn::RowSet all_;
  Matrix ae_z1_;
  RowVector token_proj_;
  Matrix clf_z1_;
  Matrix baseline_;
};

inline double external_score(const nn::Classifier& c, const AttributedGraph& g, NodeId i,
                             bool fast = true) {
  if (!fast) return external_score_full(c, g, i);
  g.check_node(i);
  if (g.degree(i) == 0) return 0.0;
  const nn::MessageGraph mg(g);
  const nn::FeatureInput x(g.features());
  const nn::RowSet all = nn::RowSet::all(g.num_nodes());
  Matrix z1 = c.project(x);
  const NodeSet targets(g.neighbors(i).begin(), g.neighbors(i).end());
  const Matrix before = c.logits_at(mg, z1, all, targets);
  z1.row(i).setZero();
  const Matrix after = c.logits_at(mg, z1, all, targets);
  return detail::mean_divergence(before, after);
}

struct ScoreTable {
  NodeSet nodes;
  std::vector<double> s_int;
  std::vector<double> s_ext;
  std::vector<double> s_fused;  // empty until localization fills it
  std::vector<double> s_prop;   // empty until localization fills it

  std::size_t size() const { return nodes.size(); }

  std::optional<std::size_t> row_of(NodeId v) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    if (it == nodes.end() || *it != v) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
  }

  // Column values spread over a graph with n nodes; unscored nodes get 0.
  std::vector<double> dense(std::span<const double> column, int n) const {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) out[nodes[k]] = column[k];
    return out;
  }

  void validate() const {
    auto check = [&](const std::vector<double>& col, const char* name, bool optional) {
      if (optional && col.empty()) return;
      if (col.size() != nodes.size()) throw InvalidArgument(std::string(name) + " column has wrong length");
      for (double s : col) {
        if (!std::isfinite(s) || s < 0) throw InvalidArgument(std::string(name) + " holds a negative or non-finite score");
      }
    };
    check(s_int, "s_int", false);
    check(s_ext, "s_ext", false);
    check(s_fused, "s_fused", true);
    check(s_prop, "s_prop", true);
  }
};

// Training nodes plus everything within `hops` of them.
inline NodeSet default_candidates(const AttributedGraph& g, int hops = kModelDepth) {
  return k_hop_neighborhood(g, g.train_nodes(), hops);
}

inline ScoreTable score_all(const nn::MaskedAutoencoder& ae, const nn::Classifier& c,
                            const AttributedGraph& g, const NodeSet& candidates, bool fast = true) {
  for (NodeId v : candidates) g.check_node(v);
  ScoreTable t;
  t.nodes = candidates;
  t.s_int.reserve(candidates.size());
  t.s_ext.reserve(candidates.size());
  if (fast) {
    Scorer s(ae, c, g);
    for (NodeId v : candidates) {
      t.s_int.push_back(s.internal(v));
      t.s_ext.push_back(s.external(v));
    }
  } else {
    for (NodeId v : candidates) {
      t.s_int.push_back(internal_score(ae, g, v));
      t.s_ext.push_back(external_score_full(c, g, v));
    }
  }
  return t;
}

// node_id,s_int,s_ext,s_fused,s_prop with empty cells for unfilled columns.
inline void save_score_table(const ScoreTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "node_id,s_int,s_ext,s_fused,s_prop\n";
  auto cell = [](const std::vector<double>& col, std::size_t k) {
    return col.empty() ? std::string() : io_detail::format_double(col[k]);
  };
  for (std::size_t k = 0; k < t.size(); ++k) {
    out << t.nodes[k] << ',' << cell(t.s_int, k) << ',' << cell(t.s_ext, k) << ','
        << cell(t.s_fused, k) << ',' << cell(t.s_prop, k) << '\n';
  }
}

inline ScoreTable load_score_table(const std::filesystem::path& path) {
  using namespace io_detail;
  std::ifstream in = open_input(path);
  const std::string file = path.string();
  ScoreTable t;
  std::string line;
  long lineno = 0;
  std::vector<std::vector<double>> cols(4);
  std::vector<bool> filled(4, true);
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    if (header) {
      header = false;
      if (line.rfind("node_id", 0) == 0) continue;
    }
    const auto f = split_fields(line, ',');
    if (f.size() != 5) throw FormatError(file, lineno, "expected 5 columns");
    const NodeId v = parse_number<NodeId>(f[0], file, lineno);
    if (!t.nodes.empty() && v <= t.nodes.back()) throw FormatError(file, lineno, "node ids must be strictly increasing");
    t.nodes.push_back(v);
    for (std::size_t c = 0; c < 4; ++c) {
      if (f[c + 1].empty()) {
        if (c < 2) throw FormatError(file, lineno, "missing internal/external score");
        filled[c] = false;
        continue;
      }
      cols[c].push_back(parse_number<double>(f[c + 1], file, lineno));
    }
  }
  t.s_int = std::move(cols[0]);
  t.s_ext = std::move(cols[1]);
  if (filled[2]) t.s_fused = std::move(cols[2]);
  if (filled[3]) t.s_prop = std::move(cols[3]);
  t.validate();
  return t;
}

// 50-bin histograms per column, split into poisoned and benign series.
inline nlohmann::json score_histograms(const ScoreTable& t, const NodeSet& poisoned, int bins = 50) {
  nlohmann::json out = nlohmann::json::object();
  const std::pair<const char*, const std::vector<double>*> columns[] = {
      {"s_int", &t.s_int}, {"s_ext", &t.s_ext}, {"s_fused", &t.s_fused}, {"s_prop", &t.s_prop}};
  for (const auto& [name, col] : columns) {
    if (col->empty()) continue;
    const auto [lo_it, hi_it] = std::minmax_element(col->begin(), col->end());
    const double lo = *lo_it;
    const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
    const double width = (hi - lo) / bins;
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) edges[b] = lo + width * b;
    std::vector<long> pois(static_cast<std::size_t>(bins), 0), benign(pois);
    for (std::size_t k = 0; k < col->size(); ++k) {
      int b = static_cast<int>(((*col)[k] - lo) / width);
      b = std::clamp(b, 0, bins - 1);
      (contains(poisoned, t.nodes[k]) ? pois : benign)[b]++;
    }
    out[name] = {{"edges", edges}, {"poisoned", pois}, {"benign", benign}};
  }
  return out;
}

}  // namespace praetorian

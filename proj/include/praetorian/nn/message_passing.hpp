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

// Neighborhood aggregation for the two supported layer kinds, with explicit
// backward passes. Aggregation always runs over an already-projected matrix
// Z = X W, so callers can cache or patch projections.
//
//   mean-aggregate:  out_i = sum_j  d_i^{-1/2} d_j^{-1/2} Z_j
//   attention:       out_i = sum_j  alpha_ij Z_j,
//                    alpha_ij = softmax_j LeakyReLU(Z_i.a_dst + Z_j.a_src)
//
// with j ranging over N(i) and i itself. Matrices are "compact": row k holds
// the node ids[k] of a RowSet, so local evaluations never touch the full graph.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "praetorian/graph.hpp"

namespace praetorian::nn {

enum class Architecture : std::uint8_t { kAttention, kMeanAggregate };

inline std::string to_string(Architecture a) {
  return a == Architecture::kAttention ? "attention" : "mean-aggregate";
}

inline Architecture architecture_from_string(const std::string& s) {
  if (s == "attention" || s == "gat") return Architecture::kAttention;
  if (s == "mean-aggregate" || s == "gcn") return Architecture::kMeanAggregate;
  throw ConfigError("unknown architecture '" + s + "'");
}

inline constexpr double kLeakySlope = 0.2;

// Graph structure as seen by the models: sorted closed neighborhoods N[i]
// (neighbors plus the node itself) with symmetric-normalized weights.
class MessageGraph {
 public:
  MessageGraph() = default;

  explicit MessageGraph(const AttributedGraph& g) {
    const int n = g.num_nodes();
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (NodeId v = 0; v < n; ++v) {
      auto nb = g.neighbors(v);
      bool self_done = false;
      for (NodeId u : nb) {
        if (!self_done && u > v) {
          cols_.push_back(v);
          self_done = true;
        }
        cols_.push_back(u);
      }
      if (!self_done) cols_.push_back(v);
      offsets_[v + 1] = static_cast<std::int64_t>(cols_.size());
    }
    weights_.resize(cols_.size());
    for (NodeId v = 0; v < n; ++v) {
      const double dv = static_cast<double>(offsets_[v + 1] - offsets_[v]);
      for (auto k = offsets_[v]; k < offsets_[v + 1]; ++k) {
        const NodeId u = cols_[k];
        const double du = static_cast<double>(offsets_[u + 1] - offsets_[u]);
        weights_[k] = 1.0 / std::sqrt(dv * du);
      }
    }
  }

  int num_nodes() const { return static_cast<int>(offsets_.size()) - 1; }
  std::int64_t begin(NodeId v) const { return offsets_[v]; }
  std::int64_t end(NodeId v) const { return offsets_[v + 1]; }
  NodeId col(std::int64_t k) const { return cols_[k]; }
  double weight(std::int64_t k) const { return weights_[k]; }
  std::span<const NodeId> closed_neighbors(NodeId v) const {
    return {cols_.data() + offsets_[v], cols_.data() + offsets_[v + 1]};
  }

  // Union of closed neighborhoods of `rows`: the rows an aggregation over
  // `rows` reads.
  NodeSet expand(std::span<const NodeId> rows) const {
    std::vector<NodeId> out;
    for (NodeId v : rows) {
      auto nb = closed_neighbors(v);
      out.insert(out.end(), nb.begin(), nb.end());
    }
    return make_node_set(std::move(out));
  }

 private:
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> cols_;
  std::vector<double> weights_;
};

// Ordered node list plus a global -> compact slot lookup.
class RowSet {
 public:
  RowSet() = default;
  RowSet(int num_nodes, NodeSet ids) : ids_(std::move(ids)), slot_(num_nodes, -1) {
    for (std::size_t k = 0; k < ids_.size(); ++k) slot_[ids_[k]] = static_cast<int>(k);
  }
  static RowSet all(int num_nodes) {
    NodeSet ids(static_cast<std::size_t>(num_nodes));
    for (int v = 0; v < num_nodes; ++v) ids[v] = v;
    return RowSet(num_nodes, std::move(ids));
  }

  const NodeSet& ids() const { return ids_; }
  int size() const { return static_cast<int>(ids_.size()); }
  int slot(NodeId v) const { return slot_[v]; }
  bool has(NodeId v) const { return slot_[v] >= 0; }

 private:
  NodeSet ids_;
  std::vector<int> slot_;
};

struct AttentionParams {
  const Matrix* src = nullptr;  // out x 1
  const Matrix* dst = nullptr;  // out x 1
};

// Per-entry attention state kept for the backward pass.
struct AggregationCache {
  std::vector<double> alpha;      // concatenated over output rows, CSR order
  std::vector<double> pre;        // pre-activation logits
  std::vector<std::int64_t> row_start;
};

// Aggregates compact Z (rows of `in`) into the rows `out`. Every closed
// neighbor of an output row must be present in `in`.
inline Matrix aggregate(const MessageGraph& mg, Architecture arch, const Matrix& z,
                        const RowSet& in, std::span<const NodeId> out,
                        const AttentionParams& att, AggregationCache* cache) {
  Matrix result = Matrix::Zero(static_cast<Eigen::Index>(out.size()), z.cols());
  if (arch == Architecture::kMeanAggregate) {
    for (std::size_t r = 0; r < out.size(); ++r) {
      const NodeId v = out[r];
      auto row = result.row(static_cast<Eigen::Index>(r));
      for (auto k = mg.begin(v); k < mg.end(v); ++k) {
        row.noalias() += mg.weight(k) * z.row(in.slot(mg.col(k)));
      }
    }
    return result;
  }

  const Vector s_src_w = att.src->col(0);
  const Vector s_dst_w = att.dst->col(0);
  if (cache) {
    cache->alpha.clear();
    cache->pre.clear();
    cache->row_start.clear();
  }
  std::vector<double> pre;
  std::vector<double> alpha;
  for (std::size_t r = 0; r < out.size(); ++r) {
    const NodeId v = out[r];
    const double s_dst = z.row(in.slot(v)).dot(s_dst_w);
    const auto deg = mg.end(v) - mg.begin(v);
    pre.resize(static_cast<std::size_t>(deg));
    alpha.resize(static_cast<std::size_t>(deg));
    double max_e = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < deg; ++k) {
      const double p = s_dst + z.row(in.slot(mg.col(mg.begin(v) + k))).dot(s_src_w);
      pre[k] = p;
      const double e = p > 0 ? p : kLeakySlope * p;
      alpha[k] = e;
      max_e = std::max(max_e, e);
    }
    double total = 0.0;
    for (auto& a : alpha) {
      a = std::exp(a - max_e);
      total += a;
    }
    auto row = result.row(static_cast<Eigen::Index>(r));
    for (std::int64_t k = 0; k < deg; ++k) {
      alpha[k] /= total;
      row.noalias() += alpha[k] * z.row(in.slot(mg.col(mg.begin(v) + k)));
    }
    if (cache) {
      cache->row_start.push_back(static_cast<std::int64_t>(cache->alpha.size()));
      cache->alpha.insert(cache->alpha.end(), alpha.begin(), alpha.end());
      cache->pre.insert(cache->pre.end(), pre.begin(), pre.end());
    }
  }
  return result;
}

struct AttentionGrads {
  Matrix* src = nullptr;
  Matrix* dst = nullptr;
};

// Accumulates dL/dZ into `dz` (compact over `in`) given dL/dOut for the rows
// `out`; attention gradients are accumulated into `datt`.
inline void aggregate_backward(const MessageGraph& mg, Architecture arch, const Matrix& z,
                               const RowSet& in, std::span<const NodeId> out,
                               const AttentionParams& att, const AggregationCache* cache,
                               const Matrix& dout, Matrix& dz, const AttentionGrads& datt) {
  if (arch == Architecture::kMeanAggregate) {
    for (std::size_t r = 0; r < out.size(); ++r) {
      const NodeId v = out[r];
      const auto g = dout.row(static_cast<Eigen::Index>(r));
      for (auto k = mg.begin(v); k < mg.end(v); ++k) {
        dz.row(in.slot(mg.col(k))).noalias() += mg.weight(k) * g;
      }
    }
    return;
  }

  const auto a_src = att.src->col(0).transpose();
  const auto a_dst = att.dst->col(0).transpose();
  std::vector<double> dalpha;
  for (std::size_t r = 0; r < out.size(); ++r) {
    const NodeId v = out[r];
    const auto g = dout.row(static_cast<Eigen::Index>(r));
    const auto base = cache->row_start[r];
    const auto deg = mg.end(v) - mg.begin(v);
    dalpha.resize(static_cast<std::size_t>(deg));
    double weighted = 0.0;
    for (std::int64_t k = 0; k < deg; ++k) {
      const int slot = in.slot(mg.col(mg.begin(v) + k));
      const double a = cache->alpha[base + k];
      dz.row(slot).noalias() += a * g;
      dalpha[k] = g.dot(z.row(slot));
      weighted += a * dalpha[k];
    }
    const int self_slot = in.slot(v);
    double ds_dst = 0.0;
    for (std::int64_t k = 0; k < deg; ++k) {
      const int slot = in.slot(mg.col(mg.begin(v) + k));
      const double a = cache->alpha[base + k];
      const double p = cache->pre[base + k];
      const double dpre = a * (dalpha[k] - weighted) * (p > 0 ? 1.0 : kLeakySlope);
      ds_dst += dpre;
      dz.row(slot).noalias() += dpre * a_src;
      datt.src->col(0).noalias() += dpre * z.row(slot).transpose();
    }
    dz.row(self_slot).noalias() += ds_dst * a_dst;
    datt.dst->col(0).noalias() += ds_dst * z.row(self_slot).transpose();
  }
}

// Node features in the representation best suited to the first projection.
class FeatureInput {
 public:
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  explicit FeatureInput(const Matrix& x, double sparse_threshold = 0.15) : dense_(&x) {
    const auto nnz = (x.array() != 0.0).count();
    if (x.size() > 0 &&
        static_cast<double>(nnz) < sparse_threshold * static_cast<double>(x.size())) {
      sparse_ = x.sparseView();
      sparse_.makeCompressed();
      use_sparse_ = true;
    }
  }

  const Matrix& dense() const { return *dense_; }
  bool sparse() const { return use_sparse_; }

  // X W over all rows.
  Matrix project_all(const Matrix& w) const {
    if (use_sparse_) return sparse_ * w;
    return (*dense_) * w;
  }

  // X[rows] W, compact.
  Matrix project_rows(std::span<const NodeId> rows, const Matrix& w) const {
    Matrix z(static_cast<Eigen::Index>(rows.size()), w.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto out = z.row(static_cast<Eigen::Index>(r));
      if (use_sparse_) {
        out.setZero();
        for (Sparse::InnerIterator it(sparse_, rows[r]); it; ++it) {
          out.noalias() += it.value() * w.row(it.col());
        }
      } else {
        out.noalias() = dense_->row(rows[r]) * w;
      }
    }
    return z;
  }

  // X^T G over all rows.
  Matrix transpose_times_all(const Matrix& g) const {
    if (use_sparse_) return sparse_.transpose() * g;
    return dense_->transpose() * g;
  }

  // X[rows]^T G for compact G.
  Matrix transpose_times_rows(std::span<const NodeId> rows, const Matrix& g) const {
    Matrix out = Matrix::Zero(dense_->cols(), g.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto grow = g.row(static_cast<Eigen::Index>(r));
      if (use_sparse_) {
        for (Sparse::InnerIterator it(sparse_, rows[r]); it; ++it) {
          out.row(it.col()).noalias() += it.value() * grow;
        }
      } else {
        out.noalias() += dense_->row(rows[r]).transpose() * grow;
      }
    }
    return out;
  }

 private:
  const Matrix* dense_;
  Sparse sparse_;
  bool use_sparse_ = false;
};

}  // namespace praetorian::nn

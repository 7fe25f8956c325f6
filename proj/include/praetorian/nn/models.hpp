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

// Two-layer message-passing models: the node classifier and the masked
// graph autoencoder. Both share TwoLayerNet; the autoencoder adds a learnable
// mask token and re-masks hidden rows of masked nodes before decoding.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "praetorian/nn/message_passing.hpp"

namespace praetorian::nn {

enum class OptimizerKind : std::uint8_t { kAdam, kGradientDescent };

inline std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd" || s == "gd") return OptimizerKind::kGradientDescent;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct ModelConfig {
  Architecture architecture = Architecture::kAttention;
  int layers = 2;
  int hidden = 64;
  double learning_rate = 0.01;
  int epochs = 200;
  double mask_rate = 0.1;
  double gamma = 3.0;
  double weight_decay = 0.0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;

  void validate() const {
    if (layers != 2) throw ConfigError("only 2-layer models are supported");
    if (hidden < 1) throw ConfigError("hidden width must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (!(mask_rate > 0 && mask_rate < 1)) throw ConfigError("mask rate must lie in (0, 1)");
    if (!(gamma > 1)) throw ConfigError("sensitivity exponent gamma must be > 1");
    if (weight_decay < 0) throw ConfigError("weight decay must be non-negative");
  }
};

// Parameters of a two-layer network. Attention vectors are empty for the
// mean-aggregate architecture.
struct NetParams {
  Matrix w1, b1, att_src1, att_dst1;
  Matrix w2, b2, att_src2, att_dst2;

  static constexpr std::array<const char*, 8> kNames = {
      "w1", "b1", "att_src1", "att_dst1", "w2", "b2", "att_src2", "att_dst2"};

  std::array<Matrix*, 8> tensors() {
    return {&w1, &b1, &att_src1, &att_dst1, &w2, &b2, &att_src2, &att_dst2};
  }
  std::array<const Matrix*, 8> tensors() const {
    return {&w1, &b1, &att_src1, &att_dst1, &w2, &b2, &att_src2, &att_dst2};
  }

  NetParams zeros_like() const {
    NetParams z;
    auto dst = z.tensors();
    auto src = tensors();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      *dst[k] = Matrix::Zero(src[k]->rows(), src[k]->cols());
    }
    return z;
  }
};

namespace detail {

inline Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace detail

// Forward state of one evaluation, kept for backward. Pointers refer to
// caller-owned storage that must outlive the pass.
struct ForwardPass {
  const Matrix* z1 = nullptr;   // compact over *in0
  const RowSet* in0 = nullptr;
  NodeSet targets;
  NodeSet r1_ids;
  RowSet r1;
  Matrix a1;  // pre-activation, compact over r1
  Matrix h;   // post-activation (re-masked), compact over r1
  Matrix z2;  // compact over r1
  AggregationCache cache1, cache2;
  NodeSet remask;
  Matrix out;  // |targets| x out_dim
};

class TwoLayerNet {
 public:
  TwoLayerNet() = default;

  TwoLayerNet(Architecture arch, int in_dim, int hidden, int out_dim, std::mt19937_64& rng)
      : arch_(arch) {
    p_.w1 = detail::glorot(in_dim, hidden, rng);
    p_.b1 = Matrix::Zero(1, hidden);
    p_.w2 = detail::glorot(hidden, out_dim, rng);
    p_.b2 = Matrix::Zero(1, out_dim);
    if (arch == Architecture::kAttention) {
      p_.att_src1 = detail::glorot(hidden, 1, rng);
      p_.att_dst1 = detail::glorot(hidden, 1, rng);
      p_.att_src2 = detail::glorot(out_dim, 1, rng);
      p_.att_dst2 = detail::glorot(out_dim, 1, rng);
    } else {
      p_.att_src1 = p_.att_dst1 = Matrix(hidden, 0);
      p_.att_src2 = p_.att_dst2 = Matrix(out_dim, 0);
    }
  }

  TwoLayerNet(Architecture arch, NetParams params) : arch_(arch), p_(std::move(params)) {}

  Architecture architecture() const { return arch_; }
  int in_dim() const { return static_cast<int>(p_.w1.rows()); }
  int hidden() const { return static_cast<int>(p_.w1.cols()); }
  int out_dim() const { return static_cast<int>(p_.w2.cols()); }
  const NetParams& params() const { return p_; }
  NetParams& params() { return p_; }

  // Evaluates the network at `targets` from the first-layer projection
  // z1 = X W1 (compact over in0, which must cover N[N[targets]]). Hidden rows
  // of `remask` nodes are zeroed before the second layer.
  void forward(const MessageGraph& mg, const Matrix& z1, const RowSet& in0, NodeSet targets,
               ForwardPass& pass, const NodeSet& remask = {}) const {
    pass.z1 = &z1;
    pass.in0 = &in0;
    pass.targets = std::move(targets);
    pass.r1_ids = mg.expand(pass.targets);
    pass.r1 = RowSet(mg.num_nodes(), pass.r1_ids);
    pass.remask = remask;
    pass.a1 = aggregate(mg, arch_, z1, in0, pass.r1_ids, att1(), &pass.cache1);
    pass.a1.rowwise() += p_.b1.row(0);
    pass.h = pass.a1.cwiseMax(0.0);
    for (NodeId v : remask) {
      if (pass.r1.has(v)) pass.h.row(pass.r1.slot(v)).setZero();
    }
    pass.z2.noalias() = pass.h * p_.w2;
    pass.out = aggregate(mg, arch_, pass.z2, pass.r1, pass.targets, att2(), &pass.cache2);
    pass.out.rowwise() += p_.b2.row(0);
  }

  // Backpropagates dL/dOut. Fills every gradient except w1 and returns
  // dL/dz1 (compact over in0); the caller owns the input projection.
  Matrix backward(const MessageGraph& mg, const ForwardPass& pass, const Matrix& dout,
                  NetParams& grads) const {
    Matrix dz2 = Matrix::Zero(pass.z2.rows(), pass.z2.cols());
    aggregate_backward(mg, arch_, pass.z2, pass.r1, pass.targets, att2(), &pass.cache2, dout,
                       dz2, {&grads.att_src2, &grads.att_dst2});
    grads.b2 += dout.colwise().sum();
    grads.w2.noalias() += pass.h.transpose() * dz2;
    Matrix dh = dz2 * p_.w2.transpose();
    for (NodeId v : pass.remask) {
      if (pass.r1.has(v)) dh.row(pass.r1.slot(v)).setZero();
    }
    Matrix da1 = (pass.a1.array() > 0.0).select(dh, 0.0);
    grads.b1 += da1.colwise().sum();
    Matrix dz1 = Matrix::Zero(pass.z1->rows(), pass.z1->cols());
    aggregate_backward(mg, arch_, *pass.z1, *pass.in0, pass.r1_ids, att1(), &pass.cache1, da1,
                       dz1, {&grads.att_src1, &grads.att_dst1});
    return dz1;
  }

 private:
  AttentionParams att1() const { return {&p_.att_src1, &p_.att_dst1}; }
  AttentionParams att2() const { return {&p_.att_src2, &p_.att_dst2}; }

  Architecture arch_ = Architecture::kAttention;
  NetParams p_;
};

// Node classifier f': graph -> per-node logits.
class Classifier {
 public:
  Classifier() = default;

  Classifier(const ModelConfig& cfg, int in_dim, int num_classes) : cfg_(cfg) {
    cfg_.validate();
    if (num_classes < 1) throw ConfigError("classifier needs at least one class");
    std::mt19937_64 rng(cfg_.seed);
    net_ = TwoLayerNet(cfg_.architecture, in_dim, cfg_.hidden, num_classes, rng);
  }

  Classifier(const ModelConfig& cfg, TwoLayerNet net) : cfg_(cfg), net_(std::move(net)) {}

  const ModelConfig& config() const { return cfg_; }
  const TwoLayerNet& net() const { return net_; }
  TwoLayerNet& net() { return net_; }
  int in_dim() const { return net_.in_dim(); }
  int num_classes() const { return net_.out_dim(); }

  void check_graph(const AttributedGraph& g) const {
    if (g.feature_dim() != in_dim()) {
      throw InvalidArgument("graph feature dimension " + std::to_string(g.feature_dim()) +
                            " does not match classifier input dimension " +
                            std::to_string(in_dim()));
    }
  }

  // First-layer projection X W1 over every node.
  Matrix project(const FeatureInput& x) const { return x.project_all(net_.params().w1); }

  Matrix logits(const AttributedGraph& g) const {
    check_graph(g);
    const MessageGraph mg(g);
    const FeatureInput x(g.features());
    const Matrix z1 = project(x);
    const RowSet all = RowSet::all(g.num_nodes());
    ForwardPass pass;
    net_.forward(mg, z1, all, g.all_nodes(), pass);
    return std::move(pass.out);
  }

  // Logits at `targets` (rows in target order) from a precomputed projection.
  Matrix logits_at(const MessageGraph& mg, const Matrix& z1, const RowSet& in0,
                   const NodeSet& targets) const {
    ForwardPass pass;
    net_.forward(mg, z1, in0, targets, pass);
    return std::move(pass.out);
  }

 private:
  ModelConfig cfg_;
  TwoLayerNet net_;
};

// Masked graph autoencoder: encoder layer + re-mask + decoder layer, with a
// learnable mask token x_M substituted for masked feature rows.
class MaskedAutoencoder {
 public:
  MaskedAutoencoder() = default;

  MaskedAutoencoder(const ModelConfig& cfg, int feature_dim) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    net_ = TwoLayerNet(cfg_.architecture, feature_dim, cfg_.hidden, feature_dim, rng);
    token_ = RowVector::Zero(feature_dim);
  }

  MaskedAutoencoder(const ModelConfig& cfg, TwoLayerNet net, RowVector token)
      : cfg_(cfg), net_(std::move(net)), token_(std::move(token)) {}

  const ModelConfig& config() const { return cfg_; }
  const TwoLayerNet& net() const { return net_; }
  TwoLayerNet& net() { return net_; }
  const RowVector& mask_token() const { return token_; }
  RowVector& mask_token() { return token_; }
  int feature_dim() const { return net_.in_dim(); }
  double gamma() const { return cfg_.gamma; }

  // X W1 with rows of `mask` replaced by x_M W1.
  Matrix project_masked(const FeatureInput& x, const NodeSet& mask) const {
    Matrix z1 = x.project_all(net_.params().w1);
    const RowVector token_proj = token_ * net_.params().w1;
    for (NodeId v : mask) z1.row(v) = token_proj;
    return z1;
  }

  RowVector token_projection() const { return token_ * net_.params().w1; }

  // Reconstructed features for every node of `mask` when exactly `mask` is
  // masked (rows in mask order).
  Matrix reconstruct(const AttributedGraph& g, const NodeSet& mask) const {
    if (g.feature_dim() != feature_dim()) throw InvalidArgument("feature dimension mismatch");
    for (NodeId v : mask) g.check_node(v);
    const MessageGraph mg(g);
    const FeatureInput x(g.features());
    const Matrix z1 = project_masked(x, mask);
    const RowSet all = RowSet::all(g.num_nodes());
    ForwardPass pass;
    net_.forward(mg, z1, all, mask, pass, mask);
    return std::move(pass.out);
  }

 private:
  ModelConfig cfg_;
  TwoLayerNet net_;
  RowVector token_;
};

// Cosine-based reconstruction term (1 - cos(x, x'))^gamma and its gradient
// with respect to x'. Zero-norm targets score 2^gamma with zero gradient.
struct CosineTerm {
  double loss = 0.0;
  RowVector grad;  // d loss / d x'
  bool zero_norm_target = false;
};

inline CosineTerm cosine_term(const RowVector& x, const RowVector& recon, double gamma) {
  CosineTerm t;
  t.grad = RowVector::Zero(recon.size());
  const double nx = x.norm();
  const double nr = recon.norm();
  if (nx == 0.0) {
    t.loss = std::pow(2.0, gamma);
    t.zero_norm_target = true;
    return t;
  }
  if (nr == 0.0) {
    t.loss = 1.0;
    return t;
  }
  const double cos = std::clamp(x.dot(recon) / (nx * nr), -1.0, 1.0);
  const double base = 1.0 - cos;
  t.loss = std::pow(base, gamma);
  const RowVector dcos = x / (nx * nr) - cos * recon / (nr * nr);
  t.grad = -gamma * std::pow(base, gamma - 1.0) * dcos;
  return t;
}

// Softmax of one logit row.
inline RowVector softmax(const RowVector& logits) {
  RowVector p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) p.row(i) = softmax(logits.row(i));
  return p;
}

inline double log_softmax_at(const RowVector& logits, int cls) {
  const double m = logits.maxCoeff();
  return logits(cls) - m - std::log((logits.array() - m).exp().sum());
}

}  // namespace praetorian::nn

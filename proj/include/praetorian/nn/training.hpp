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

// Losses with analytic gradients and the seeded training loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "praetorian/nn/models.hpp"

namespace praetorian::nn {

// Adam (coupled L2 weight decay) or plain gradient descent over a list of
// parameter tensors.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double weight_decay)
      : kind_(kind), lr_(lr), wd_(weight_decay) {}

  void step(std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (params.size() != grads.size()) throw InternalError("optimizer: parameter/gradient mismatch");
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Matrix& p = *params[k];
      if (p.size() == 0) continue;
      Matrix g = *grads[k];
      if (wd_ > 0) g += wd_ * p;
      if (kind_ == OptimizerKind::kGradientDescent) {
        p -= lr_ * g;
        continue;
      }
      m_[k] = kBeta1 * m_[k] + (1.0 - kBeta1) * g;
      v_[k] = kBeta2 * v_[k] + (1.0 - kBeta2) * g.cwiseProduct(g);
      p.array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  OptimizerKind kind_;
  double lr_;
  double wd_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct TrainingTrace {
  std::vector<double> loss;  // one entry per epoch, evaluated before the step
  long zero_norm_rows = 0;   // masked rows skipped as 2^gamma (data warning)
};

// Everything needed to evaluate a classifier on one graph repeatedly.
struct GraphContext {
  explicit GraphContext(const AttributedGraph& graph)
      : g(&graph), mg(graph), x(graph.features()), all(RowSet::all(graph.num_nodes())) {}

  const AttributedGraph* g;
  MessageGraph mg;
  FeatureInput x;
  RowSet all;
};

// One group of cross-entropy terms: `scale * sum_i sign * min(CE_i, cap)`
// over (nodes[i], labels[i]). sign=+1 and cap=inf is plain cross-entropy;
// sign=-1 with a finite cap is the capped unlearning term.
struct CrossEntropyGroup {
  std::span<const NodeId> nodes;
  std::span<const int> labels;
  double scale = 1.0;
  double sign = 1.0;
  double cap = std::numeric_limits<double>::infinity();
};

struct CrossEntropyValue {
  double loss = 0.0;
  double mean_prob = 0.0;  // mean softmax probability of the given labels
};

// Evaluates a cross-entropy group on `ctx` and, if `grads` is non-null,
// accumulates its gradient (including w1).
inline CrossEntropyValue cross_entropy(const TwoLayerNet& net, const GraphContext& ctx,
                                       const CrossEntropyGroup& grp, NetParams* grads) {
  if (grp.nodes.size() != grp.labels.size()) throw InvalidArgument("node/label count mismatch");
  CrossEntropyValue out;
  if (grp.nodes.empty()) return out;
  const NodeSet targets = make_node_set({grp.nodes.begin(), grp.nodes.end()});
  if (targets.size() != grp.nodes.size()) throw InvalidArgument("duplicate node in loss group");
  const Matrix z1 = ctx.x.project_all(net.params().w1);
  ForwardPass pass;
  net.forward(ctx.mg, z1, ctx.all, targets, pass);
  Matrix dout = Matrix::Zero(pass.out.rows(), pass.out.cols());
  double prob_sum = 0.0;
  for (std::size_t i = 0; i < grp.nodes.size(); ++i) {
    const auto slot = static_cast<Eigen::Index>(
        std::lower_bound(targets.begin(), targets.end(), grp.nodes[i]) - targets.begin());
    const RowVector logits = pass.out.row(slot);
    const int c = grp.labels[i];
    if (c < 0 || c >= logits.size()) throw InvalidArgument("label out of range in loss group");
    const double ce = -log_softmax_at(logits, c);
    const RowVector p = softmax(logits);
    prob_sum += p(c);
    const bool capped = ce >= grp.cap;
    out.loss += grp.scale * grp.sign * (capped ? grp.cap : ce);
    if (!capped) {
      RowVector d = p;
      d(c) -= 1.0;
      dout.row(slot) = grp.scale * grp.sign * d;
    }
  }
  out.mean_prob = prob_sum / static_cast<double>(grp.nodes.size());
  if (grads) {
    const Matrix dz1 = net.backward(ctx.mg, pass, dout, *grads);
    grads->w1 += ctx.x.transpose_times_all(dz1);
  }
  return out;
}

namespace detail {

inline void check_finite(double loss, int epoch, const char* what) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string("non-finite ") + what + " loss at epoch " +
                       std::to_string(epoch));
  }
}

inline std::vector<int> labels_of(const AttributedGraph& g, std::span<const NodeId> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (NodeId v : nodes) {
    g.check_node(v);
    if (!g.has_label(v)) throw InvalidArgument("node " + std::to_string(v) + " has no label");
    out.push_back(g.label(v));
  }
  return out;
}

}  // namespace detail

// Supervised training with mean cross-entropy over `labeled`.
inline Classifier train_classifier(const AttributedGraph& g, const NodeSet& labeled,
                                   const ModelConfig& cfg, TrainingTrace* trace = nullptr) {
  cfg.validate();
  if (labeled.empty()) throw InvalidArgument("train_classifier: empty labeled set");
  const std::vector<int> labels = detail::labels_of(g, labeled);
  Classifier clf(cfg, g.feature_dim(), g.num_classes());
  const GraphContext ctx(g);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
  const CrossEntropyGroup grp{labeled, labels, 1.0 / static_cast<double>(labeled.size())};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    NetParams grads = clf.net().params().zeros_like();
    const double loss = cross_entropy(clf.net(), ctx, grp, &grads).loss;
    detail::check_finite(loss, epoch, "classifier");
    if (trace) trace->loss.push_back(loss);
    auto p = clf.net().params().tensors();
    const auto gr = std::as_const(grads).tensors();
    opt.step(p, gr);
  }
  return clf;
}

inline Matrix predict_logits(const Classifier& c, const AttributedGraph& g) {
  return c.logits(g);
}

// Gradients of the autoencoder objective.
struct AutoencoderGrads {
  NetParams net;
  RowVector token;
};

struct AutoencoderLoss {
  double loss = 0.0;
  long zero_norm_rows = 0;
};

// Mean reconstruction loss over `mask` (masked with x_M, re-masked in the
// hidden layer). Accumulates gradients when `grads` is non-null.
inline AutoencoderLoss autoencoder_loss(const MaskedAutoencoder& ae, const GraphContext& ctx,
                                        const NodeSet& mask, AutoencoderGrads* grads) {
  AutoencoderLoss out;
  if (mask.empty()) return out;
  const TwoLayerNet& net = ae.net();
  const Matrix z1 = ae.project_masked(ctx.x, mask);
  ForwardPass pass;
  net.forward(ctx.mg, z1, ctx.all, mask, pass, mask);
  const double inv = 1.0 / static_cast<double>(mask.size());
  Matrix dout(pass.out.rows(), pass.out.cols());
  const Matrix& x = ctx.g->features();
  for (std::size_t r = 0; r < mask.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const CosineTerm t = cosine_term(x.row(mask[r]), pass.out.row(i), ae.gamma());
    out.loss += inv * t.loss;
    out.zero_norm_rows += t.zero_norm_target ? 1 : 0;
    dout.row(i) = inv * t.grad;
  }
  if (grads) {
    Matrix dz1 = net.backward(ctx.mg, pass, dout, grads->net);
    RowVector dtoken_proj = RowVector::Zero(dz1.cols());
    for (NodeId v : mask) {
      dtoken_proj += dz1.row(v);
      dz1.row(v).setZero();
    }
    grads->net.w1 += ctx.x.transpose_times_all(dz1);
    grads->net.w1 += ae.mask_token().transpose() * dtoken_proj;
    grads->token += dtoken_proj * net.params().w1.transpose();
  }
  return out;
}

// Draws ceil(rate * n) distinct nodes.
inline NodeSet sample_mask(int num_nodes, double rate, std::mt19937_64& rng) {
  const auto k = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(num_nodes)));
  std::vector<NodeId> ids(static_cast<std::size_t>(num_nodes));
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(k);
  return make_node_set(std::move(ids));
}

inline MaskedAutoencoder train_masked_autoencoder(const AttributedGraph& g, const ModelConfig& cfg,
                                                  TrainingTrace* trace = nullptr) {
  cfg.validate();
  if (cfg.mask_rate * g.num_nodes() < 1.0) {
    throw InvalidArgument("mask_rate * |V| must be at least 1");
  }
  MaskedAutoencoder ae(cfg, g.feature_dim());
  const GraphContext ctx(g);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const NodeSet mask = sample_mask(g.num_nodes(), cfg.mask_rate, rng);
    AutoencoderGrads grads{ae.net().params().zeros_like(), RowVector::Zero(g.feature_dim())};
    const AutoencoderLoss l = autoencoder_loss(ae, ctx, mask, &grads);
    detail::check_finite(l.loss, epoch, "autoencoder");
    if (trace) {
      trace->loss.push_back(l.loss);
      trace->zero_norm_rows += l.zero_norm_rows;
    }
    Matrix token = ae.mask_token();
    Matrix dtoken = grads.token;
    std::vector<Matrix*> params;
    std::vector<const Matrix*> gr;
    for (Matrix* p : ae.net().params().tensors()) params.push_back(p);
    for (const Matrix* p : std::as_const(grads.net).tensors()) gr.push_back(p);
    params.push_back(&token);
    gr.push_back(&dtoken);
    opt.step(params, gr);
    ae.mask_token() = token.row(0);
  }
  return ae;
}

// (1 - cos(x_i, x_i'))^gamma with exactly {i} masked.
inline double node_reconstruction_loss(const MaskedAutoencoder& ae, const AttributedGraph& g,
                                       NodeId i) {
  g.check_node(i);
  const Matrix recon = ae.reconstruct(g, NodeSet{i});
  return cosine_term(g.feature_row(i), recon.row(0), ae.gamma()).loss;
}

}  // namespace praetorian::nn

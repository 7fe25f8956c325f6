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

// Defended training: clean cross-entropy on the filtered graph plus a capped
// unlearning term that pushes each identified node away from its group's
// target label on the poisoned graph.
//
//   L = (1/|V_F|) [ sum_{v in V_F} CE(f(G_F), v)
//                   - sum_c sum_{v in victims_c + triggers_c} min(CE(f(G_T), v, c), ln(5C)) ]

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/localization.hpp"
#include "praetorian/nn/training.hpp"

namespace praetorian {

struct FilteredGraph {
  Subgraph gf;   // G_T without identified trigger nodes; victims unlabeled
  NodeSet vf;    // clean training pool, ids of gf
};

inline FilteredGraph filter_graph(const AttributedGraph& g_t, const DetectionResult& det) {
  const NodeSet victims = det.all_victims();
  const NodeSet triggers = det.all_triggers();
  for (NodeId v : set_union(victims, triggers)) g_t.check_node(v);
  std::vector<int> labels = g_t.labels();
  for (NodeId v : victims) labels[v] = kNoLabel;
  FilteredGraph out{remove_nodes(g_t.with_labels(std::move(labels)), triggers), {}};
  out.vf = out.gf.graph.train_nodes();
  return out;
}

struct RobustEpoch {
  double clean = 0.0;
  double unlearn = 0.0;
  double mean_target_prob = 0.0;
};

struct DefenseOutcome {
  nn::Classifier model;
  std::vector<RobustEpoch> log;
  DetectionResult detection;
  bool unlearned = false;
};

inline nlohmann::json training_log_json(const DefenseOutcome& o) {
  nlohmann::json epochs = nlohmann::json::array();
  for (std::size_t e = 0; e < o.log.size(); ++e) {
    epochs.push_back({{"epoch", e},
                      {"l_clean", o.log[e].clean},
                      {"l_unlearn", o.log[e].unlearn},
                      {"mean_p_target", o.log[e].mean_target_prob}});
  }
  return {{"unlearned", o.unlearned}, {"epochs", epochs}};
}

// Per-node unlearning floor: stop pushing once p(c) < 1 / (5C).
inline double unlearn_cap(int num_classes) { return std::log(5.0 * num_classes); }

struct RobustLoss {
  double clean = 0.0;
  double unlearn = 0.0;
  double mean_target_prob = 0.0;
  double total() const { return clean + unlearn; }
};

// Loss terms on already-built contexts; gradients accumulate into `grads`.
class RobustObjective {
 public:
  RobustObjective(const AttributedGraph& g_t, const FilteredGraph& filtered,
                  const DetectionResult& det, bool unlearn = true)
      : ctx_t_(g_t), ctx_f_(filtered.gf.graph), vf_(filtered.vf) {
    if (vf_.empty()) throw InvalidArgument("filtered training pool is empty");
    clean_labels_ = nn::detail::labels_of(filtered.gf.graph, vf_);
    scale_ = 1.0 / static_cast<double>(vf_.size());
    if (unlearn) {
      for (const auto& grp : det.groups) {
        NodeSet nodes = set_union(grp.victims, grp.triggers);
        if (nodes.empty()) continue;
        for (NodeId v : nodes) g_t.check_node(v);
        unlearn_nodes_.push_back(std::move(nodes));
        unlearn_labels_.emplace_back(unlearn_nodes_.back().size(), grp.label);
      }
    }
    cap_ = unlearn_cap(g_t.num_classes());
  }

  RobustLoss evaluate(const nn::TwoLayerNet& net, nn::NetParams* grads) const {
    RobustLoss out;
    out.clean = nn::cross_entropy(net, ctx_f_, {vf_, clean_labels_, scale_}, grads).loss;
    double prob = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < unlearn_nodes_.size(); ++k) {
      const auto v = nn::cross_entropy(
          net, ctx_t_, {unlearn_nodes_[k], unlearn_labels_[k], scale_, -1.0, cap_}, grads);
      out.unlearn += v.loss;
      prob += v.mean_prob * static_cast<double>(unlearn_nodes_[k].size());
      count += unlearn_nodes_[k].size();
    }
    out.mean_target_prob = count ? prob / static_cast<double>(count) : 0.0;
    return out;
  }

  bool has_unlearning() const { return !unlearn_nodes_.empty(); }

 private:
  nn::GraphContext ctx_t_;
  nn::GraphContext ctx_f_;
  NodeSet vf_;
  std::vector<int> clean_labels_;
  std::vector<NodeSet> unlearn_nodes_;
  std::vector<std::vector<int>> unlearn_labels_;
  double scale_ = 1.0;
  double cap_ = 0.0;
};

// With an abstained detection this is exactly train_classifier on g_t's
// training pool. `unlearn = false` gives the removal-only ablation.
inline DefenseOutcome robust_train(const AttributedGraph& g_t, const DetectionResult& det,
                                   const nn::ModelConfig& cfg, bool unlearn = true) {
  cfg.validate();
  DefenseOutcome out;
  out.detection = det;
  if (det.abstained) {
    nn::TrainingTrace trace;
    out.model = nn::train_classifier(g_t, g_t.train_nodes(), cfg, &trace);
    for (double l : trace.loss) out.log.push_back({l, 0.0, 0.0});
    return out;
  }
  const FilteredGraph filtered = filter_graph(g_t, det);
  const RobustObjective objective(g_t, filtered, det, unlearn);
  out.unlearned = objective.has_unlearning();
  nn::Classifier clf(cfg, g_t.feature_dim(), g_t.num_classes());
  nn::Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    nn::NetParams grads = clf.net().params().zeros_like();
    const RobustLoss loss = objective.evaluate(clf.net(), &grads);
    nn::detail::check_finite(loss.total(), epoch, "robust");
    out.log.push_back({loss.clean, loss.unlearn, loss.mean_target_prob});
    auto params = clf.net().params().tensors();
    const auto gr = std::as_const(grads).tensors();
    opt.step(params, gr);
  }
  out.model = std::move(clf);
  return out;
}

}  // namespace praetorian

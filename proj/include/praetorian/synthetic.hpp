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

// Citation-style benchmark generator: degree-corrected stochastic block
// model over labeled communities with sparse binary bag-of-words features.
// The default parameters match the size, class balance, homophily and
// feature sparsity of the Cora citation graph. The edge count lands a few
// percent above `num_edges` because isolated nodes get one repair edge.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/graph.hpp"

namespace praetorian {

struct CitationGraphParams {
  std::vector<int> class_sizes{351, 217, 418, 818, 426, 298, 180};  // Cora label order
  int num_edges = 5278;
  int vocabulary = 1433;
  double words_per_node = 18.2;
  double homophily = 0.81;
  double degree_exponent = 2.5;  // Pareto tail of the degree propensities
  int topic_words = 120;         // class-specific vocabulary per class
  double topic_share = 0.3;      // fraction of a node's words drawn from its topic
  double zipf_exponent = 0.6;
  std::uint64_t seed = 0;

  int num_nodes() const { return std::accumulate(class_sizes.begin(), class_sizes.end(), 0); }
};

inline nlohmann::json to_json(const CitationGraphParams& p) {
  return {{"class_sizes", p.class_sizes},         {"num_edges", p.num_edges},
          {"vocabulary", p.vocabulary},           {"words_per_node", p.words_per_node},
          {"homophily", p.homophily},             {"degree_exponent", p.degree_exponent},
          {"topic_words", p.topic_words},         {"topic_share", p.topic_share},
          {"zipf_exponent", p.zipf_exponent}};
}

// Missing keys keep the defaults; the seed is supplied separately.
inline CitationGraphParams citation_params_from_json(const nlohmann::json& j) {
  CitationGraphParams p;
  try {
    if (j.contains("class_sizes")) p.class_sizes = j.at("class_sizes").get<std::vector<int>>();
    if (j.contains("num_edges")) p.num_edges = j.at("num_edges");
    if (j.contains("vocabulary")) p.vocabulary = j.at("vocabulary");
    if (j.contains("words_per_node")) p.words_per_node = j.at("words_per_node");
    if (j.contains("homophily")) p.homophily = j.at("homophily");
    if (j.contains("degree_exponent")) p.degree_exponent = j.at("degree_exponent");
    if (j.contains("topic_words")) p.topic_words = j.at("topic_words");
    if (j.contains("topic_share")) p.topic_share = j.at("topic_share");
    if (j.contains("zipf_exponent")) p.zipf_exponent = j.at("zipf_exponent");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic graph params: ") + e.what());
  }
  return p;
}

namespace detail {

// Up to `k` distinct draws from `dist`.
inline std::vector<int> draw_distinct(const std::discrete_distribution<int>& dist, int k,
                                      std::mt19937_64& rng, int limit) {
  std::set<int> out;
  auto d = dist;
  k = std::min(k, limit);
  for (int tries = 0; static_cast<int>(out.size()) < k && tries < 50 * k + 100; ++tries) {
    out.insert(d(rng));
  }
  return {out.begin(), out.end()};
}

}  // namespace detail

inline AttributedGraph generate_citation_graph(const CitationGraphParams& p) {
  const bool bad_sizes = p.class_sizes.empty() ||
                         std::any_of(p.class_sizes.begin(), p.class_sizes.end(), [](int c) { return c < 1; });
  if (bad_sizes || p.vocabulary < 1 || p.num_edges < 0 || !(p.words_per_node > 0) ||
      !(p.homophily >= 0 && p.homophily <= 1) || !(p.topic_share >= 0 && p.topic_share <= 1) ||
      !(p.degree_exponent > 1) || p.topic_words < 1 || !(p.zipf_exponent >= 0)) {
    throw ConfigError("invalid citation graph parameters");
  }
  std::mt19937_64 rng(p.seed);
  const int n = p.num_nodes();
  const int classes = static_cast<int>(p.class_sizes.size());

  std::vector<int> labels;
  for (int c = 0; c < classes; ++c) labels.insert(labels.end(), p.class_sizes[c], c);
  std::shuffle(labels.begin(), labels.end(), rng);

  // Degree propensities with a Pareto tail.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> theta(static_cast<std::size_t>(n));
  for (auto& t : theta) t = std::pow(1.0 - unit(rng), -1.0 / (p.degree_exponent - 1.0));
  std::vector<std::vector<int>> members(static_cast<std::size_t>(classes));
  for (int v = 0; v < n; ++v) members[labels[v]].push_back(v);
  std::vector<std::discrete_distribution<int>> within;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> w;
    for (int v : members[c]) w.push_back(theta[v]);
    within.emplace_back(w.begin(), w.end());
  }
  std::discrete_distribution<int> any(theta.begin(), theta.end());
  std::bernoulli_distribution same(p.homophily);

  std::set<std::pair<int, int>> edges;
  auto add = [&](int a, int b) {
    if (a == b) return false;
    return edges.insert(std::minmax(a, b)).second;
  };
  const long max_edges = static_cast<long>(n) * (n - 1) / 2;
  const long target = std::min<long>(p.num_edges, max_edges);
  while (static_cast<long>(edges.size()) < target) {
    const int u = any(rng);
    int v;
    if (same(rng)) {
      v = members[labels[u]][within[labels[u]](rng)];
    } else {
      do v = any(rng); while (labels[v] == labels[u] && classes > 1);
    }
    add(u, v);
  }
  // No isolated nodes: link each to a same-class partner.
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (auto [a, b] : edges) ++degree[a], ++degree[b];
  for (int v = 0; v < n; ++v) {
    if (degree[v] > 0 || members[labels[v]].size() < 2) continue;
    int u;
    do u = members[labels[v]][within[labels[v]](rng)]; while (u == v);
    add(u, v);
    ++degree[u], ++degree[v];
  }

  // Zipf background vocabulary plus one topic per class.
  std::vector<int> order(static_cast<std::size_t>(p.vocabulary));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> background(static_cast<std::size_t>(p.vocabulary));
  for (int r = 0; r < p.vocabulary; ++r) background[order[r]] = std::pow(r + 1.0, -p.zipf_exponent);
  std::discrete_distribution<int> bg(background.begin(), background.end());
  std::vector<std::discrete_distribution<int>> topics;
  for (int c = 0; c < classes; ++c) {
    std::vector<double> w(static_cast<std::size_t>(p.vocabulary), 0.0);
    std::vector<int> words(static_cast<std::size_t>(p.vocabulary));
    std::iota(words.begin(), words.end(), 0);
    std::shuffle(words.begin(), words.end(), rng);
    for (int k = 0; k < std::min(p.topic_words, p.vocabulary); ++k) w[words[k]] = std::pow(k + 1.0, -0.5);
    topics.emplace_back(w.begin(), w.end());
  }
  std::poisson_distribution<int> length(p.words_per_node);
  Matrix x = Matrix::Zero(n, p.vocabulary);
  for (int v = 0; v < n; ++v) {
    const int len = std::max(1, length(rng));
    std::binomial_distribution<int> from_topic(len, p.topic_share);
    const int t = from_topic(rng);
    for (int w : detail::draw_distinct(topics[labels[v]], t, rng, p.topic_words)) x(v, w) = 1.0;
    for (int w : detail::draw_distinct(bg, len - t, rng, p.vocabulary)) x(v, w) = 1.0;
  }

  std::vector<Edge> edge_list;
  for (auto [a, b] : edges) edge_list.push_back({a, b});
  return AttributedGraph(std::move(x), edge_list, std::move(labels),
                         std::vector<Split>(static_cast<std::size_t>(n), Split::kTrain), classes);
}

}  // namespace praetorian

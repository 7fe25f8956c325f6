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

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Each one follows the defining formula directly.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "praetorian/graph.hpp"
#include "praetorian/localization.hpp"
#include "praetorian/theory.hpp"

namespace praetorian::oracle {

// Dense D^-1/2 (A - A_train + I) D^-1/2.
inline Matrix propagation_matrix(const AttributedGraph& g, const NodeSet& train) {
  const int n = g.num_nodes();
  Matrix a = Matrix::Identity(n, n);
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u == v || !g.has_edge(u, v)) continue;
      const bool both_train = std::count(train.begin(), train.end(), u) && std::count(train.begin(), train.end(), v);
      if (!both_train) a(u, v) = 1.0;
    }
  }
  Eigen::VectorXd d = a.rowwise().sum();
  for (int i = 0; i < n; ++i) d(i) = 1.0 / std::sqrt(d(i));
  return d.asDiagonal() * a * d.asDiagonal();
}

// M^P s^r by explicit matrix powers.
inline std::vector<double> propagate(const AttributedGraph& g, const NodeSet& train,
                                     const std::vector<double>& s, int r, int hops) {
  const Matrix m = propagation_matrix(g, train);
  Matrix mp = Matrix::Identity(m.rows(), m.cols());
  for (int p = 0; p < hops; ++p) mp = mp * m;
  Eigen::VectorXd l0(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    double x = 1.0;
    for (int k = 0; k < r; ++k) x *= s[i];
    l0(static_cast<Eigen::Index>(i)) = x;
  }
  const Eigen::VectorXd out = mp * l0;
  return {out.data(), out.data() + out.size()};
}

// Every cut position in the region; keep the first with the widest gap.
inline std::pair<std::size_t, double> valley(const std::vector<double>& desc, double top_fraction) {
  const auto big_k = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(desc.size())));
  std::vector<double> gaps;
  for (std::size_t k = 1; k < big_k; ++k) gaps.push_back(desc[k - 1] - desc[k]);
  const auto it = std::max_element(gaps.begin(), gaps.end());
  const std::size_t k = static_cast<std::size_t>(it - gaps.begin()) + 1;
  return {k, (desc[k - 1] + desc[k]) / 2};
}

// All-pairs hop distances by repeated relaxation.
inline std::vector<std::vector<int>> hop_distances(const AttributedGraph& g) {
  const int n = g.num_nodes();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int u = 0; u < n; ++u) {
    d[u][u] = 0;
    for (int v = 0; v < n; ++v) {
      if (u != v && g.has_edge(u, v)) d[u][v] = 1;
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  return d;
}

// {u : dist(u, victims) <= hops, u not a victim of any group,
//      L(u) >= min over the group's victims of L, up to rounding}.
inline NodeSet triggers(const AttributedGraph& g, const NodeSet& group_victims, const NodeSet& all_victims,
                        const std::vector<double>& propagated, int hops) {
  if (group_victims.empty()) return {};
  const auto d = hop_distances(g);
  double floor = std::numeric_limits<double>::infinity();
  for (NodeId v : group_victims) floor = std::min(floor, propagated[v]);
  floor -= kScoreTieTolerance * std::abs(floor);
  NodeSet out;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    bool near = false;
    for (NodeId v : group_victims) near |= d[u][v] <= hops;
    const bool victim = std::find(all_victims.begin(), all_victims.end(), u) != all_victims.end();
    if (near && !victim && propagated[u] >= floor) out.push_back(u);
  }
  return out;
}

// Closed-form dividend: Phi_S = sum_{R subset of S} (-1)^{|S|-|R|} Delta(R).
inline RowVector dividend(SubsetMask s, const std::vector<RowVector>& delta) {
  RowVector phi = RowVector::Zero(delta[0].size());
  for (SubsetMask r = s;; r = (r - 1) & s) {
    const int sign = (std::popcount(s) - std::popcount(r)) % 2 ? -1 : 1;
    phi += sign * delta[r];
    if (r == 0) break;
  }
  return phi;
}

}  // namespace praetorian::oracle

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

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "praetorian/error.hpp"

namespace praetorian {

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kDistributionTolerance = 1e-8;

struct Divergence {
  double kl = 0.0;
  double js = 0.0;
};

namespace detail {

inline void check_distribution(std::span<const double> p, const char* name) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw InvalidArgument(std::string(name) + " has a negative or non-finite component");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kDistributionTolerance) {
    throw InvalidArgument(std::string(name) + " does not sum to 1");
  }
}

// sum p ln(p / max(q, eps)), with 0 ln 0 = 0. Natural log.
inline double kl_unchecked(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kProbabilityFloor)));
  }
  return std::max(kl, 0.0);
}

}  // namespace detail

// KL(p || q) and the Jensen-Shannon divergence of two distributions.
inline Divergence kl_js(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("kl_js: length mismatch");
  detail::check_distribution(p, "p");
  detail::check_distribution(q, "q");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  Divergence d;
  d.kl = detail::kl_unchecked(p, q);
  d.js = std::min(0.5 * detail::kl_unchecked(p, m) + 0.5 * detail::kl_unchecked(q, m),
                  std::log(2.0));
  return d;
}

}  // namespace praetorian

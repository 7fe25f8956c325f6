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
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "praetorian/graph.hpp"

namespace praetorian::testing {

// G(n, p) with Gaussian features; every node labeled and in the train split.
inline AttributedGraph random_graph(int n, double p, int d, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(p);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (edge(rng)) edges.push_back({a, b});
    }
  }
  Matrix x(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = gauss(rng);
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = cls(rng);
  return AttributedGraph(std::move(x), edges, std::move(labels),
                         std::vector<Split>(static_cast<std::size_t>(n), Split::kTrain), classes);
}

// Central finite difference of f with respect to every entry of m.
inline Matrix numeric_gradient(Matrix& m, const std::function<double()>& f, double h = 1e-5) {
  Matrix g(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double keep = m(i, j);
      m(i, j) = keep + h;
      const double up = f();
      m(i, j) = keep - h;
      const double down = f();
      m(i, j) = keep;
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, floor). The floor keeps gradients that are
// zero up to finite-difference noise (shift-invariant attention logits, for
// instance) from reading as a 100% error.
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-6) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("praetorian_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace praetorian::testing

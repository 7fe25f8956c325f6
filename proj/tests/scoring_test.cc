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

#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "praetorian/nn/training.hpp"
#include "praetorian/scoring.hpp"
#include "test_support.hpp"

namespace praetorian {
namespace {

using testing::random_graph;
using testing::TempDir;

struct Models {
  nn::Classifier clf;
  nn::MaskedAutoencoder ae;
};

Models small_models(const AttributedGraph& g, nn::Architecture arch, std::uint64_t seed) {
  nn::ModelConfig cfg;
  cfg.architecture = arch;
  cfg.hidden = 8;
  cfg.epochs = 15;
  cfg.seed = seed;
  Models m{nn::train_classifier(g, g.train_nodes(), cfg), nn::MaskedAutoencoder(cfg, g.feature_dim())};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (Eigen::Index j = 0; j < m.ae.mask_token().size(); ++j) m.ae.mask_token()(j) = gauss(rng);
  return m;
}

// Restricted recomputation must agree with a full forward pass on the
// modified graph for every node.
TEST(FastPath, MatchesFullRecomputationOnRandomGraphs) {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AttributedGraph g = random_graph(200, 0.03, 8, 3, 100 + seed);
    const auto arch = seed % 2 ? nn::Architecture::kMeanAggregate : nn::Architecture::kAttention;
    const Models m = small_models(g, arch, seed);
    const NodeSet all = g.all_nodes();
    const ScoreTable fast = score_all(m.ae, m.clf, g, all, true);
    const ScoreTable slow = score_all(m.ae, m.clf, g, all, false);
    for (std::size_t k = 0; k < all.size(); ++k) {
      worst = std::max(worst, std::abs(fast.s_ext[k] - slow.s_ext[k]));
      ASSERT_NEAR(fast.s_ext[k], slow.s_ext[k], 1e-9) << "graph " << seed << " node " << all[k];
      ASSERT_NEAR(fast.s_int[k], slow.s_int[k], 1e-9 * std::max(1.0, slow.s_int[k]));
      ASSERT_NEAR(external_score(m.clf, g, all[k], true), slow.s_ext[k], 1e-9);
    }
  }
  RecordProperty("max_abs_difference", std::to_string(worst));
}

TEST(ExternalScore, IsolatedNodeScoresZeroAndNonnegative) {
  const AttributedGraph g = random_graph(30, 0.05, 4, 2, 3);
  const Models m = small_models(g, nn::Architecture::kAttention, 1);
  for (NodeId v : g.all_nodes()) {
    const double s = external_score(m.clf, g, v);
    EXPECT_GE(s, 0.0);
    if (g.degree(v) == 0) EXPECT_EQ(s, 0.0);
  }
}

TEST(InternalScore, ReciprocalOfLossWithFloor) {
  EXPECT_DOUBLE_EQ(internal_score_from_loss(0.25), 4.0);
  EXPECT_DOUBLE_EQ(internal_score_from_loss(0.0), 1.0 / kLossFloor);
}

TEST(ScoreTable, CsvRoundTripIsExact) {
  TempDir dir("scores");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  ScoreTable t;
  for (NodeId v = 0; v < 40; v += 3) {
    t.nodes.push_back(v);
    t.s_int.push_back(u(rng));
    t.s_ext.push_back(u(rng) / 7);
  }
  save_score_table(t, dir.path() / "a.csv");
  ScoreTable back = load_score_table(dir.path() / "a.csv");
  EXPECT_EQ(back.nodes, t.nodes);
  EXPECT_EQ(back.s_int, t.s_int);
  EXPECT_EQ(back.s_ext, t.s_ext);
  EXPECT_TRUE(back.s_fused.empty());

  t.s_fused = t.s_int;
  t.s_prop = t.s_ext;
  save_score_table(t, dir.path() / "b.csv");
  back = load_score_table(dir.path() / "b.csv");
  EXPECT_EQ(back.s_fused, t.s_fused);
  EXPECT_EQ(back.s_prop, t.s_prop);
  EXPECT_EQ(back.row_of(3), std::optional<std::size_t>(1));
  EXPECT_FALSE(back.row_of(4).has_value());
}

TEST(ScoreTable, RejectsMalformedCsv) {
  TempDir dir("scores_bad");
  std::ofstream(dir.path() / "x.csv") << "node_id,s_int,s_ext,s_fused,s_prop\n0,1,2,,\n0,1,2,,\n";
  EXPECT_THROW(load_score_table(dir.path() / "x.csv"), FormatError);
  std::ofstream(dir.path() / "y.csv") << "node_id,s_int,s_ext,s_fused,s_prop\n0,-1,2,,\n";
  EXPECT_THROW(load_score_table(dir.path() / "y.csv"), InvalidArgument);
  std::ofstream(dir.path() / "z.csv") << "0,1,2\n";
  EXPECT_THROW(load_score_table(dir.path() / "z.csv"), FormatError);
}

TEST(Candidates, TrainingNodesAndTheirTwoHopBall) {
  const AttributedGraph g = random_graph(50, 0.04, 2, 2, 6);
  std::vector<Split> splits(50, Split::kTest);
  splits[0] = splits[1] = Split::kTrain;
  const AttributedGraph h = g.with_splits(splits);
  EXPECT_EQ(default_candidates(h), k_hop_neighborhood(h, NodeSet{0, 1}, 2));
}

}  // namespace
}  // namespace praetorian

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
#include <set>

#include <gtest/gtest.h>

#include "praetorian/graph.hpp"
#include "praetorian/graph_io.hpp"
#include "test_support.hpp"

namespace praetorian {
namespace {

using testing::random_graph;
using testing::TempDir;

TriggerSubgraph triangle(int d, double value = 1.0) {
  TriggerSubgraph t;
  t.features = Matrix::Constant(3, d, value);
  t.edges = {{0, 1}, {1, 2}, {0, 2}};
  return t;
}

std::set<std::pair<NodeId, NodeId>> edge_set(const AttributedGraph& g) {
  std::set<std::pair<NodeId, NodeId>> out;
  for (const Edge& e : g.edges()) out.insert({e.first, e.second});
  return out;
}

TEST(NodeSets, AlgebraMatchesStdSet) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> id(0, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<NodeId> a_raw, b_raw;
    for (int k = 0; k < 15; ++k) a_raw.push_back(id(rng)), b_raw.push_back(id(rng));
    const NodeSet a = make_node_set(a_raw), b = make_node_set(b_raw);
    const std::set<NodeId> sa(a_raw.begin(), a_raw.end()), sb(b_raw.begin(), b_raw.end());
    std::set<NodeId> u = sa, d, i;
    u.insert(sb.begin(), sb.end());
    for (NodeId v : sa) (sb.contains(v) ? i : d).insert(v);
    EXPECT_EQ(set_union(a, b), NodeSet(u.begin(), u.end()));
    EXPECT_EQ(set_difference(a, b), NodeSet(d.begin(), d.end()));
    EXPECT_EQ(set_intersection(a, b), NodeSet(i.begin(), i.end()));
    for (NodeId v = 0; v <= 40; ++v) EXPECT_EQ(contains(a, v), sa.contains(v));
  }
}

TEST(AttributedGraph, SymmetrizesAndDropsDuplicates) {
  const std::vector<Edge> edges = {{0, 1}, {1, 0}, {2, 1}};
  const AttributedGraph g(Matrix::Zero(3, 2), edges, {0, 1, kNoLabel},
                          {Split::kTrain, Split::kTest, Split::kNone}, 2);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_TRUE(g.has_edge(1, 2));
  EXPECT_FALSE(g.has_edge(0, 2));
  EXPECT_EQ(g.degree(1), 2);
  EXPECT_EQ(g.train_nodes(), NodeSet{0});
}

TEST(AttributedGraph, RejectsBadInput) {
  const std::vector<Edge> dangling = {{0, 5}};
  EXPECT_THROW(AttributedGraph(Matrix::Zero(2, 2), dangling, {0, 0}, {Split::kTrain, Split::kTrain}, 1),
               InvalidArgument);
  EXPECT_THROW(AttributedGraph(Matrix::Zero(2, 2), {}, {0, 3}, {Split::kTrain, Split::kTrain}, 2), InvalidArgument);
  EXPECT_THROW(AttributedGraph(Matrix::Zero(2, 2), {}, {0}, {Split::kTrain, Split::kTrain}, 2), InvalidArgument);
}

TEST(Attach, AllEdgesAddsOneEdgePerTriggerNode) {
  const AttributedGraph g = random_graph(10, 0.3, 4, 2, 1);
  const AttachResult r = attach_trigger(g, 4, triangle(4), AttachMode::kAllEdges);
  EXPECT_EQ(r.graph.num_nodes(), 13);
  EXPECT_EQ(r.graph.degree(4), g.degree(4) + 3);
  EXPECT_EQ(r.trigger_nodes.at(0), (NodeSet{10, 11, 12}));
  EXPECT_EQ(r.graph.num_edges(), g.num_edges() + 6);
  for (NodeId t : r.trigger_nodes.at(0)) {
    EXPECT_FALSE(r.graph.has_label(t));
    EXPECT_EQ(r.graph.split(t), Split::kNone);
  }
}

TEST(Attach, SingleEdgeUsesLocalNodeZero) {
  const AttributedGraph g = random_graph(10, 0.3, 4, 2, 1);
  const AttachResult r = attach_trigger(g, 4, triangle(4), AttachMode::kSingleEdge);
  EXPECT_EQ(r.graph.degree(4), g.degree(4) + 1);
  EXPECT_TRUE(r.graph.has_edge(4, 10));
  EXPECT_FALSE(r.graph.has_edge(4, 11));
}

TEST(Attach, ModesCoincideForOneNodeTriggers) {
  const AttributedGraph g = random_graph(8, 0.4, 3, 2, 2);
  TriggerSubgraph t;
  t.features = Matrix::Ones(1, 3);
  const AttachResult a = attach_trigger(g, 2, t, AttachMode::kAllEdges);
  const AttachResult b = attach_trigger(g, 2, t, AttachMode::kSingleEdge);
  EXPECT_EQ(edge_set(a.graph), edge_set(b.graph));
  EXPECT_EQ(a.graph.num_nodes(), g.num_nodes() + 1);
  EXPECT_EQ(a.graph.num_edges(), g.num_edges() + 1);
}

TEST(Attach, RemovingTriggersRecoversTheInput) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AttributedGraph g = random_graph(12, 0.25, 3, 3, seed);
    std::vector<TriggerPlacement> placements = {{1, triangle(3)}, {7, triangle(3, 2.0)}};
    const AttachResult r = attach_triggers(g, placements, AttachMode::kAllEdges);
    NodeSet added;
    for (const auto& t : r.trigger_nodes) added = set_union(added, t);
    const Subgraph back = remove_nodes(r.graph, added);
    EXPECT_EQ(back.original_ids, g.all_nodes());
    EXPECT_EQ(edge_set(back.graph), edge_set(g));
    EXPECT_EQ(back.graph.features(), g.features());
    EXPECT_EQ(back.graph.labels(), g.labels());
  }
}

TEST(Attach, RejectsUnknownVictimAndWrongDimension) {
  const AttributedGraph g = random_graph(5, 0.5, 3, 2, 4);
  EXPECT_THROW(attach_trigger(g, 9, triangle(3), AttachMode::kAllEdges), InvalidArgument);
  EXPECT_THROW(attach_trigger(g, 1, triangle(4), AttachMode::kAllEdges), InvalidArgument);
}

TEST(KHop, MonotoneInHopsAndContainsSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AttributedGraph g = random_graph(30, 0.08, 2, 2, seed);
    const NodeSet seeds = {0, 5};
    NodeSet prev = k_hop_neighborhood(g, seeds, 0);
    EXPECT_EQ(prev, seeds);
    for (int p = 1; p <= 4; ++p) {
      const NodeSet cur = k_hop_neighborhood(g, seeds, p);
      EXPECT_EQ(set_intersection(prev, cur), prev);
      for (NodeId v : cur) {
        if (contains(prev, v)) continue;
        bool touches = false;
        for (NodeId u : g.neighbors(v)) touches |= contains(prev, u);
        EXPECT_TRUE(touches) << "node " << v << " is not one hop beyond the previous ball";
      }
      prev = cur;
    }
  }
}

TEST(MaskNodes, IdempotentForFixedTokenAndSet) {
  const AttributedGraph g = random_graph(9, 0.3, 4, 2, 5);
  const RowVector token = RowVector::Constant(4, 0.5);
  const NodeSet m = {1, 3, 8};
  const AttributedGraph once = mask_nodes(g, m, token);
  const AttributedGraph twice = mask_nodes(once, m, token);
  EXPECT_EQ(once.features(), twice.features());
  for (NodeId v : m) EXPECT_EQ(RowVector(once.feature_row(v)), token);
  EXPECT_EQ(RowVector(once.feature_row(0)), RowVector(g.feature_row(0)));
  EXPECT_EQ(g.features()(1, 0), random_graph(9, 0.3, 4, 2, 5).features()(1, 0));
}

TEST(Propagation, SymmetricNonnegativeAndMatchesDense) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const AttributedGraph g = random_graph(15, 0.3, 2, 2, seed);
    const NodeSet train = {0, 1, 2, 3, 4, 5, 6, 7};
    const PropagationOperator op(g, train);
    const Matrix d = op.dense();
    EXPECT_TRUE(d.isApprox(d.transpose(), 0.0) || (d - d.transpose()).norm() == 0.0);
    EXPECT_GE(d.minCoeff(), 0.0);
    // Oracle: A' = A - A_train + I, D'^{-1/2} A' D'^{-1/2}.
    Matrix a = Matrix::Identity(15, 15);
    for (const Edge& e : g.edges()) {
      if (contains(train, e.first) && contains(train, e.second)) continue;
      a(e.first, e.second) = a(e.second, e.first) = 1.0;
    }
    const Eigen::VectorXd dinv = a.rowwise().sum().array().rsqrt();
    const Matrix oracle = dinv.asDiagonal() * a * dinv.asDiagonal();
    EXPECT_LE((d - oracle).cwiseAbs().maxCoeff(), 1e-15);
    std::vector<double> x(15);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (auto& v : x) v = u(rng);
    const std::vector<double> y = op.apply(x);
    const Eigen::VectorXd ref = oracle * Eigen::Map<const Eigen::VectorXd>(x.data(), 15);
    for (int i = 0; i < 15; ++i) {
      EXPECT_NEAR(y[i], ref[i], 1e-12);
      EXPECT_GE(y[i], 0.0);
    }
  }
}

TEST(InducedSubgraph, KeepsInternalEdgesOnly) {
  const AttributedGraph g = random_graph(12, 0.4, 2, 2, 8);
  const NodeSet keep = {0, 2, 4, 6, 8};
  const Subgraph s = induced_subgraph(g, keep);
  EXPECT_EQ(s.original_ids, keep);
  for (int a = 0; a < s.graph.num_nodes(); ++a) {
    for (int b = 0; b < s.graph.num_nodes(); ++b) {
      if (a != b) EXPECT_EQ(s.graph.has_edge(a, b), g.has_edge(keep[a], keep[b]));
    }
    EXPECT_EQ(s.graph.label(a), g.label(keep[a]));
  }
}

TEST(GraphIo, RoundTripPreservesEverything) {
  TempDir dir("graph_io");
  AttributedGraph g = random_graph(14, 0.3, 5, 3, 9);
  std::vector<int> labels = g.labels();
  labels[3] = kNoLabel;
  std::vector<Split> splits = g.splits();
  splits[4] = Split::kTest;
  splits[5] = Split::kNone;
  g = g.with_labels(labels).with_splits(splits);
  save_graph(g, dir.path());
  const AttributedGraph back = load_graph(dir.path());
  EXPECT_EQ(back.features(), g.features());
  EXPECT_EQ(back.labels(), g.labels());
  EXPECT_EQ(back.splits(), g.splits());
  EXPECT_EQ(edge_set(back), edge_set(g));
  EXPECT_EQ(back.num_classes(), 3);
}

TEST(GraphIo, ReportsFileAndLineOnMalformedInput) {
  TempDir dir("graph_io_bad");
  save_graph(random_graph(4, 0.5, 2, 2, 1), dir.path());
  std::ofstream(dir.path() / "edges.tsv") << "0\t1\n0\t99\n";
  try {
    load_graph(dir.path());
    FAIL() << "dangling edge accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("edges.tsv:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("dangling"), std::string::npos) << e.what();
  }
  save_graph(random_graph(4, 0.5, 2, 2, 1), dir.path());
  std::ofstream(dir.path() / "features.csv") << "1,2\n3\n1,1\n1,1\n";
  EXPECT_THROW(load_graph(dir.path()), FormatError);
  EXPECT_THROW(load_graph(dir.path() / "missing"), Error);
}

TEST(PoisonRecord, JsonRoundTripAndValidation) {
  PoisonRecord r;
  r.victims = {2, 5};
  r.triggers = {{2, {10, 11}}, {5, {12}}};
  r.target_labels = {{0, 1}};
  r.victim_group = {{2, 0}, {5, 0}};
  r.attach_mode = AttachMode::kSingleEdge;
  const PoisonRecord back = poison_record_from_json(to_json(r));
  EXPECT_EQ(back.victims, r.victims);
  EXPECT_EQ(back.triggers, r.triggers);
  EXPECT_EQ(back.target_labels, r.target_labels);
  EXPECT_EQ(back.victim_group, r.victim_group);
  EXPECT_EQ(back.attach_mode, r.attach_mode);
  EXPECT_EQ(r.poisoned_nodes(), (NodeSet{2, 5, 10, 11, 12}));

  PoisonRecord shared = r;
  shared.triggers[5] = {11};
  EXPECT_THROW(shared.validate(), InvalidArgument);
  PoisonRecord overlap = r;
  overlap.triggers[5] = {2};
  EXPECT_THROW(overlap.validate(), InvalidArgument);
}

}  // namespace
}  // namespace praetorian

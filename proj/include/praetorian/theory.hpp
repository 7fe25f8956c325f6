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

// Brute-force influence decomposition. A perturbation is a set T of
// independently toggleable atoms; Delta(S) is the change of the victim's
// logits when exactly the atoms in S are applied. Harsanyi dividends
//
//   Phi_S = Delta(S) - sum_{R strict subset of S} Phi_R
//
// split Delta(T) into first-order effects (EI) and interactions (IC).

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/graph.hpp"
#include "praetorian/nn/models.hpp"

namespace praetorian {

inline constexpr int kMaxAtoms = 20;

// A new node with its features, edges to base nodes, and edges to other
// inserted nodes (realized only when both endpoints are applied).
struct NodeInsertion {
  RowVector features;
  NodeSet base_neighbors;
  std::vector<int> atom_neighbors;  // indices of other NodeInsertion atoms
};

// Adds the base edge if absent, removes it if present.
struct EdgeToggle {
  NodeId a = 0;
  NodeId b = 0;
};

struct FeatureEdit {
  NodeId node = 0;
  RowVector features;
};

using Atom = std::variant<NodeInsertion, EdgeToggle, FeatureEdit>;

using SubsetMask = std::uint32_t;

class Perturbation {
 public:
  Perturbation(AttributedGraph base, NodeId victim, std::vector<Atom> atoms)
      : base_(std::move(base)), victim_(victim), atoms_(std::move(atoms)) {
    base_.check_node(victim_);
    if (atoms_.size() > static_cast<std::size_t>(kMaxAtoms)) {
      throw InvalidArgument("perturbation exceeds the enumeration bound of " +
                            std::to_string(kMaxAtoms) + " atoms");
    }
    std::set<std::pair<NodeId, NodeId>> toggles;
    std::set<NodeId> edited;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      if (const auto* ins = std::get_if<NodeInsertion>(&atoms_[k])) {
        if (ins->features.size() != base_.feature_dim()) throw InvalidArgument("inserted node has wrong feature dimension");
        for (NodeId u : ins->base_neighbors) base_.check_node(u);
        for (int j : ins->atom_neighbors) {
          if (j < 0 || j >= static_cast<int>(atoms_.size()) || j == static_cast<int>(k) ||
              !std::holds_alternative<NodeInsertion>(atoms_[j])) {
            throw InvalidArgument("atom-to-atom edge must join two distinct node insertions");
          }
        }
      } else if (const auto* t = std::get_if<EdgeToggle>(&atoms_[k])) {
        base_.check_node(t->a);
        base_.check_node(t->b);
        if (t->a == t->b) throw InvalidArgument("edge toggle cannot be a self-loop");
        if (!toggles.insert(std::minmax(t->a, t->b)).second) {
          throw InvalidArgument("two atoms toggle the same edge");
        }
      } else {
        const auto& f = std::get<FeatureEdit>(atoms_[k]);
        base_.check_node(f.node);
        if (f.features.size() != base_.feature_dim()) throw InvalidArgument("feature edit has wrong dimension");
        if (!edited.insert(f.node).second) throw InvalidArgument("two atoms edit the same node");
      }
    }
  }

  const AttributedGraph& base() const { return base_; }
  NodeId victim() const { return victim_; }
  int size() const { return static_cast<int>(atoms_.size()); }
  const std::vector<Atom>& atoms() const { return atoms_; }
  SubsetMask full_mask() const { return size() == 32 ? ~0u : ((1u << size()) - 1u); }

  // G_C with exactly the atoms of `s` applied.
  AttributedGraph apply(SubsetMask s) const {
    const int n = base_.num_nodes();
    std::vector<int> new_id(atoms_.size(), -1);
    int next = n;
    for (int k = 0; k < size(); ++k) {
      if ((s >> k & 1u) && std::holds_alternative<NodeInsertion>(atoms_[k])) new_id[k] = next++;
    }
    Matrix x(next, base_.feature_dim());
    x.topRows(n) = base_.features();
    std::set<std::pair<NodeId, NodeId>> edges;
    for (const Edge& e : base_.edges()) edges.insert({e.first, e.second});
    for (int k = 0; k < size(); ++k) {
      if (!(s >> k & 1u)) continue;
      if (const auto* ins = std::get_if<NodeInsertion>(&atoms_[k])) {
        x.row(new_id[k]) = ins->features;
        for (NodeId u : ins->base_neighbors) edges.insert(std::minmax(u, new_id[k]));
        for (int j : ins->atom_neighbors) {
          if (new_id[j] >= 0) edges.insert(std::minmax(new_id[j], new_id[k]));
        }
      } else if (const auto* t = std::get_if<EdgeToggle>(&atoms_[k])) {
        const auto key = std::minmax(t->a, t->b);
        if (!edges.erase(key)) edges.insert(key);
      } else {
        const auto& f = std::get<FeatureEdit>(atoms_[k]);
        x.row(f.node) = f.features;
      }
    }
    std::vector<Edge> edge_list;
    for (auto [a, b] : edges) edge_list.push_back({a, b});
    std::vector<int> labels = base_.labels();
    std::vector<Split> splits = base_.splits();
    labels.resize(static_cast<std::size_t>(next), kNoLabel);
    splits.resize(static_cast<std::size_t>(next), Split::kNone);
    return AttributedGraph(std::move(x), edge_list, std::move(labels), std::move(splits),
                           base_.num_classes());
  }

 private:
  AttributedGraph base_;
  NodeId victim_;
  std::vector<Atom> atoms_;
};

// H_v(G_C + do(S)) - H_v(G_C); exactly zero for the empty set.
inline RowVector influence_delta(const nn::Classifier& model, const Perturbation& pert, SubsetMask s) {
  if (s & ~pert.full_mask()) throw InvalidArgument("subset references atoms outside T");
  if (s == 0) return RowVector::Zero(model.num_classes());
  const RowVector base = model.logits(pert.base()).row(pert.victim());
  return model.logits(pert.apply(s)).row(pert.victim()) - base;
}

struct DividendMap {
  int num_atoms = 0;
  std::map<SubsetMask, RowVector> dividends;  // nonempty subsets
  std::map<SubsetMask, RowVector> deltas;     // includes the empty set
  RowVector total;  // Delta(T)
  RowVector ei;
  RowVector ic;

  // EI/IC aggregation and total from dividends alone.
  static DividendMap from_dividends(int num_atoms, std::map<SubsetMask, RowVector> phi) {
    if (phi.empty()) throw InvalidArgument("dividend map needs at least one subset");
    DividendMap dm;
    dm.num_atoms = num_atoms;
    const auto dim = phi.begin()->second.size();
    dm.total = dm.ei = dm.ic = RowVector::Zero(dim);
    for (const auto& [s, v] : phi) {
      if (s == 0) throw InvalidArgument("the empty set carries no dividend");
      (std::popcount(s) == 1 ? dm.ei : dm.ic) += v;
      dm.total += v;
    }
    dm.dividends = std::move(phi);
    return dm;
  }
};

// Subsets of {0..n-1} ordered by cardinality, then numerically.
inline std::vector<SubsetMask> subsets_by_size(int n) {
  std::vector<SubsetMask> out;
  const SubsetMask full = (n == 32) ? ~0u : ((1u << n) - 1u);
  for (SubsetMask s = 0;; ++s) {
    out.push_back(s);
    if (s == full) break;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](SubsetMask a, SubsetMask b) { return std::popcount(a) < std::popcount(b); });
  return out;
}

// Dividends from a table of Delta values (indexed by mask, Delta[0] = 0) by
// size-ordered recursion; verifies sum Phi = Delta(T).
inline DividendMap harsanyi_from_deltas(int n, const std::vector<RowVector>& delta) {
  if (n < 0 || n > kMaxAtoms) throw InvalidArgument("enumeration bound exceeded");
  if (delta.size() != (std::size_t{1} << n)) throw InvalidArgument("one Delta per subset required");
  std::map<SubsetMask, RowVector> phi;
  std::vector<RowVector> table(delta.size());
  for (SubsetMask s : subsets_by_size(n)) {
    if (s == 0) continue;
    RowVector v = delta[s];
    for (SubsetMask r = (s - 1) & s; r != 0; r = (r - 1) & s) v -= table[r];
    table[s] = v;
    phi.emplace(s, std::move(v));
  }
  DividendMap dm = DividendMap::from_dividends(n, std::move(phi));
  const RowVector& target = delta.back();
  if ((dm.total - target).norm() > 1e-9 * (1.0 + target.norm())) {
    throw InternalError("Harsanyi dividends do not sum to Delta(T)");
  }
  dm.total = target;
  for (std::size_t s = 0; s < delta.size(); ++s) dm.deltas.emplace(static_cast<SubsetMask>(s), delta[s]);
  return dm;
}

inline DividendMap harsanyi_decomposition(const nn::Classifier& model, const Perturbation& pert) {
  const int n = pert.size();
  if (n == 0) throw InvalidArgument("perturbation has no atoms");
  const RowVector base = model.logits(pert.base()).row(pert.victim());
  std::vector<RowVector> delta(std::size_t{1} << n);
  delta[0] = RowVector::Zero(model.num_classes());
  for (SubsetMask s = 1; s < delta.size(); ++s) {
    delta[s] = model.logits(pert.apply(s)).row(pert.victim()) - base;
  }
  return harsanyi_from_deltas(n, delta);
}

enum class Dichotomy : std::uint8_t { kPremiseUnmet, kEiDominant, kIcDominant, kBoth };

inline std::string to_string(Dichotomy d) {
  switch (d) {
    case Dichotomy::kPremiseUnmet: return "premise-unmet";
    case Dichotomy::kEiDominant: return "EI-dominant";
    case Dichotomy::kIcDominant: return "IC-dominant";
    default: return "both";
  }
}

// If ||Delta(T)|| >= theta then ||EI|| >= theta/2 or ||IC|| >= theta/2, since
// Delta(T) = EI + IC. A violation means the decomposition is inconsistent.
inline Dichotomy dichotomy_check(const RowVector& ei, const RowVector& ic, double theta) {
  if (!(theta > 0)) throw InvalidArgument("theta must be positive");
  if ((ei + ic).norm() < theta) return Dichotomy::kPremiseUnmet;
  const bool e = ei.norm() >= theta / 2;
  const bool i = ic.norm() >= theta / 2;
  if (!e && !i) throw InternalError("dichotomy violated: neither EI nor IC reaches theta/2");
  return e && i ? Dichotomy::kBoth : (e ? Dichotomy::kEiDominant : Dichotomy::kIcDominant);
}

inline Dichotomy dichotomy_check(const DividendMap& dm, double theta) {
  return dichotomy_check(dm.ei, dm.ic, theta);
}

inline nlohmann::json to_json(const DividendMap& dm) {
  auto vec = [](const RowVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json phi = nlohmann::json::object();
  for (const auto& [s, v] : dm.dividends) phi[std::to_string(s)] = vec(v);
  nlohmann::json deltas = nlohmann::json::object();
  for (const auto& [s, v] : dm.deltas) deltas[std::to_string(s)] = vec(v);
  return {{"num_atoms", dm.num_atoms}, {"dividends", phi}, {"deltas", deltas},
          {"delta_total", vec(dm.total)}, {"ei", vec(dm.ei)}, {"ic", vec(dm.ic)}};
}

}  // namespace praetorian

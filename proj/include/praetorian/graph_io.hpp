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

// Graph directory format:
//   manifest.json   {"num_nodes", "feature_dim", "num_classes"}
//   nodes.tsv       id <TAB> label or "-" <TAB> train|test|none
//   edges.tsv       src <TAB> dst
//   features.csv    one comma-separated row per node, in nodes.tsv order
// Lines starting with '#' are comments. Edges are symmetrized; duplicates
// and self-loops are dropped.

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "praetorian/graph.hpp"

namespace praetorian {

namespace io_detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\r')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline bool skip_line(std::string_view line) {
  return line.empty() || line == "\r" || line.front() == '#';
}

template <typename T>
T parse_number(std::string_view s, const std::string& file, long line) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(file, line, "cannot parse number '" + std::string(s) + "'");
  }
  return value;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), 0, "missing or unreadable file");
  return in;
}

inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    default: return "none";
  }
}

}  // namespace io_detail

inline AttributedGraph load_graph(const std::filesystem::path& dir) {
  using namespace io_detail;
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest;
  {
    auto in = open_input(manifest_path);
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(manifest_path.string(), 0, e.what());
    }
  }
  long num_nodes = 0, feature_dim = 0, num_classes = 0;
  try {
    num_nodes = manifest.at("num_nodes").get<long>();
    feature_dim = manifest.at("feature_dim").get<long>();
    num_classes = manifest.at("num_classes").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string(), 0, e.what());
  }
  if (num_nodes < 0 || feature_dim < 1 || num_classes < 0) {
    throw FormatError(manifest_path.string(), 0, "invalid counts in manifest");
  }

  const auto nodes_path = (dir / "nodes.tsv").string();
  std::unordered_map<long long, NodeId> id_of;
  std::vector<int> labels;
  std::vector<Split> splits;
  {
    auto in = open_input(nodes_path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (skip_line(line)) continue;
      auto f = split_fields(line, '\t');
      if (f.size() != 3) throw FormatError(nodes_path, lineno, "expected 3 tab-separated fields");
      const auto id = parse_number<long long>(f[0], nodes_path, lineno);
      if (!id_of.emplace(id, static_cast<NodeId>(labels.size())).second) {
        throw FormatError(nodes_path, lineno, "duplicate node id " + std::string(f[0]));
      }
      int label = kNoLabel;
      if (f[1] != "-") {
        label = parse_number<int>(f[1], nodes_path, lineno);
        if (label < 0 || label >= num_classes) {
          throw FormatError(nodes_path, lineno,
                            "label " + std::string(f[1]) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
        }
      }
      Split split;
      if (f[2] == "train") split = Split::kTrain;
      else if (f[2] == "test") split = Split::kTest;
      else if (f[2] == "none") split = Split::kNone;
      else throw FormatError(nodes_path, lineno, "unknown split '" + std::string(f[2]) + "'");
      labels.push_back(label);
      splits.push_back(split);
    }
  }
  if (static_cast<long>(labels.size()) != num_nodes) {
    throw FormatError(nodes_path, 0,
                      "manifest declares " + std::to_string(num_nodes) + " nodes, file has " +
                          std::to_string(labels.size()));
  }

  const auto edges_path = (dir / "edges.tsv").string();
  std::vector<Edge> edges;
  {
    auto in = open_input(edges_path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (skip_line(line)) continue;
      auto f = split_fields(line, '\t');
      if (f.size() != 2) throw FormatError(edges_path, lineno, "expected 2 tab-separated fields");
      NodeId ends[2];
      for (int k = 0; k < 2; ++k) {
        const auto raw = parse_number<long long>(f[k], edges_path, lineno);
        auto it = id_of.find(raw);
        if (it == id_of.end()) {
          throw FormatError(edges_path, lineno,
                            "dangling edge endpoint " + std::string(f[k]));
        }
        ends[k] = it->second;
      }
      if (ends[0] != ends[1]) edges.push_back(Edge::canonical(ends[0], ends[1]));
    }
  }

  const auto features_path = (dir / "features.csv").string();
  Matrix features(num_nodes, feature_dim);
  {
    auto in = open_input(features_path);
    std::string line;
    long lineno = 0;
    long row = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (skip_line(line)) continue;
      if (row >= num_nodes) throw FormatError(features_path, lineno, "more rows than nodes");
      auto f = split_fields(line, ',');
      if (static_cast<long>(f.size()) != feature_dim) {
        throw FormatError(features_path, lineno,
                          "dimension mismatch: expected " + std::to_string(feature_dim) +
                              " values, found " + std::to_string(f.size()));
      }
      for (long c = 0; c < feature_dim; ++c) {
        features(row, c) = parse_number<double>(f[c], features_path, lineno);
      }
      ++row;
    }
    if (row != num_nodes) {
      throw FormatError(features_path, lineno,
                        "expected " + std::to_string(num_nodes) + " rows, found " +
                            std::to_string(row));
    }
  }
  return AttributedGraph(std::move(features), edges, std::move(labels), std::move(splits),
                         static_cast<int>(num_classes));
}

inline void save_graph(const AttributedGraph& g, const std::filesystem::path& dir) {
  using namespace io_detail;
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.json");
    nlohmann::json m = {{"num_nodes", g.num_nodes()},
                        {"feature_dim", g.feature_dim()},
                        {"num_classes", g.num_classes()}};
    out << m.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "nodes.tsv");
    out << "# id\tlabel\tsplit\n";
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      out << v << '\t';
      if (g.has_label(v)) out << g.label(v);
      else out << '-';
      out << '\t' << split_name(g.split(v)) << '\n';
    }
  }
  {
    std::ofstream out(dir / "edges.tsv");
    for (const Edge& e : g.edges()) out << e.first << '\t' << e.second << '\n';
  }
  {
    std::ofstream out(dir / "features.csv");
    std::string line;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      line.clear();
      for (int c = 0; c < g.feature_dim(); ++c) {
        if (c) line += ',';
        line += format_double(g.features()(v, c));
      }
      line += '\n';
      out << line;
    }
    if (!out) throw Error("failed writing " + (dir / "features.csv").string());
  }
}

// Ground truth of an attack. Consumed by evaluation only.
struct PoisonRecord {
  NodeSet victims;
  std::map<NodeId, NodeSet> triggers;     // victim -> trigger ids
  std::map<int, int> target_labels;       // group -> target label
  std::map<NodeId, int> victim_group;     // victim -> group (all 0 when single-target)
  AttachMode attach_mode = AttachMode::kAllEdges;

  int victim_size() const { return static_cast<int>(victims.size()); }

  int target_of(NodeId victim) const {
    auto g = victim_group.find(victim);
    return target_labels.at(g == victim_group.end() ? 0 : g->second);
  }

  NodeSet all_triggers() const {
    NodeSet out;
    for (const auto& [v, t] : triggers) out.insert(out.end(), t.begin(), t.end());
    return make_node_set(std::move(out));
  }

  NodeSet poisoned_nodes() const { return set_union(victims, all_triggers()); }

  // Checks the record's structural invariants; with a graph, also checks that
  // every id exists in it.
  void validate(const AttributedGraph* g = nullptr) const {
    NodeSet seen_triggers;
    for (const auto& [v, t] : triggers) {
      if (!contains(victims, v)) {
        throw InvalidArgument("trigger set keyed by non-victim " + std::to_string(v));
      }
      for (NodeId id : t) {
        if (contains(victims, id)) {
          throw InvalidArgument("node " + std::to_string(id) + " is both victim and trigger");
        }
        if (contains(seen_triggers, id)) {
          throw InvalidArgument("trigger node " + std::to_string(id) +
                                " shared between victims");
        }
        seen_triggers.insert(std::upper_bound(seen_triggers.begin(), seen_triggers.end(), id),
                             id);
      }
    }
    if (target_labels.empty()) throw InvalidArgument("poison record has no target label");
    for (const auto& [v, grp] : victim_group) {
      if (!target_labels.contains(grp)) {
        throw InvalidArgument("victim " + std::to_string(v) + " refers to unknown group");
      }
    }
    if (g != nullptr) {
      for (NodeId v : poisoned_nodes()) {
        if (!g->contains_node(v)) {
          throw InvalidArgument("poison record references node " + std::to_string(v) +
                                " absent from the graph");
        }
      }
    }
  }
};

inline nlohmann::json to_json(const PoisonRecord& r) {
  nlohmann::json j;
  j["victims"] = r.victims;
  nlohmann::json trig = nlohmann::json::object();
  for (const auto& [v, t] : r.triggers) trig[std::to_string(v)] = t;
  j["triggers"] = trig;
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [grp, y] : r.target_labels) targets[std::to_string(grp)] = y;
  j["target_labels"] = targets;
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [v, grp] : r.victim_group) groups[std::to_string(v)] = grp;
  j["victim_groups"] = groups;
  j["attach_mode"] = to_string(r.attach_mode);
  return j;
}

inline PoisonRecord poison_record_from_json(const nlohmann::json& j) {
  PoisonRecord r;
  try {
    r.victims = make_node_set(j.at("victims").get<std::vector<NodeId>>());
    for (const auto& [k, v] : j.at("triggers").items()) {
      r.triggers[std::stoi(k)] = make_node_set(v.get<std::vector<NodeId>>());
    }
    for (const auto& [k, v] : j.at("target_labels").items()) {
      r.target_labels[std::stoi(k)] = v.get<int>();
    }
    if (j.contains("victim_groups")) {
      for (const auto& [k, v] : j.at("victim_groups").items()) {
        r.victim_group[std::stoi(k)] = v.get<int>();
      }
    }
    r.attach_mode = attach_mode_from_string(j.value("attach_mode", "all-edges"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("poison record", 0, e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("poison record", 0, "non-integer key");
  }
  r.validate();
  return r;
}

inline void save_poison_record(const PoisonRecord& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << to_json(r).dump(2) << "\n";
}

inline PoisonRecord load_poison_record(const std::filesystem::path& path) {
  auto in = io_detail::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string(), 0, e.what());
  }
  try {
    return poison_record_from_json(j);
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string(), 0, e.what());
  }
}

}  // namespace praetorian

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

// JSON checkpoints. Doubles are written in shortest round-trip form, so a
// loaded model reproduces the saved one bit for bit.
//
//   {"kind": "classifier" | "autoencoder", "config": {...},
//    "tensors": {"w1": {"rows": r, "cols": c, "data": [row-major]}, ...},
//    "mask_token": [...]}            (autoencoder only)

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "praetorian/nn/models.hpp"

namespace praetorian::nn {

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"architecture", to_string(c.architecture)},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"mask_rate", c.mask_rate},
          {"gamma", c.gamma},
          {"weight_decay", c.weight_decay},
          {"optimizer", to_string(c.optimizer)},
          {"seed", c.seed}};
}

// Missing keys keep the defaults of `base`.
inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {}) {
  try {
    if (j.contains("architecture")) base.architecture = architecture_from_string(j.at("architecture"));
    if (j.contains("layers")) base.layers = j.at("layers");
    if (j.contains("hidden")) base.hidden = j.at("hidden");
    if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate");
    if (j.contains("epochs")) base.epochs = j.at("epochs");
    if (j.contains("mask_rate")) base.mask_rate = j.at("mask_rate");
    if (j.contains("gamma")) base.gamma = j.at("gamma");
    if (j.contains("weight_decay")) base.weight_decay = j.at("weight_decay");
    if (j.contains("optimizer")) base.optimizer = optimizer_from_string(j.at("optimizer"));
    if (j.contains("seed")) base.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return base;
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw FormatError("checkpoint", 0, "tensor shape does not match its data length");
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
  }
  return m;
}

inline nlohmann::json net_to_json(const TwoLayerNet& net) {
  nlohmann::json t = nlohmann::json::object();
  const auto tensors = net.params().tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) t[NetParams::kNames[k]] = matrix_to_json(*tensors[k]);
  return t;
}

inline TwoLayerNet net_from_json(const nlohmann::json& t, Architecture arch) {
  NetParams p;
  auto tensors = p.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) *tensors[k] = matrix_from_json(t.at(NetParams::kNames[k]));
  if (p.w1.cols() != p.w2.rows() || p.b1.cols() != p.w1.cols() || p.b2.cols() != p.w2.cols()) {
    throw FormatError("checkpoint", 0, "inconsistent layer shapes");
  }
  return TwoLayerNet(arch, std::move(p));
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), 0, "missing or unreadable file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string(), 0, e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const Classifier& c) {
  return {{"kind", "classifier"},
          {"config", to_json(c.config())},
          {"tensors", detail::net_to_json(c.net())}};
}

inline nlohmann::json to_json(const MaskedAutoencoder& ae) {
  const RowVector& t = ae.mask_token();
  return {{"kind", "autoencoder"},
          {"config", to_json(ae.config())},
          {"tensors", detail::net_to_json(ae.net())},
          {"mask_token", std::vector<double>(t.data(), t.data() + t.size())}};
}

inline Classifier classifier_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "classifier") throw FormatError("checkpoint", 0, "not a classifier checkpoint");
    const ModelConfig cfg = model_config_from_json(j.at("config"));
    return Classifier(cfg, detail::net_from_json(j.at("tensors"), cfg.architecture));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint", 0, e.what());
  }
}

inline MaskedAutoencoder autoencoder_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "autoencoder") throw FormatError("checkpoint", 0, "not an autoencoder checkpoint");
    const ModelConfig cfg = model_config_from_json(j.at("config"));
    TwoLayerNet net = detail::net_from_json(j.at("tensors"), cfg.architecture);
    const auto v = j.at("mask_token").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != net.in_dim()) {
      throw FormatError("checkpoint", 0, "mask token dimension mismatch");
    }
    RowVector token = Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(v.size()));
    return MaskedAutoencoder(cfg, std::move(net), std::move(token));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint", 0, e.what());
  }
}

inline void save_checkpoint(const Classifier& c, const std::filesystem::path& path) {
  detail::write_json(to_json(c), path);
}
inline void save_checkpoint(const MaskedAutoencoder& ae, const std::filesystem::path& path) {
  detail::write_json(to_json(ae), path);
}
inline Classifier load_classifier(const std::filesystem::path& path) {
  return classifier_from_json(detail::read_json(path));
}
inline MaskedAutoencoder load_autoencoder(const std::filesystem::path& path) {
  return autoencoder_from_json(detail::read_json(path));
}

}  // namespace praetorian::nn

// Copyright 2026 The qmoe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Model checkpoints as self-describing JSON. Doubles are written with
// round-trip precision, so save -> load reproduces every parameter bitwise.

#pragma once

#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"
#include "qmoe/datasets.hpp"
#include "qmoe/error.hpp"
#include "qmoe/moe_models.hpp"

namespace qmoe {

using json = nlohmann::json;

inline constexpr const char* kCheckpointFormat = "qmoe-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  HybridModel model;
  Scaler scaler;
  std::optional<PcaBasis> pca;
  json seed_lineage = json::object();
};

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd m(rows, cols);
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw DataError("checkpoint: matrix row count mismatch");
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = data.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("checkpoint: matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const json& j) { return to_eigen(j.get<std::vector<double>>()); }

}  // namespace detail

inline json model_to_json(const HybridModel& m) {
  json j;
  j["d"] = m.d;
  j["n_classes"] = m.n_classes;
  j["n_experts"] = m.n_experts();
  json router;
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, LinearRouter>) {
          router["kind"] = "linear";
          router["W"] = detail::matrix_to_json(r.W);
          router["b"] = detail::vector_to_json(r.b);
        } else if constexpr (std::is_same_v<R, DeepRouter>) {
          router["kind"] = "deep";
          router["layers"] = json::array();
          for (const auto& l : r.layers) {
            router["layers"].push_back({{"W", detail::matrix_to_json(l.W)}, {"b", detail::vector_to_json(l.b)}});
          }
        } else {
          router["kind"] = "quantum";
          router["n_qubits"] = r.spec.n_qubits();
          router["n_layers"] = r.spec.n_layers();
          router["n_experts"] = r.n_experts;
          router["expert_mapping"] = to_string(r.mapping);
          router["params"] = r.params.values;
        }
      },
      m.router);
  j["router"] = std::move(router);
  j["experts"] = json::array();
  for (const auto& e : m.experts) {
    j["experts"].push_back({{"W", detail::matrix_to_json(e.W)}, {"b", detail::vector_to_json(e.b)}});
  }
  return j;
}

inline HybridModel model_from_json(const json& j) {
  HybridModel m;
  m.d = j.at("d").get<int>();
  m.n_classes = j.at("n_classes").get<int>();
  const auto& router = j.at("router");
  const std::string kind = router.at("kind").get<std::string>();
  if (kind == "linear") {
    m.router = LinearRouter{detail::matrix_from_json(router.at("W")), detail::vector_from_json(router.at("b"))};
  } else if (kind == "deep") {
    DeepRouter r;
    for (const auto& l : router.at("layers")) {
      r.layers.push_back({detail::matrix_from_json(l.at("W")), detail::vector_from_json(l.at("b"))});
    }
    m.router = std::move(r);
  } else if (kind == "quantum") {
    auto spec = CircuitSpec::layered(router.at("n_qubits").get<int>(), router.at("n_layers").get<int>());
    ParamVector params(router.at("params").get<std::vector<double>>());
    if (params.size() != spec.n_params()) throw DataError("checkpoint: quantum parameter count mismatch");
    m.router = QuantumRouter{std::move(spec), std::move(params), router.at("n_experts").get<std::size_t>(),
                             expert_mapping_from_string(router.at("expert_mapping").get<std::string>())};
  } else {
    throw DataError("checkpoint: unknown router kind '" + kind + "'");
  }
  for (const auto& e : j.at("experts")) {
    m.experts.push_back({detail::matrix_from_json(e.at("W")), detail::vector_from_json(e.at("b"))});
  }
  return m;
}

inline json checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["model"] = model_to_json(c.model);
  std::vector<int> constant(c.scaler.constant.begin(), c.scaler.constant.end());
  j["scaler"] = {{"offset", c.scaler.offset}, {"gain", c.scaler.gain}, {"constant", constant}};
  if (c.pca) {
    j["pca"] = {{"mean", detail::vector_to_json(c.pca->mean)},
                {"components", detail::matrix_to_json(c.pca->components)},
                {"singular_values", detail::vector_to_json(c.pca->singular_values)}};
  }
  j["seed_lineage"] = c.seed_lineage;
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", "") != kCheckpointFormat) throw DataError("checkpoint: missing or unknown format tag");
  if (j.value("version", 0) != kCheckpointVersion) throw DataError("checkpoint: unsupported version");
  Checkpoint c;
  c.model = model_from_json(j.at("model"));
  const auto& s = j.at("scaler");
  c.scaler.offset = s.at("offset").get<std::vector<double>>();
  c.scaler.gain = s.at("gain").get<std::vector<double>>();
  for (int flag : s.at("constant").get<std::vector<int>>()) c.scaler.constant.push_back(flag != 0);
  if (j.contains("pca")) {
    const auto& p = j.at("pca");
    c.pca = PcaBasis{detail::vector_from_json(p.at("mean")), detail::matrix_from_json(p.at("components")),
                     detail::vector_from_json(p.at("singular_values"))};
  }
  c.seed_lineage = j.value("seed_lineage", json::object());
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(c).dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path + "': " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace qmoe

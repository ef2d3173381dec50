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

// Declarative experiment configuration. A config is a JSON document;
// absent fields take the defaults below, unknown fields are rejected, and
// every error names the offending field path.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmoe/error.hpp"
#include "qmoe/moe_models.hpp"
#include "qmoe/training.hpp"

namespace qmoe {

using json = nlohmann::json;

enum class ExperimentKind { Ablation, NoiseSweep, ParamSweep, Boundary, TrainSingle };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Ablation: return "ablation";
    case ExperimentKind::NoiseSweep: return "noise_sweep";
    case ExperimentKind::ParamSweep: return "param_sweep";
    case ExperimentKind::Boundary: return "boundary";
    case ExperimentKind::TrainSingle: return "train_single";
  }
  return "ablation";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "ablation") return ExperimentKind::Ablation;
  if (s == "noise_sweep") return ExperimentKind::NoiseSweep;
  if (s == "param_sweep") return ExperimentKind::ParamSweep;
  if (s == "boundary") return ExperimentKind::Boundary;
  if (s == "train_single") return ExperimentKind::TrainSingle;
  throw ConfigError("experiment: unknown kind '" + s + "'");
}

struct DatasetConfig {
  std::string kind = "two_moons";  // two_moons | idx
  // two_moons
  std::size_t n_samples = 1000;
  double noise_sd = 0.1;
  double test_fraction = 0.2;
  // idx
  std::string images;
  std::string labels;
  int class_a = 0;
  int class_b = 1;
  std::size_t n_train = 2000;
  std::size_t n_test = 400;
  int pca_dims = 8;

  int feature_dims() const { return kind == "idx" ? pca_dims : 2; }
};

struct ModelConfig {
  std::string name;
  RouterSpec router;
  std::size_t n_experts = 2;
};

struct NoiseConfig {
  std::vector<double> levels{0.0, 0.005, 0.01, 0.02, 0.03};
  std::string model = "B";
  std::string baseline = "A";
  bool noisy_embedding = false;
};

struct BoundaryConfig {
  int grid_size = 200;
  double margin = 0.1;
  std::vector<std::string> models;  // empty: every model
};

/// Models A (linear router), B (2-qubit, 12-layer quantum router) and
/// C (deep router, two hidden layers of 13), each with two linear experts.
inline std::vector<ModelConfig> default_models() {
  ModelConfig a{"A", {}, 2};
  ModelConfig b{"B", {}, 2};
  b.router.kind = RouterKind::Quantum;
  b.router.n_qubits = 2;
  b.router.n_layers = 12;
  ModelConfig c{"C", {}, 2};
  c.router.kind = RouterKind::Deep;
  c.router.hidden = {13, 13};
  return {a, b, c};
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Ablation;
  DatasetConfig dataset;
  std::vector<ModelConfig> models = default_models();
  TrainConfig train;
  NoiseConfig noise;
  BoundaryConfig boundary;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "results";

  const ModelConfig* find_model(const std::string& name) const {
    for (const auto& m : models) {
      if (m.name == name) return &m;
    }
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// JSON encoding

inline json router_to_json(const RouterSpec& r) {
  return json{{"kind", to_string(r.kind)},
              {"n_qubits", r.n_qubits},
              {"n_layers", r.n_layers},
              {"hidden", r.hidden},
              {"expert_mapping", to_string(r.mapping)}};
}

inline json config_to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) {
    models.push_back({{"name", m.name}, {"router", router_to_json(m.router)}, {"n_experts", m.n_experts}});
  }
  const auto& d = c.dataset;
  const auto& t = c.train;
  return json{
      {"experiment", to_string(c.kind)},
      {"dataset",
       {{"kind", d.kind},
        {"n_samples", d.n_samples},
        {"noise_sd", d.noise_sd},
        {"test_fraction", d.test_fraction},
        {"images", d.images},
        {"labels", d.labels},
        {"class_a", d.class_a},
        {"class_b", d.class_b},
        {"n_train", d.n_train},
        {"n_test", d.n_test},
        {"pca_dims", d.pca_dims}}},
      {"models", models},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"max_epochs", t.max_epochs},
        {"early_stop_patience", t.early_stop_patience},
        {"min_delta", t.min_delta},
        {"validation_fraction", t.validation_fraction},
        {"gradient_backend", to_string(t.gradient_backend)},
        {"record_wall_time", t.record_wall_time}}},
      {"noise",
       {{"levels", c.noise.levels},
        {"model", c.noise.model},
        {"baseline", c.noise.baseline},
        {"noisy_embedding", c.noise.noisy_embedding}}},
      {"boundary", {{"grid_size", c.boundary.grid_size}, {"margin", c.boundary.margin}, {"models", c.boundary.models}}},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir}};
}

namespace detail {

inline bool non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

/// Reads the fields of one JSON object, tracking which keys were used so
/// that leftovers can be reported as unknown.
class FieldReader {
 public:
  FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    const json* v = take(key);
    if (!v) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!non_negative_integer(*v)) throw ConfigError(field(key) + ": expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  template <typename T>
  void read_list(const char* key, std::vector<T>& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_array()) throw ConfigError(field(key) + ": expected an array");
    std::vector<T> items;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      const std::string at = field(key) + "[" + std::to_string(i) + "]";
      if constexpr (std::is_unsigned_v<T>) {
        if (!non_negative_integer(e)) throw ConfigError(at + ": expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!e.is_number_integer()) throw ConfigError(at + ": expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!e.is_number()) throw ConfigError(at + ": expected a number");
      } else {
        if (!e.is_string()) throw ConfigError(at + ": expected a string");
      }
      items.push_back(e.get<T>());
    }
    out = std::move(items);
  }

  const json* take(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline RouterSpec router_from_json(const json& j, const std::string& path) {
  RouterSpec r;
  FieldReader f(j, path);
  std::string kind = to_string(r.kind), mapping = to_string(r.mapping);
  f.read("kind", kind);
  f.read("n_qubits", r.n_qubits);
  f.read("n_layers", r.n_layers);
  f.read_list("hidden", r.hidden);
  f.read("expert_mapping", mapping);
  f.finish();
  try {
    r.kind = router_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(f.field("kind") + ": " + e.what());
  }
  try {
    r.mapping = expert_mapping_from_string(mapping);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(f.field("expert_mapping") + ": " + e.what());
  }
  return r;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  detail::FieldReader top(j, "");
  std::string kind = to_string(c.kind);
  top.read("experiment", kind);
  c.kind = experiment_kind_from_string(kind);

  if (const json* d = top.take("dataset")) {
    detail::FieldReader f(*d, "dataset");
    auto& ds = c.dataset;
    f.read("kind", ds.kind);
    f.read("n_samples", ds.n_samples);
    f.read("noise_sd", ds.noise_sd);
    f.read("test_fraction", ds.test_fraction);
    f.read("images", ds.images);
    f.read("labels", ds.labels);
    f.read("class_a", ds.class_a);
    f.read("class_b", ds.class_b);
    f.read("n_train", ds.n_train);
    f.read("n_test", ds.n_test);
    f.read("pca_dims", ds.pca_dims);
    f.finish();
  }

  if (const json* ms = top.take("models")) {
    if (!ms->is_array()) throw ConfigError("models: expected an array");
    std::vector<ModelConfig> models;
    for (std::size_t i = 0; i < ms->size(); ++i) {
      const std::string path = "models[" + std::to_string(i) + "]";
      detail::FieldReader f((*ms)[i], path);
      ModelConfig m;
      f.read("name", m.name);
      f.read("n_experts", m.n_experts);
      if (const json* r = f.take("router")) m.router = detail::router_from_json(*r, path + ".router");
      f.finish();
      models.push_back(std::move(m));
    }
    c.models = std::move(models);
  }

  if (const json* t = top.take("train")) {
    detail::FieldReader f(*t, "train");
    auto& tc = c.train;
    std::string backend = to_string(tc.gradient_backend);
    f.read("learning_rate", tc.learning_rate);
    f.read("batch_size", tc.batch_size);
    f.read("max_epochs", tc.max_epochs);
    f.read("early_stop_patience", tc.early_stop_patience);
    f.read("min_delta", tc.min_delta);
    f.read("validation_fraction", tc.validation_fraction);
    f.read("gradient_backend", backend);
    f.read("record_wall_time", tc.record_wall_time);
    f.finish();
    try {
      tc.gradient_backend = gradient_backend_from_string(backend);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("train.gradient_backend: ") + e.what());
    }
  }

  if (const json* n = top.take("noise")) {
    detail::FieldReader f(*n, "noise");
    f.read_list("levels", c.noise.levels);
    f.read("model", c.noise.model);
    f.read("baseline", c.noise.baseline);
    f.read("noisy_embedding", c.noise.noisy_embedding);
    f.finish();
  }

  if (const json* b = top.take("boundary")) {
    detail::FieldReader f(*b, "boundary");
    f.read("grid_size", c.boundary.grid_size);
    f.read("margin", c.boundary.margin);
    f.read_list("models", c.boundary.models);
    f.finish();
  }

  top.read_list("seeds", c.seeds);
  top.read("output_dir", c.output_dir);
  top.finish();
  return c;
}

/// Structural and cross-field checks. Throws ConfigError naming the field.
inline void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  const auto& d = c.dataset;
  if (d.kind == "two_moons") {
    if (d.n_samples < 2) throw ConfigError("dataset.n_samples: must be >= 2");
    if (!(d.noise_sd >= 0.0)) throw ConfigError("dataset.noise_sd: must be >= 0");
    if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) throw ConfigError("dataset.test_fraction: must lie in (0, 1)");
  } else if (d.kind == "idx") {
    if (d.images.empty() || !std::filesystem::is_regular_file(d.images)) {
      throw ConfigError("dataset.images: file not found '" + d.images + "'");
    }
    if (d.labels.empty() || !std::filesystem::is_regular_file(d.labels)) {
      throw ConfigError("dataset.labels: file not found '" + d.labels + "'");
    }
    if (d.class_a == d.class_b) throw ConfigError("dataset.class_b: must differ from dataset.class_a");
    if (d.n_train < 2) throw ConfigError("dataset.n_train: must be >= 2");
    if (d.n_test < 1) throw ConfigError("dataset.n_test: must be >= 1");
    if (d.pca_dims < 1) throw ConfigError("dataset.pca_dims: must be >= 1");
  } else {
    throw ConfigError("dataset.kind: expected 'two_moons' or 'idx', got '" + d.kind + "'");
  }

  if (c.kind == ExperimentKind::Boundary && d.feature_dims() != 2) {
    throw ConfigError("dataset: boundary grids need a 2-feature dataset");
  }

  if (c.models.empty()) throw ConfigError("models: at least one model is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const auto& m = c.models[i];
    const std::string path = "models[" + std::to_string(i) + "]";
    if (m.name.empty()) throw ConfigError(path + ".name: must not be empty");
    if (m.name.find_first_of("/\\, ") != std::string::npos) {
      throw ConfigError(path + ".name: must not contain '/', '\\', ',' or spaces");
    }
    if (!names.insert(m.name).second) throw ConfigError(path + ".name: duplicate model name '" + m.name + "'");
    if (m.n_experts < 1) throw ConfigError(path + ".n_experts: must be >= 1");
    if (m.router.kind == RouterKind::Quantum) {
      if (m.router.n_qubits != d.feature_dims()) {
        throw ConfigError(path + ".router.n_qubits: must equal the feature dimension " +
                          std::to_string(d.feature_dims()));
      }
      if (m.router.n_qubits < 1 || m.router.n_qubits > kMaxQubits) {
        throw ConfigError(path + ".router.n_qubits: out of range");
      }
      if (m.router.n_layers < 0) throw ConfigError(path + ".router.n_layers: must be >= 0");
      if (m.n_experts > (std::size_t{1} << m.router.n_qubits)) {
        throw ConfigError(path + ".n_experts: at most 2^n_qubits experts for a quantum router");
      }
    }
    if (m.router.kind == RouterKind::Deep) {
      for (std::size_t k = 0; k < m.router.hidden.size(); ++k) {
        if (m.router.hidden[k] < 1) {
          throw ConfigError(path + ".router.hidden[" + std::to_string(k) + "]: must be >= 1");
        }
      }
    }
  }

  try {
    validate(c.train);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train.") + e.what());
  }

  for (std::size_t i = 0; i < c.noise.levels.size(); ++i) {
    const double e = c.noise.levels[i];
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("noise.levels[" + std::to_string(i) + "]: must lie in [0, 1]");
  }
  if (c.kind == ExperimentKind::NoiseSweep) {
    if (c.noise.levels.empty()) throw ConfigError("noise.levels: at least one level is required");
    const auto* q = c.find_model(c.noise.model);
    if (!q) throw ConfigError("noise.model: no model named '" + c.noise.model + "'");
    if (q->router.kind != RouterKind::Quantum) throw ConfigError("noise.model: must name a quantum-router model");
    if (q->router.n_qubits > kMaxDensityQubits) throw ConfigError("noise.model: too many qubits for density simulation");
    if (!c.find_model(c.noise.baseline)) throw ConfigError("noise.baseline: no model named '" + c.noise.baseline + "'");
  }

  if (c.boundary.grid_size < 1) throw ConfigError("boundary.grid_size: must be >= 1");
  if (!(c.boundary.margin >= 0.0)) throw ConfigError("boundary.margin: must be >= 0");
  for (std::size_t i = 0; i < c.boundary.models.size(); ++i) {
    if (!c.find_model(c.boundary.models[i])) {
      throw ConfigError("boundary.models[" + std::to_string(i) + "]: no model named '" + c.boundary.models[i] + "'");
    }
  }
}

/// Applies one `path=value` override. Path segments are separated by dots;
/// numeric segments index arrays. The value is parsed as JSON when it can
/// be, otherwise taken as a string.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set " + assignment + ": expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string seg = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty()) throw ConfigError("--set " + key + ": empty path segment");
    const bool last = dot == std::string::npos;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(seg, &used);
        if (used != seg.size()) throw std::invalid_argument(seg);
      } catch (const std::exception&) {
        throw ConfigError("--set " + key + ": '" + seg + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("--set " + key + ": index " + seg + " out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("--set " + key + ": '" + seg + "' is not inside an object");
      node = &(*node)[seg];
    }
    if (last) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

inline constexpr const char* kManifestFormat = "qmoe-manifest";

/// Reads a config file, or the `config` section of a run manifest, applies
/// overrides, resolves relative data paths against the file's directory and
/// validates the result.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.is_object() && j.value("format", "") == kManifestFormat) {
    if (!j.contains("config")) throw ConfigError("config: manifest '" + path + "' has no config section");
    j = j.at("config");
  }
  // Overrides into the default model list need it spelled out.
  if (j.is_object() && !j.contains("models")) j["models"] = config_to_json(ExperimentConfig{})["models"];
  for (const auto& o : overrides) apply_override(j, o);
  ExperimentConfig c = config_from_json(j);
  const auto base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&c.dataset.images, &c.dataset.labels}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  validate(c);
  return c;
}

}  // namespace qmoe

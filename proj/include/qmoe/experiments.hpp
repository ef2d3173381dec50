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

// Experiment runners: ablation, noise sweep, parameter sweep, decision
// boundary grids and single training runs. Each writes CSVs plus a
// manifest.json into its output directory. Cells (model x seed, or
// seed x noise level) run on a worker pool; results are gathered by cell
// index and written in a fixed order, so output never depends on the
// thread count.

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qmoe/checkpoint.hpp"
#include "qmoe/datasets.hpp"
#include "qmoe/experiment_config.hpp"
#include "qmoe/moe_models.hpp"
#include "qmoe/training.hpp"

#ifndef QMOE_VERSION
#define QMOE_VERSION "0.0.0"
#endif

namespace qmoe {

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
};

/// Accuracy and the F1 score of class 1. F1 is 0 when precision + recall is 0.
inline Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw DataError("compute_metrics: empty input");
  if (predictions.size() != labels.size()) throw DataError("compute_metrics: length mismatch");
  std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += predictions[i] == labels[i];
    tp += predictions[i] == 1 && labels[i] == 1;
    fp += predictions[i] == 1 && labels[i] != 1;
    fn += predictions[i] != 1 && labels[i] == 1;
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return m;
}

/// One row of a metrics report. `epsilon` is NaN outside noise sweeps.
struct MetricsRow {
  std::string model;
  std::uint64_t seed = 0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double accuracy = 0.0;
  double f1 = 0.0;
  std::size_t params_router = 0;
  std::size_t params_total = 0;
  double eta_router = 0.0;
  double eta_total = 0.0;
  double wall_ms = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<std::string> files;  // written, relative to the output directory
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Median of `field` over the rows belonging to `model` (and `epsilon`, if given).
template <typename Field>
double median_of(const MetricsReport& r, const std::string& model, Field field,
                 std::optional<double> epsilon = std::nullopt) {
  std::vector<double> v;
  for (const auto& row : r.rows) {
    if (row.model != model) continue;
    if (epsilon && !(row.epsilon == *epsilon)) continue;
    v.push_back(static_cast<double>(field(row)));
  }
  return median(std::move(v));
}

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest decimal string that parses back to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    row(header);
  }

  template <typename... Cells>
  void add(const Cells&... cells) {
    std::vector<std::string> v{cell(cells)...};
    row(v);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return fmt(v); }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }

  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Parallel cells

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception (lowest index) is rethrown after all workers finish.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Data preparation

/// Scaled dataset for one seed plus everything fitted on its training rows.
struct PreparedData {
  Dataset data;       // features in [0, pi], rows tagged Train or Test
  Eigen::MatrixXd raw;  // features before angle scaling (PCA space for IDX)
  Scaler scaler;
  std::optional<PcaBasis> pca;
};

class DataSource {
 public:
  explicit DataSource(DatasetConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.kind == "idx") {
      const Dataset all = load_idx(cfg_.images, cfg_.labels);
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < all.rows(); ++i) {
        if (all.labels[i] == cfg_.class_a || all.labels[i] == cfg_.class_b) keep.push_back(i);
      }
      pool_ = select_rows(all, keep);
    }
  }

  PreparedData prepare(std::uint64_t seed) const {
    PreparedData out;
    Dataset ds;
    if (cfg_.kind == "idx") {
      ds = filter_binary(pool_, cfg_.class_a, cfg_.class_b, cfg_.n_train, cfg_.n_test, seed);
      auto [reduced, basis] = pca_reduce(ds, cfg_.pca_dims);
      ds = std::move(reduced);
      out.pca = std::move(basis);
    } else {
      ds = assign_test_split(make_two_moons(cfg_.n_samples, cfg_.noise_sd, seed), cfg_.test_fraction, seed);
    }
    out.raw = ds.X;
    auto [scaled, scaler] = scale_to_angles(ds);
    out.data = std::move(scaled);
    out.scaler = std::move(scaler);
    validate(out.data);
    return out;
  }

 private:
  DatasetConfig cfg_;
  Dataset pool_;
};

// ---------------------------------------------------------------------------
// Training cells

struct CellResult {
  FitResult fit;
  Metrics test;
  ParamCount params;
  double wall_ms = 0.0;
};

inline Metrics test_metrics(const HybridModel& m, const Dataset& data) {
  const Dataset test = subset(data, Split::Test);
  return compute_metrics(predict_all(m, test.X), test.labels);
}

inline CellResult train_cell(const ModelConfig& mc, const PreparedData& pd, TrainConfig train, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  train.seed = seed;
  train.initialize = true;
  HybridModel model = build_model(mc.router, pd.data.d(), pd.data.n_classes, mc.n_experts);
  CellResult r{fit(std::move(model), subset(pd.data, Split::Train), train), {}, {}, 0.0};
  r.test = test_metrics(r.fit.model, pd.data);
  r.params = count_parameters(r.fit.model);
  if (train.record_wall_time) {
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  return r;
}

inline MetricsRow make_row(const std::string& model, std::uint64_t seed, const CellResult& c) {
  MetricsRow row;
  row.model = model;
  row.seed = seed;
  row.accuracy = c.test.accuracy;
  row.f1 = c.test.f1;
  row.params_router = c.params.router;
  row.params_total = c.params.total();
  row.eta_router = efficiency_ratio(c.test.accuracy, c.params.router);
  row.eta_total = efficiency_ratio(c.test.accuracy, c.params.total());
  row.wall_ms = c.wall_ms;
  return row;
}

struct RunOptions {
  int threads = 1;
};

namespace detail {

struct SeedGrid {
  std::vector<PreparedData> data;  // one per seed
  std::vector<CellResult> cells;   // model-major: cells[m * n_seeds + s]
};

inline std::vector<PreparedData> prepare_all(const ExperimentConfig& cfg) {
  const DataSource source(cfg.dataset);
  std::vector<PreparedData> out;
  for (auto seed : cfg.seeds) out.push_back(source.prepare(seed));
  return out;
}

inline SeedGrid train_grid(const ExperimentConfig& cfg, const std::vector<const ModelConfig*>& models,
                           const RunOptions& opts) {
  SeedGrid g;
  g.data = prepare_all(cfg);
  const std::size_t S = cfg.seeds.size();
  g.cells.resize(models.size() * S);
  parallel_for(g.cells.size(), opts.threads, [&](std::size_t i) {
    const std::size_t m = i / S, s = i % S;
    g.cells[i] = train_cell(*models[m], g.data[s], cfg.train, cfg.seeds[s]);
  });
  return g;
}

inline std::vector<const ModelConfig*> all_models(const ExperimentConfig& cfg) {
  std::vector<const ModelConfig*> out;
  for (const auto& m : cfg.models) out.push_back(&m);
  return out;
}

inline void write_manifest(const ExperimentConfig& cfg, const std::vector<PreparedData>& data,
                           const std::filesystem::path& dir, MetricsReport& report) {
  json prov = json::array();
  for (std::size_t s = 0; s < data.size(); ++s) {
    prov.push_back({{"seed", cfg.seeds[s]}, {"dataset", data[s].data.provenance}});
  }
  json files = report.files;
  const json manifest{{"format", kManifestFormat},
                      {"version", QMOE_VERSION},
                      {"experiment", to_string(cfg.kind)},
                      {"config", config_to_json(cfg)},
                      {"seeds", cfg.seeds},
                      {"rng", {{"engine", "mt19937_64"},
                               {"seeding", "seed_seq{seed_lo, seed_hi, stream}"},
                               {"streams", {{"data", 1}, {"split", 2}, {"init", 3}, {"shuffle", 4}, {"validation", 5}}}}},
                      {"provenance", prov},
                      {"outputs", files}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << '\n';
  report.files.push_back("manifest.json");
}

inline std::filesystem::path make_output_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ablation

/// Trains every model on every seed with shared per-seed splits.
/// Writes ablation.csv (per seed) and ablation_summary.csv (medians).
inline MetricsReport run_ablation(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  const auto dir = detail::make_output_dir(cfg);
  const auto models = detail::all_models(cfg);
  const auto grid = detail::train_grid(cfg, models, opts);
  MetricsReport report;
  const std::size_t S = cfg.seeds.size();
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t s = 0; s < S; ++s) report.rows.push_back(make_row(models[m]->name, cfg.seeds[s], grid.cells[m * S + s]));
  }
  {
    CsvWriter w(dir / "ablation.csv", {"model", "seed", "accuracy", "f1", "params_router", "params_total", "eta_router",
                                       "eta_total", "wall_ms"});
    for (const auto& r : report.rows) {
      w.add(r.model, r.seed, r.accuracy, r.f1, r.params_router, r.params_total, r.eta_router, r.eta_total, r.wall_ms);
    }
  }
  {
    CsvWriter w(dir / "ablation_summary.csv",
                {"model", "router", "accuracy", "f1", "params_router", "params_total", "eta_router", "eta_total"});
    for (const auto* m : models) {
      const double acc = median_of(report, m->name, [](const MetricsRow& r) { return r.accuracy; });
      const double f1 = median_of(report, m->name, [](const MetricsRow& r) { return r.f1; });
      const auto& first = grid.cells[static_cast<std::size_t>(m - models.front()) * S];
      w.add(m->name, to_string(m->router.kind), acc, f1, first.params.router, first.params.total(),
            efficiency_ratio(acc, first.params.router), efficiency_ratio(acc, first.params.total()));
    }
  }
  report.files = {"ablation.csv", "ablation_summary.csv"};
  detail::write_manifest(cfg, grid.data, dir, report);
  return report;
}

// ---------------------------------------------------------------------------
// Noise sweep

inline Metrics noisy_test_metrics(const HybridModel& m, const Dataset& data, double eps, NoiseOptions opts) {
  const auto* router = std::get_if<QuantumRouter>(&m.router);
  if (!router) throw std::invalid_argument("noise sweep: model has no quantum router");
  const Dataset test = subset(data, Split::Test);
  std::vector<int> pred;
  for (Eigen::Index i = 0; i < test.X.rows(); ++i) {
    const VectorXd x = test.X.row(i).transpose();
    Eigen::Index arg = 0;
    mix_experts(m, x, gate_quantum_noisy(*router, x, eps, opts)).maxCoeff(&arg);
    pred.push_back(static_cast<int>(arg));
  }
  return compute_metrics(pred, test.labels);
}

/// Trains the quantum model and the classical baseline noiselessly, then
/// evaluates the quantum model on the density-matrix simulator at each
/// noise level. Rows for the quantum model carry epsilon; baseline rows
/// carry NaN. Writes noise_sweep.csv and noise_sweep_summary.csv.
inline MetricsReport run_noise_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  const auto dir = detail::make_output_dir(cfg);
  const ModelConfig* qm = cfg.find_model(cfg.noise.model);
  const ModelConfig* bm = cfg.find_model(cfg.noise.baseline);
  const auto grid = detail::train_grid(cfg, {qm, bm}, opts);
  const std::size_t S = cfg.seeds.size(), E = cfg.noise.levels.size();
  std::vector<Metrics> noisy(S * E);
  const NoiseOptions nopts{cfg.noise.noisy_embedding};
  parallel_for(noisy.size(), opts.threads, [&](std::size_t i) {
    const std::size_t s = i / E, e = i % E;
    noisy[i] = noisy_test_metrics(grid.cells[s].fit.model, grid.data[s].data, cfg.noise.levels[e], nopts);
  });

  MetricsReport report;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t e = 0; e < E; ++e) {
      CellResult c = grid.cells[s];
      c.test = noisy[s * E + e];
      MetricsRow row = make_row(qm->name, cfg.seeds[s], c);
      row.epsilon = cfg.noise.levels[e];
      report.rows.push_back(row);
    }
  }
  for (std::size_t s = 0; s < S; ++s) report.rows.push_back(make_row(bm->name, cfg.seeds[s], grid.cells[S + s]));

  {
    CsvWriter w(dir / "noise_sweep.csv",
                {"seed", "epsilon", "quantum_accuracy", "quantum_f1", "baseline_accuracy", "baseline_f1"});
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t e = 0; e < E; ++e) {
        const auto& q = noisy[s * E + e];
        const auto& b = grid.cells[S + s].test;
        w.add(cfg.seeds[s], cfg.noise.levels[e], q.accuracy, q.f1, b.accuracy, b.f1);
      }
    }
  }
  {
    CsvWriter w(dir / "noise_sweep_summary.csv",
                {"epsilon", "quantum_accuracy", "quantum_f1", "baseline_accuracy", "baseline_f1"});
    const double b_acc = median_of(report, bm->name, [](const MetricsRow& r) { return r.accuracy; });
    const double b_f1 = median_of(report, bm->name, [](const MetricsRow& r) { return r.f1; });
    for (double eps : cfg.noise.levels) {
      w.add(eps, median_of(report, qm->name, [](const MetricsRow& r) { return r.accuracy; }, eps),
            median_of(report, qm->name, [](const MetricsRow& r) { return r.f1; }, eps), b_acc, b_f1);
    }
  }
  report.files = {"noise_sweep.csv", "noise_sweep_summary.csv"};
  detail::write_manifest(cfg, grid.data, dir, report);
  return report;
}

// ---------------------------------------------------------------------------
// Parameter sweep

/// Trains each configured model (one point of the accuracy-vs-parameters
/// frontier) on every seed. Writes param_sweep.csv and param_sweep_summary.csv.
inline MetricsReport run_param_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  const auto dir = detail::make_output_dir(cfg);
  const auto models = detail::all_models(cfg);
  const auto grid = detail::train_grid(cfg, models, opts);
  const std::size_t S = cfg.seeds.size();
  MetricsReport report;
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t s = 0; s < S; ++s) report.rows.push_back(make_row(models[m]->name, cfg.seeds[s], grid.cells[m * S + s]));
  }
  {
    CsvWriter w(dir / "param_sweep.csv", {"model", "router", "seed", "params_router", "params_total", "accuracy", "f1",
                                          "eta_router", "eta_total"});
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const auto& r = report.rows[i];
      w.add(r.model, to_string(models[i / S]->router.kind), r.seed, r.params_router, r.params_total, r.accuracy, r.f1,
            r.eta_router, r.eta_total);
    }
  }
  {
    CsvWriter w(dir / "param_sweep_summary.csv",
                {"model", "router", "params_router", "params_total", "accuracy", "f1", "eta_router", "eta_total"});
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto& name = models[m]->name;
      const double acc = median_of(report, name, [](const MetricsRow& r) { return r.accuracy; });
      const auto& p = grid.cells[m * S].params;
      w.add(name, to_string(models[m]->router.kind), p.router, p.total(), acc,
            median_of(report, name, [](const MetricsRow& r) { return r.f1; }), efficiency_ratio(acc, p.router),
            efficiency_ratio(acc, p.total()));
    }
  }
  report.files = {"param_sweep.csv", "param_sweep_summary.csv"};
  detail::write_manifest(cfg, grid.data, dir, report);
  return report;
}

// ---------------------------------------------------------------------------
// Decision boundary grid

struct BoundaryPoint {
  double x0 = 0.0;
  double x1 = 0.0;
  int predicted_class = 0;
  VectorXd gate;
};

/// Evaluates `model` on a G x G grid spanning the bounding box of `raw`
/// widened by `margin` times its extent on each side. Grid points are in
/// raw feature space and pass through `scaler` before the model.
inline std::vector<BoundaryPoint> boundary_grid(const HybridModel& model, const Scaler& scaler,
                                                const Eigen::MatrixXd& raw, int grid_size, double margin) {
  if (raw.cols() != 2) throw DataError("boundary: decision grids need 2-feature data, got " + std::to_string(raw.cols()));
  if (raw.rows() == 0) throw DataError("boundary: empty dataset");
  if (grid_size < 1) throw std::invalid_argument("boundary: grid_size must be >= 1");
  std::array<double, 2> lo{}, hi{};
  for (int j = 0; j < 2; ++j) {
    const double a = raw.col(j).minCoeff(), b = raw.col(j).maxCoeff();
    lo[static_cast<std::size_t>(j)] = a - margin * (b - a);
    hi[static_cast<std::size_t>(j)] = b + margin * (b - a);
  }
  auto coord = [&](int j, int i) {
    const auto k = static_cast<std::size_t>(j);
    if (grid_size == 1) return 0.5 * (lo[k] + hi[k]);
    return lo[k] + (hi[k] - lo[k]) * i / (grid_size - 1);
  };
  std::vector<BoundaryPoint> out;
  out.reserve(static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) {
    for (int k = 0; k < grid_size; ++k) {
      BoundaryPoint p;
      p.x0 = coord(0, k);
      p.x1 = coord(1, i);
      VectorXd x(2);
      x << scaler.apply(0, p.x0), scaler.apply(1, p.x1);
      const auto fr = forward(model, x);
      Eigen::Index arg = 0;
      fr.logits.maxCoeff(&arg);
      p.predicted_class = static_cast<int>(arg);
      p.gate = fr.gate;
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline void write_boundary_csv(const std::vector<BoundaryPoint>& grid, std::size_t n_experts,
                               const std::filesystem::path& path) {
  std::vector<std::string> header{"x0", "x1", "predicted_class"};
  for (std::size_t e = 0; e < n_experts; ++e) header.push_back("gate_" + std::to_string(e));
  CsvWriter w(path, header);
  for (const auto& p : grid) {
    std::vector<std::string> cells{fmt(p.x0), fmt(p.x1), std::to_string(p.predicted_class)};
    for (Eigen::Index e = 0; e < p.gate.size(); ++e) cells.push_back(fmt(p.gate(e)));
    w.row(cells);
  }
}

/// Trains the selected models per seed and writes
/// boundary_<model>_seed<seed>.csv for each, plus boundary_data_seed<seed>.csv
/// holding the raw points for overlay plots.
inline MetricsReport run_boundary(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  const auto dir = detail::make_output_dir(cfg);
  std::vector<const ModelConfig*> models;
  if (cfg.boundary.models.empty()) {
    models = detail::all_models(cfg);
  } else {
    for (const auto& name : cfg.boundary.models) models.push_back(cfg.find_model(name));
  }
  const auto grid = detail::train_grid(cfg, models, opts);
  const std::size_t S = cfg.seeds.size();
  MetricsReport report;
  std::vector<std::vector<BoundaryPoint>> grids(grid.cells.size());
  parallel_for(grids.size(), opts.threads, [&](std::size_t i) {
    const auto& pd = grid.data[i % S];
    grids[i] = boundary_grid(grid.cells[i].fit.model, pd.scaler, pd.raw, cfg.boundary.grid_size, cfg.boundary.margin);
  });
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t i = m * S + s;
      report.rows.push_back(make_row(models[m]->name, cfg.seeds[s], grid.cells[i]));
      const std::string name = "boundary_" + models[m]->name + "_seed" + std::to_string(cfg.seeds[s]) + ".csv";
      write_boundary_csv(grids[i], models[m]->n_experts, dir / name);
      report.files.push_back(name);
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    const std::string name = "boundary_data_seed" + std::to_string(cfg.seeds[s]) + ".csv";
    Dataset raw = grid.data[s].data;
    raw.X = grid.data[s].raw;
    write_csv(raw, (dir / name).string());
    report.files.push_back(name);
  }
  detail::write_manifest(cfg, grid.data, dir, report);
  return report;
}

// ---------------------------------------------------------------------------
// Single training runs

/// Trains every model per seed, writing trace_<model>_seed<seed>.csv,
/// checkpoint_<model>_seed<seed>.json and train_summary.csv. The summary
/// reports the first epoch whose validation accuracy reaches 0.9 (0 if
/// never) and the training loss at epochs 1 and 10.
inline MetricsReport run_train_single(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  const auto dir = detail::make_output_dir(cfg);
  const auto models = detail::all_models(cfg);
  const auto grid = detail::train_grid(cfg, models, opts);
  const std::size_t S = cfg.seeds.size();
  MetricsReport report;
  CsvWriter summary(dir / "train_summary.csv",
                    {"model", "seed", "epochs_run", "best_epoch", "best_val_loss", "first_epoch_val_acc_0.9",
                     "train_loss_epoch1", "train_loss_epoch10", "test_accuracy", "test_f1"});
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t s = 0; s < S; ++s) {
      const auto& cell = grid.cells[m * S + s];
      const auto& name = models[m]->name;
      const auto seed = cfg.seeds[s];
      report.rows.push_back(make_row(name, seed, cell));
      const std::string stem = name + "_seed" + std::to_string(seed);
      write_trace_csv(cell.fit.trace, models[m]->n_experts, (dir / ("trace_" + stem + ".csv")).string());
      Checkpoint ck{cell.fit.model, grid.data[s].scaler, grid.data[s].pca,
                    json{{"seed", seed}, {"dataset", grid.data[s].data.provenance}, {"model", name}}};
      save_checkpoint(ck, (dir / ("checkpoint_" + stem + ".json")).string());
      report.files.push_back("trace_" + stem + ".csv");
      report.files.push_back("checkpoint_" + stem + ".json");

      const auto& ep = cell.fit.trace.epochs;
      int reach = 0;
      for (const auto& e : ep) {
        if (e.val_acc >= 0.9) {
          reach = e.epoch;
          break;
        }
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      const double l1 = ep.empty() ? nan : ep.front().train_loss;
      const double l10 = ep.size() >= 10 ? ep[9].train_loss : (ep.empty() ? nan : ep.back().train_loss);
      summary.add(name, seed, ep.size(), cell.fit.trace.best_epoch, cell.fit.trace.best_val_loss, reach, l1, l10,
                  cell.test.accuracy, cell.test.f1);
    }
  }
  report.files.insert(report.files.begin(), "train_summary.csv");
  detail::write_manifest(cfg, grid.data, dir, report);
  return report;
}

inline MetricsReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  switch (cfg.kind) {
    case ExperimentKind::Ablation: return run_ablation(cfg, opts);
    case ExperimentKind::NoiseSweep: return run_noise_sweep(cfg, opts);
    case ExperimentKind::ParamSweep: return run_param_sweep(cfg, opts);
    case ExperimentKind::Boundary: return run_boundary(cfg, opts);
    case ExperimentKind::TrainSingle: return run_train_single(cfg, opts);
  }
  throw ConfigError("experiment: unknown kind");
}

}  // namespace qmoe

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

// qmoe <ablation|noise-sweep|param-sweep|boundary|train> --config <path>
//      [--set k=v]... [--out <dir>] [--seed-list 1,2,3] [--threads N]
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 runtime failure.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qmoe/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

const std::map<std::string, qmoe::ExperimentKind> kSubcommands{
    {"ablation", qmoe::ExperimentKind::Ablation},     {"noise-sweep", qmoe::ExperimentKind::NoiseSweep},
    {"param-sweep", qmoe::ExperimentKind::ParamSweep}, {"boundary", qmoe::ExperimentKind::Boundary},
    {"train", qmoe::ExperimentKind::TrainSingle},
};

struct Args {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string seed_list;
  int threads = 0;
};

std::vector<std::string> seed_overrides(const std::string& list) {
  qmoe::json seeds = qmoe::json::array();
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const std::string item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      if (item.empty() || item[0] == '-') throw std::invalid_argument(item);
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw qmoe::ConfigError("--seed-list: '" + item + "' is not a non-negative integer");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return {"seeds=" + seeds.dump()};
}

void print_summary(const qmoe::ExperimentConfig& cfg, const qmoe::MetricsReport& report) {
  std::cout << "experiment " << qmoe::to_string(cfg.kind) << " -> " << cfg.output_dir << '\n';
  std::vector<std::string> seen;
  for (const auto& row : report.rows) {
    if (std::find(seen.begin(), seen.end(), row.model) != seen.end()) continue;
    seen.push_back(row.model);
    const double acc = qmoe::median_of(report, row.model, [](const qmoe::MetricsRow& r) { return r.accuracy; });
    std::cout << "  " << row.model << ": median accuracy " << acc << ", router params " << row.params_router
              << ", total params " << row.params_total << '\n';
  }
  for (const auto& f : report.files) std::cout << "  wrote " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid quantum-classical mixture-of-experts experiment harness"};
  app.set_version_flag("--version", std::string(QMOE_VERSION));
  app.require_subcommand(1);
  Args args;
  for (const auto& [name, kind] : kSubcommands) {
    auto* sub = app.add_subcommand(name, "run the " + qmoe::to_string(kind) + " experiment");
    sub->add_option("--config", args.config, "experiment config or run manifest (JSON)")->required();
    sub->add_option("--set", args.overrides, "override a config field, e.g. --set train.max_epochs=20");
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed-list", args.seed_list, "comma-separated seeds, e.g. 1,2,3");
    sub->add_option("--threads", args.threads, "worker threads (default: QMOE_THREADS or 1)")
        ->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    auto overrides = args.overrides;
    overrides.insert(overrides.begin(), "experiment=\"" + qmoe::to_string(kSubcommands.at(sub)) + "\"");
    if (!args.seed_list.empty()) {
      const auto s = seed_overrides(args.seed_list);
      overrides.insert(overrides.end(), s.begin(), s.end());
    }
    if (!args.out.empty()) overrides.push_back("output_dir=" + qmoe::json(args.out).dump());
    const qmoe::ExperimentConfig cfg = qmoe::load_config(args.config, overrides);

    qmoe::RunOptions opts;
    opts.threads = args.threads;
    if (opts.threads <= 0) {
      const char* env = std::getenv("QMOE_THREADS");
      opts.threads = env ? std::atoi(env) : 1;
      if (opts.threads <= 0) throw qmoe::ConfigError("QMOE_THREADS: must be a positive integer");
    }
    print_summary(cfg, qmoe::run_experiment(cfg, opts));
    return 0;
  } catch (const qmoe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qmoe::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

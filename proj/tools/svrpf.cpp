// Copyright 2026 The svrpf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// svrpf command-line experiment runner.
//
//   svrpf run --config <path> [--seed S] [--out DIR]
//   svrpf sweep --config <path> --n 50,100,200,500 [--seed S] [--out DIR]
//   svrpf validate [--config <path>]
//
// Every config key can also be set through the environment as SVRPF_<KEY>, dots replaced by underscores
// (model.r -> SVRPF_MODEL_R). Precedence: command-line flag, then environment, then config file.

#include <CLI11.hpp>

#include <svrpf/harness.hpp>
#include <svrpf/validate.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

namespace {

svrpf::Config load_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                          const std::optional<std::string>& out) {
  svrpf::Config cfg = path.empty() ? svrpf::Config::parse("") : svrpf::Config::load(path);
  cfg.apply_environment();
  if (seed) {
    cfg.set("experiment.seed", std::to_string(*seed));
  }
  if (out) {
    cfg.set("output.dir", *out);
  }
  return cfg;
}

void print_summary(const std::vector<svrpf::SummaryRow>& rows) {
  std::printf("%-14s %12s %12s %10s %10s %9s\n", "filter", "rmse_mean", "rmse_sd", "coverage", "ms/step", "failures");
  for (const auto& r : rows) {
    std::printf("%-14s %12.5f %12.5f %10.4f %10.4f %9zu\n", r.filter.c_str(), r.rmse_mean, r.rmse_sd, r.coverage,
                r.ms_mean, r.failures);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle filter experiments with SVR density resampling"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::vector<std::size_t> n_values;

  auto* run = app.add_subcommand("run", "Monte Carlo runs of every configured filter; writes steps.csv and summary.csv");
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "base seed (overrides experiment.seed)");
  run->add_option("--out", out_dir, "output directory (overrides output.dir)");

  auto* sweep = app.add_subcommand("sweep", "RMSE against particle count; writes sweep.csv");
  sweep->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--n", n_values, "ascending particle counts")->required()->delimiter(',');
  sweep->add_option("--seed", seed, "base seed (overrides experiment.seed)");
  sweep->add_option("--out", out_dir, "output directory (overrides output.dir)");

  auto* validate = app.add_subcommand("validate", "reduced-size property checks with measured values");
  validate->add_option("--config", config_path, "config file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = svrpf::ExperimentConfig::from(load_config(config_path, seed, out_dir));
    if (run->parsed()) {
      const auto records = svrpf::run_experiment(cfg);
      const auto rows = svrpf::summarize(cfg, records);
      const auto steps = svrpf::write_output(cfg.out_dir, "steps.csv",
                                             [&](std::ostream& os) { svrpf::write_steps_csv(os, records); });
      const auto summary = svrpf::write_output(cfg.out_dir, "summary.csv",
                                               [&](std::ostream& os) { svrpf::write_summary_csv(os, rows); });
      print_summary(rows);
      std::printf("wrote %s and %s\n", steps.string().c_str(), summary.string().c_str());
      return 0;
    }
    if (sweep->parsed()) {
      const auto rows = svrpf::run_sweep(cfg, n_values);
      const auto path = svrpf::write_output(cfg.out_dir, "sweep.csv",
                                            [&](std::ostream& os) { svrpf::write_sweep_csv(os, rows); });
      for (const auto& r : rows) {
        std::printf("%-14s n=%-6zu rmse %.5f (sd %.5f)  %.4f ms/step\n", r.filter.c_str(), r.n, r.rmse_mean, r.rmse_sd,
                    r.ms_mean);
      }
      std::printf("wrote %s\n", path.string().c_str());
      return 0;
    }
    const auto report = svrpf::run_validation(cfg);
    svrpf::print_report(stdout, report);
    return report.passed() ? 0 : 1;
  } catch (const svrpf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <svrpf/svrpf.hpp>

#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace svrpf;
using Clock = std::chrono::steady_clock;

// Seeds fixed before any criterion was evaluated.
constexpr std::uint64_t kKalmanSeed = 1001;
constexpr std::uint64_t kResamplingSeed = 1002;
constexpr std::uint64_t kMigrationSeed = 1003;
constexpr std::uint64_t kGrowthSeed = 1004;
constexpr std::uint64_t kDensitySeed = 1005;
constexpr std::uint64_t kReproSeed = 1006;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const char* name, bool passed, const std::string& measured) {
  std::printf("%s  criterion %d (%s): %s\n", passed ? "PASS" : "FAIL", id, name, measured.c_str());
  std::fflush(stdout);
  failures += passed ? 0 : 1;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[1024];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

void kalman_equivalence() {
  const auto start = Clock::now();
  const auto model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0);
  SvrpfSettings settings;
  settings.n = 5000;
  settings.m = 10000;
  struct Case {
    const char* name;
    ProposalKind kind;
    bool svr;
  };
  const Case cases[] = {{"gpf", ProposalKind::prior, false},
                        {"epf", ProposalKind::ekf, false},
                        {"upf", ProposalKind::ukf, false},
                        {"svrpf", ProposalKind::prior, true}};
  bool ok = true;
  std::string measured;
  for (const auto& c : cases) {
    const auto res = kalman_agreement(model, c.kind, c.svr, settings, 50, 20, kKalmanSeed);
    ok = ok && res.fraction() >= 0.95;
    measured += fmt("%s %zu/%zu (max z %.2f); ", c.name, res.within, res.steps, res.max_z);
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed <= 300.0;
  report(1, "Kalman-oracle equivalence", ok, measured + fmt("need >= 95%% each, %.0f s of 300 s", elapsed));
}

void resampling_unbiasedness_criterion() {
  const auto start = Clock::now();
  const ResamplingScheme schemes[] = {ResamplingScheme::systematic, ResamplingScheme::multinomial,
                                      ResamplingScheme::min_variance, ResamplingScheme::residual,
                                      ResamplingScheme::branching};
  RandomStream root(kResamplingSeed, 0);
  auto streams = root.split(5);
  bool ok = true;
  std::string measured;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto res = resampling_unbiasedness(schemes[k], 100, 100, 10000, streams[k]);
    bool scheme_ok = res.violations == 0;
    measured += fmt("%s %zu/%zu beyond 3 se (max z %.2f", std::string(to_string(schemes[k])).c_str(), res.violations,
                    res.comparisons, res.max_z);
    if (schemes[k] == ResamplingScheme::min_variance) {
      scheme_ok = scheme_ok && res.max_single_deviation < 1.0;
      measured += fmt(", max single |count - Nw| %.3f", res.max_single_deviation);
    }
    measured += "); ";
    ok = ok && scheme_ok;
  }
  // Under exact unbiasedness each entry still exceeds 3 se with probability 0.0027; the familywise bound is
  // printed for reference only and does not change the verdict.
  const double bonferroni = boost::math::quantile(boost::math::normal(), 1.0 - 0.0005 / 1e4);
  const double elapsed = seconds_since(start);
  ok = ok && elapsed <= 120.0;
  report(2, "resampling unbiasedness", ok,
         measured + fmt("familywise z at 0.1%% would be %.2f; %.0f s of 120 s", bonferroni, elapsed));
}

void migration_criteria() {
  const MigrationSetup setup;
  RandomStream root(kMigrationSeed, 0);
  auto streams = root.split(100);
  int migration_ok = 0;
  int posterior_ok = 0;
  double worst_migration = 0.0;
  double worst_posterior = 0.0;
  int errors = 0;
  for (auto& s : streams) {
    try {
      const auto res = migration_check(setup, s);
      migration_ok += res.ks_migration <= 0.05 ? 1 : 0;
      posterior_ok += res.ks_posterior <= 0.05 ? 1 : 0;
      worst_migration = std::max(worst_migration, res.ks_migration);
      worst_posterior = std::max(worst_posterior, res.ks_posterior);
    } catch (const Error& e) {
      ++errors;
      std::fprintf(stderr, "migration trial failed: %s\n", e.what());
    }
  }
  report(3, "migrated vs source CDF", migration_ok >= 95,
         fmt("%d/100 trials KS <= 0.05 (need 95), max KS %.4f, %d fit errors", migration_ok, worst_migration, errors));
  report(4, "mixed-weight CDF vs Bayes posterior", posterior_ok >= 90,
         fmt("%d/100 trials KS <= 0.05 (need 90), max KS %.4f, %d fit errors", posterior_ok, worst_posterior, errors));
}

ExperimentConfig growth_config(double r) {
  Config cfg;
  cfg.set("model.name", "nonlinear_growth");
  cfg.set("model.q", "10");
  cfg.set("model.r", format_real(r));
  cfg.set("experiment.steps", "100");
  cfg.set("experiment.runs", "100");
  cfg.set("experiment.seed", std::to_string(kGrowthSeed));
  cfg.set("filters", "gpf,svrpf");
  cfg.set("filter.n", "100");
  cfg.set("filter.svrpf.m", "200");
  return ExperimentConfig::from(cfg);
}

struct GrowthOutcome {
  std::vector<double> gpf;
  std::vector<double> svr;
  double gpf_coverage = 0.0;
  double svr_coverage = 0.0;
  std::size_t failed = 0;
};

GrowthOutcome growth_experiment(double r) {
  const auto cfg = growth_config(r);
  const auto records = run_experiment(cfg);
  GrowthOutcome out;
  for (const auto& rec : records) {
    const auto* g = rec.find("gpf");
    const auto* s = rec.find("svrpf");
    if (g == nullptr || s == nullptr || g->failed || s->failed) {
      ++out.failed;
      continue;
    }
    out.gpf.push_back(rmse(g->estimates, rec.truth));
    out.svr.push_back(rmse(s->estimates, rec.truth));
  }
  out.gpf_coverage = ir_coverage(records, "gpf");
  out.svr_coverage = ir_coverage(records, "svrpf");
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

void growth_criteria() {
  const auto start = Clock::now();
  const auto narrow = growth_experiment(0.1);
  const auto wide = growth_experiment(5.0);
  const double elapsed = seconds_since(start);
  const double p = narrow.svr.empty() ? 1.0 : paired_sign_test(narrow.svr, narrow.gpf);
  const bool narrow_ok = narrow.failed == 0 && mean(narrow.svr) < mean(narrow.gpf) && p < 0.05;
  const bool wide_ok = wide.failed == 0 && mean(wide.svr) <= mean(wide.gpf) + 0.05;
  report(5, "directional RMSE", narrow_ok && wide_ok && elapsed <= 600.0,
         fmt("r=0.1: svrpf %.3f vs gpf %.3f, sign-test p %.3g; r=5: svrpf %.3f vs gpf %.3f (allowed +0.05); "
             "%zu failed runs; %.0f s of 600 s",
             mean(narrow.svr), mean(narrow.gpf), p, mean(wide.svr), mean(wide.gpf), narrow.failed + wide.failed,
             elapsed));
  report(6, "IR coverage", narrow.svr_coverage >= 0.95 && narrow.svr_coverage >= narrow.gpf_coverage,
         fmt("r=0.1: svrpf %.4f (need 0.95), gpf %.4f", narrow.svr_coverage, narrow.gpf_coverage));
}

void density_soundness() {
  RandomStream rng(kDensitySeed, 0);
  Matrix x(1, 200);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    x(0, i) = rng.standard_normal();
  }
  const auto fit = fit_density(x, std::vector<double>(200, 1.0 / 200.0));
  const double beta_error = std::abs(fit.beta().sum() - 1.0);
  const double reach = 12.0 * fit.kernel().bandwidth()[0] * fit.scales().maxCoeff();
  const double lo = x.minCoeff() - reach;
  const double hi = x.maxCoeff() + reach;
  const auto trapezoid = [&](auto f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    double s = 0.5 * (f(a) + f(b));
    for (int k = 1; k < panels; ++k) {
      s += f(a + h * k);
    }
    return s * h;
  };
  const auto density = [&](double t) { return fit.density(Vector::Constant(1, t)); };
  const double mass = trapezoid(density, lo, hi, 40000);
  const double l1 = trapezoid([&](double t) { return std::abs(density(t) - normal_pdf(t)); }, -4.0, 4.0, 8000);
  const auto& diag = fit.diagnostics();
  const bool ok = beta_error <= 1e-9 && std::abs(mass - 1.0) <= 1e-3 && diag.max_cdf_residual <= diag.epsilon &&
                  l1 <= 0.15;
  report(7, "SVR density soundness", ok,
         fmt("|sum beta - 1| %.2g, mass %.6f, max CDF residual %.4f vs epsilon %.4f, L1 on [-4,4] %.4f (limit 0.15)",
             beta_error, mass, diag.max_cdf_residual, diag.epsilon, l1));
}

// Reads a CSV and blanks the runtime columns (ms, ms_mean).
std::string masked_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::string out;
  std::vector<bool> masked;
  bool header = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (header) {
      for (const auto& c : cells) {
        masked.push_back(c == "ms" || c == "ms_mean");
      }
      header = false;
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      out += (k < masked.size() && masked[k] ? std::string("*") : cells[k]) + (k + 1 < cells.size() ? "," : "\n");
    }
  }
  return out;
}

void reproducibility() {
#ifdef SVRPF_CLI_PATH
  const auto base = std::filesystem::temp_directory_path() / ("svrpf_repro_" + std::to_string(kReproSeed));
  std::filesystem::remove_all(base);
  const std::string config = std::string(SVRPF_SOURCE_DIR) + "/configs/narrow.cfg";
  bool ok = true;
  std::string measured;
  for (const char* name : {"a", "b"}) {
    const std::string cmd = std::string("\"") + SVRPF_CLI_PATH + "\" run --config \"" + config + "\" --seed " +
                            std::to_string(kReproSeed) + " --out \"" + (base / name).string() + "\" > /dev/null";
    const int status = std::system(cmd.c_str());
    if (status != 0) {
      ok = false;
      measured += fmt("run %s exited with %d; ", name, status);
    }
  }
  for (const char* file : {"steps.csv", "summary.csv"}) {
    const auto a = masked_csv(base / "a" / file);
    const auto b = masked_csv(base / "b" / file);
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    measured += fmt("%s %s (%zu bytes); ", file, same ? "identical" : "DIFFERS", a.size());
  }
  std::filesystem::remove_all(base);
  report(8, "reproducibility", ok, measured + "runtime columns masked");
#else
  report(8, "reproducibility", false, "command-line tool was not built");
#endif
}

}  // namespace

int main() {
  kalman_equivalence();
  resampling_unbiasedness_criterion();
  migration_criteria();
  growth_criteria();
  density_soundness();
  reproducibility();
  std::printf("%s: %d of 8 criteria failed\n", failures == 0 ? "ALL PASSED" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}

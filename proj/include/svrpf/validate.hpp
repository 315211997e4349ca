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

#ifndef SVRPF_VALIDATE_HPP
#define SVRPF_VALIDATE_HPP

#include <svrpf/consistency.hpp>
#include <svrpf/harness.hpp>

#include <boost/math/distributions/normal.hpp>

#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

/**
 * \file
 * \brief Reduced-size property suite behind `svrpf validate`.
 *
 * Sizes are chosen to finish in well under a minute; the thresholds are the acceptance thresholds where the
 * reduced size still supports them, and a family-wise 0.001 level for the many-comparison resampling check.
 */

namespace svrpf {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string measured;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  [[nodiscard]] bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

namespace detail {

inline std::string printf_string(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

inline CheckResult check_resampling(ResamplingScheme scheme, const ExperimentConfig& cfg, RandomStream& rng) {
  constexpr std::size_t n = 100;
  constexpr std::size_t vectors = 10;
  constexpr std::size_t reps = 2000;
  const auto res = resampling_unbiasedness(scheme, n, vectors, reps, rng, cfg.branch);
  const boost::math::normal standard;
  const double z_limit = boost::math::quantile(standard, 1.0 - 0.0005 / static_cast<double>(res.comparisons));
  bool ok = res.max_z <= z_limit;
  std::string measured = printf_string("max z %.3f (limit %.3f), %zu/%zu beyond 3 se", res.max_z, z_limit,
                                       res.violations, res.comparisons);
  if (scheme == ResamplingScheme::min_variance) {
    ok = ok && res.max_single_deviation < 1.0;
    measured += printf_string(", max |count - Nw| %.4f", res.max_single_deviation);
  }
  return {"resampling unbiasedness (" + std::string(to_string(scheme)) + ")", ok, measured};
}

inline std::vector<CheckResult> check_migration(const ExperimentConfig& cfg, RandomStream& rng) {
  constexpr int trials = 20;
  MigrationSetup setup;
  setup.gamma = cfg.gamma;
  setup.svr = cfg.svr;
  std::array<std::vector<double>, 3> ks;
  auto streams = rng.split(trials);
  for (int k = 0; k < trials; ++k) {
    const auto r = migration_check(setup, streams[static_cast<std::size_t>(k)]);
    ks[0].push_back(r.ks_migration);
    ks[1].push_back(r.ks_likelihood);
    ks[2].push_back(r.ks_posterior);
  }
  const std::array<const char*, 3> names = {"migrated vs source CDF", "likelihood-weighted CDF",
                                            "mixed-weight vs Bayes posterior CDF"};
  const std::array<double, 3> required = {0.95, 0.95, 0.90};
  std::vector<CheckResult> out;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto within = std::count_if(ks[c].begin(), ks[c].end(), [](double v) { return v <= 0.05; });
    const double frac = static_cast<double>(within) / trials;
    const double mean = std::accumulate(ks[c].begin(), ks[c].end(), 0.0) / trials;
    out.push_back({std::string("KS ") + names[c], frac >= required[c],
                   printf_string("%ld/%d trials KS <= 0.05 (need %.0f%%), mean KS %.4f, max KS %.4f", static_cast<long>(within),
                                 trials, 100.0 * required[c], mean, *std::max_element(ks[c].begin(), ks[c].end()))});
  }
  return out;
}

inline std::vector<CheckResult> check_kalman(const ExperimentConfig& cfg) {
  const auto model = LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0);
  SvrpfSettings settings = cfg.svrpf_settings();
  settings.n = 500;
  settings.m = 1000;
  std::vector<CheckResult> out;
  const std::array<std::pair<const char*, ProposalKind>, 4> filters = {
      {{"gpf", ProposalKind::prior}, {"epf", ProposalKind::ekf}, {"upf", ProposalKind::ukf}, {"svrpf", ProposalKind::prior}}};
  for (std::size_t k = 0; k < filters.size(); ++k) {
    const auto res = kalman_agreement(model, filters[k].second, k == 3, settings, 50, 2, cfg.seed + k);
    out.push_back({std::string("Kalman agreement (") + filters[k].first + ")", res.fraction() >= 0.95,
                   printf_string("%zu/%zu steps within 3 se, max z %.2f", res.within, res.steps, res.max_z)});
  }
  return out;
}

inline std::vector<CheckResult> check_normalization(const ExperimentConfig& cfg, RandomStream& rng) {
  Matrix x(1, 200);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    x(0, i) = rng.standard_normal();
  }
  const std::vector<double> w(200, 1.0 / 200.0);
  const auto fit = fit_density(x, w, cfg.svr);
  const double beta_sum = fit.beta().sum();
  const double h = fit.kernel().bandwidth()[0] * fit.scales().maxCoeff();
  const double lo = x.minCoeff() - 8.0 * h;
  const double hi = x.maxCoeff() + 8.0 * h;
  const std::size_t points = 20001;
  const double step = (hi - lo) / static_cast<double>(points - 1);
  double mass = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double f = fit.density(Vector::Constant(1, lo + step * static_cast<double>(k)));
    mass += (k == 0 || k + 1 == points ? 0.5 : 1.0) * f * step;
  }

  // One SVR filter step on the narrow-noise model; its posterior weights must sum to one.
  const NonlinearGrowthModel model(10.0, 0.1);
  auto streams = rng.split(2);
  const ParticleSet prev = initial_particles(model, cfg.n, streams[0]);
  Vector x1 = model.transition_sample(model.sample_initial(streams[1]), 1, streams[1]);
  const auto step_result = svrpf_step(model, prev, model.observation_sample(x1, streams[1]), cfg.svrpf_settings(), streams[0]);
  std::vector<double> posterior = step_result.posterior.weights;
  if (cfg.inject == "unnormalized_weights") {
    for (auto& v : posterior) {
      v *= 1.5;
    }
  }
  const double weight_sum = std::accumulate(posterior.begin(), posterior.end(), 0.0);
  return {
      {"SVR coefficient sum", std::abs(beta_sum - 1.0) <= 1e-9, printf_string("|sum beta - 1| = %.3g", std::abs(beta_sum - 1.0))},
      {"SVR density mass", std::abs(mass - 1.0) <= 1e-3, printf_string("quadrature mass %.6f", mass)},
      {"SVR filter weight normalization", std::abs(weight_sum - 1.0) <= 1e-12,
       printf_string("|sum w - 1| = %.3g", std::abs(weight_sum - 1.0))},
  };
}

}  // namespace detail

/// Runs the suite with the SVR settings and seed of `cfg`.
inline ValidationReport run_validation(const ExperimentConfig& cfg) {
  ValidationReport report;
  RandomStream root(cfg.seed, 0);
  auto streams = root.split(7);
  const std::array<ResamplingScheme, 5> schemes = {ResamplingScheme::systematic, ResamplingScheme::multinomial,
                                                   ResamplingScheme::min_variance, ResamplingScheme::residual,
                                                   ResamplingScheme::branching};
  for (std::size_t k = 0; k < schemes.size(); ++k) {
    report.checks.push_back(detail::check_resampling(schemes[k], cfg, streams[k]));
  }
  for (auto& c : detail::check_migration(cfg, streams[5])) {
    report.checks.push_back(std::move(c));
  }
  for (auto& c : detail::check_kalman(cfg)) {
    report.checks.push_back(std::move(c));
  }
  for (auto& c : detail::check_normalization(cfg, streams[6])) {
    report.checks.push_back(std::move(c));
  }
  return report;
}

inline void print_report(std::FILE* out, const ValidationReport& report) {
  for (const auto& c : report.checks) {
    std::fprintf(out, "%s  %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.measured.c_str());
  }
  std::fprintf(out, "%s\n", report.passed() ? "all checks passed" : "some checks FAILED");
}

}  // namespace svrpf

#endif

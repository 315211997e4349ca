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

#ifndef SVRPF_HARNESS_HPP
#define SVRPF_HARNESS_HPP

#include <svrpf/config.hpp>
#include <svrpf/filters.hpp>
#include <svrpf/kalman.hpp>
#include <svrpf/metrics.hpp>
#include <svrpf/model.hpp>
#include <svrpf/rng.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

/**
 * \file
 * \brief Monte Carlo experiment runner and CSV output.
 *
 * Run r draws one truth/observation trajectory and runs every configured filter on the same observations.
 * Its randomness comes from the stream (seed, r) split into one child for the truth and one per filter, so a
 * run's output does not depend on which thread executes it or on the other filters configured before it.
 */

namespace svrpf {

enum class FilterKind { gpf, epf, upf, svrpf, kalman };

/// One entry of the `filters` list, e.g. `gpf`, `gpf:residual`, `svrpf`, `kalman`.
struct FilterSpec {
  std::string label;
  FilterKind kind = FilterKind::gpf;
  ResamplingScheme scheme = ResamplingScheme::systematic;
};

inline FilterSpec parse_filter_spec(const std::string& text, ResamplingScheme default_scheme) {
  FilterSpec spec{text, FilterKind::gpf, default_scheme};
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  if (name == "gpf") {
    spec.kind = FilterKind::gpf;
  } else if (name == "epf") {
    spec.kind = FilterKind::epf;
  } else if (name == "upf") {
    spec.kind = FilterKind::upf;
  } else if (name == "svrpf") {
    spec.kind = FilterKind::svrpf;
  } else if (name == "kalman") {
    spec.kind = FilterKind::kalman;
  } else {
    throw ConfigError("unknown filter '" + name + "'");
  }
  if (colon != std::string::npos) {
    if (spec.kind == FilterKind::svrpf || spec.kind == FilterKind::kalman) {
      throw ConfigError("filter '" + name + "' takes no resampling scheme");
    }
    const auto scheme = parse_resampling_scheme(text.substr(colon + 1));
    if (!scheme) {
      throw ConfigError("unknown resampling scheme in '" + text + "'");
    }
    spec.scheme = *scheme;
  }
  return spec;
}

/// Validated, typed view of a Config.
struct ExperimentConfig {
  std::string model = "nonlinear_growth";
  double q = 10.0;
  double r = 0.1;
  double a = 0.9;
  double c = 1.0;
  double x0_mean = 0.0;
  double x0_var = 5.0;
  double likelihood_floor = kDefaultLikelihoodFloor;
  int steps = 100;
  std::size_t runs = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::vector<FilterSpec> filters;
  std::size_t n = 100;
  BranchBounds branch;
  UkfParams ukf;
  std::size_t m = 200;
  double m_ratio = 2.0;
  bool m_explicit = false;
  double gamma = 1.5;
  std::optional<double> min_width;
  SvrSettings svr;
  std::string out_dir = "out";
  bool verbose = false;
  std::string inject = "none";

  [[nodiscard]] SvrpfSettings svrpf_settings() const { return {n, m, gamma, min_width, svr}; }

  static ExperimentConfig from(const Config& cfg) {
    ExperimentConfig e;
    e.model = cfg.text("model.name");
    if (e.model != "nonlinear_growth" && e.model != "linear_gaussian") {
      throw ConfigError("model.name: unknown model '" + e.model + "'");
    }
    e.q = cfg.real("model.q");
    e.r = cfg.real("model.r");
    e.a = cfg.real("model.a");
    e.c = cfg.real("model.c");
    e.x0_mean = cfg.real("model.x0_mean");
    e.x0_var = cfg.real("model.x0_var");
    e.likelihood_floor = cfg.real("model.likelihood_floor");
    if (e.q < 0.0 || e.x0_var < 0.0 || !(e.r > 0.0) || !(e.likelihood_floor >= 0.0)) {
      throw ConfigError("model: q and x0_var must be >= 0, r > 0, likelihood_floor >= 0");
    }
    const auto steps = cfg.count("experiment.steps");
    if (steps < 1 || steps > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
      throw ConfigError("experiment.steps must be >= 1");
    }
    e.steps = static_cast<int>(steps);
    e.runs = cfg.count("experiment.runs");
    if (e.runs < 1) {
      throw ConfigError("experiment.runs must be >= 1");
    }
    e.seed = cfg.count("experiment.seed");
    e.threads = cfg.count("experiment.threads");
    const auto scheme = parse_resampling_scheme(cfg.text("filter.resampling"));
    if (!scheme) {
      throw ConfigError("filter.resampling: unknown scheme '" + cfg.text("filter.resampling") + "'");
    }
    for (const auto& f : cfg.list("filters")) {
      e.filters.push_back(parse_filter_spec(f, *scheme));
    }
    if (e.filters.empty()) {
      throw ConfigError("filters: at least one filter is required");
    }
    for (std::size_t i = 0; i < e.filters.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (e.filters[i].label == e.filters[j].label) {
          throw ConfigError("filters: '" + e.filters[i].label + "' listed twice");
        }
      }
      if (e.filters[i].kind == FilterKind::kalman && e.model != "linear_gaussian") {
        throw ConfigError("filters: kalman needs model.name = linear_gaussian");
      }
    }
    e.n = cfg.count("filter.n");
    if (e.n < 2) {
      throw ConfigError("filter.n must be >= 2");
    }
    e.branch = {cfg.real("filter.branch_lower"), cfg.real("filter.branch_upper")};
    if (!(e.branch.lower > 0.0 && e.branch.lower < 1.0 && e.branch.upper > 1.0)) {
      throw ConfigError("filter.branch_lower must be in (0, 1) and filter.branch_upper > 1");
    }
    e.ukf = {cfg.real("filter.ukf.alpha"), cfg.real("filter.ukf.beta"), cfg.real("filter.ukf.kappa")};
    e.m_ratio = cfg.real("filter.svrpf.m_ratio");
    e.m_explicit = cfg.has("filter.svrpf.m");
    if (!e.m_explicit && !(e.m_ratio >= 1.0)) {
      throw ConfigError("filter.svrpf.m_ratio must be >= 1");
    }
    e.m = e.m_explicit ? cfg.count("filter.svrpf.m") : ratio_count(e.n, e.m_ratio);
    if (e.m < e.n) {
      throw ConfigError("filter.svrpf.m must be >= filter.n");
    }
    e.gamma = cfg.real("filter.svrpf.gamma");
    if (!(e.gamma >= 1.0)) {
      throw ConfigError("filter.svrpf.gamma must be >= 1");
    }
    e.min_width = cfg.optional_real("filter.svrpf.min_width");
    if (e.min_width && !(*e.min_width > 0.0)) {
      throw ConfigError("filter.svrpf.min_width must be positive");
    }

    const std::string rule = cfg.text("svr.bandwidth_rule");
    if (rule == "sheather_jones") {
      e.svr.rule = BandwidthRule::sheather_jones;
    } else if (rule == "silverman") {
      e.svr.rule = BandwidthRule::silverman;
    } else {
      throw ConfigError("svr.bandwidth_rule: unknown rule '" + rule + "'");
    }
    e.svr.bandwidth_scale = cfg.real("svr.bandwidth_scale");
    if (cfg.has("svr.bandwidth")) {
      e.svr.bandwidth = Vector::Constant(1, cfg.real("svr.bandwidth"));
    }
    e.svr.adaptive_exponent = cfg.real("svr.adaptive_exponent");
    e.svr.max_scale = cfg.real("svr.max_scale");
    e.svr.merge_fraction = cfg.real("svr.merge_fraction");
    e.svr.qp.epsilon = cfg.optional_real("svr.epsilon");
    e.svr.qp.epsilon_scale = cfg.real("svr.epsilon_scale");
    e.svr.qp.noise_scaled_tube = cfg.flag("svr.noise_scaled_tube");
    e.svr.qp.tube_floor = cfg.real("svr.tube_floor");
    e.svr.qp.regularization = cfg.real("svr.regularization");
    e.svr.qp.tol_kkt = cfg.real("svr.tol_kkt");
    e.svr.qp.max_iterations = static_cast<int>(std::min<std::uint64_t>(cfg.count("svr.max_iterations"), 1U << 30U));
    e.svr.qp.max_retries = static_cast<int>(std::min<std::uint64_t>(cfg.count("svr.max_retries"), 64));
    if (!(e.svr.bandwidth_scale > 0.0) || e.svr.adaptive_exponent < 0.0 || !(e.svr.max_scale >= 1.0) ||
        e.svr.merge_fraction < 0.0 || !(e.svr.qp.epsilon_scale > 0.0) ||
        !(e.svr.qp.tube_floor > 0.0) || e.svr.qp.regularization < 0.0 || !(e.svr.qp.tol_kkt > 0.0) ||
        e.svr.qp.max_iterations < 1 || (e.svr.qp.epsilon && !(*e.svr.qp.epsilon > 0.0)) ||
        (e.svr.bandwidth && !((*e.svr.bandwidth)[0] > 0.0))) {
      throw ConfigError("svr: bandwidth, scales, epsilon, tube_floor, tol_kkt and max_iterations must be positive; max_scale >= 1");
    }

    e.out_dir = cfg.text("output.dir");
    e.verbose = cfg.flag("output.verbose");
    e.inject = cfg.text("validate.inject");
    if (e.inject != "none" && e.inject != "unnormalized_weights") {
      throw ConfigError("validate.inject: expected none or unnormalized_weights");
    }
    return e;
  }

  static std::size_t ratio_count(std::size_t n, double ratio) {
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  }
};

/// Builds the configured model.
inline std::unique_ptr<StateSpaceModel> make_model(const ExperimentConfig& cfg) {
  if (cfg.model == "linear_gaussian") {
    return std::make_unique<LinearGaussianModel>(
        LinearGaussianModel::scalar(cfg.a, cfg.c, cfg.q, cfg.r, cfg.x0_mean, cfg.x0_var, cfg.likelihood_floor));
  }
  return std::make_unique<NonlinearGrowthModel>(cfg.q, cfg.r, cfg.x0_mean, cfg.x0_var, cfg.likelihood_floor);
}

namespace detail {

inline Matrix kalman_region(const GaussianBelief& b) {
  Matrix bounds(b.mean.size(), 2);
  for (Eigen::Index i = 0; i < b.mean.size(); ++i) {
    const double sd = std::sqrt(std::max(b.covariance(i, i), 0.0));
    bounds(i, 0) = b.mean[i] - 3.0 * sd;
    bounds(i, 1) = b.mean[i] + 3.0 * sd;
  }
  return bounds;
}

inline void run_filter(const ExperimentConfig& cfg, const StateSpaceModel& model, const FilterSpec& spec,
                       const std::vector<Vector>& observations, RandomStream rng, FilterTrace& trace,
                       std::size_t run) {
  int t = 0;
  try {
    if (spec.kind == FilterKind::kalman) {
      const KalmanFilter kf(dynamic_cast<const LinearGaussianModel&>(model));
      GaussianBelief belief = kf.initial();
      for (t = 1; t <= cfg.steps; ++t) {
        const auto start = Clock::now();
        belief = kf.step(belief, observations[static_cast<std::size_t>(t - 1)]);
        trace.estimates.push_back(belief.mean);
        trace.ir.push_back(kalman_region(belief));
        trace.pd.push_back(std::numeric_limits<double>::quiet_NaN());
        trace.ess.push_back(std::numeric_limits<double>::quiet_NaN());
        trace.ms.push_back(elapsed_ms(start));
      }
      return;
    }
    ParticleSet set = initial_particles(model, cfg.n, rng);
    const SvrpfSettings svr = cfg.svrpf_settings();
    for (t = 1; t <= cfg.steps; ++t) {
      const Vector& y = observations[static_cast<std::size_t>(t - 1)];
      StepResult step;
      switch (spec.kind) {
        case FilterKind::gpf:
          step = gpf_step(model, set, y, spec.scheme, rng, cfg.branch);
          break;
        case FilterKind::epf:
          step = epf_step(model, set, y, spec.scheme, rng, cfg.branch);
          break;
        case FilterKind::upf:
          step = upf_step(model, set, y, spec.scheme, rng, cfg.ukf, cfg.branch);
          break;
        default:
          step = svrpf_step(model, set, y, svr, rng);
          break;
      }
      trace.estimates.push_back(step.estimate);
      trace.ir.push_back(step.diagnostics.ir.bounds());
      trace.pd.push_back(step.diagnostics.pd);
      trace.ess.push_back(step.diagnostics.ess);
      trace.ms.push_back(step.diagnostics.ms);
      if (cfg.verbose && step.diagnostics.fit) {
        const auto& fit = *step.diagnostics.fit;
        std::fprintf(stderr, "run %zu %s t=%d: qp iterations %d, kkt %.3g, epsilon %.3g, retries %d\n", run,
                     spec.label.c_str(), t, fit.iterations, fit.kkt_residual, fit.epsilon, fit.retries);
      }
      set = std::move(step.posterior);
    }
  } catch (const std::exception& e) {
    trace.failed = true;
    trace.error = "step " + std::to_string(t) + ": " + e.what();
    std::fprintf(stderr, "run %zu filter %s failed at %s\n", run, spec.label.c_str(), trace.error.c_str());
  }
}

}  // namespace detail

/// Runs Monte Carlo replication `run`: one trajectory, every configured filter on its observations.
inline RunRecord run_single(const ExperimentConfig& cfg, const StateSpaceModel& model, std::size_t run) {
  RunRecord rec;
  rec.run = run;
  rec.seed = cfg.seed;
  RandomStream root(cfg.seed, run);
  auto streams = root.split(1 + cfg.filters.size());
  try {
    Vector x = model.sample_initial(streams[0]);
    for (int t = 1; t <= cfg.steps; ++t) {
      x = model.transition_sample(x, t, streams[0]);
      rec.truth.push_back(x);
      rec.observations.push_back(model.observation_sample(x, streams[0]));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run %zu: trajectory generation failed: %s\n", run, e.what());
    for (const auto& spec : cfg.filters) {
      rec.filters.push_back({spec.label, {}, {}, {}, {}, {}, true, std::string("trajectory: ") + e.what()});
    }
    rec.truth.clear();
    rec.observations.clear();
    return rec;
  }
  for (std::size_t k = 0; k < cfg.filters.size(); ++k) {
    FilterTrace trace;
    trace.filter = cfg.filters[k].label;
    detail::run_filter(cfg, model, cfg.filters[k], rec.observations, streams[1 + k], trace, run);
    rec.filters.push_back(std::move(trace));
  }
  return rec;
}

/// All runs, executed on `cfg.threads` workers and returned in run order.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  const auto model = make_model(cfg);
  std::vector<RunRecord> records(cfg.runs);
  std::size_t workers = cfg.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : cfg.threads;
  workers = std::min(workers, cfg.runs);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&] {
    for (std::size_t r = next++; r < cfg.runs; r = next++) {
      records[r] = run_single(cfg, *model, r);
      if (cfg.verbose) {
        const std::lock_guard<std::mutex> lock(log_mutex);
        std::fprintf(stderr, "run %zu done\n", r);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  return records;
}

struct SummaryRow {
  std::string filter;
  double rmse_mean = 0.0;
  double rmse_sd = 0.0;
  double coverage = 0.0;
  double ms_mean = 0.0;
  std::size_t failures = 0;
};

/// Per-filter aggregates over the successful runs. rmse_sd is the sample standard deviation (0 for one run).
inline std::vector<SummaryRow> summarize(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> rows;
  for (const auto& spec : cfg.filters) {
    SummaryRow row{spec.label};
    std::vector<double> errors;
    double ms_total = 0.0;
    std::size_t ms_count = 0;
    for (const auto& rec : records) {
      const FilterTrace* f = rec.find(spec.label);
      if (f == nullptr || f->failed) {
        ++row.failures;
        continue;
      }
      errors.push_back(rmse(f->estimates, rec.truth));
      for (double ms : f->ms) {
        ms_total += ms;
        ++ms_count;
      }
    }
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    if (errors.empty()) {
      row.rmse_mean = row.rmse_sd = row.coverage = row.ms_mean = nan;
    } else {
      double sum = 0.0;
      for (double e : errors) {
        sum += e;
      }
      row.rmse_mean = sum / static_cast<double>(errors.size());
      double sq = 0.0;
      for (double e : errors) {
        sq += (e - row.rmse_mean) * (e - row.rmse_mean);
      }
      row.rmse_sd = errors.size() > 1 ? std::sqrt(sq / static_cast<double>(errors.size() - 1)) : 0.0;
      row.coverage = ir_coverage(records, spec.label);
      row.ms_mean = ms_total / static_cast<double>(ms_count);
    }
    rows.push_back(row);
  }
  return rows;
}

/// `%.17g`, with vector components joined by ';'.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_vector(const Eigen::Ref<const Vector>& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) {
      out += ';';
    }
    out += format_real(v[i]);
  }
  return out;
}

/// steps.csv: one row per (run, t, filter); failed (run, filter) pairs contribute no rows.
inline void write_steps_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << "run,t,filter,truth,estimate,ir_lo,ir_hi,pd,ess,ms\n";
  for (const auto& rec : records) {
    for (std::size_t t = 0; t < rec.truth.size(); ++t) {
      for (const auto& f : rec.filters) {
        if (f.failed) {
          continue;
        }
        out << rec.run << ',' << (t + 1) << ',' << f.filter << ',' << format_vector(rec.truth[t]) << ','
            << format_vector(f.estimates[t]) << ',' << format_vector(f.ir[t].col(0)) << ','
            << format_vector(f.ir[t].col(1)) << ',' << format_real(f.pd[t]) << ',' << format_real(f.ess[t]) << ','
            << format_real(f.ms[t]) << '\n';
      }
    }
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "filter,rmse_mean,rmse_sd,coverage,ms_mean,failures\n";
  for (const auto& r : rows) {
    out << r.filter << ',' << format_real(r.rmse_mean) << ',' << format_real(r.rmse_sd) << ','
        << format_real(r.coverage) << ',' << format_real(r.ms_mean) << ',' << r.failures << '\n';
  }
}

struct SweepRow {
  std::string filter;
  std::size_t n = 0;
  double rmse_mean = 0.0;
  double rmse_sd = 0.0;
  double ms_mean = 0.0;
};

/// Runs the experiment once per particle count; SVRPF uses M = m_ratio * N at every count.
inline std::vector<SweepRow> run_sweep(ExperimentConfig cfg, const std::vector<std::size_t>& n_values) {
  if (n_values.empty()) {
    throw ConfigError("sweep needs at least one particle count");
  }
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] < 2 || (i > 0 && n_values[i] <= n_values[i - 1])) {
      throw ConfigError("sweep particle counts must be >= 2 and strictly ascending");
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t n : n_values) {
    cfg.n = n;
    cfg.m = ExperimentConfig::ratio_count(n, std::max(cfg.m_ratio, 1.0));
    for (const auto& s : summarize(cfg, run_experiment(cfg))) {
      rows.push_back({s.filter, n, s.rmse_mean, s.rmse_sd, s.ms_mean});
    }
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "filter,n,rmse_mean,rmse_sd,ms_mean\n";
  for (const auto& r : rows) {
    out << r.filter << ',' << r.n << ',' << format_real(r.rmse_mean) << ',' << format_real(r.rmse_sd) << ','
        << format_real(r.ms_mean) << '\n';
  }
}

/// Writes `name` under `dir` (created if missing) using `writer(std::ostream&)`.
template <class Writer>
std::filesystem::path write_output(const std::string& dir, const std::string& name, Writer writer) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write '" + path.string() + "'");
  }
  writer(out);
  return path;
}

}  // namespace svrpf

#endif

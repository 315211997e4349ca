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

#ifndef SVRPF_FILTERS_HPP
#define SVRPF_FILTERS_HPP

#include <svrpf/model.hpp>
#include <svrpf/proposals.hpp>
#include <svrpf/region.hpp>
#include <svrpf/resampling.hpp>
#include <svrpf/rng.hpp>
#include <svrpf/svr_density.hpp>
#include <svrpf/types.hpp>
#include <svrpf/weights.hpp>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * \file
 * \brief One-step updates for the generic (GPF), extended (EPF), unscented (UPF) and SVR (SVRPF) particle
 * filters.
 *
 * Every step maps the posterior set at t-1 and y_t to an estimate, a posterior set at t and diagnostics.
 * GPF/EPF/UPF compute the estimate from the normalized weights and then resample. SVRPF fits a density to
 * the predicted particles, places M fresh points uniformly over the amplified importance region and weights
 * them by density times likelihood; it has no resampling stage.
 */

namespace svrpf {

/// Weighted particles at time `time`; states are d x N.
struct ParticleSet {
  Matrix states;
  std::vector<double> weights;
  int time = 0;

  [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return states.rows(); }

  void validate() const {
    if (static_cast<std::size_t>(states.cols()) != weights.size()) {
      throw InvalidArgument("particle count and weight count differ");
    }
    check_weights(weights);
  }
};

/// N draws from the initial distribution with uniform weights, at time 0.
inline ParticleSet initial_particles(const StateSpaceModel& model, std::size_t n, RandomStream& rng) {
  if (n == 0) {
    throw InvalidArgument("particle count must be positive");
  }
  ParticleSet set{Matrix(model.state_dim(), static_cast<Eigen::Index>(n)),
                  std::vector<double>(n, 1.0 / static_cast<double>(n)), 0};
  for (std::size_t i = 0; i < n; ++i) {
    set.states.col(static_cast<Eigen::Index>(i)) = model.sample_initial(rng);
  }
  return set;
}

/// sum_i w_i x_i.
inline Vector estimate_state(const Eigen::Ref<const Matrix>& particles, std::span<const double> weights) {
  check_weights(weights);
  if (static_cast<std::size_t>(particles.cols()) != weights.size()) {
    throw InvalidArgument("particle count and weight count differ");
  }
  return particles * Eigen::Map<const Vector>(weights.data(), particles.cols());
}

struct StepDiagnostics {
  /// GPF/EPF/UPF: region of the propagated particles. SVRPF: the amplified region the points were placed in.
  ImportanceRegion ir;
  double pd = 0.0;
  double ess = 0.0;
  double ms = 0.0;
  /// Every likelihood was at the floor (or the weights were otherwise unusable).
  bool degenerate = false;
  /// Particles whose proposal needed innovation regularization or covariance clamping.
  std::size_t regularized = 0;
  std::size_t clamped = 0;
  std::optional<FitDiagnostics> fit;
};

struct StepResult {
  Vector estimate;
  /// Particles and normalized weights the estimate was computed from (before any resampling).
  ParticleSet weighted;
  ParticleSet posterior;
  StepDiagnostics diagnostics;
  /// SVRPF only: normalized density weights and normalized likelihood weights of the placed points.
  std::vector<double> svr_weights;
  std::vector<double> likelihood_weights;
  /// SVRPF only: the predicted particles the density was fitted to.
  std::optional<ParticleSet> predicted;
  std::optional<SvrDensityModel> density;
};

enum class ProposalKind { prior, ekf, ukf };

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// log max(p(y|x), floor).
inline double floored_log_likelihood(const StateSpaceModel& model, const Vector& x, const Vector& y) {
  const double ll = model.log_likelihood(x, y);
  const double floor = std::log(model.likelihood_floor());
  return std::isnan(ll) ? floor : std::max(ll, floor);
}

inline void check_step_inputs(const StateSpaceModel& model, const ParticleSet& prev, const Vector& y) {
  prev.validate();
  if (prev.dim() != model.state_dim()) {
    throw InvalidArgument("particle dimension differs from the model state dimension");
  }
  if (y.size() != model.obs_dim()) {
    throw InvalidArgument("observation dimension differs from the model");
  }
}

/// Normalizes, estimates, records diagnostics and resamples. `at_floor` counts floored likelihoods.
inline StepResult finish_resampling_step(Matrix states, const std::vector<double>& log_w, std::size_t at_floor,
                                         int t, ResamplingScheme scheme, BranchBounds bounds, RandomStream& rng,
                                         Clock::time_point start) {
  StepResult out;
  const std::size_t n = log_w.size();
  std::vector<double> w;
  const bool usable = normalize_log_weights(log_w, w);
  out.diagnostics.degenerate = !usable || at_floor == n;
  if (out.diagnostics.degenerate) {
    w.assign(n, 1.0 / static_cast<double>(n));
  }
  out.estimate = states * Eigen::Map<const Vector>(w.data(), states.cols());
  out.diagnostics.ir = compute_ir(states);
  out.diagnostics.pd = compute_pd(out.diagnostics.ir, n);
  out.diagnostics.ess = effective_sample_size(w);

  const auto picked = resample(scheme, w, rng, bounds);
  Matrix next(states.rows(), static_cast<Eigen::Index>(picked.indices.size()));
  for (std::size_t k = 0; k < picked.indices.size(); ++k) {
    next.col(static_cast<Eigen::Index>(k)) = states.col(static_cast<Eigen::Index>(picked.indices[k]));
  }
  // Branching keeps non-uniform weights that need not sum to one.
  std::vector<double> next_w = picked.weights;
  double total = 0.0;
  for (double v : next_w) {
    total += v;
  }
  for (auto& v : next_w) {
    v /= total;
  }
  out.weighted = ParticleSet{std::move(states), std::move(w), t};
  out.posterior = ParticleSet{std::move(next), std::move(next_w), t};
  out.diagnostics.ms = elapsed_ms(start);
  return out;
}

}  // namespace detail

/// Generic particle filter step: prior proposal, likelihood weights, estimate, resample.
/**
 * If every likelihood sits at the floor the weights fall back to uniform and `diagnostics.degenerate` is set.
 */
inline StepResult gpf_step(const StateSpaceModel& model, const ParticleSet& prev, const Vector& y,
                           ResamplingScheme scheme, RandomStream& rng, BranchBounds bounds = {}) {
  const auto start = detail::Clock::now();
  detail::check_step_inputs(model, prev, y);
  const int t = prev.time + 1;
  const std::size_t n = prev.size();
  const double floor = std::log(model.likelihood_floor());
  Matrix states(prev.dim(), static_cast<Eigen::Index>(n));
  std::vector<double> log_w(n);
  std::size_t at_floor = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    states.col(c) = model.transition_sample(prev.states.col(c), t, rng);
    const double ll = detail::floored_log_likelihood(model, states.col(c), y);
    at_floor += ll <= floor ? 1 : 0;
    log_w[i] = std::log(prev.weights[i]) + ll;
  }
  return detail::finish_resampling_step(std::move(states), log_w, at_floor, t, scheme, bounds, rng, start);
}

/// Shared EPF/UPF step: sample each particle from its Kalman proposal and importance-correct the weight by
/// transition density over proposal density.
inline StepResult kalman_proposal_step(const StateSpaceModel& model, const ParticleSet& prev, const Vector& y,
                                       ProposalKind kind, ResamplingScheme scheme, RandomStream& rng,
                                       const UkfParams& ukf = {}, BranchBounds bounds = {}) {
  const auto start = detail::Clock::now();
  detail::check_step_inputs(model, prev, y);
  if (!model.has_transition_density()) {
    throw UnsupportedCapability("Kalman-proposal filters need the transition density");
  }
  const int t = prev.time + 1;
  const std::size_t n = prev.size();
  const double floor = std::log(model.likelihood_floor());
  Matrix states(prev.dim(), static_cast<Eigen::Index>(n));
  std::vector<double> log_w(n);
  std::size_t at_floor = 0;
  std::size_t regularized = 0;
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const Vector x_prev = prev.states.col(c);
    const KalmanProposal proposal =
        kind == ProposalKind::ukf ? ukf_proposal(model, x_prev, y, t, ukf) : ekf_proposal(model, x_prev, y, t);
    regularized += proposal.regularized ? 1 : 0;
    clamped += proposal.clamped ? 1 : 0;
    const ProposalDraw draw = sample_proposal(proposal, rng);
    states.col(c) = draw.x;
    const double ll = detail::floored_log_likelihood(model, draw.x, y);
    at_floor += ll <= floor ? 1 : 0;
    log_w[i] = std::log(prev.weights[i]) + ll + model.log_transition_density(draw.x, x_prev, t) - draw.log_density;
  }
  auto out = detail::finish_resampling_step(std::move(states), log_w, at_floor, t, scheme, bounds, rng, start);
  out.diagnostics.regularized = regularized;
  out.diagnostics.clamped = clamped;
  return out;
}

inline StepResult epf_step(const StateSpaceModel& model, const ParticleSet& prev, const Vector& y,
                           ResamplingScheme scheme, RandomStream& rng, BranchBounds bounds = {}) {
  return kalman_proposal_step(model, prev, y, ProposalKind::ekf, scheme, rng, {}, bounds);
}

inline StepResult upf_step(const StateSpaceModel& model, const ParticleSet& prev, const Vector& y,
                           ResamplingScheme scheme, RandomStream& rng, const UkfParams& ukf = {},
                           BranchBounds bounds = {}) {
  return kalman_proposal_step(model, prev, y, ProposalKind::ukf, scheme, rng, ukf, bounds);
}

struct SvrpfSettings {
  /// Particles propagated per step; a larger incoming set is first reduced by systematic resampling.
  std::size_t n = 100;
  /// Points placed in the importance region per step; must be >= n.
  std::size_t m = 200;
  /// Importance-region amplification factor.
  double gamma = 1.5;
  /// Width given to zero-width region rows; unset uses default_min_width.
  std::optional<double> min_width;
  SvrSettings svr;
};

/// Resamples `set` down to `n` uniform-weight particles if it is larger; otherwise returns it unchanged.
inline ParticleSet reduce_particles(const ParticleSet& set, std::size_t n, RandomStream& rng) {
  if (set.size() <= n) {
    return set;
  }
  const auto picked = systematic_resample(set.weights, rng, n);
  ParticleSet out{Matrix(set.dim(), static_cast<Eigen::Index>(n)), picked.weights, set.time};
  for (std::size_t k = 0; k < n; ++k) {
    out.states.col(static_cast<Eigen::Index>(k)) = set.states.col(static_cast<Eigen::Index>(picked.indices[k]));
  }
  return out;
}

/// SVR particle filter step.
/**
 * Propagates the (reduced) previous set, fits the SVR density to the predicted particles with their carried
 * weights, places M points uniformly in the amplified region of the predicted cloud, and weights them by
 * normalized density times likelihood. The posterior is the placed points with these mixed weights.
 *
 * If every likelihood is at the floor the mixed weights equal the density weights and
 * `diagnostics.degenerate` is set. A failed density fit is rethrown as SvrFitError naming the step.
 */
inline StepResult svrpf_step(const StateSpaceModel& model, const ParticleSet& prev, const Vector& y,
                             const SvrpfSettings& settings, RandomStream& rng) {
  const auto start = detail::Clock::now();
  detail::check_step_inputs(model, prev, y);
  if (settings.n == 0 || settings.m < settings.n) {
    throw InvalidArgument("SVR filter needs 0 < N <= M");
  }
  const int t = prev.time + 1;
  const ParticleSet input = reduce_particles(prev, settings.n, rng);

  ParticleSet predicted{Matrix(input.dim(), static_cast<Eigen::Index>(input.size())), input.weights, t};
  for (Eigen::Index i = 0; i < predicted.states.cols(); ++i) {
    predicted.states.col(i) = model.transition_sample(input.states.col(i), t, rng);
  }

  std::optional<SvrDensityModel> density;
  try {
    density = fit_density(predicted.states, predicted.weights, settings.svr);
  } catch (const SvrFitError& e) {
    throw SvrFitError("step " + std::to_string(t) + ": " + e.what(), e.epsilon);
  }

  StepResult out;
  const ImportanceRegion region = amplify_ir(compute_ir(predicted.states), settings.gamma, settings.min_width);
  const Matrix placed = uniform_placement(region, settings.m, rng);
  const std::size_t m = settings.m;

  const Vector p = density->density_at(placed);
  std::vector<double> log_svr(m);
  std::vector<double> log_lik(m);
  std::vector<double> log_mixed(m);
  const double floor = std::log(model.likelihood_floor());
  std::size_t at_floor = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    log_svr[j] = p[c] > 0.0 ? std::log(p[c]) : -std::numeric_limits<double>::infinity();
    log_lik[j] = detail::floored_log_likelihood(model, placed.col(c), y);
    at_floor += log_lik[j] <= floor ? 1 : 0;
    log_mixed[j] = log_svr[j] + log_lik[j];
  }
  bool degenerate = !normalize_log_weights(log_svr, out.svr_weights);
  normalize_log_weights(log_lik, out.likelihood_weights);
  std::vector<double> mixed;
  if (at_floor == m || !normalize_log_weights(log_mixed, mixed)) {
    degenerate = true;
    mixed = out.svr_weights;
  }

  out.estimate = placed * Eigen::Map<const Vector>(mixed.data(), placed.cols());
  out.diagnostics.ir = region;
  out.diagnostics.pd = compute_pd(region, m);
  out.diagnostics.ess = effective_sample_size(mixed);
  out.diagnostics.degenerate = degenerate;
  out.diagnostics.fit = density->diagnostics();
  out.weighted = ParticleSet{placed, mixed, t};
  out.posterior = ParticleSet{placed, std::move(mixed), t};
  out.predicted = std::move(predicted);
  out.density = std::move(density);
  out.diagnostics.ms = detail::elapsed_ms(start);
  return out;
}

}  // namespace svrpf

#endif

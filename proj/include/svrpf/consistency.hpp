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

#ifndef SVRPF_CONSISTENCY_HPP
#define SVRPF_CONSISTENCY_HPP

#include <svrpf/filters.hpp>
#include <svrpf/kalman.hpp>
#include <svrpf/metrics.hpp>
#include <svrpf/model.hpp>
#include <svrpf/resampling.hpp>
#include <svrpf/rng.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

/**
 * \file
 * \brief Measured consistency checks shared by `svrpf validate` and the acceptance tests.
 *
 * Each check returns the measured quantities; the pass thresholds live with the caller.
 */

namespace svrpf {

/// 1-D Gaussian mixture with analytic density and CDF.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sds;

  [[nodiscard]] double pdf(double x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      p += weights[k] * normal_pdf((x - means[k]) / sds[k]) / sds[k];
    }
    return p;
  }

  [[nodiscard]] double cdf(double x) const {
    double c = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      c += weights[k] * normal_cdf((x - means[k]) / sds[k]);
    }
    return c;
  }

  double sample(RandomStream& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < weights.size(); ++k) {
      acc += weights[k];
      if (u < acc) {
        break;
      }
    }
    return rng.gaussian(means[k], sds[k]);
  }
};

/// Equal-weight N(-2, 1) / N(2, 1) mixture used as the bimodal test prior.
inline GaussianMixture bimodal_test_prior() { return {{0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0}}; }

/// Scalar model whose every state is an independent draw from a fixed mixture, observed as y = x + N(0, sd^2).
/**
 * One filter step from any previous set therefore predicts an i.i.d. sample of the mixture, which makes the
 * exact Bayes posterior available by 1-D quadrature.
 */
class MixturePriorModel final : public StateSpaceModel {
 public:
  MixturePriorModel(GaussianMixture prior, double likelihood_sd)
      : prior_{std::move(prior)}, sd_{likelihood_sd} {
    if (!(sd_ > 0.0) || prior_.weights.empty()) {
      throw InvalidArgument("mixture prior model needs components and a positive likelihood sd");
    }
  }

  [[nodiscard]] std::string name() const override { return "mixture_prior"; }
  [[nodiscard]] Eigen::Index state_dim() const override { return 1; }
  [[nodiscard]] Eigen::Index obs_dim() const override { return 1; }
  [[nodiscard]] Vector transition_mean(const Vector& /*x_prev*/, int /*t*/) const override {
    double m = 0.0;
    for (std::size_t k = 0; k < prior_.weights.size(); ++k) {
      m += prior_.weights[k] * prior_.means[k];
    }
    return Vector::Constant(1, m);
  }
  [[nodiscard]] Vector observation_mean(const Vector& x) const override { return x; }
  [[nodiscard]] Vector observation_sample(const Vector& x, RandomStream& rng) const override {
    return Vector::Constant(1, rng.gaussian(x[0], sd_));
  }
  [[nodiscard]] double log_likelihood(const Vector& x, const Vector& y) const override {
    const double z = (y[0] - x[0]) / sd_;
    return -0.5 * z * z - std::log(sd_) + std::log(kInvSqrt2Pi);
  }
  [[nodiscard]] Vector sample_initial(RandomStream& rng) const override {
    return Vector::Constant(1, prior_.sample(rng));
  }
  [[nodiscard]] Vector initial_mean() const override { return transition_mean(Vector::Zero(1), 0); }
  [[nodiscard]] Matrix initial_covariance() const override {
    const double m = initial_mean()[0];
    double v = 0.0;
    for (std::size_t k = 0; k < prior_.weights.size(); ++k) {
      v += prior_.weights[k] * (prior_.sds[k] * prior_.sds[k] + (prior_.means[k] - m) * (prior_.means[k] - m));
    }
    return Matrix::Constant(1, 1, v);
  }

  [[nodiscard]] const GaussianMixture& prior() const noexcept { return prior_; }
  [[nodiscard]] double likelihood_sd() const noexcept { return sd_; }

 protected:
  [[nodiscard]] Vector do_transition_sample(const Vector& /*x_prev*/, int /*t*/, RandomStream& rng) const override {
    return Vector::Constant(1, prior_.sample(rng));
  }

 private:
  GaussianMixture prior_;
  double sd_;
};

struct MigrationSetup {
  GaussianMixture prior = bimodal_test_prior();
  std::size_t n = 500;
  std::size_t m = 1000;
  double gamma = 1.5;
  /// Observation placed in the right tail of the prior.
  double observation = 4.0;
  double likelihood_sd = 0.2;
  SvrSettings svr;
  /// Fine-grid size for the posterior quadrature.
  std::size_t quadrature_points = 200001;
};

struct MigrationResult {
  /// (placed points, density weights) against (predicted particles, carried weights).
  double ks_migration = 0.0;
  /// (placed points, likelihood weights) against the exact likelihood restricted to the region.
  double ks_likelihood = 0.0;
  /// (placed points, mixed weights) against the quadrature Bayes posterior restricted to the region.
  double ks_posterior = 0.0;
  double beta_sum = 0.0;
  ImportanceRegion region;
};

namespace detail {

inline Matrix union_grid(const Matrix& a, const Matrix& b, std::size_t count = 2001) {
  const double lo = std::min(a.row(0).minCoeff(), b.row(0).minCoeff());
  const double hi = std::max(a.row(0).maxCoeff(), b.row(0).maxCoeff());
  return make_grid(lo, hi, count);
}

/// Trapezoid cumulative integral of `f` on a uniform grid over [lo, hi], normalized to end at 1.
class QuadratureCdf {
 public:
  template <class F>
  QuadratureCdf(F f, double lo, double hi, std::size_t points) : lo_{lo}, step_{(hi - lo) / static_cast<double>(points - 1)} {
    cum_.assign(points, 0.0);
    double prev = f(lo);
    for (std::size_t k = 1; k < points; ++k) {
      const double cur = f(lo + step_ * static_cast<double>(k));
      cum_[k] = cum_[k - 1] + 0.5 * step_ * (prev + cur);
      prev = cur;
    }
    const double total = cum_.back();
    for (auto& c : cum_) {
      c /= total;
    }
  }

  double operator()(const Eigen::Ref<const Vector>& x) const {
    const double s = (x[0] - lo_) / step_;
    if (s <= 0.0) {
      return 0.0;
    }
    const auto k = static_cast<std::size_t>(s);
    if (k + 1 >= cum_.size()) {
      return 1.0;
    }
    const double frac = s - static_cast<double>(k);
    return cum_[k] + frac * (cum_[k + 1] - cum_[k]);
  }

 private:
  double lo_;
  double step_;
  std::vector<double> cum_;
};

}  // namespace detail

/// One SVR filter step on the mixture model, scored against the prior sample and the exact posterior.
inline MigrationResult migration_check(const MigrationSetup& setup, RandomStream& rng) {
  const MixturePriorModel model(setup.prior, setup.likelihood_sd);
  const ParticleSet prev{Matrix::Zero(1, static_cast<Eigen::Index>(setup.n)),
                         std::vector<double>(setup.n, 1.0 / static_cast<double>(setup.n)), 0};
  const SvrpfSettings settings{setup.n, setup.m, setup.gamma, std::nullopt, setup.svr};
  const StepResult step = svrpf_step(model, prev, Vector::Constant(1, setup.observation), settings, rng);

  MigrationResult out;
  out.region = step.diagnostics.ir;
  out.beta_sum = step.density->beta().sum();
  const Matrix& placed = step.posterior.states;
  const StepCdf migrated(placed, step.svr_weights);
  const StepCdf source(step.predicted->states, step.predicted->weights);
  out.ks_migration = ks_distance(migrated, source, detail::union_grid(placed, step.predicted->states));

  const double lo = out.region.lower(0);
  const double hi = out.region.upper(0);
  const Matrix grid = make_grid(lo, hi);
  const double c = setup.observation;
  const double sd = setup.likelihood_sd;
  const double z_lo = normal_cdf((lo - c) / sd);
  const double z_hi = normal_cdf((hi - c) / sd);
  const auto exact_likelihood = [&](const Eigen::Ref<const Vector>& x) {
    return (normal_cdf((std::clamp(x[0], lo, hi) - c) / sd) - z_lo) / (z_hi - z_lo);
  };
  out.ks_likelihood = ks_distance(StepCdf(placed, step.likelihood_weights), exact_likelihood, grid);

  const detail::QuadratureCdf posterior(
      [&](double x) { return setup.prior.pdf(x) * normal_pdf((x - c) / sd); }, lo, hi, setup.quadrature_points);
  out.ks_posterior = ks_distance(StepCdf(placed, step.posterior.weights), posterior, grid);
  return out;
}

struct UnbiasednessResult {
  std::size_t comparisons = 0;
  /// Entries whose mean offspring count is more than 3 binomial standard errors from N w_i.
  std::size_t violations = 0;
  double max_z = 0.0;
  /// Largest |count_i - N w_i| in any single replication.
  double max_single_deviation = 0.0;
};

/// Mean offspring counts over `replications` draws for each of `vectors` random weight vectors of size `n`.
/**
 * Weight vectors are flat-Dirichlet draws. The offspring count of parent i is N times the total weight of its
 * offspring, which is the copy count for equal-weight schemes and N w_i for a particle that branching keeps
 * unchanged. The standard error of a mean count is the binomial sqrt(N w_i (1 - w_i) / replications).
 */
inline UnbiasednessResult resampling_unbiasedness(ResamplingScheme scheme, std::size_t n, std::size_t vectors,
                                                  std::size_t replications, RandomStream& rng,
                                                  BranchBounds bounds = {}) {
  UnbiasednessResult out;
  const auto dn = static_cast<double>(n);
  std::vector<double> w(n);
  std::vector<double> mean(n);
  std::vector<double> count(n);
  for (std::size_t v = 0; v < vectors; ++v) {
    double total = 0.0;
    for (auto& x : w) {
      x = -std::log1p(-rng.uniform());
      total += x;
    }
    for (auto& x : w) {
      x /= total;
    }
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t r = 0; r < replications; ++r) {
      const auto outcome = resample(scheme, w, rng, bounds);
      std::fill(count.begin(), count.end(), 0.0);
      for (std::size_t k = 0; k < outcome.indices.size(); ++k) {
        count[outcome.indices[k]] += dn * outcome.weights[k];
      }
      for (std::size_t i = 0; i < n; ++i) {
        mean[i] += count[i];
        out.max_single_deviation = std::max(out.max_single_deviation, std::abs(count[i] - dn * w[i]));
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double se = std::sqrt(dn * w[i] * (1.0 - w[i]) / static_cast<double>(replications));
      const double z = std::abs(mean[i] / static_cast<double>(replications) - dn * w[i]) / se;
      out.max_z = std::max(out.max_z, z);
      out.violations += z > 3.0 ? 1 : 0;
      ++out.comparisons;
    }
  }
  return out;
}

struct KalmanAgreement {
  std::size_t steps = 0;
  std::size_t within = 0;
  double max_z = 0.0;
  double ms_total = 0.0;
  [[nodiscard]] double fraction() const { return steps == 0 ? 0.0 : static_cast<double>(within) / static_cast<double>(steps); }
};

/// Filter estimates against the exact Kalman mean on a linear Gaussian model.
/**
 * A step agrees when |estimate - Kalman mean| <= 3 sqrt(P / ESS), P being the Kalman posterior variance. ESS
 * is that of the weights the estimate is formed from; for the SVR filter, whose estimate averages placed
 * points that are not posterior draws, it is the ESS of the predicted particles reweighted by the likelihood.
 * Run r draws its trajectory from stream (seed, r) and the filter from a child of that stream, as the
 * experiment harness does.
 */
inline KalmanAgreement kalman_agreement(const LinearGaussianModel& model, ProposalKind kind, bool svr,
                                        const SvrpfSettings& settings, int steps, std::size_t runs, std::uint64_t seed,
                                        ResamplingScheme scheme = ResamplingScheme::systematic) {
  if (model.state_dim() != 1) {
    throw InvalidArgument("Kalman agreement check is scalar");
  }
  const KalmanFilter kf(model);
  KalmanAgreement out;
  for (std::size_t run = 0; run < runs; ++run) {
    RandomStream root(seed, run);
    auto streams = root.split(2);
    Vector x = model.sample_initial(streams[0]);
    GaussianBelief belief = kf.initial();
    ParticleSet set = initial_particles(model, settings.n, streams[1]);
    for (int t = 1; t <= steps; ++t) {
      x = model.transition_sample(x, t, streams[0]);
      const Vector y = model.observation_sample(x, streams[0]);
      belief = kf.step(belief, y);
      StepResult step;
      if (svr) {
        step = svrpf_step(model, set, y, settings, streams[1]);
      } else if (kind == ProposalKind::prior) {
        step = gpf_step(model, set, y, scheme, streams[1]);
      } else if (kind == ProposalKind::ekf) {
        step = epf_step(model, set, y, scheme, streams[1]);
      } else {
        step = upf_step(model, set, y, scheme, streams[1]);
      }
      double ess = step.diagnostics.ess;
      if (svr) {
        const ParticleSet& pred = *step.predicted;
        std::vector<double> log_w(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
          log_w[i] = std::log(pred.weights[i]) + model.log_likelihood(pred.states.col(static_cast<Eigen::Index>(i)), y);
        }
        std::vector<double> w;
        normalize_log_weights(log_w, w);
        ess = effective_sample_size(w);
      }
      const double se = std::sqrt(belief.covariance(0, 0) / ess);
      const double z = std::abs(step.estimate[0] - belief.mean[0]) / se;
      out.max_z = std::max(out.max_z, z);
      out.within += z <= 3.0 ? 1 : 0;
      ++out.steps;
      out.ms_total += step.diagnostics.ms;
      set = std::move(step.posterior);
    }
  }
  return out;
}

}  // namespace svrpf

#endif

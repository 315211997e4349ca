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

#ifndef SVRPF_MODEL_HPP
#define SVRPF_MODEL_HPP

#include <svrpf/gaussian.hpp>
#include <svrpf/rng.hpp>
#include <svrpf/types.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

/**
 * \file
 * \brief State-space model abstraction `x_t = f(x_{t-1}, u_{t-1})`, `y_t = h(x_t, v_t)` and benchmark models.
 */

namespace svrpf {

/// Default lower bound applied to likelihood values so weight vectors never become all-zero.
inline constexpr double kDefaultLikelihoodFloor = 1e-300;

/// Jacobians of the transition map (F, d x d) and observation map (H, n_y x d).
struct Jacobians {
  Matrix transition;
  Matrix observation;
};

/// Abstract state-space model.
/**
 * Instances are immutable after construction and may be shared across threads; all randomness enters
 * through an explicitly passed stream. The time index `t` of a transition is the index of the state being
 * produced, so `transition_sample(x_0, 1, rng)` draws `x_1`.
 *
 * Optional capabilities (transition density, Jacobians, Gaussian noise covariances) are declared through
 * the `has_*` / `is_*` queries; calling an undeclared one raises UnsupportedCapability.
 */
class StateSpaceModel {
 public:
  explicit StateSpaceModel(double likelihood_floor = kDefaultLikelihoodFloor) : likelihood_floor_{likelihood_floor} {}
  virtual ~StateSpaceModel() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual Eigen::Index state_dim() const = 0;
  [[nodiscard]] virtual Eigen::Index obs_dim() const = 0;

  /// f(x_prev) with the process noise set to zero.
  [[nodiscard]] virtual Vector transition_mean(const Vector& x_prev, int t) const = 0;
  /// h(x) with the observation noise set to zero.
  [[nodiscard]] virtual Vector observation_mean(const Vector& x) const = 0;

  /// Draws x_t given x_{t-1}; throws ModelError if the result is not finite.
  Vector transition_sample(const Vector& x_prev, int t, RandomStream& rng) const {
    Vector x = do_transition_sample(x_prev, t, rng);
    if (!x.allFinite()) {
      std::ostringstream msg;
      msg << name() << ": non-finite transition at t=" << t << " from x_prev=[" << x_prev.transpose() << "]";
      throw ModelError(msg.str());
    }
    return x;
  }

  /// Draws y_t given x_t.
  [[nodiscard]] virtual Vector observation_sample(const Vector& x, RandomStream& rng) const = 0;

  /// log p(y | x), unfloored.
  [[nodiscard]] virtual double log_likelihood(const Vector& x, const Vector& y) const = 0;

  /// p(y | x), never below the model's likelihood floor.
  [[nodiscard]] double likelihood(const Vector& x, const Vector& y) const {
    return std::max(std::exp(log_likelihood(x, y)), likelihood_floor_);
  }

  [[nodiscard]] double likelihood_floor() const noexcept { return likelihood_floor_; }

  [[nodiscard]] virtual bool has_transition_density() const { return false; }

  [[nodiscard]] virtual double log_transition_density(const Vector& /*x*/, const Vector& /*x_prev*/, int /*t*/) const {
    throw UnsupportedCapability(name() + ": transition density is not available");
  }

  /// p(x_t = x | x_{t-1} = x_prev).
  [[nodiscard]] double transition_density(const Vector& x, const Vector& x_prev, int t) const {
    return std::exp(log_transition_density(x, x_prev, t));
  }

  [[nodiscard]] virtual bool is_differentiable() const { return false; }

  [[nodiscard]] virtual Matrix transition_jacobian(const Vector& /*x*/, int /*t*/) const {
    throw UnsupportedCapability(name() + ": model is not differentiable");
  }

  [[nodiscard]] virtual Matrix observation_jacobian(const Vector& /*x*/) const {
    throw UnsupportedCapability(name() + ": model is not differentiable");
  }

  /// F = df/dx and H = dh/dx, both evaluated at x.
  [[nodiscard]] Jacobians jacobians(const Vector& x, int t) const {
    return {transition_jacobian(x, t), observation_jacobian(x)};
  }

  /// True when u_t and v_t are additive zero-mean Gaussians (needed by the EKF/UKF proposals).
  [[nodiscard]] virtual bool has_gaussian_noise() const { return false; }
  [[nodiscard]] virtual Matrix process_covariance() const {
    throw UnsupportedCapability(name() + ": process noise is not Gaussian");
  }
  [[nodiscard]] virtual Matrix observation_covariance() const {
    throw UnsupportedCapability(name() + ": observation noise is not Gaussian");
  }

  [[nodiscard]] virtual Vector sample_initial(RandomStream& rng) const = 0;
  [[nodiscard]] virtual Vector initial_mean() const = 0;
  [[nodiscard]] virtual Matrix initial_covariance() const = 0;

 protected:
  [[nodiscard]] virtual Vector do_transition_sample(const Vector& x_prev, int t, RandomStream& rng) const = 0;

 private:
  double likelihood_floor_;
};

/// Base for models with additive Gaussian process and observation noise and a Gaussian initial state.
class AdditiveGaussianModel : public StateSpaceModel {
 public:
  AdditiveGaussianModel(Matrix process_cov, Matrix observation_cov, Vector initial_mean, Matrix initial_cov,
                        double likelihood_floor)
      : StateSpaceModel(likelihood_floor),
        process_noise_{std::move(process_cov)},
        observation_noise_{std::move(observation_cov)},
        initial_noise_{std::move(initial_cov)},
        initial_mean_{std::move(initial_mean)} {
    if (!observation_noise_.positive_definite()) {
      throw InvalidArgument("observation noise covariance must be positive definite");
    }
    if (initial_mean_.size() != process_noise_.dim() || initial_noise_.dim() != process_noise_.dim()) {
      throw InvalidArgument("initial state and process noise dimensions disagree");
    }
  }

  [[nodiscard]] Eigen::Index state_dim() const override { return process_noise_.dim(); }
  [[nodiscard]] Eigen::Index obs_dim() const override { return observation_noise_.dim(); }

  [[nodiscard]] Vector observation_sample(const Vector& x, RandomStream& rng) const override {
    return observation_mean(x) + observation_noise_.sample(rng);
  }

  [[nodiscard]] double log_likelihood(const Vector& x, const Vector& y) const override {
    return observation_noise_.log_density(y - observation_mean(x));
  }

  [[nodiscard]] bool has_transition_density() const override { return process_noise_.positive_definite(); }

  [[nodiscard]] double log_transition_density(const Vector& x, const Vector& x_prev, int t) const override {
    return process_noise_.log_density(x - transition_mean(x_prev, t));
  }

  [[nodiscard]] bool has_gaussian_noise() const override { return true; }
  [[nodiscard]] Matrix process_covariance() const override { return process_noise_.covariance(); }
  [[nodiscard]] Matrix observation_covariance() const override { return observation_noise_.covariance(); }

  [[nodiscard]] Vector sample_initial(RandomStream& rng) const override {
    return initial_mean_ + initial_noise_.sample(rng);
  }
  [[nodiscard]] Vector initial_mean() const override { return initial_mean_; }
  [[nodiscard]] Matrix initial_covariance() const override { return initial_noise_.covariance(); }

 protected:
  [[nodiscard]] Vector do_transition_sample(const Vector& x_prev, int t, RandomStream& rng) const override {
    return transition_mean(x_prev, t) + process_noise_.sample(rng);
  }

 private:
  GaussianNoise process_noise_;
  GaussianNoise observation_noise_;
  GaussianNoise initial_noise_;
  Vector initial_mean_;
};

/// x_t = A x_{t-1} + u, y_t = C x_t + v. Admits the exact Kalman recursion (see kalman.hpp).
class LinearGaussianModel final : public AdditiveGaussianModel {
 public:
  LinearGaussianModel(Matrix a, Matrix c, Matrix q, Matrix r, Vector initial_mean, Matrix initial_cov,
                      double likelihood_floor = kDefaultLikelihoodFloor)
      : AdditiveGaussianModel(std::move(q), std::move(r), std::move(initial_mean), std::move(initial_cov),
                              likelihood_floor),
        a_{std::move(a)},
        c_{std::move(c)} {
    if (a_.rows() != state_dim() || a_.cols() != state_dim() || c_.rows() != obs_dim() || c_.cols() != state_dim()) {
      throw InvalidArgument("linear model matrix dimensions disagree with noise covariances");
    }
  }

  /// Scalar convenience constructor.
  static LinearGaussianModel scalar(double a, double c, double q, double r, double m0, double p0,
                                    double likelihood_floor = kDefaultLikelihoodFloor) {
    return {Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, c), Matrix::Constant(1, 1, q),
            Matrix::Constant(1, 1, r), Vector::Constant(1, m0),   Matrix::Constant(1, 1, p0),
            likelihood_floor};
  }

  [[nodiscard]] std::string name() const override { return "linear_gaussian"; }
  [[nodiscard]] const Matrix& a() const noexcept { return a_; }
  [[nodiscard]] const Matrix& c() const noexcept { return c_; }

  [[nodiscard]] Vector transition_mean(const Vector& x_prev, int /*t*/) const override { return a_ * x_prev; }
  [[nodiscard]] Vector observation_mean(const Vector& x) const override { return c_ * x; }

  [[nodiscard]] bool is_differentiable() const override { return true; }
  [[nodiscard]] Matrix transition_jacobian(const Vector& /*x*/, int /*t*/) const override { return a_; }
  [[nodiscard]] Matrix observation_jacobian(const Vector& /*x*/) const override { return c_; }

 private:
  Matrix a_;
  Matrix c_;
};

/// Univariate nonlinear growth benchmark.
/**
 *     x_t = x/2 + 25 x / (1 + x^2) + 8 cos(1.2 t) + u,   u ~ N(0, q)
 *     y_t = x_t^2 / 20 + v,                               v ~ N(0, r)
 *     x_0 ~ N(m0, p0)
 *
 * The observation map is even, so the posterior is bimodal whenever the sign of x is not identified by
 * the dynamics.
 */
class NonlinearGrowthModel final : public AdditiveGaussianModel {
 public:
  NonlinearGrowthModel(double q, double r, double m0 = 0.0, double p0 = 5.0,
                       double likelihood_floor = kDefaultLikelihoodFloor)
      : AdditiveGaussianModel(Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r), Vector::Constant(1, m0),
                              Matrix::Constant(1, 1, p0), likelihood_floor),
        q_{q},
        r_{r} {}

  [[nodiscard]] std::string name() const override { return "nonlinear_growth"; }
  [[nodiscard]] double q() const noexcept { return q_; }
  [[nodiscard]] double r() const noexcept { return r_; }

  [[nodiscard]] Vector transition_mean(const Vector& x_prev, int t) const override {
    const double x = x_prev[0];
    return Vector::Constant(1, 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * std::cos(1.2 * t));
  }

  [[nodiscard]] Vector observation_mean(const Vector& x) const override {
    return Vector::Constant(1, x[0] * x[0] / 20.0);
  }

  [[nodiscard]] bool is_differentiable() const override { return true; }

  [[nodiscard]] Matrix transition_jacobian(const Vector& x, int /*t*/) const override {
    const double x2 = x[0] * x[0];
    const double denom = (1.0 + x2) * (1.0 + x2);
    return Matrix::Constant(1, 1, 0.5 + 25.0 * (1.0 - x2) / denom);
  }

  [[nodiscard]] Matrix observation_jacobian(const Vector& x) const override {
    return Matrix::Constant(1, 1, x[0] / 10.0);
  }

 private:
  double q_;
  double r_;
};

}  // namespace svrpf

#endif

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

#ifndef SVRPF_PROPOSALS_HPP
#define SVRPF_PROPOSALS_HPP

#include <svrpf/model.hpp>
#include <svrpf/rng.hpp>
#include <svrpf/types.hpp>

#include <cmath>
#include <limits>
#include <numbers>

/**
 * \file
 * \brief Per-particle Gaussian proposals from one EKF or UKF predict/update cycle.
 *
 * Both start from a single particle x_{t-1} with covariance P_{t-1} (zero unless given), predict through the
 * transition, and condition on y_t. With P_{t-1} = 0 the result approximates p(x_t | x_{t-1}, y_t).
 */

namespace svrpf {

/// Gaussian proposal N(mean, covariance) for one particle.
struct KalmanProposal {
  Vector mean;
  Matrix covariance;
  /// The innovation covariance was singular and got +1e-10 I.
  bool regularized = false;
  /// The covariance had an eigenvalue below -1e-10 and was clamped to PSD.
  bool clamped = false;
};

/// Scaled unscented transform parameters.
struct UkfParams {
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 0.0;
};

namespace detail {

inline constexpr double kInnovationJitter = 1e-10;
inline constexpr double kEigenTolerance = 1e-10;

/// Symmetrizes `p` and clamps negative eigenvalues to zero. Returns true if one was below -1e-10.
inline bool symmetrize_psd(Matrix& p) {
  p = 0.5 * (p + p.transpose());
  if (p.rows() == 1) {
    const bool bad = p(0, 0) < -kEigenTolerance;
    p(0, 0) = std::max(p(0, 0), 0.0);
    return bad;
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
  const double lowest = eig.eigenvalues().minCoeff();
  if (lowest >= 0.0) {
    return false;
  }
  p = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  p = 0.5 * (p + p.transpose());
  return lowest < -kEigenTolerance;
}

/// Symmetric square root S with S S' = p for a PSD matrix.
inline Matrix psd_sqrt(const Matrix& p) {
  if (p.rows() == 1) {
    return Matrix::Constant(1, 1, std::sqrt(std::max(p(0, 0), 0.0)));
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

/// Cholesky of the innovation covariance, adding 1e-10 I once if it is not positive definite.
inline Eigen::LLT<Matrix> innovation_factor(const Matrix& s, bool& regularized) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    regularized = true;
    llt.compute(s + kInnovationJitter * Matrix::Identity(s.rows(), s.cols()));
    if (llt.info() != Eigen::Success) {
      throw ModelError("innovation covariance is not positive definite even after regularization");
    }
  }
  return llt;
}

struct SigmaPoints {
  Matrix points;
  Vector wm;
  Vector wc;
};

inline SigmaPoints sigma_points(const Vector& mean, const Matrix& cov, const UkfParams& params) {
  const auto n = static_cast<double>(mean.size());
  const double spread = params.alpha * params.alpha * (n + params.kappa);
  if (!(spread > 0.0)) {
    throw InvalidArgument("unscented transform needs alpha^2 (n + kappa) > 0");
  }
  const double lambda = spread - n;
  const Eigen::Index count = 2 * mean.size() + 1;
  SigmaPoints s{Matrix(mean.size(), count), Vector::Constant(count, 0.5 / spread),
                Vector::Constant(count, 0.5 / spread)};
  s.wm[0] = lambda / spread;
  s.wc[0] = lambda / spread + 1.0 - params.alpha * params.alpha + params.beta;
  const Matrix offset = std::sqrt(spread) * psd_sqrt(cov);
  s.points.col(0) = mean;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    s.points.col(1 + i) = mean + offset.col(i);
    s.points.col(1 + mean.size() + i) = mean - offset.col(i);
  }
  return s;
}

inline void require_gaussian_noise(const StateSpaceModel& model) {
  if (!model.has_gaussian_noise()) {
    throw UnsupportedCapability("Kalman proposals need a model with additive Gaussian noise");
  }
}

}  // namespace detail

/// EKF predict from (x_prev, p_prev) followed by an EKF update on y.
inline KalmanProposal ekf_proposal(const StateSpaceModel& model, const Vector& x_prev, const Vector& y, int t,
                                   const Matrix& p_prev) {
  detail::require_gaussian_noise(model);
  if (!model.is_differentiable()) {
    throw UnsupportedCapability("EKF proposal needs model Jacobians");
  }
  KalmanProposal out;
  const Vector predicted = model.transition_mean(x_prev, t);
  const Matrix f = model.transition_jacobian(x_prev, t);
  Matrix p_pre = f * p_prev * f.transpose() + model.process_covariance();
  out.clamped = detail::symmetrize_psd(p_pre);
  const Matrix h = model.observation_jacobian(predicted);
  const Matrix s = h * p_pre * h.transpose() + model.observation_covariance();
  const auto llt = detail::innovation_factor(s, out.regularized);
  const Matrix gain = llt.solve(h * p_pre).transpose();
  out.mean = predicted + gain * (y - model.observation_mean(predicted));
  out.covariance = p_pre - gain * h * p_pre;
  out.clamped = detail::symmetrize_psd(out.covariance) || out.clamped;
  return out;
}

inline KalmanProposal ekf_proposal(const StateSpaceModel& model, const Vector& x_prev, const Vector& y, int t) {
  return ekf_proposal(model, x_prev, y, t, Matrix::Zero(x_prev.size(), x_prev.size()));
}

/// Unscented predict from (x_prev, p_prev) followed by an unscented update on y.
inline KalmanProposal ukf_proposal(const StateSpaceModel& model, const Vector& x_prev, const Vector& y, int t,
                                   const UkfParams& params, const Matrix& p_prev) {
  detail::require_gaussian_noise(model);
  KalmanProposal out;
  const auto prior = detail::sigma_points(x_prev, p_prev, params);
  Matrix propagated(x_prev.size(), prior.points.cols());
  for (Eigen::Index j = 0; j < prior.points.cols(); ++j) {
    propagated.col(j) = model.transition_mean(prior.points.col(j), t);
  }
  const Vector predicted = propagated * prior.wm;
  const Matrix dx = propagated.colwise() - predicted;
  Matrix p_pre = dx * prior.wc.asDiagonal() * dx.transpose() + model.process_covariance();
  out.clamped = detail::symmetrize_psd(p_pre);

  const auto sig = detail::sigma_points(predicted, p_pre, params);
  Matrix observed(model.obs_dim(), sig.points.cols());
  for (Eigen::Index j = 0; j < sig.points.cols(); ++j) {
    observed.col(j) = model.observation_mean(sig.points.col(j));
  }
  const Vector y_hat = observed * sig.wm;
  const Matrix dy = observed.colwise() - y_hat;
  const Matrix dxs = sig.points.colwise() - predicted;
  Matrix s = dy * sig.wc.asDiagonal() * dy.transpose() + model.observation_covariance();
  s = 0.5 * (s + s.transpose());
  const Matrix cross = dxs * sig.wc.asDiagonal() * dy.transpose();
  const auto llt = detail::innovation_factor(s, out.regularized);
  const Matrix gain = llt.solve(cross.transpose()).transpose();
  out.mean = predicted + gain * (y - y_hat);
  out.covariance = p_pre - gain * s * gain.transpose();
  out.clamped = detail::symmetrize_psd(out.covariance) || out.clamped;
  return out;
}

inline KalmanProposal ukf_proposal(const StateSpaceModel& model, const Vector& x_prev, const Vector& y, int t,
                                   const UkfParams& params = {}) {
  return ukf_proposal(model, x_prev, y, t, params, Matrix::Zero(x_prev.size(), x_prev.size()));
}

/// A draw from a proposal together with its log proposal density.
struct ProposalDraw {
  Vector x;
  double log_density = 0.0;
};

/// Samples N(mean, covariance). A zero covariance returns the mean with log density +inf.
inline ProposalDraw sample_proposal(const KalmanProposal& proposal, RandomStream& rng) {
  const Eigen::Index d = proposal.mean.size();
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    z[i] = rng.standard_normal();
  }
  Eigen::LLT<Matrix> llt(proposal.covariance);
  if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all()) {
    const Matrix l = llt.matrixL();
    return {proposal.mean + l * z, -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
                                       l.diagonal().array().log().sum() - 0.5 * z.squaredNorm()};
  }
  // Singular proposal: move only along the nonzero directions; the density is a point mass there.
  return {proposal.mean + detail::psd_sqrt(proposal.covariance) * z, std::numeric_limits<double>::infinity()};
}

}  // namespace svrpf

#endif

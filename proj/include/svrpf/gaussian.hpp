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

#ifndef SVRPF_GAUSSIAN_HPP
#define SVRPF_GAUSSIAN_HPP

#include <svrpf/rng.hpp>
#include <svrpf/types.hpp>

#include <cmath>
#include <numbers>

namespace svrpf {

/// Zero-mean multivariate normal with a fixed covariance.
/**
 * Sampling uses a symmetric square root so positive semidefinite (including all-zero) covariances are
 * accepted. Density queries need a positive definite covariance.
 */
class GaussianNoise {
 public:
  GaussianNoise() = default;

  explicit GaussianNoise(Matrix covariance) : covariance_{std::move(covariance)} {
    if (covariance_.rows() != covariance_.cols() || covariance_.rows() == 0) {
      throw InvalidArgument("covariance must be a non-empty square matrix");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_);
    const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
    sqrt_ = eig.eigenvectors() * clamped.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    is_zero_ = clamped.maxCoeff() == 0.0;
    const Eigen::LLT<Matrix> llt(covariance_);
    positive_definite_ = llt.info() == Eigen::Success && clamped.minCoeff() > 0.0;
    if (positive_definite_) {
      chol_ = llt.matrixL();
      log_norm_ = -0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) -
                  chol_.diagonal().array().log().sum();
    }
  }

  [[nodiscard]] Eigen::Index dim() const noexcept { return covariance_.rows(); }
  [[nodiscard]] const Matrix& covariance() const noexcept { return covariance_; }
  [[nodiscard]] bool positive_definite() const noexcept { return positive_definite_; }
  [[nodiscard]] bool is_zero() const noexcept { return is_zero_; }

  /// Draws one noise vector. An all-zero covariance returns an exact zero vector without consuming draws.
  Vector sample(RandomStream& rng) const {
    if (is_zero_) {
      return Vector::Zero(dim());
    }
    Vector z(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) {
      z[i] = rng.standard_normal();
    }
    return sqrt_ * z;
  }

  [[nodiscard]] double log_density(const Eigen::Ref<const Vector>& residual) const {
    if (!positive_definite_) {
      throw UnsupportedCapability("density of a singular Gaussian is undefined");
    }
    const Vector whitened = chol_.triangularView<Eigen::Lower>().solve(residual);
    return log_norm_ - 0.5 * whitened.squaredNorm();
  }

 private:
  Matrix covariance_;
  Matrix sqrt_;
  Matrix chol_;
  double log_norm_ = 0.0;
  bool positive_definite_ = false;
  bool is_zero_ = false;
};

/// Log density of N(mean, covariance) at x, jittering the diagonal if the covariance is numerically singular.
inline double gaussian_log_density(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& mean,
                                   const Eigen::Ref<const Matrix>& covariance) {
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) {
    llt.compute(covariance + 1e-12 * Matrix::Identity(covariance.rows(), covariance.cols()));
  }
  const Matrix l = llt.matrixL();
  const Vector whitened = l.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) -
         l.diagonal().array().log().sum() - 0.5 * whitened.squaredNorm();
}

}  // namespace svrpf

#endif

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

#ifndef SVRPF_KALMAN_HPP
#define SVRPF_KALMAN_HPP

#include <svrpf/model.hpp>

namespace svrpf {

/// Gaussian belief (mean, covariance).
struct GaussianBelief {
  Vector mean;
  Matrix covariance;
};

/// Exact Kalman recursion for LinearGaussianModel; the reference every particle filter must match.
class KalmanFilter {
 public:
  explicit KalmanFilter(const LinearGaussianModel& model) : model_{&model} {}

  [[nodiscard]] GaussianBelief initial() const { return {model_->initial_mean(), model_->initial_covariance()}; }

  [[nodiscard]] GaussianBelief predict(const GaussianBelief& posterior) const {
    const Matrix& a = model_->a();
    Matrix p = a * posterior.covariance * a.transpose() + model_->process_covariance();
    return {a * posterior.mean, 0.5 * (p + p.transpose())};
  }

  [[nodiscard]] GaussianBelief update(const GaussianBelief& prior, const Vector& y) const {
    const Matrix& c = model_->c();
    const Matrix s = c * prior.covariance * c.transpose() + model_->observation_covariance();
    const Matrix gain = prior.covariance * c.transpose() * s.inverse();
    Matrix p = prior.covariance - gain * c * prior.covariance;
    return {prior.mean + gain * (y - c * prior.mean), 0.5 * (p + p.transpose())};
  }

  [[nodiscard]] GaussianBelief step(const GaussianBelief& posterior, const Vector& y) const {
    return update(predict(posterior), y);
  }

 private:
  const LinearGaussianModel* model_;
};

}  // namespace svrpf

#endif

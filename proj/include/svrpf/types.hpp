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

#ifndef SVRPF_TYPES_HPP
#define SVRPF_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

/**
 * \file
 * \brief Common vector aliases and the exception hierarchy used across the library.
 */

namespace svrpf {

/// Column vector used for states and observations.
using Vector = Eigen::VectorXd;
/// Dense matrix. Particle clouds are stored as d x N, one particle per column.
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A model map (f or h) produced a non-finite value.
struct ModelError : Error {
  using Error::Error;
};

/// The model does not provide the requested query (transition density, Jacobians).
struct UnsupportedCapability : Error {
  using Error::Error;
};

/// Precondition violation on an argument (empty cloud, gamma < 1, bad bounds, ...).
struct InvalidArgument : Error {
  using Error::Error;
};

/// The SVR quadratic program stayed infeasible after all epsilon retries.
struct SvrFitError : Error {
  SvrFitError(const std::string& what, double final_epsilon) : Error(what), epsilon(final_epsilon) {}
  double epsilon;
};

/// Configuration file or CLI value could not be parsed or failed validation.
struct ConfigError : Error {
  using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;

/// Standard normal density.
inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace svrpf

#endif

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

#ifndef SVRPF_WEIGHTS_HPP
#define SVRPF_WEIGHTS_HPP

#include <svrpf/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace svrpf {

/// Tolerance on |sum(w) - 1| accepted wherever normalized weights are required.
inline constexpr double kWeightSumTolerance = 1e-10;

/// Throws InvalidArgument unless `w` is non-empty, finite, nonnegative and sums to one.
inline void check_weights(std::span<const double> w) {
  if (w.empty()) {
    throw InvalidArgument("weight vector is empty");
  }
  double sum = 0.0;
  for (double wi : w) {
    if (!std::isfinite(wi) || wi < 0.0) {
      throw InvalidArgument("weights must be finite and nonnegative");
    }
    sum += wi;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    throw InvalidArgument("weights do not sum to one (sum = " + std::to_string(sum) + ")");
  }
}

/// 1 / sum w_i^2 for normalized weights.
inline double effective_sample_size(std::span<const double> w) {
  double sq = 0.0;
  for (double wi : w) {
    sq += wi * wi;
  }
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

/// Normalizes log-weights in place into `out` with the max-shift trick.
/**
 * Returns false (and writes uniform weights) when every log-weight is -inf or any is NaN.
 */
inline bool normalize_log_weights(std::span<const double> log_w, std::vector<double>& out) {
  out.assign(log_w.size(), 0.0);
  if (log_w.empty()) {
    return false;
  }
  double top = -std::numeric_limits<double>::infinity();
  bool nan = false;
  for (double v : log_w) {
    nan = nan || std::isnan(v);
    top = std::max(top, v);
  }
  const double uniform = 1.0 / static_cast<double>(log_w.size());
  if (nan || !std::isfinite(top)) {
    std::fill(out.begin(), out.end(), uniform);
    return false;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    out[i] = std::exp(log_w[i] - top);
    sum += out[i];
  }
  for (auto& v : out) {
    v /= sum;
  }
  return true;
}

}  // namespace svrpf

#endif

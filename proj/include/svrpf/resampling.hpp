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

#ifndef SVRPF_RESAMPLING_HPP
#define SVRPF_RESAMPLING_HPP

#include <svrpf/rng.hpp>
#include <svrpf/types.hpp>
#include <svrpf/weights.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/**
 * \file
 * \brief Resampling schemes over a normalized weight vector.
 *
 * Every scheme returns parent indices (grouped by parent, except multinomial which keeps draw order) and
 * the weights the offspring carry. Fixed-size schemes always produce uniform weights `1 / count`.
 */

namespace svrpf {

enum class ResamplingScheme { systematic, multinomial, min_variance, residual, branching };

inline std::string_view to_string(ResamplingScheme scheme) {
  switch (scheme) {
    case ResamplingScheme::systematic:
      return "systematic";
    case ResamplingScheme::multinomial:
      return "multinomial";
    case ResamplingScheme::min_variance:
      return "min_variance";
    case ResamplingScheme::residual:
      return "residual";
    case ResamplingScheme::branching:
      return "branching";
  }
  return "unknown";
}

inline std::optional<ResamplingScheme> parse_resampling_scheme(std::string_view text) {
  for (auto scheme : {ResamplingScheme::systematic, ResamplingScheme::multinomial, ResamplingScheme::min_variance,
                      ResamplingScheme::residual, ResamplingScheme::branching}) {
    if (text == to_string(scheme)) {
      return scheme;
    }
  }
  return std::nullopt;
}

struct ResampleOutcome {
  std::vector<std::size_t> indices;
  std::vector<double> weights;
};

/// Branching keeps particle i untouched while `N w_i` lies strictly inside (lower, upper).
struct BranchBounds {
  double lower = 0.25;
  double upper = 4.0;
};

/// Offspring count per parent.
inline std::vector<std::size_t> offspring_counts(const ResampleOutcome& outcome, std::size_t parents) {
  std::vector<std::size_t> counts(parents, 0);
  for (auto i : outcome.indices) {
    ++counts.at(i);
  }
  return counts;
}

namespace detail {

/// `n * w`, snapped to the nearest integer when within rounding noise of it.
inline double expected_offspring(double w, std::size_t n) {
  const double v = static_cast<double>(n) * w;
  const double nearest = std::round(v);
  return std::abs(v - nearest) <= 1e-9 * std::max(1.0, v) ? nearest : v;
}

inline std::vector<double> cumulative(std::span<const double> w) {
  std::vector<double> cum(w.size());
  std::partial_sum(w.begin(), w.end(), cum.begin());
  return cum;
}

inline std::size_t last_positive(std::span<const double> w) {
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) {
      last = i;
    }
  }
  return last;
}

/// Walks ascending points in [0, total) through the cumulative weights; zero-weight parents are never hit.
inline void assign_sorted(std::span<const double> w, std::span<const double> points, std::vector<std::size_t>& out) {
  const auto cum = cumulative(w);
  const std::size_t last = last_positive(w);
  std::size_t j = 0;
  for (double p : points) {
    while (j < last && cum[j] <= p) {
      ++j;
    }
    out.push_back(j);
  }
}

/// `count` ascending order statistics of U(0, total), generated in O(count).
inline std::vector<double> sorted_uniforms(std::size_t count, double total, RandomStream& rng) {
  // The maximum of k uniforms is U^(1/k); peeling maxima off from the top fills the vector back to front.
  std::vector<double> points(count);
  double running_max = 1.0;
  for (std::size_t k = count; k > 0; --k) {
    running_max *= std::pow(rng.uniform(), 1.0 / static_cast<double>(k));
    points[k - 1] = running_max * total;
  }
  return points;
}

inline ResampleOutcome uniform_outcome(std::vector<std::size_t> indices) {
  const auto n = indices.size();
  return {std::move(indices), std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

}  // namespace detail

/// Systematic resampling with an explicit stratum offset `u` in [0, 1).
/**
 * Offspring k (0-based) takes the parent whose cumulative-weight interval contains `(u + k) / count`.
 * `count == 0` means `count = w.size()`.
 */
inline ResampleOutcome systematic_resample_at(std::span<const double> w, double u, std::size_t count = 0) {
  check_weights(w);
  if (count == 0) {
    count = w.size();
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> points(count);
  for (std::size_t k = 0; k < count; ++k) {
    points[k] = total * (u + static_cast<double>(k)) / static_cast<double>(count);
  }
  std::vector<std::size_t> indices;
  indices.reserve(count);
  detail::assign_sorted(w, points, indices);
  return detail::uniform_outcome(std::move(indices));
}

/// Systematic resampling: a single uniform offset shared by all strata.
inline ResampleOutcome systematic_resample(std::span<const double> w, RandomStream& rng, std::size_t count = 0) {
  check_weights(w);
  return systematic_resample_at(w, rng.uniform(), count);
}

/// Independent uniform per offspring (inverse-CDF lookup), returned in draw order.
inline ResampleOutcome multinomial_resample(std::span<const double> w, RandomStream& rng, std::size_t count = 0) {
  check_weights(w);
  if (count == 0) {
    count = w.size();
  }
  const auto cum = detail::cumulative(w);
  const double total = cum.back();
  const std::size_t last = detail::last_positive(w);
  std::vector<std::size_t> indices;
  indices.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    indices.push_back(std::min(static_cast<std::size_t>(it - cum.begin()), last));
  }
  return detail::uniform_outcome(std::move(indices));
}

/// Minimum-variance resampling: count_i is always floor(N w_i) or ceil(N w_i), with E[count_i] = N w_i.
/**
 * Deterministic floor(N w_i) copies, then systematic sampling of the N_res remaining offspring over the
 * fractional parts. Each fractional part is below one, so no parent gains more than one extra copy.
 */
inline ResampleOutcome minimum_variance_resample(std::span<const double> w, RandomStream& rng) {
  check_weights(w);
  const std::size_t n = w.size();
  std::vector<std::size_t> indices;
  indices.reserve(n);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = detail::expected_offspring(w[i], n);
    const double whole = std::floor(v);
    indices.insert(indices.end(), static_cast<std::size_t>(whole), i);
    residual[i] = v - whole;
  }
  const std::size_t remaining = n - indices.size();
  if (remaining > 0) {
    const double total = std::accumulate(residual.begin(), residual.end(), 0.0);
    const double u = rng.uniform();
    std::vector<double> points(remaining);
    for (std::size_t k = 0; k < remaining; ++k) {
      points[k] = total * (u + static_cast<double>(k)) / static_cast<double>(remaining);
    }
    detail::assign_sorted(residual, points, indices);
    std::sort(indices.begin(), indices.end());
  }
  return detail::uniform_outcome(std::move(indices));
}

/// Residual resampling: floor(N w_i) deterministic copies, remainder multinomial over the fractional parts.
inline ResampleOutcome residual_resample(std::span<const double> w, RandomStream& rng) {
  check_weights(w);
  const std::size_t n = w.size();
  std::vector<std::size_t> indices;
  indices.reserve(n);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = detail::expected_offspring(w[i], n);
    const double whole = std::floor(v);
    indices.insert(indices.end(), static_cast<std::size_t>(whole), i);
    residual[i] = v - whole;
  }
  const std::size_t remaining = n - indices.size();
  if (remaining > 0) {
    const double total = std::accumulate(residual.begin(), residual.end(), 0.0);
    const auto points = detail::sorted_uniforms(remaining, total, rng);
    detail::assign_sorted(residual, points, indices);
    std::sort(indices.begin(), indices.end());
  }
  return detail::uniform_outcome(std::move(indices));
}

/// Branching resampling with per-particle bounds; the population size is random.
/**
 * Particle i with `N w_i` outside `(lower_i, upper_i)` is replaced by `floor(N w_i) + Bernoulli(frac(N w_i))`
 * offspring of weight `1 / N`; otherwise it is kept once with its weight `w_i`. Returned weights are not
 * renormalized.
 */
inline ResampleOutcome branching_resample(std::span<const double> w, std::span<const BranchBounds> bounds,
                                          RandomStream& rng) {
  check_weights(w);
  const std::size_t n = w.size();
  if (bounds.size() != n) {
    throw InvalidArgument("branching bounds must be given per particle");
  }
  const auto dn = static_cast<double>(n);
  for (const auto& b : bounds) {
    if (!(0.0 < b.lower && b.lower < b.upper && b.upper < dn)) {
      throw InvalidArgument("branching bounds must satisfy 0 < a < b < N");
    }
  }
  ResampleOutcome out;
  out.indices.reserve(n);
  out.weights.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = detail::expected_offspring(w[i], n);
    if (v > bounds[i].lower && v < bounds[i].upper) {
      out.indices.push_back(i);
      out.weights.push_back(w[i]);
      continue;
    }
    const double whole = std::floor(v);
    const bool extra = rng.uniform() < v - whole;
    const auto copies = static_cast<std::size_t>(whole) + (extra ? 1U : 0U);
    out.indices.insert(out.indices.end(), copies, i);
    out.weights.insert(out.weights.end(), copies, 1.0 / dn);
  }
  return out;
}

inline ResampleOutcome branching_resample(std::span<const double> w, BranchBounds bounds, RandomStream& rng) {
  const std::vector<BranchBounds> all(w.size(), bounds);
  return branching_resample(w, all, rng);
}

/// Dispatch on the configured scheme.
inline ResampleOutcome resample(ResamplingScheme scheme, std::span<const double> w, RandomStream& rng,
                                BranchBounds bounds = {}) {
  switch (scheme) {
    case ResamplingScheme::systematic:
      return systematic_resample(w, rng);
    case ResamplingScheme::multinomial:
      return multinomial_resample(w, rng);
    case ResamplingScheme::min_variance:
      return minimum_variance_resample(w, rng);
    case ResamplingScheme::residual:
      return residual_resample(w, rng);
    case ResamplingScheme::branching:
      return branching_resample(w, bounds, rng);
  }
  throw InvalidArgument("unknown resampling scheme");
}

}  // namespace svrpf

#endif

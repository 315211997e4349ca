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

#ifndef SVRPF_SVR_DENSITY_HPP
#define SVRPF_SVR_DENSITY_HPP

#include <svrpf/quadprog.hpp>
#include <svrpf/region.hpp>
#include <svrpf/types.hpp>
#include <svrpf/weights.hpp>

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <utility>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

/**
 * \file
 * \brief Density estimation by support vector regression on the weighted empirical CDF.
 *
 * Given weighted particles {x_i, w_i} the empirical CDF F(x_i) = sum_j w_j [x_i > x_j] (strict in every
 * coordinate) is computed at each particle. Coefficients beta are the solution of
 *
 *     minimize    sum_ij beta_i beta_j k(x_i, x_j)
 *     subject to  |F(x_i) - sum_j beta_j K(x_i, x_j)| <= epsilon_i   for all i
 *                 beta >= 0,  sum beta = 1
 *
 * where k is a unit-mass density kernel and K its CDF. By default the tube epsilon_i follows the sampling
 * noise of F(x_i), sqrt(F (1 - F) / N), floored at a fifth of its peak value and at w_i. The fitted density is p(x) = sum_i beta_i k(x, x_i)
 * and its CDF is sum_i beta_i K(x, x_i).
 */

namespace svrpf {

/// Product Gaussian kernel pair: k is the density with per-dimension bandwidth h, K its CDF.
class KernelPair {
 public:
  KernelPair() = default;

  explicit KernelPair(Vector bandwidth) : bandwidth_{std::move(bandwidth)} {
    if (bandwidth_.size() == 0 || !(bandwidth_.array() > 0.0).all() || !bandwidth_.allFinite()) {
      throw InvalidArgument("kernel bandwidth must be positive and finite in every dimension");
    }
    norm_ = 1.0;
    for (Eigen::Index i = 0; i < bandwidth_.size(); ++i) {
      norm_ *= kInvSqrt2Pi / bandwidth_[i];
    }
  }

  static KernelPair isotropic(double h, Eigen::Index dim = 1) { return KernelPair(Vector::Constant(dim, h)); }

  [[nodiscard]] const Vector& bandwidth() const noexcept { return bandwidth_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return bandwidth_.size(); }

  /// k(x, center), with every bandwidth multiplied by `scale`.
  [[nodiscard]] double density(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& center,
                               double scale = 1.0) const {
    double q = 0.0;
    for (Eigen::Index i = 0; i < bandwidth_.size(); ++i) {
      const double z = (x[i] - center[i]) / (scale * bandwidth_[i]);
      if (std::abs(z) > kCutoff) {
        return 0.0;
      }
      q += z * z;
    }
    return norm_ * std::pow(scale, -static_cast<double>(bandwidth_.size())) * std::exp(-0.5 * q);
  }

  /// K(x, center) = P(X <= x) for X distributed with density k(., center) at the same `scale`.
  [[nodiscard]] double cdf(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& center,
                           double scale = 1.0) const {
    double c = 1.0;
    for (Eigen::Index i = 0; i < bandwidth_.size(); ++i) {
      c *= normal_cdf((x[i] - center[i]) / (scale * bandwidth_[i]));
    }
    return c;
  }

 private:
  // exp(-0.5 * 38.5^2) underflows; the density is below 1e-300 relative well before that.
  static constexpr double kCutoff = 38.0;

  Vector bandwidth_;
  double norm_ = 0.0;
};

/// Weighted standard deviation of each row.
inline Vector weighted_std(const Eigen::Ref<const Matrix>& particles, std::span<const double> weights) {
  const Eigen::Map<const Vector> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const double total = w.sum();
  const Vector mean = particles * w / total;
  const Matrix centered = particles.colwise() - mean;
  return (centered.array().square().matrix() * w / total).cwiseSqrt();
}

/// Silverman's rule per dimension, h = 1.06 sigma N^(-1/5), from the weighted standard deviation.
/**
 * A degenerate dimension (sigma = 0) falls back to the default minimum region width at its mean.
 */
inline Vector silverman_bandwidth(const Eigen::Ref<const Matrix>& particles, std::span<const double> weights) {
  const Eigen::Map<const Vector> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const Vector mean = particles * w / w.sum();
  const Vector sigma = weighted_std(particles, weights);
  const double factor = 1.06 * std::pow(static_cast<double>(particles.cols()), -0.2);
  Vector h(particles.rows());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    h[i] = sigma[i] > 0.0 ? factor * sigma[i] : default_min_width(mean[i]);
  }
  return h;
}

namespace detail {

/// Weighted quantile by linear interpolation of the cumulative weight at the sorted points.
inline double weighted_quantile(std::vector<std::pair<double, double>> sorted, double q) {
  double cum = 0.0;
  double prev_x = sorted.front().first;
  double prev_c = 0.0;
  for (const auto& [x, w] : sorted) {
    const double next = cum + w;
    const double mid = 0.5 * (cum + next);
    if (mid >= q) {
      if (mid == prev_c) {
        return x;
      }
      const double frac = std::clamp((q - prev_c) / (mid - prev_c), 0.0, 1.0);
      return prev_x + frac * (x - prev_x);
    }
    prev_x = x;
    prev_c = mid;
    cum = next;
  }
  return sorted.back().first;
}

/// Binned weighted pair sums sum_{i != j} w_i w_j g((x_i - x_j) / h) for Gaussian-derivative kernels.
class BinnedPairs {
 public:
  BinnedPairs(std::span<const double> x, std::span<const double> w, std::size_t bins) : counts_(bins, 0.0) {
    lo_ = *std::min_element(x.begin(), x.end());
    const double hi = *std::max_element(x.begin(), x.end());
    delta_ = (hi - lo_) / static_cast<double>(bins - 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double w2 = w[i] * w[i];
      pair_norm_ -= w2;
      if (delta_ == 0.0) {
        counts_[0] += w[i];
        self_lag0_ += w2;
        continue;
      }
      // Linear binning keeps the first moment of every particle; its self-pair lands on lags 0 and 1.
      const double pos = (x[i] - lo_) / delta_;
      const auto k = std::min(static_cast<std::size_t>(pos), bins - 2);
      const double frac = pos - static_cast<double>(k);
      counts_[k] += w[i] * (1.0 - frac);
      counts_[k + 1] += w[i] * frac;
      self_lag0_ += w2 * ((1.0 - frac) * (1.0 - frac) + frac * frac);
      self_lag1_ += 2.0 * w2 * frac * (1.0 - frac);
    }
    lag_.assign(bins, 0.0);
    for (std::size_t lag = 0; lag < bins; ++lag) {
      double acc = 0.0;
      for (std::size_t k = 0; k + lag < bins; ++k) {
        acc += counts_[k] * counts_[k + lag];
      }
      lag_[lag] = lag == 0 ? acc : 2.0 * acc;
    }
  }

  /// Mean over ordered pairs i != j of g((x_i - x_j) / h), pairs weighted by w_i w_j.
  template <class G>
  [[nodiscard]] double mean(double h, G g) const {
    double total = 0.0;
    for (std::size_t lag = 0; lag < lag_.size(); ++lag) {
      total += lag_[lag] * g(static_cast<double>(lag) * delta_ / h);
    }
    const double self = self_lag0_ * g(0.0) + (lag_.size() > 1 ? self_lag1_ * g(delta_ / h) : 0.0);
    return (total - self) / pair_norm_;
  }

 private:
  std::vector<double> counts_;
  std::vector<double> lag_;
  double lo_ = 0.0;
  double delta_ = 0.0;
  double self_lag0_ = 0.0;
  double self_lag1_ = 0.0;
  /// (sum w)^2 - sum w^2, the total weight of ordered pairs i != j.
  double pair_norm_ = 1.0;
};

}  // namespace detail

/// Sheather-Jones solve-the-equation bandwidth for one weighted 1-D sample (binned, 512 bins).
/**
 * The sample size in the asymptotic formulas is the effective sample size 1 / sum w^2. Falls back to
 * Silverman's rule when the sample is too small or degenerate for the plug-in estimates. The result never
 * exceeds the oversmoothed bandwidth 1.144 sigma n^(-1/5).
 */
inline double sheather_jones_bandwidth(std::span<const double> x, std::span<const double> weights) {
  check_weights(weights);
  if (x.size() != weights.size()) {
    throw InvalidArgument("sample and weight counts differ");
  }
  const double n = effective_sample_size(weights);
  std::vector<std::pair<double, double>> sorted;
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sorted.emplace_back(x[i], weights[i]);
    mean += weights[i] * x[i];
  }
  std::sort(sorted.begin(), sorted.end());
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    var += weights[i] * (x[i] - mean) * (x[i] - mean);
  }
  const double sigma = std::sqrt(var);
  const double silverman = 1.06 * sigma * std::pow(static_cast<double>(x.size()), -0.2);
  const double iqr = detail::weighted_quantile(sorted, 0.75) - detail::weighted_quantile(sorted, 0.25);
  const double scale = iqr > 0.0 ? std::min(sigma, iqr / 1.349) : sigma;
  if (!(scale > 0.0) || n < 4.0) {
    return silverman;
  }

  const detail::BinnedPairs pairs(x, weights, 512);
  const auto phi4 = [](double z) { const double z2 = z * z; return (z2 * z2 - 6.0 * z2 + 3.0) * normal_pdf(z); };
  const auto phi6 = [](double z) {
    const double z2 = z * z;
    return (z2 * z2 * z2 - 15.0 * z2 * z2 + 45.0 * z2 - 15.0) * normal_pdf(z);
  };
  const double a = 1.24 * scale * std::pow(n, -1.0 / 7.0);
  const double b = 1.23 * scale * std::pow(n, -1.0 / 9.0);
  const double sd_a = pairs.mean(a, phi4) / std::pow(a, 5.0);
  const double td_b = -pairs.mean(b, phi6) / std::pow(b, 7.0);
  if (!(sd_a > 0.0) || !(td_b > 0.0)) {
    return silverman;
  }
  const double alpha2 = 1.357 * std::pow(sd_a / td_b, 1.0 / 7.0);
  const double roughness = 0.5 / std::sqrt(std::numbers::pi);
  const auto equation = [&](double h) {
    const double g = alpha2 * std::pow(h, 5.0 / 7.0);
    const double sd = pairs.mean(g, phi4) / std::pow(g, 5.0);
    return sd > 0.0 ? std::pow(roughness / (n * sd), 0.2) - h : -h;
  };
  // No density with standard deviation sigma has a larger AMISE-optimal bandwidth than the oversmoothed one.
  // Flat samples can drive the sixth-derivative pilot towards zero and the root far beyond it.
  const double oversmoothed = 1.144 * sigma * std::pow(n, -0.2);
  double upper = oversmoothed;
  if (equation(upper) >= 0.0) {
    return oversmoothed;
  }
  // Bracket the largest root below it: spurious roots appear at tiny h where the pilot estimate is mostly noise.
  double lower = upper;
  const double limit = 0.01 * upper;
  do {
    upper = lower;
    lower *= 0.9;
    if (lower < limit) {
      return silverman;
    }
  } while (equation(lower) < 0.0);
  std::uintmax_t iterations = 100;
  const auto root = boost::math::tools::toms748_solve(equation, lower, upper,
                                                      boost::math::tools::eps_tolerance<double>(30), iterations);
  return 0.5 * (root.first + root.second);
}

/// Weighted empirical CDF sum_j w_j [x > x_j], strict in every coordinate.
inline double weighted_cdf(const Eigen::Ref<const Matrix>& points, std::span<const double> weights,
                           const Eigen::Ref<const Vector>& x) {
  double f = 0.0;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    if ((x.array() > points.col(j).array()).all()) {
      f += weights[static_cast<std::size_t>(j)];
    }
  }
  return f;
}

/// Support points with weights and the empirical CDF evaluated at each of them.
struct EmpiricalCdf {
  Matrix points;
  Vector weights;
  Vector values;
  /// Number of samples behind the CDF, used for the default tube width (1 / sum w^2 after empirical_cdf).
  double sample_size = 0.0;

  [[nodiscard]] Eigen::Index size() const noexcept { return points.cols(); }
};

/// Evaluates the weighted empirical CDF at every particle.
inline EmpiricalCdf empirical_cdf(const Eigen::Ref<const Matrix>& particles, std::span<const double> weights) {
  if (static_cast<std::size_t>(particles.cols()) != weights.size()) {
    throw InvalidArgument("particle count and weight count differ");
  }
  const Eigen::Index n = particles.cols();
  EmpiricalCdf out{particles, Eigen::Map<const Vector>(weights.data(), n), Vector::Zero(n), 0.0};
  const double sum_sq = out.weights.squaredNorm();
  out.sample_size = sum_sq > 0.0 ? out.weights.sum() * out.weights.sum() / sum_sq : 0.0;
  if (particles.rows() == 1) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return particles(0, a) < particles(0, b); });
    double below = 0.0;
    for (std::size_t k = 0; k < order.size();) {
      // Ties share the mass strictly below them.
      std::size_t end = k;
      double tied = 0.0;
      while (end < order.size() && particles(0, order[end]) == particles(0, order[k])) {
        out.values[order[end]] = below;
        tied += weights[static_cast<std::size_t>(order[end])];
        ++end;
      }
      below += tied;
      k = end;
    }
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = weighted_cdf(particles, weights, particles.col(i));
  }
  return out;
}

/// Merges particles falling in the same grid cell (weights summed, position = weighted mean).
/**
 * A non-positive cell width in a dimension means only exact coordinate matches merge there. Cells are
 * emitted in lexicographic cell order, so the result does not depend on input order.
 */
inline std::pair<Matrix, Vector> merge_support(const Eigen::Ref<const Matrix>& particles,
                                               std::span<const double> weights, const Vector& cell_width) {
  struct Cell {
    Vector sum;
    double weight = 0.0;
    Vector first;
    std::size_t count = 0;
  };
  const Eigen::Index d = particles.rows();
  std::map<std::vector<double>, Cell> cells;
  std::vector<double> key(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < particles.cols(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      key[static_cast<std::size_t>(i)] =
          cell_width[i] > 0.0 ? std::floor(particles(i, j) / cell_width[i]) : particles(i, j);
    }
    auto& cell = cells[key];
    const double w = weights[static_cast<std::size_t>(j)];
    if (cell.count == 0) {
      cell.sum = Vector::Zero(d);
      cell.first = particles.col(j);
    }
    cell.sum += w * particles.col(j);
    cell.weight += w;
    ++cell.count;
  }
  Matrix points(d, static_cast<Eigen::Index>(cells.size()));
  Vector merged(static_cast<Eigen::Index>(cells.size()));
  Eigen::Index k = 0;
  for (const auto& [_, cell] : cells) {
    points.col(k) = cell.weight > 0.0 ? Vector(cell.sum / cell.weight) : cell.first;
    merged[k] = cell.weight;
    ++k;
  }
  return {std::move(points), std::move(merged)};
}

/// QP options for fit_beta.
struct QpSettings {
  /// Peak half-width of the insensitive tube; unset means `epsilon_scale / sqrt(sample_size)`.
  std::optional<double> epsilon;
  /// 0.5 / sqrt(N) is the largest standard deviation of an N-sample empirical CDF value.
  double epsilon_scale = 0.5;
  /// Narrow each point's tube to epsilon * 2 sqrt(F (1 - F)), the sampling noise of its CDF value, but never
  /// below the point's own weight.
  bool noise_scaled_tube = true;
  /// Lower limit on the noise-scaled tube, as a fraction of epsilon.
  double tube_floor = 0.2;
  /// Ridge strength rho, relative to the largest Gram diagonal entry (see fit_beta).
  double regularization = 3.0;
  double tol_kkt = 1e-8;
  int max_iterations = 200000;
  /// Number of times epsilon is doubled after an infeasible solve.
  int max_retries = 3;
};

struct FitDiagnostics {
  int iterations = 0;
  double kkt_residual = 0.0;
  double epsilon = 0.0;
  int retries = 0;
  /// max_i |F_SVR(x_i) - F(x_i)| at the support points.
  double max_cdf_residual = 0.0;
  /// max_i (|residual_i| - tube_i); at most tol_kkt for a successful fit.
  double max_tube_excess = 0.0;
};

/// Fitted density p(x) = sum_i beta_i k(x, x_i), the kernel at x_i widened by the factor lambda_i.
class SvrDensityModel {
 public:
  /// Empty `scales` means lambda_i = 1.
  SvrDensityModel(Matrix support, Vector beta, KernelPair kernel, FitDiagnostics diagnostics = {}, Vector scales = {})
      : support_{std::move(support)},
        beta_{std::move(beta)},
        kernel_{std::move(kernel)},
        diagnostics_{diagnostics},
        scales_{scales.size() == 0 ? Vector::Ones(support_.cols()) : std::move(scales)} {
    if (support_.cols() != beta_.size() || support_.rows() != kernel_.dim() || scales_.size() != beta_.size()) {
      throw InvalidArgument("support, coefficients, scales and kernel dimensions disagree");
    }
  }

  [[nodiscard]] const Matrix& support() const noexcept { return support_; }
  [[nodiscard]] const Vector& beta() const noexcept { return beta_; }
  [[nodiscard]] const KernelPair& kernel() const noexcept { return kernel_; }
  [[nodiscard]] const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  [[nodiscard]] const Vector& scales() const noexcept { return scales_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return support_.rows(); }

  [[nodiscard]] double density(const Eigen::Ref<const Vector>& x) const {
    double p = 0.0;
    for (Eigen::Index i = 0; i < support_.cols(); ++i) {
      if (beta_[i] != 0.0) {
        p += beta_[i] * kernel_.density(x, support_.col(i), scales_[i]);
      }
    }
    return p;
  }

  [[nodiscard]] double cdf(const Eigen::Ref<const Vector>& x) const {
    double c = 0.0;
    for (Eigen::Index i = 0; i < support_.cols(); ++i) {
      if (beta_[i] != 0.0) {
        c += beta_[i] * kernel_.cdf(x, support_.col(i), scales_[i]);
      }
    }
    return std::clamp(c, 0.0, 1.0);
  }

  /// Density at every column of `points`.
  [[nodiscard]] Vector density_at(const Eigen::Ref<const Matrix>& points) const {
    Vector out(points.cols());
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      out[j] = density(points.col(j));
    }
    return out;
  }

 private:
  Matrix support_;
  Vector beta_;
  KernelPair kernel_;
  FitDiagnostics diagnostics_;
  Vector scales_;
};

/// Default peak tube half-width for a CDF built from `sample_size` samples.
inline double default_epsilon(double sample_size, double scale = 0.5) {
  return scale / std::sqrt(std::max(sample_size, 1.0));
}

/// Solves the constrained QP for beta. Throws SvrFitError if the tube stays infeasible after all retries.
/**
 * `scales` gives the per-point kernel widening lambda_i (empty for none). The objective pairs points i and j
 * through k at scale sqrt((lambda_i^2 + lambda_j^2) / 2), which keeps the matrix a Gram matrix.
 */
inline SvrDensityModel fit_beta(const EmpiricalCdf& samples, const KernelPair& kernel, const QpSettings& qp = {},
                                Vector scales = {}) {
  const Eigen::Index n = samples.size();
  if (n == 0) {
    throw InvalidArgument("fit_beta needs at least one support point");
  }
  if (scales.size() == 0) {
    scales = Vector::Ones(n);
  }
  if (scales.size() != n || !(scales.array() > 0.0).all()) {
    throw InvalidArgument("kernel scales must be positive, one per support point");
  }
  if (samples.points.rows() != kernel.dim()) {
    throw InvalidArgument("kernel dimension differs from the support dimension");
  }
  const double sample_size = samples.sample_size > 0.0 ? samples.sample_size : static_cast<double>(n);
  double epsilon = qp.epsilon.value_or(default_epsilon(sample_size, qp.epsilon_scale));
  if (!(epsilon > 0.0)) {
    throw InvalidArgument("epsilon must be positive");
  }
  if (n == 1) {
    FitDiagnostics diag;
    diag.epsilon = epsilon;
    diag.max_cdf_residual = std::abs(kernel.cdf(samples.points.col(0), samples.points.col(0)) - samples.values[0]);
    return {samples.points, Vector::Ones(1), kernel, diag, std::move(scales)};
  }

  Matrix gram(n, n);
  Matrix cdf_kernel(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      cdf_kernel(i, j) = kernel.cdf(samples.points.col(i), samples.points.col(j), scales[j]);
    }
    for (Eigen::Index j = i; j < n; ++j) {
      const double pair_scale = std::sqrt(0.5 * (scales[i] * scales[i] + scales[j] * scales[j]));
      gram(i, j) = gram(j, i) = kernel.density(samples.points.col(i), samples.points.col(j), pair_scale);
    }
  }
  // Ridge rho * max(diag G) * sum_i beta_i^2 / (n w_i); on the simplex it pulls beta towards the weights.
  const double ridge = qp.regularization * gram.diagonal().maxCoeff() / static_cast<double>(n);
  // The jitter keeps a numerically singular Gram matrix (near-duplicate support points) usable at rho = 0.
  const double jitter = 1e-10 * gram.diagonal().maxCoeff();
  Matrix hessian = 2.0 * gram;
  for (Eigen::Index i = 0; i < n; ++i) {
    hessian(i, i) += 2.0 * (jitter + ridge / std::max(samples.weights[i], 1e-12 / static_cast<double>(n)));
  }
  const Vector gradient = Vector::Zero(n);
  const Matrix a_eq = Matrix::Ones(1, n);
  const Vector b_eq = Vector::Ones(1);
  Matrix a_in(3 * n, n);
  a_in.topRows(n) = cdf_kernel;
  a_in.middleRows(n, n) = -cdf_kernel;
  a_in.bottomRows(n) = Matrix::Identity(n, n);

  FitDiagnostics diag;
  for (int attempt = 0; attempt <= qp.max_retries; ++attempt) {
    Vector tube = Vector::Constant(n, epsilon);
    if (qp.noise_scaled_tube) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double f = samples.values[i] + 0.5 * samples.weights[i];
        // A continuous CDF cannot track the w_i jump at x_i more closely than that.
        tube[i] = std::max(epsilon * std::max(qp.tube_floor, 2.0 * std::sqrt(std::clamp(f * (1.0 - f), 0.0, 0.25))),
                           samples.weights[i]);
      }
    }
    Vector b_in(3 * n);
    b_in.head(n) = samples.values - tube;
    b_in.segment(n, n) = -(samples.values + tube);
    b_in.tail(n).setZero();
    const auto sol = solve_dense_qp(hessian, gradient, a_eq, b_eq, a_in, b_in, qp.max_iterations);
    diag.iterations += sol.iterations;
    if (sol.status == QpStatus::iteration_limit) {
      throw SvrFitError("SVR density QP hit the iteration limit", epsilon);
    }
    if (sol.status == QpStatus::infeasible) {
      if (attempt == qp.max_retries) {
        break;
      }
      epsilon *= 2.0;
      ++diag.retries;
      continue;
    }
    diag.kkt_residual = qp_kkt_residual(sol, hessian, gradient, a_eq, b_eq, a_in, b_in);
    Vector beta = sol.x.cwiseMax(0.0);
    beta /= beta.sum();
    diag.epsilon = epsilon;
    const Vector residual = (cdf_kernel * beta - samples.values).cwiseAbs();
    diag.max_cdf_residual = residual.maxCoeff();
    diag.max_tube_excess = (residual - tube).maxCoeff();
    return {samples.points, std::move(beta), kernel, diag, std::move(scales)};
  }
  throw SvrFitError("SVR density QP infeasible after " + std::to_string(qp.max_retries) +
                        " epsilon doublings (final epsilon " + std::to_string(epsilon) + ")",
                    epsilon);
}

/// Per-dimension bandwidth selector.
enum class BandwidthRule { silverman, sheather_jones };

/// Bandwidth, support merging and QP options for fit_density.
struct SvrSettings {
  /// Fixed per-dimension bandwidth; unset means `bandwidth_scale` times the rule's bandwidth.
  std::optional<Vector> bandwidth;
  BandwidthRule rule = BandwidthRule::sheather_jones;
  double bandwidth_scale = 1.5;
  /// Sample-point widening lambda_i = (pilot(x_i) / g)^(-alpha), g the weighted geometric mean of the pilot
  /// density over the support; 0 keeps one bandwidth everywhere.
  double adaptive_exponent = 1.0;
  /// lambda_i is clamped to [1 / max_scale, max_scale].
  double max_scale = 5.0;
  /// Cell width for merging nearby support points, as a fraction of the bandwidth; 0 merges exact
  /// duplicates only.
  double merge_fraction = 0.1;
  QpSettings qp;
};

/// Bandwidth used by fit_density for these particles.
inline Vector svr_bandwidth(const Eigen::Ref<const Matrix>& particles, std::span<const double> weights,
                            const SvrSettings& settings) {
  if (settings.bandwidth) {
    if (settings.bandwidth->size() != particles.rows()) {
      throw InvalidArgument("bandwidth override has the wrong dimension");
    }
    return *settings.bandwidth;
  }
  Vector h = silverman_bandwidth(particles, weights);
  if (settings.rule == BandwidthRule::sheather_jones) {
    std::vector<double> row(static_cast<std::size_t>(particles.cols()));
    for (Eigen::Index i = 0; i < particles.rows(); ++i) {
      if (weighted_std(particles.row(i), weights)[0] == 0.0) {
        continue;
      }
      for (Eigen::Index j = 0; j < particles.cols(); ++j) {
        row[static_cast<std::size_t>(j)] = particles(i, j);
      }
      h[i] = sheather_jones_bandwidth(row, weights);
    }
  }
  return settings.bandwidth_scale * h;
}

/// Sample-point kernel scales from a fixed-bandwidth pilot estimate at the weighted support points.
inline Vector adaptive_scales(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Vector>& weights,
                              const KernelPair& pilot, double exponent, double max_scale) {
  const Eigen::Index n = points.cols();
  if (!(exponent >= 0.0) || !(max_scale >= 1.0) || weights.size() != n) {
    throw InvalidArgument("adaptive_scales: need exponent >= 0, max_scale >= 1 and one weight per point");
  }
  if (exponent == 0.0) {
    return Vector::Ones(n);
  }
  Vector log_pilot(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      p += weights[j] * pilot.density(points.col(i), points.col(j));
    }
    log_pilot[i] = std::log(p);
  }
  const double log_g = weights.dot(log_pilot) / weights.sum();
  Vector scales(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    scales[i] = std::clamp(std::exp(-exponent * (log_pilot[i] - log_g)), 1.0 / max_scale, max_scale);
  }
  return scales;
}

/// Empirical CDF, bandwidth selection, support merging and the QP fit in one call.
inline SvrDensityModel fit_density(const Eigen::Ref<const Matrix>& particles, std::span<const double> weights,
                                   const SvrSettings& settings = {}) {
  check_weights(weights);
  const Vector h = svr_bandwidth(particles, weights, settings);
  const auto [points, merged] = merge_support(particles, weights, Vector(settings.merge_fraction * h));
  auto samples = empirical_cdf(points, std::span<const double>(merged.data(), static_cast<std::size_t>(merged.size())));
  const Eigen::Map<const Vector> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  samples.sample_size = 1.0 / w.squaredNorm();
  const KernelPair kernel(h);
  Vector scales = adaptive_scales(samples.points, samples.weights, kernel, settings.adaptive_exponent, settings.max_scale);
  return fit_beta(samples, kernel, settings.qp, std::move(scales));
}

}  // namespace svrpf

#endif

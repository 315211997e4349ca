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

#ifndef SVRPF_METRICS_HPP
#define SVRPF_METRICS_HPP

#include <svrpf/types.hpp>

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace svrpf {

/// sqrt(mean_t ||e_t - x_t||^2).
inline double rmse(std::span<const Vector> estimates, std::span<const Vector> truth) {
  if (estimates.size() != truth.size() || estimates.empty()) {
    throw InvalidArgument("rmse needs equal, non-empty sequences");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (estimates[t].size() != truth[t].size()) {
      throw InvalidArgument("rmse: state dimension mismatch at step " + std::to_string(t));
    }
    sum += (estimates[t] - truth[t]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

/// Evenly spaced 1 x count grid over [lo, hi].
inline Matrix make_grid(double lo, double hi, std::size_t count = 2001) {
  if (count == 0 || !(hi >= lo)) {
    throw InvalidArgument("grid needs count >= 1 and hi >= lo");
  }
  Matrix g(1, static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    g(0, static_cast<Eigen::Index>(k)) =
        count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  return g;
}

/// max over grid columns of |cdf_a(x) - cdf_b(x)|. Both callables take a state vector.
template <class CdfA, class CdfB>
double ks_distance(const CdfA& cdf_a, const CdfB& cdf_b, const Eigen::Ref<const Matrix>& grid) {
  if (grid.cols() == 0) {
    throw InvalidArgument("KS grid is empty");
  }
  double worst = 0.0;
  for (Eigen::Index k = 0; k < grid.cols(); ++k) {
    const Vector x = grid.col(k);
    worst = std::max(worst, std::abs(cdf_a(x) - cdf_b(x)));
  }
  return std::min(worst, 1.0);
}

/// Weighted step CDF of 1-D points, P(X <= x), with O(log N) evaluation.
class StepCdf {
 public:
  StepCdf(std::span<const double> points, std::span<const double> weights) {
    if (points.size() != weights.size() || points.empty()) {
      throw InvalidArgument("step CDF needs matching, non-empty points and weights");
    }
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
    double total = 0.0;
    for (auto i : order) {
      x_.push_back(points[i]);
      total += weights[i];
      cum_.push_back(total);
    }
    for (auto& c : cum_) {
      c /= total;
    }
  }

  StepCdf(const Eigen::Ref<const Matrix>& points, std::span<const double> weights)
      : StepCdf(std::span<const double>(first_row(points)), weights) {}

  double operator()(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    return it == x_.begin() ? 0.0 : cum_[static_cast<std::size_t>(it - x_.begin()) - 1];
  }
  double operator()(const Eigen::Ref<const Vector>& x) const { return (*this)(x[0]); }

  [[nodiscard]] double lowest() const { return x_.front(); }
  [[nodiscard]] double highest() const { return x_.back(); }

 private:
  static std::vector<double> first_row(const Eigen::Ref<const Matrix>& points) {
    if (points.rows() != 1) {
      throw InvalidArgument("step CDF is one-dimensional");
    }
    std::vector<double> row(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = points(0, j);
    }
    return row;
  }

  std::vector<double> x_;
  std::vector<double> cum_;
};

/// One filter's per-step output within a run.
struct FilterTrace {
  std::string filter;
  std::vector<Vector> estimates;
  /// d x 2 bounds per step.
  std::vector<Matrix> ir;
  std::vector<double> pd;
  std::vector<double> ess;
  std::vector<double> ms;
  bool failed = false;
  std::string error;
};

/// Truth, observations and every filter's trace for one seeded run.
struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::vector<Vector> truth;
  std::vector<Vector> observations;
  std::vector<FilterTrace> filters;

  [[nodiscard]] const FilterTrace* find(const std::string& name) const {
    for (const auto& f : filters) {
      if (f.filter == name) {
        return &f;
      }
    }
    return nullptr;
  }
};

/// Fraction of (run, step) pairs whose true state lies inside the filter's region in every dimension.
/**
 * Runs where the filter is missing or failed are skipped. Returns 0 when no pair qualifies.
 */
inline double ir_coverage(std::span<const RunRecord> records, const std::string& filter) {
  std::size_t inside = 0;
  std::size_t total = 0;
  for (const auto& rec : records) {
    const FilterTrace* f = rec.find(filter);
    if (f == nullptr || f->failed) {
      continue;
    }
    if (f->ir.size() != rec.truth.size()) {
      throw InvalidArgument("region trace length differs from the truth length");
    }
    for (std::size_t t = 0; t < rec.truth.size(); ++t) {
      const Matrix& b = f->ir[t];
      const Vector& x = rec.truth[t];
      inside += ((x.array() >= b.col(0).array()) && (x.array() <= b.col(1).array())).all() ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

/// One-sided sign test of median(a - b) < 0. Ties are dropped; all ties gives 1.
inline double paired_sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("sign test needs paired samples of equal length");
  }
  std::size_t below = 0;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) {
      ++below;
      ++nonzero;
    } else if (a[i] > b[i]) {
      ++nonzero;
    }
  }
  if (nonzero == 0 || below == 0) {
    return 1.0;
  }
  // P(X >= below) for X ~ Binomial(nonzero, 1/2).
  const boost::math::binomial_distribution<double> dist(static_cast<double>(nonzero), 0.5);
  return boost::math::cdf(boost::math::complement(dist, static_cast<double>(below - 1)));
}

}  // namespace svrpf

#endif

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

#ifndef SVRPF_REGION_HPP
#define SVRPF_REGION_HPP

#include <svrpf/rng.hpp>
#include <svrpf/types.hpp>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>

/**
 * \file
 * \brief Importance region (per-dimension bounding box of a particle cloud), particle density, and
 * uniform particle placement inside an amplified region.
 */

namespace svrpf {

/// Axis-aligned box, one `[lower, upper]` row per state dimension.
class ImportanceRegion {
 public:
  ImportanceRegion() = default;

  explicit ImportanceRegion(Matrix bounds) : bounds_{std::move(bounds)} {
    if (bounds_.cols() != 2 || bounds_.rows() == 0) {
      throw InvalidArgument("importance region bounds must be a non-empty d x 2 matrix");
    }
    if ((bounds_.col(0).array() > bounds_.col(1).array()).any()) {
      throw InvalidArgument("importance region lower bound exceeds upper bound");
    }
  }

  ImportanceRegion(const Vector& lower, const Vector& upper) : ImportanceRegion(stack(lower, upper)) {}

  [[nodiscard]] Eigen::Index dim() const noexcept { return bounds_.rows(); }
  [[nodiscard]] const Matrix& bounds() const noexcept { return bounds_; }
  [[nodiscard]] double lower(Eigen::Index i) const { return bounds_(i, 0); }
  [[nodiscard]] double upper(Eigen::Index i) const { return bounds_(i, 1); }
  [[nodiscard]] double width(Eigen::Index i) const { return bounds_(i, 1) - bounds_(i, 0); }
  [[nodiscard]] double center(Eigen::Index i) const { return 0.5 * (bounds_(i, 0) + bounds_(i, 1)); }

  [[nodiscard]] double volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      v *= width(i);
    }
    return v;
  }

  /// Closed-box membership.
  [[nodiscard]] bool contains(const Eigen::Ref<const Vector>& x) const {
    return (x.array() >= bounds_.col(0).array()).all() && (x.array() <= bounds_.col(1).array()).all();
  }

  /// True if every row of `other` lies inside the matching row of this region.
  [[nodiscard]] bool contains(const ImportanceRegion& other) const {
    return (bounds_.col(0).array() <= other.bounds_.col(0).array()).all() &&
           (bounds_.col(1).array() >= other.bounds_.col(1).array()).all();
  }

  friend bool operator==(const ImportanceRegion& a, const ImportanceRegion& b) { return a.bounds_ == b.bounds_; }

 private:
  static Matrix stack(const Vector& lower, const Vector& upper) {
    if (lower.size() != upper.size()) {
      throw InvalidArgument("lower and upper bounds differ in dimension");
    }
    Matrix b(lower.size(), 2);
    b.col(0) = lower;
    b.col(1) = upper;
    return b;
  }

  Matrix bounds_;
};

/// Row-wise min/max of a d x N particle matrix.
inline ImportanceRegion compute_ir(const Eigen::Ref<const Matrix>& particles) {
  if (particles.cols() == 0 || particles.rows() == 0) {
    throw InvalidArgument("cannot compute an importance region of an empty particle set");
  }
  return {particles.rowwise().minCoeff(), particles.rowwise().maxCoeff()};
}

/// Region volume divided by the particle count.
inline double compute_pd(const ImportanceRegion& ir, std::size_t count) {
  if (count == 0) {
    throw InvalidArgument("particle density needs at least one particle");
  }
  return ir.volume() / static_cast<double>(count);
}

/// Width assigned to a zero-width row centred at `center` when no explicit minimum is configured.
inline double default_min_width(double center) { return 1e-3 * (1.0 + std::abs(center)); }

/// Expands every row symmetrically about its centre to `gamma` times its width.
/**
 * Zero-width rows become `min_width` wide (or `default_min_width(center)` when unset).
 */
inline ImportanceRegion amplify_ir(const ImportanceRegion& ir, double gamma,
                                   std::optional<double> min_width = std::nullopt) {
  if (!(gamma >= 1.0)) {
    throw InvalidArgument("amplification factor must be >= 1");
  }
  Matrix bounds = ir.bounds();
  for (Eigen::Index i = 0; i < ir.dim(); ++i) {
    const double c = ir.center(i);
    const double w = ir.width(i);
    if (w == 0.0) {
      const double half = 0.5 * min_width.value_or(default_min_width(c));
      bounds(i, 0) = c - half;
      bounds(i, 1) = c + half;
    } else if (gamma != 1.0) {
      const double half = 0.5 * gamma * w;
      bounds(i, 0) = c - half;
      bounds(i, 1) = c + half;
    }
  }
  return ImportanceRegion(std::move(bounds));
}

namespace detail {

/// Rank-1 lattice generator: 1, a, a^2, ... mod m with a coprime to m near the golden section of m.
inline std::vector<std::size_t> lattice_generator(std::size_t m, Eigen::Index d) {
  std::size_t a = static_cast<std::size_t>(std::llround(0.6180339887498949 * static_cast<double>(m)));
  a = std::max<std::size_t>(a, 1);
  while (std::gcd(a, m) != 1) {
    ++a;
  }
  std::vector<std::size_t> z(static_cast<std::size_t>(d), 1);
  for (std::size_t j = 1; j < z.size(); ++j) {
    z[j] = static_cast<std::size_t>((static_cast<unsigned __int128>(z[j - 1]) * a) % m);
  }
  return z;
}

}  // namespace detail

/// Places `m` points uniformly inside the region (d x m result).
/**
 * One dimension uses the midpoint grid `lower + (j + 1/2) width / m` and consumes no randomness. Higher
 * dimensions use a shifted rank-1 lattice whose projection onto every axis is a full shifted grid, so the
 * per-axis empirical CDF is within 1/m of uniform. All points lie strictly inside the region.
 */
inline Matrix uniform_placement(const ImportanceRegion& ir, std::size_t m, RandomStream& rng) {
  if (m == 0) {
    throw InvalidArgument("placement needs at least one point");
  }
  const Eigen::Index d = ir.dim();
  const auto dm = static_cast<double>(m);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (ir.width(i) <= 0.0 && m > 1) {
      throw InvalidArgument("cannot place several points in a zero-width importance region");
    }
  }
  Matrix points(d, static_cast<Eigen::Index>(m));
  if (d == 1) {
    for (std::size_t j = 0; j < m; ++j) {
      points(0, static_cast<Eigen::Index>(j)) = ir.lower(0) + (static_cast<double>(j) + 0.5) * ir.width(0) / dm;
    }
    return points;
  }
  const auto z = detail::lattice_generator(m, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double shift = rng.uniform();
    if (shift == 0.0) {
      shift = 0.5;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const auto cell = static_cast<std::size_t>((static_cast<unsigned __int128>(k) * z[static_cast<std::size_t>(i)]) % m);
      points(i, static_cast<Eigen::Index>(k)) = ir.lower(i) + ir.width(i) * (static_cast<double>(cell) + shift) / dm;
    }
  }
  return points;
}

}  // namespace svrpf

#endif

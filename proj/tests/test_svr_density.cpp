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

#include <gtest/gtest.h>

#include <svrpf/rng.hpp>
#include <svrpf/svr_density.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

namespace {

using svrpf::KernelPair;
using svrpf::Matrix;
using svrpf::RandomStream;
using svrpf::Vector;

Matrix normal_row(std::size_t n, RandomStream& rng, double mean = 0.0, double sd = 1.0) {
  Matrix x(1, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    x(0, j) = rng.gaussian(mean, sd);
  }
  return x;
}

std::vector<double> equal_weights(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

Vector at(double x) { return Vector::Constant(1, x); }

// Composite Simpson rule on [lo, hi] with an even number of panels.
template <class F>
double simpson(F f, double lo, double hi, int panels = 4000) {
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int k = 1; k < panels; ++k) {
    s += (k % 2 == 1 ? 4.0 : 2.0) * f(lo + k * h);
  }
  return s * h / 3.0;
}

// Unbinned O(n^2) solve-the-equation bandwidth with equal weights and plain bisection.
double sheather_jones_reference(const std::vector<double>& x) {
  const auto n = static_cast<double>(x.size());
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double var = 0.0;
  for (double v : s) {
    var += (v - mean) * (v - mean);
  }
  const double sigma = std::sqrt(var / n);
  // Quartiles by interpolating cumulative mid-point weights (k + 1/2) / n.
  const auto quantile = [&](double q) {
    const double pos = q * n - 0.5;
    const auto k = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - std::floor(pos);
    return s[k] + frac * (s[k + 1] - s[k]);
  };
  const double scale = std::min(sigma, (quantile(0.75) - quantile(0.25)) / 1.349);
  const auto pair_mean = [&](double h, auto g) {
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (i != j) {
          total += g((s[i] - s[j]) / h);
        }
      }
    }
    return total / (n * (n - 1.0));
  };
  const auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
  const auto phi4 = [&](double z) { return (std::pow(z, 4) - 6 * z * z + 3) * pdf(z); };
  const auto phi6 = [&](double z) { return (std::pow(z, 6) - 15 * std::pow(z, 4) + 45 * z * z - 15) * pdf(z); };
  const double a = 0.920 * 1.349 * scale * std::pow(n, -1.0 / 7.0);
  const double b = 0.912 * 1.349 * scale * std::pow(n, -1.0 / 9.0);
  const double sd_a = pair_mean(a, phi4) / std::pow(a, 5);
  const double td_b = -pair_mean(b, phi6) / std::pow(b, 7);
  const double alpha2 = 1.357 * std::pow(sd_a / td_b, 1.0 / 7.0);
  const auto equation = [&](double h) {
    const double g = alpha2 * std::pow(h, 5.0 / 7.0);
    return std::pow(1.0 / (2.0 * std::sqrt(std::numbers::pi) * n * pair_mean(g, phi4) / std::pow(g, 5)), 0.2) - h;
  };
  double lo = 0.3 * scale * std::pow(n, -0.2);
  double hi = 3.0 * scale * std::pow(n, -0.2);
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    (equation(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(KernelPair, WidenedDensityIntegratesToItsCdf) {
  const auto k = KernelPair::isotropic(0.7);
  for (double scale : {0.2, 1.0, 3.5}) {
    const double mass = simpson([&](double x) { return k.density(at(x), at(1.0), scale); }, -40.0, 40.0, 40000);
    EXPECT_NEAR(mass, 1.0, 1e-10) << scale;
    const double partial = simpson([&](double x) { return k.density(at(x), at(1.0), scale); }, -40.0, 1.3, 40000);
    EXPECT_NEAR(partial, k.cdf(at(1.3), at(1.0), scale), 1e-10) << scale;
  }
}

TEST(KernelPair, ProductKernelIn2D) {
  const KernelPair k(Vector::Constant(2, 0.5));
  Vector x(2);
  x << 0.5, -0.5;
  EXPECT_NEAR(k.density(x, Vector::Zero(2)), std::exp(-1.0) / (2.0 * std::numbers::pi * 0.25), 1e-15);
  EXPECT_NEAR(k.cdf(Vector::Zero(2), Vector::Zero(2)), 0.25, 1e-15);
  EXPECT_THROW(KernelPair(Vector::Constant(1, 0.0)), svrpf::InvalidArgument);
}

// The objective pairs kernels at sqrt((l_i^2 + l_j^2) / 2): the overlap integral of kernels of width l h / sqrt(2).
TEST(KernelPair, PairScaleIsAnOverlapIntegral) {
  const double h = 0.8;
  const auto k = KernelPair::isotropic(h);
  const auto half = KernelPair::isotropic(h / std::numbers::sqrt2);
  const double li = 0.5;
  const double lj = 2.0;
  const double overlap =
      simpson([&](double x) { return half.density(at(x), at(0.3), li) * half.density(at(x), at(-0.4), lj); }, -30, 30);
  EXPECT_NEAR(k.density(at(0.3), at(-0.4), std::sqrt(0.5 * (li * li + lj * lj))), overlap, 1e-12);
}

TEST(EmpiricalCdf, StrictInequalityAndTies) {
  Matrix x(1, 4);
  x << 2.0, 1.0, 2.0, 3.0;
  const std::vector<double> w = {0.25, 0.25, 0.25, 0.25};
  const auto e = svrpf::empirical_cdf(x, w);
  EXPECT_EQ(e.values, (Vector(4) << 0.25, 0.0, 0.25, 0.75).finished());
  EXPECT_DOUBLE_EQ(e.sample_size, 4.0);
}

TEST(EmpiricalCdf, TwoDimensionalCountsDominatedPoints) {
  Matrix x(2, 3);
  x << 0, 1, 2,  //
      0, 1, -1;
  const auto e = svrpf::empirical_cdf(x, std::vector<double>{0.2, 0.3, 0.5});
  EXPECT_EQ(e.values, (Vector(3) << 0.0, 0.2, 0.0).finished());
}

TEST(MergeSupport, PreservesMassAndMeanAndIgnoresOrder) {
  RandomStream rng(5, 0);
  const Matrix x = normal_row(300, rng);
  std::vector<double> w(300);
  for (auto& v : w) {
    v = rng.uniform() + 0.1;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) {
    v /= total;
  }
  const auto [points, merged] = svrpf::merge_support(x, w, Vector::Constant(1, 0.1));
  EXPECT_LT(points.cols(), 300);
  EXPECT_NEAR(merged.sum(), 1.0, 1e-12);
  const Eigen::Map<const Vector> wv(w.data(), 300);
  EXPECT_NEAR((points * merged)(0), (x * wv)(0), 1e-12);

  std::vector<Eigen::Index> perm(300);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::reverse(perm.begin(), perm.end());
  Matrix xr(1, 300);
  std::vector<double> wr(300);
  for (std::size_t k = 0; k < 300; ++k) {
    xr(0, static_cast<Eigen::Index>(k)) = x(0, perm[k]);
    wr[k] = w[static_cast<std::size_t>(perm[k])];
  }
  const auto [points_r, merged_r] = svrpf::merge_support(xr, wr, Vector::Constant(1, 0.1));
  EXPECT_TRUE(points_r.isApprox(points, 1e-14));
  EXPECT_TRUE(merged_r.isApprox(merged, 1e-14));
}

TEST(Bandwidth, SilvermanRule) {
  Matrix x(1, 4);
  x << -1, -1, 1, 1;
  const auto h = svrpf::silverman_bandwidth(x, equal_weights(4));
  EXPECT_NEAR(h[0], 1.06 * std::pow(4.0, -0.2), 1e-15);
}

TEST(Bandwidth, SheatherJonesMatchesUnbinnedBisection) {
  RandomStream rng(8, 0);
  for (int trial = 0; trial < 4; ++trial) {
    const Matrix x = normal_row(400, rng, 0.0, 1.0 + trial);
    std::vector<double> v(x.data(), x.data() + x.size());
    if (trial % 2 == 1) {
      for (std::size_t k = 0; k < v.size() / 2; ++k) {
        v[k] += 6.0 * (1.0 + trial);  // bimodal
      }
    }
    const double binned = svrpf::sheather_jones_bandwidth(v, equal_weights(v.size()));
    const double exact = sheather_jones_reference(v);
    EXPECT_NEAR(binned, exact, 0.01 * exact) << "trial " << trial;
  }
}

TEST(Bandwidth, SheatherJonesApproachesTheNormalOptimum) {
  RandomStream rng(9, 0);
  const std::size_t n = 20000;
  const Matrix x = normal_row(n, rng);
  const std::vector<double> v(x.data(), x.data() + x.size());
  const double optimum = std::pow(4.0 / 3.0, 0.2) * std::pow(static_cast<double>(n), -0.2);
  EXPECT_NEAR(svrpf::sheather_jones_bandwidth(v, equal_weights(n)), optimum, 0.05 * optimum);
}

TEST(Bandwidth, SheatherJonesIsScaleEquivariant) {
  RandomStream rng(10, 0);
  const Matrix x = normal_row(300, rng);
  std::vector<double> v(x.data(), x.data() + x.size());
  const double h = svrpf::sheather_jones_bandwidth(v, equal_weights(300));
  for (auto& e : v) {
    e = 4.0 * e - 7.0;
  }
  EXPECT_NEAR(svrpf::sheather_jones_bandwidth(v, equal_weights(300)), 4.0 * h, 1e-6 * h);
}

TEST(AdaptiveScales, ZeroExponentAndGeometricMean) {
  RandomStream rng(11, 0);
  const Matrix x = normal_row(200, rng);
  const Vector w = Vector::Constant(200, 1.0 / 200);
  const auto pilot = KernelPair::isotropic(0.4);
  EXPECT_EQ(svrpf::adaptive_scales(x, w, pilot, 0.0, 5.0), Vector::Ones(200));

  const Vector scales = svrpf::adaptive_scales(x, w, pilot, 0.5, 1e6);
  EXPECT_NEAR(w.dot(scales.array().log().matrix()), 0.0, 1e-12);
  Eigen::Index inner = 0;
  Eigen::Index outer = 0;
  x.row(0).cwiseAbs().minCoeff(&inner);
  x.row(0).cwiseAbs().maxCoeff(&outer);
  EXPECT_LT(scales[inner], 1.0);
  EXPECT_GT(scales[outer], 1.0);

  const Vector clamped = svrpf::adaptive_scales(x, w, pilot, 4.0, 2.0);
  EXPECT_LE(clamped.maxCoeff(), 2.0);
  EXPECT_GE(clamped.minCoeff(), 0.5);
  EXPECT_THROW(svrpf::adaptive_scales(x, w, pilot, -1.0, 2.0), svrpf::InvalidArgument);
}

TEST(FitBeta, LargeRidgeWithLooseTubeReturnsTheWeights) {
  RandomStream rng(12, 0);
  const Matrix x = normal_row(30, rng);
  std::vector<double> w(30);
  for (auto& v : w) {
    v = rng.uniform() + 0.5;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) {
    v /= total;
  }
  svrpf::QpSettings qp;
  qp.epsilon = 2.0;
  qp.noise_scaled_tube = false;
  qp.regularization = 1e8;
  const auto model = svrpf::fit_beta(svrpf::empirical_cdf(x, w), KernelPair::isotropic(0.3), qp);
  const Eigen::Map<const Vector> wv(w.data(), 30);
  EXPECT_LT((model.beta() - wv).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitBeta, TinyRidgeSpreadsMassOverSeparatedPoints) {
  // Far-apart points: the Gram matrix is diagonal, so the minimum-norm simplex point is uniform.
  Matrix x(1, 3);
  x << -100, 0, 100;
  svrpf::QpSettings qp;
  qp.epsilon = 2.0;
  qp.noise_scaled_tube = false;
  qp.regularization = 0.0;
  const auto model = svrpf::fit_beta(svrpf::empirical_cdf(x, std::vector<double>{0.6, 0.3, 0.1}),
                                     KernelPair::isotropic(1.0), qp);
  EXPECT_NEAR(model.beta()[0], 1.0 / 3.0, 1e-10);
  EXPECT_NEAR(model.beta()[2], 1.0 / 3.0, 1e-10);
}

TEST(FitBeta, SingleSupportPoint) {
  Matrix x(1, 1);
  x << 2.0;
  const auto model = svrpf::fit_beta(svrpf::empirical_cdf(x, std::vector<double>{1.0}), KernelPair::isotropic(1.0));
  EXPECT_EQ(model.beta()[0], 1.0);
  EXPECT_NEAR(model.cdf(at(2.0)), 0.5, 1e-15);
}

TEST(FitBeta, InfeasibleTubeThrowsAfterRetries) {
  RandomStream rng(13, 0);
  const Matrix x = normal_row(50, rng);
  svrpf::QpSettings qp;
  qp.epsilon = 1e-6;
  qp.noise_scaled_tube = false;
  qp.max_retries = 1;
  EXPECT_THROW(svrpf::fit_beta(svrpf::empirical_cdf(x, equal_weights(50)), KernelPair::isotropic(1.0), qp),
               svrpf::SvrFitError);
}

class FitDensityProperties : public ::testing::TestWithParam<int> {};

TEST_P(FitDensityProperties, ConstraintsHoldAndMassIsOne) {
  RandomStream rng(100, static_cast<std::uint64_t>(GetParam()));
  const std::size_t n = 50 + 50 * static_cast<std::size_t>(GetParam() % 4);
  Matrix x = normal_row(n, rng, 0.0, 1.0 + GetParam());
  if (GetParam() % 2 == 1) {
    for (Eigen::Index j = 0; j < x.cols(); j += 3) {
      x(0, j) += 8.0;
    }
  }
  std::vector<double> w(n);
  for (auto& v : w) {
    v = rng.uniform() + 0.2;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) {
    v /= total;
  }
  const auto model = svrpf::fit_density(x, w);
  const auto& beta = model.beta();
  EXPECT_NEAR(beta.sum(), 1.0, 1e-12);
  EXPECT_GE(beta.minCoeff(), 0.0);
  EXPECT_LE(model.diagnostics().max_tube_excess, 1e-7);

  const double lo = x.minCoeff() - 10.0 * model.kernel().bandwidth()[0] * model.scales().maxCoeff();
  const double hi = x.maxCoeff() + 10.0 * model.kernel().bandwidth()[0] * model.scales().maxCoeff();
  EXPECT_NEAR(simpson([&](double t) { return model.density(at(t)); }, lo, hi, 20000), 1.0, 1e-6);
  const double mid = 0.5 * (lo + hi);
  EXPECT_NEAR(simpson([&](double t) { return model.density(at(t)); }, lo, mid, 20000), model.cdf(at(mid)), 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Seeds, FitDensityProperties, ::testing::Range(0, 8));

TEST(FitDensity, LargeNormalSampleMatchesTheNormalCdf) {
  RandomStream rng(14, 0);
  const Matrix x = normal_row(1000, rng);
  const auto model = svrpf::fit_density(x, equal_weights(1000));
  double ks = 0.0;
  for (int k = 0; k <= 400; ++k) {
    const double t = -4.0 + 0.02 * k;
    ks = std::max(ks, std::abs(model.cdf(at(t)) - svrpf::normal_cdf(t)));
  }
  EXPECT_LE(ks, 0.05);
}

TEST(FitDensity, TwoDimensionalFitIsNormalized) {
  RandomStream rng(15, 0);
  Matrix x(2, 80);
  for (Eigen::Index j = 0; j < 80; ++j) {
    x(0, j) = rng.standard_normal();
    x(1, j) = 0.5 * x(0, j) + rng.standard_normal();
  }
  const auto model = svrpf::fit_density(x, equal_weights(80));
  EXPECT_NEAR(model.beta().sum(), 1.0, 1e-12);
  Vector far(2);
  far << 50.0, 50.0;
  EXPECT_NEAR(model.cdf(far), 1.0, 1e-12);
}

}  // namespace

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

#include <svrpf/metrics.hpp>
#include <svrpf/rng.hpp>

#include <cmath>
#include <vector>

namespace {

using svrpf::Matrix;
using svrpf::Vector;

Vector v1(double x) { return Vector::Constant(1, x); }

TEST(Rmse, ScalarAndVectorStates) {
  const std::vector<Vector> est = {v1(1.0), v1(2.0), v1(3.0)};
  const std::vector<Vector> truth = {v1(0.0), v1(2.0), v1(5.0)};
  EXPECT_NEAR(svrpf::rmse(est, truth), std::sqrt(5.0 / 3.0), 1e-15);
  const std::vector<Vector> e2 = {(Vector(2) << 3.0, 4.0).finished()};
  const std::vector<Vector> t2 = {Vector::Zero(2)};
  EXPECT_EQ(svrpf::rmse(e2, t2), 5.0);
  EXPECT_THROW(svrpf::rmse(est, e2), svrpf::InvalidArgument);
}

TEST(StepCdf, RightContinuousWithTies) {
  const std::vector<double> x = {2.0, 1.0, 2.0};
  const std::vector<double> w = {1.0, 2.0, 1.0};  // normalized internally
  const svrpf::StepCdf cdf(x, w);
  EXPECT_EQ(cdf(0.5), 0.0);
  EXPECT_EQ(cdf(1.0), 0.5);
  EXPECT_EQ(cdf(1.5), 0.5);
  EXPECT_EQ(cdf(2.0), 1.0);
  EXPECT_EQ(cdf.lowest(), 1.0);
  EXPECT_EQ(cdf.highest(), 2.0);
}

TEST(KsDistance, ShiftedStepFunctions) {
  const std::vector<double> w(4, 0.25);
  const svrpf::StepCdf a(std::vector<double>{0, 1, 2, 3}, w);
  const svrpf::StepCdf b(std::vector<double>{0.5, 1.5, 2.5, 3.5}, w);
  EXPECT_EQ(svrpf::ks_distance(a, b, svrpf::make_grid(-1, 4, 11)), 0.25);
  EXPECT_EQ(svrpf::ks_distance(a, a, svrpf::make_grid(-1, 4, 11)), 0.0);
}

// Sample KS against the exact CDF shrinks like 1/sqrt(n).
TEST(KsDistance, UniformSampleConvergence) {
  svrpf::RandomStream rng(1, 0);
  const auto exact = [](const Vector& x) { return std::clamp(x[0], 0.0, 1.0); };
  for (std::size_t n : {100U, 10000U}) {
    std::vector<double> u(n);
    for (auto& e : u) {
      e = rng.uniform();
    }
    const svrpf::StepCdf cdf(u, std::vector<double>(n, 1.0));
    // 1.63 / sqrt(n) is the 1% critical value of the KS statistic.
    EXPECT_LE(svrpf::ks_distance(cdf, exact, svrpf::make_grid(0, 1, 2001)), 1.63 / std::sqrt(static_cast<double>(n)));
  }
}

TEST(Grid, Endpoints) {
  const Matrix g = svrpf::make_grid(-2, 2, 5);
  EXPECT_EQ(g, (Matrix(1, 5) << -2, -1, 0, 1, 2).finished());
  EXPECT_EQ(svrpf::make_grid(3, 3, 1)(0, 0), 3.0);
  EXPECT_THROW(svrpf::make_grid(1, 0, 3), svrpf::InvalidArgument);
}

TEST(Coverage, CountsInsidePairsAndSkipsFailedFilters) {
  svrpf::RunRecord rec;
  rec.truth = {v1(0.0), v1(1.0), v1(5.0), v1(2.0)};
  svrpf::FilterTrace f;
  f.filter = "a";
  const Matrix b = (Matrix(1, 2) << 0.0, 2.0).finished();
  f.ir = {b, b, b, b};
  svrpf::FilterTrace failed = f;
  failed.filter = "b";
  failed.failed = true;
  rec.filters = {f, failed};
  const std::vector<svrpf::RunRecord> records = {rec};
  EXPECT_EQ(svrpf::ir_coverage(records, "a"), 0.75);  // bounds are inclusive
  EXPECT_EQ(svrpf::ir_coverage(records, "b"), 0.0);
}

// Exact binomial tail by direct summation.
double upper_tail(int n, int k) {
  double p = 0.0;
  for (int j = k; j <= n; ++j) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) - n * std::log(2.0));
  }
  return p;
}

TEST(SignTest, MatchesDirectBinomialSum) {
  std::vector<double> a(10, 0.0);
  std::vector<double> b(10, 1.0);
  b[0] = -1.0;
  EXPECT_NEAR(svrpf::paired_sign_test(a, b), 11.0 / 1024.0, 1e-15);
  svrpf::RandomStream rng(2, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial * 7;
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n));
    int below = 0;
    int ties = 0;
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = std::floor(3.0 * rng.uniform());
      y[static_cast<std::size_t>(i)] = std::floor(3.0 * rng.uniform());
      below += x[static_cast<std::size_t>(i)] < y[static_cast<std::size_t>(i)];
      ties += x[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(svrpf::paired_sign_test(x, y), upper_tail(n - ties, below), 1e-12) << trial;
  }
}

TEST(SignTest, AllTiesGiveOne) {
  const std::vector<double> a(5, 1.0);
  EXPECT_EQ(svrpf::paired_sign_test(a, a), 1.0);
}

}  // namespace

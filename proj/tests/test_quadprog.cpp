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

#include <svrpf/quadprog.hpp>
#include <svrpf/rng.hpp>

namespace {

using svrpf::Matrix;
using svrpf::QpStatus;
using svrpf::Vector;

TEST(QuadProg, UnconstrainedMinimum) {
  Matrix h(2, 2);
  h << 2, 0, 0, 4;
  Vector g(2);
  g << -2, -4;
  const auto sol = svrpf::solve_dense_qp(h, g, Matrix(0, 2), Vector(0), Matrix(0, 2), Vector(0));
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-14);
  EXPECT_NEAR(sol.x[1], 1.0, 1e-14);
}

// Classic quadprog example: min 1/2 x'x - (0,5,0)'x, A' x >= b with known optimum.
TEST(QuadProg, TextbookInequalityExample) {
  const Matrix h = Matrix::Identity(3, 3);
  Vector g(3);
  g << 0, -5, 0;
  Matrix a(3, 3);
  a << -4, -3, 0,   //
      2, 1, 0,      //
      0, -2, 1;
  Vector b(3);
  b << -8, 2, 0;
  const auto sol = svrpf::solve_dense_qp(h, g, Matrix(0, 3), Vector(0), a, b);
  ASSERT_EQ(sol.status, QpStatus::optimal);
  EXPECT_NEAR(sol.x[0], 0.4761904761904762, 1e-12);
  EXPECT_NEAR(sol.x[1], 1.0476190476190476, 1e-12);
  EXPECT_NEAR(sol.x[2], 2.0952380952380953, 1e-12);
  EXPECT_LT(svrpf::qp_kkt_residual(sol, h, g, Matrix(0, 3), Vector(0), a, b), 1e-12);
}

TEST(QuadProg, SimplexProjectionMatchesSortAlgorithm) {
  // min ||x - v||^2 over the simplex has the closed form x = max(v - tau, 0).
  svrpf::RandomStream rng(7, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 9;
    Vector v(n);
    for (int i = 0; i < n; ++i) {
      v[i] = rng.gaussian(0.0, 1.0);
    }
    Vector sorted = v;
    std::sort(sorted.data(), sorted.data() + n, std::greater<>());
    double cumsum = 0.0;
    double tau = 0.0;
    for (int k = 0; k < n; ++k) {
      cumsum += sorted[k];
      const double candidate = (cumsum - 1.0) / (k + 1);
      if (sorted[k] - candidate > 0) {
        tau = candidate;
      }
    }
    const Vector expected = (v.array() - tau).cwiseMax(0.0);

    const Matrix h = 2.0 * Matrix::Identity(n, n);
    const Vector g = -2.0 * v;
    const Matrix a_eq = Matrix::Ones(1, n);
    const Vector b_eq = Vector::Ones(1);
    const Matrix a_in = Matrix::Identity(n, n);
    const Vector b_in = Vector::Zero(n);
    const auto sol = svrpf::solve_dense_qp(h, g, a_eq, b_eq, a_in, b_in);
    ASSERT_EQ(sol.status, QpStatus::optimal);
    EXPECT_LT((sol.x - expected).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
    EXPECT_LT(svrpf::qp_kkt_residual(sol, h, g, a_eq, b_eq, a_in, b_in), 1e-12);
  }
}

TEST(QuadProg, ReportsInfeasibility) {
  const Matrix h = Matrix::Identity(1, 1);
  const Vector g = Vector::Zero(1);
  Matrix a(2, 1);
  a << 1, -1;
  Vector b(2);
  b << 1, 0;  // x >= 1 and x <= 0
  const auto sol = svrpf::solve_dense_qp(h, g, Matrix(0, 1), Vector(0), a, b);
  EXPECT_EQ(sol.status, QpStatus::infeasible);
}

TEST(QuadProg, RejectsIndefiniteHessian) {
  Matrix h(1, 1);
  h << -1;
  EXPECT_THROW(svrpf::solve_dense_qp(h, Vector::Zero(1), Matrix(0, 1), Vector(0), Matrix(0, 1), Vector(0)),
               svrpf::InvalidArgument);
}

}  // namespace

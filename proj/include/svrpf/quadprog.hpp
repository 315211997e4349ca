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

#ifndef SVRPF_QUADPROG_HPP
#define SVRPF_QUADPROG_HPP

#include <svrpf/types.hpp>

#include <cmath>
#include <limits>
#include <vector>

/**
 * \file
 * \brief Dense strictly convex QP solver (Goldfarb-Idnani dual active-set method).
 *
 *     minimize    1/2 x' H x + g' x
 *     subject to  A_eq x  = b_eq
 *                 A_in x >= b_in
 *
 * Constraints are given row-wise. H must be positive definite. The method starts from the unconstrained
 * minimum and adds violated constraints one at a time while keeping the multipliers dual-feasible, so it
 * terminates after finitely many active-set changes and is fully deterministic.
 */

namespace svrpf {

enum class QpStatus { optimal, infeasible, iteration_limit };

struct QpSolution {
  Vector x;
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  /// Active inequality rows and their multipliers (>= 0).
  std::vector<Eigen::Index> active;
  std::vector<double> active_multipliers;
  /// Multipliers of the equality rows.
  Vector equality_multipliers;
};

namespace detail {

class GoldfarbIdnani {
 public:
  explicit GoldfarbIdnani(Eigen::Index n)
      : n_{n}, r_{Matrix::Zero(n, n)}, u_{Vector::Zero(n + 1)}, active_(static_cast<std::size_t>(n + 1), 0) {}

  Matrix j;  // J = L^{-T} Q, updated by Givens rotations.

  [[nodiscard]] Eigen::Index size() const noexcept { return iq_; }
  Vector& multipliers() noexcept { return u_; }
  std::vector<Eigen::Index>& active() noexcept { return active_; }

  /// d = J' n, z = J2 d2 (primal direction), r = R^{-1} d1 (dual direction).
  void directions(const Vector& normal, Vector& d, Vector& z, Vector& r) const {
    d.noalias() = j.transpose() * normal;
    z.noalias() = j.rightCols(n_ - iq_) * d.tail(n_ - iq_);
    r.head(iq_) = r_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
  }

  /// Appends the constraint whose transformed normal is `d`; false when it is linearly dependent.
  bool add(Vector& d) {
    for (Eigen::Index col = n_ - 1; col >= iq_ + 1; --col) {
      double cc = d[col - 1];
      double ss = d[col];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) {
        continue;
      }
      d[col] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[col - 1] = -h;
      } else {
        d[col - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Eigen::Index k = 0; k < n_; ++k) {
        const double t1 = j(k, col - 1);
        const double t2 = j(k, col);
        j(k, col - 1) = t1 * cc + t2 * ss;
        j(k, col) = xny * (t1 + j(k, col - 1)) - t2;
      }
    }
    ++iq_;
    r_.col(iq_ - 1).head(iq_) = d.head(iq_);
    if (std::abs(d[iq_ - 1]) <= std::numeric_limits<double>::epsilon() * r_norm_) {
      return false;
    }
    r_norm_ = std::max(r_norm_, std::abs(d[iq_ - 1]));
    return true;
  }

  /// Removes the active inequality with id `id` (searching from position `first_inequality`).
  void remove(Eigen::Index id, Eigen::Index first_inequality) {
    Eigen::Index qq = -1;
    for (Eigen::Index i = first_inequality; i < iq_; ++i) {
      if (active_[static_cast<std::size_t>(i)] == id) {
        qq = i;
        break;
      }
    }
    if (qq < 0) {
      throw Error("quadprog: attempted to remove a constraint that is not active");
    }
    for (Eigen::Index i = qq; i < iq_ - 1; ++i) {
      active_[static_cast<std::size_t>(i)] = active_[static_cast<std::size_t>(i + 1)];
      u_[i] = u_[i + 1];
      r_.col(i) = r_.col(i + 1);
    }
    active_[static_cast<std::size_t>(iq_ - 1)] = active_[static_cast<std::size_t>(iq_)];
    u_[iq_ - 1] = u_[iq_];
    active_[static_cast<std::size_t>(iq_)] = 0;
    u_[iq_] = 0.0;
    r_.col(iq_ - 1).head(iq_).setZero();
    --iq_;
    if (iq_ == 0) {
      return;
    }
    for (Eigen::Index col = qq; col < iq_; ++col) {
      double cc = r_(col, col);
      double ss = r_(col + 1, col);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) {
        continue;
      }
      cc /= h;
      ss /= h;
      r_(col + 1, col) = 0.0;
      if (cc < 0.0) {
        r_(col, col) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r_(col, col) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Eigen::Index k = col + 1; k < iq_; ++k) {
        const double t1 = r_(col, k);
        const double t2 = r_(col + 1, k);
        r_(col, k) = t1 * cc + t2 * ss;
        r_(col + 1, k) = xny * (t1 + r_(col, k)) - t2;
      }
      for (Eigen::Index k = 0; k < n_; ++k) {
        const double t1 = j(k, col);
        const double t2 = j(k, col + 1);
        j(k, col) = t1 * cc + t2 * ss;
        j(k, col + 1) = xny * (j(k, col) + t1) - t2;
      }
    }
  }

 private:
  Eigen::Index n_;
  Eigen::Index iq_ = 0;
  Matrix r_;
  Vector u_;
  std::vector<Eigen::Index> active_;
  double r_norm_ = 1.0;
};

}  // namespace detail

/// Solves the QP; inequality rows count as satisfied once `A_in x - b_in >= -feasibility_tol`.
inline QpSolution solve_dense_qp(const Matrix& h, const Vector& g, const Matrix& a_eq, const Vector& b_eq,
                                 const Matrix& a_in, const Vector& b_in, int max_iterations = 100000,
                                 double feasibility_tol = 1e-12) {
  const Eigen::Index n = h.rows();
  const Eigen::Index p = a_eq.rows();
  const Eigen::Index m = a_in.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kEps = std::numeric_limits<double>::epsilon();

  const Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument("quadprog: Hessian is not positive definite");
  }

  detail::GoldfarbIdnani state(n);
  state.j = llt.matrixL().solve(Matrix::Identity(n, n)).transpose();

  QpSolution sol;
  Vector x = -llt.solve(g);
  Vector d(n);
  Vector z(n);
  Vector r(n + 1);
  auto& u = state.multipliers();
  auto& active = state.active();

  for (Eigen::Index i = 0; i < p; ++i) {
    const Vector normal = a_eq.row(i).transpose();
    state.directions(normal, d, z, r);
    const Eigen::Index iq = state.size();
    double step = 0.0;
    if (z.squaredNorm() > kEps) {
      step = (b_eq[i] - normal.dot(x)) / z.dot(normal);
    }
    x += step * z;
    u[iq] = step;
    u.head(iq) -= step * r.head(iq);
    active[static_cast<std::size_t>(iq)] = -i - 1;
    if (!state.add(d)) {
      throw InvalidArgument("quadprog: equality constraints are linearly dependent");
    }
  }

  std::vector<Eigen::Index> status(static_cast<std::size_t>(m));  // -1 when active, else own index
  for (Eigen::Index i = 0; i < m; ++i) {
    status[static_cast<std::size_t>(i)] = i;
  }
  std::vector<char> excluded(static_cast<std::size_t>(m), 0);
  Vector slack(m);
  Vector x_old;
  Vector u_old;
  std::vector<Eigen::Index> active_old;

  bool done = false;
  while (!done) {
    if (++sol.iterations > max_iterations) {
      sol.status = QpStatus::iteration_limit;
      break;
    }
    for (Eigen::Index i = p; i < state.size(); ++i) {
      status[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] = -1;
    }
    slack.noalias() = a_in * x - b_in;
    std::fill(excluded.begin(), excluded.end(), 0);
    x_old = x;
    u_old = u;
    active_old = active;

    bool restart = false;
    while (!restart) {
      // Most violated constraint that is neither active nor excluded.
      Eigen::Index ip = -1;
      double worst = -feasibility_tol;
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (slack[i] < worst && status[si] != -1 && excluded[si] == 0) {
          worst = slack[i];
          ip = i;
        }
      }
      if (ip < 0) {
        done = true;
        break;
      }
      const Vector normal = a_in.row(ip).transpose();
      u[state.size()] = 0.0;
      active[static_cast<std::size_t>(state.size())] = ip;

      while (true) {
        state.directions(normal, d, z, r);
        const Eigen::Index iq = state.size();
        Eigen::Index drop = -1;
        double t1 = kInf;
        for (Eigen::Index k = p; k < iq; ++k) {
          if (r[k] > 0.0 && u[k] / r[k] < t1) {
            t1 = u[k] / r[k];
            drop = active[static_cast<std::size_t>(k)];
          }
        }
        const double t2 = z.squaredNorm() > kEps ? -slack[ip] / z.dot(normal) : kInf;
        const double t = std::min(t1, t2);
        if (t >= kInf) {
          sol.status = QpStatus::infeasible;
          sol.x = x;
          return sol;
        }
        if (t2 >= kInf) {
          u.head(iq) -= t * r.head(iq);
          u[iq] += t;
          status[static_cast<std::size_t>(drop)] = drop;
          state.remove(drop, p);
          continue;
        }
        x += t * z;
        u.head(iq) -= t * r.head(iq);
        u[iq] += t;
        if (std::abs(t - t2) < kEps) {
          if (!state.add(d)) {
            excluded[static_cast<std::size_t>(ip)] = 1;
            state.remove(ip, p);
            for (Eigen::Index i = 0; i < m; ++i) {
              status[static_cast<std::size_t>(i)] = i;
            }
            for (Eigen::Index i = 0; i < state.size(); ++i) {
              active[static_cast<std::size_t>(i)] = active_old[static_cast<std::size_t>(i)];
              u[i] = u_old[i];
              if (i >= p) {
                status[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] = -1;
              }
            }
            x = x_old;
            break;  // choose another violated constraint
          }
          status[static_cast<std::size_t>(ip)] = -1;
          restart = true;
          break;
        }
        status[static_cast<std::size_t>(drop)] = drop;
        state.remove(drop, p);
        slack[ip] = normal.dot(x) - b_in[ip];
      }
    }
  }

  sol.x = x;
  sol.equality_multipliers = Vector::Zero(p);
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const auto id = active[static_cast<std::size_t>(i)];
    if (id < 0) {
      sol.equality_multipliers[-id - 1] = u[i];
    } else {
      sol.active.push_back(id);
      sol.active_multipliers.push_back(u[i]);
    }
  }
  return sol;
}

/// Largest violation of the KKT conditions of a returned solution (primal, dual sign, stationarity).
inline double qp_kkt_residual(const QpSolution& sol, const Matrix& h, const Vector& g, const Matrix& a_eq,
                              const Vector& b_eq, const Matrix& a_in, const Vector& b_in) {
  double residual = 0.0;
  if (a_eq.rows() > 0) {
    residual = std::max(residual, (a_eq * sol.x - b_eq).cwiseAbs().maxCoeff());
  }
  if (a_in.rows() > 0) {
    residual = std::max(residual, (b_in - a_in * sol.x).cwiseMax(0.0).maxCoeff());
  }
  Vector grad = h * sol.x + g;
  if (a_eq.rows() > 0) {
    grad -= a_eq.transpose() * sol.equality_multipliers;
  }
  for (std::size_t k = 0; k < sol.active.size(); ++k) {
    residual = std::max(residual, -sol.active_multipliers[k]);
    grad -= sol.active_multipliers[k] * a_in.row(sol.active[k]).transpose();
  }
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff() * sol.x.cwiseAbs().maxCoeff());
  return std::max(residual, grad.cwiseAbs().maxCoeff() / scale);
}

}  // namespace svrpf

#endif

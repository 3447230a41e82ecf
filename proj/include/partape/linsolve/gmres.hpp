// Copyright 2026 The partape Authors. All Rights Reserved.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "partape/errors.hpp"
#include "partape/linsolve/sparse_matrix.hpp"
#include "partape/parallel/team.hpp"

namespace partape::linsolve {

struct SolverSettings {
  double tol = 1e-10;          // relative residual, forward solves
  double reverse_tol = 1e-10;  // relative residual, transposed solves
  int max_iters = 1000;
  int restart = 20;
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;  // relative
  bool converged = false;
};

// Scratch space shared by all members of a team running one solve. Dot
// products are summed in fixed-size blocks in block order, so results do not
// depend on the team size.
class GmresWorkspace {
 public:
  static constexpr std::size_t kBlock = 256;

  void prepare(std::size_t n, int restart) {
    n_ = n;
    const auto m = static_cast<std::size_t>(restart);
    if (basis_.size() < m + 1) basis_.resize(m + 1);
    for (auto& v : basis_) v.resize(n);
    z_.resize(n);
    w_.resize(n);
    r_.resize(n);
    blocks_.resize((n + kBlock - 1) / kBlock);
  }

  std::size_t n() const { return n_; }
  std::vector<double>& basis(std::size_t i) { return basis_[i]; }
  std::vector<double>& z() { return z_; }
  std::vector<double>& w() { return w_; }
  std::vector<double>& r() { return r_; }

  // Collective dot product; every member returns the same value.
  double dot(const Team& team, std::span<const double> a, std::span<const double> b) {
    const auto [lo, hi] = team.chunk(blocks_.size());
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t end = std::min(n_, (k + 1) * kBlock);
      double s = 0.0;
      for (std::size_t i = k * kBlock; i < end; ++i) s += a[i] * b[i];
      blocks_[k] = s;
    }
    team.sync();
    double total = 0.0;
    for (double s : blocks_) total += s;
    team.sync();
    return total;
  }

  double norm(const Team& team, std::span<const double> a) { return std::sqrt(dot(team, a, a)); }

 private:
  std::size_t n_ = 0;
  std::vector<std::vector<double>> basis_;
  std::vector<double> z_, w_, r_;
  std::vector<double> blocks_;
};

// Jacobi preconditioner z = D^{-1} v (collective).
class JacobiPreconditioner {
 public:
  JacobiPreconditioner() = default;
  explicit JacobiPreconditioner(const std::vector<double>& diag) : inv_(diag.size()) {
    for (std::size_t i = 0; i < diag.size(); ++i) {
      if (diag[i] == 0.0 || !std::isfinite(diag[i])) {
        throw SolverFailure("Jacobi preconditioner: zero or non-finite diagonal at row " +
                                std::to_string(i),
                            0.0);
      }
      inv_[i] = 1.0 / diag[i];
    }
  }

  void operator()(const Team& team, std::span<const double> v, std::span<double> z) const {
    const auto [b, e] = team.chunk(v.size());
    if (inv_.empty()) {
      for (std::size_t i = b; i < e; ++i) z[i] = v[i];
    } else {
      for (std::size_t i = b; i < e; ++i) z[i] = inv_[i] * v[i];
    }
    team.sync();
  }

 private:
  std::vector<double> inv_;
};

// Restarted GMRES with right preconditioning, run collectively by every
// member of `team` on shared vectors. `op(team, in, out)` and
// `prec(team, in, out)` are collective and return with `out` complete.
// `x` holds the initial guess on entry.
//
// Throws SolverFailure (carrying the relative residual) when max_iters is
// reached or the iteration produces non-finite values.
template <class Op, class Prec>
SolveStats gmres(const Team& team, Op&& op, Prec&& prec, std::span<const double> b,
                 std::span<double> x, double tol, int max_iters, int restart,
                 GmresWorkspace& ws) {
  const std::size_t n = b.size();
  if (restart < 1) throw ContractViolation("GMRES restart length must be at least 1");
  if (team.master()) ws.prepare(n, restart);
  team.sync();
  const auto [lo, hi] = team.chunk(n);
  const auto m = static_cast<std::size_t>(restart);

  SolveStats stats;
  const double bnorm = ws.norm(team, b);
  if (bnorm == 0.0) {
    for (std::size_t i = lo; i < hi; ++i) x[i] = 0.0;
    team.sync();
    stats.converged = true;
    return stats;
  }

  auto& r = ws.r();
  auto residual = [&]() {
    op(team, std::span<const double>(x.data(), n), std::span<double>(ws.w()));
    for (std::size_t i = lo; i < hi; ++i) r[i] = b[i] - ws.w()[i];
    team.sync();
    return ws.norm(team, r);
  };

  double beta = residual();
  stats.residual = beta / bnorm;
  if (!std::isfinite(stats.residual)) throw SolverFailure("GMRES: non-finite residual", stats.residual);

  std::vector<double> h((m + 1) * m), cs(m), sn(m), g(m + 1), y(m);
  auto H = [&](std::size_t i, std::size_t j) -> double& { return h[i * m + j]; };

  while (stats.residual > tol) {
    if (stats.iterations >= max_iters) {
      throw SolverFailure("GMRES did not converge within " + std::to_string(max_iters) +
                              " iterations",
                          stats.residual);
    }
    auto& v0 = ws.basis(0);
    for (std::size_t i = lo; i < hi; ++i) v0[i] = r[i] / beta;
    team.sync();
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;

    std::size_t k = 0;
    for (; k < m && stats.iterations < max_iters;) {
      prec(team, std::span<const double>(ws.basis(k)), std::span<double>(ws.z()));
      op(team, std::span<const double>(ws.z()), std::span<double>(ws.w()));
      auto& w = ws.w();
      for (std::size_t i = 0; i <= k; ++i) {
        const auto& vi = ws.basis(i);
        const double hij = ws.dot(team, w, vi);
        H(i, k) = hij;
        for (std::size_t q = lo; q < hi; ++q) w[q] -= hij * vi[q];
        team.sync();
      }
      const double hk = ws.norm(team, w);
      H(k + 1, k) = hk;
      if (hk != 0.0) {
        auto& vn = ws.basis(k + 1);
        for (std::size_t q = lo; q < hi; ++q) vn[q] = w[q] / hk;
        team.sync();
      }
      for (std::size_t i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double denom = std::hypot(H(k, k), H(k + 1, k));
      if (denom == 0.0 || !std::isfinite(denom)) {
        throw SolverFailure("GMRES breakdown", stats.residual);
      }
      cs[k] = H(k, k) / denom;
      sn[k] = H(k + 1, k) / denom;
      H(k, k) = denom;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++k;
      ++stats.iterations;
      if (std::abs(g[k]) / bnorm <= tol || hk == 0.0) break;
    }

    // x += M^{-1} V y
    for (std::size_t i = k; i-- > 0;) {
      double s = g[i];
      for (std::size_t j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
      y[i] = s / H(i, i);
    }
    auto& u = ws.w();
    for (std::size_t q = lo; q < hi; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += y[i] * ws.basis(i)[q];
      u[q] = s;
    }
    team.sync();
    prec(team, std::span<const double>(u), std::span<double>(ws.z()));
    for (std::size_t q = lo; q < hi; ++q) x[q] += ws.z()[q];
    team.sync();

    beta = residual();
    stats.residual = beta / bnorm;
    if (!std::isfinite(stats.residual)) {
      throw SolverFailure("GMRES: non-finite residual", stats.residual);
    }
  }
  stats.converged = true;
  return stats;
}

// Collective solve of A x = b with Jacobi preconditioning.
inline SolveStats solve_matrix(const Team& team, const SparseMatrix& a,
                               const JacobiPreconditioner& prec, std::span<const double> b,
                               std::span<double> x, double tol, int max_iters, int restart,
                               GmresWorkspace& ws) {
  auto op = [&a](const Team& t, std::span<const double> in, std::span<double> out) {
    a.multiply(t, in, out);
  };
  return gmres(team, op, prec, b, x, tol, max_iters, restart, ws);
}

}  // namespace partape::linsolve

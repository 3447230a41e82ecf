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

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "partape/ad.hpp"
#include "partape/linsolve/external_solve.hpp"
#include "partape/linsolve/gmres.hpp"
#include "partape/linsolve/sparse_matrix.hpp"
#include "test_support.hpp"

using namespace partape;
using namespace partape::linsolve;
using partape::testing::dense_solve;
using partape::testing::dense_transpose;
using partape::testing::rel_diff;

namespace {

// Random sparse nonsymmetric matrix with a dominant diagonal, dense layout.
std::vector<double> random_system(std::mt19937_64& rng, std::size_t n, double fill = 0.4) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.0, 1.0);
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && p(rng) < fill) {
        a[i * n + j] = u(rng);
        row += std::abs(a[i * n + j]);
      }
    }
    a[i * n + i] = row + 0.5 + p(rng);
  }
  return a;
}

std::vector<double> random_spd(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> b(n * n), a(n * n, 0.0);
  for (auto& v : b) v = u(rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) a[i * n + j] += b[k * n + i] * b[k * n + j];
    }
    a[i * n + i] += static_cast<double>(n);
  }
  return a;
}

// Records x = A^{-1} b with active b, seeds xbar and returns bbar.
std::vector<double> reverse_through_solve(const SparseMatrix& a, const std::vector<double>& b0,
                                          const std::vector<double>& xbar, int threads = 1,
                                          SolverSettings settings = {}) {
  configure(Scheme::Linear);
  const std::size_t n = b0.size();
  std::vector<ActiveScalar> b(b0.begin(), b0.end()), x(n);
  ExternalSolver solver(settings);
  start_recording();
  for (auto& bi : b) register_input(bi);
  if (threads == 1) {
    solver.solve(Team{}, a, b, x);
  } else {
    parallel_region(threads, [&](const Team& team) { solver.solve(team, a, b, x); });
  }
  stop_recording();
  resize_adjoints();
  {
    UseAdjoints use;
    for (std::size_t i = 0; i < n; ++i) set_derivative(x[i].identifier(), xbar[i]);
  }
  evaluate();
  std::vector<double> bbar(n);
  {
    UseAdjoints use;
    for (std::size_t i = 0; i < n; ++i) bbar[i] = get_derivative(b[i].identifier());
  }
  reset_tape();
  return bbar;
}

}  // namespace

TEST(SparseMatrixTest, TransposeExample) {
  auto a = SparseMatrix::from_dense(2, {2, 1, 0, 3});
  EXPECT_EQ(a.nonzeros(), 4u);  // explicit zero at (1, 0)
  a.transpose_in_place();
  EXPECT_EQ(a.to_dense(), (std::vector<double>{2, 0, 1, 3}));
}

TEST(SparseMatrixTest, TransposeIsInvolution) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_system(rng, 15);
    auto a = SparseMatrix::from_dense(15, d);
    const auto orig = a;
    a.transpose_in_place();
    EXPECT_EQ(a.to_dense(), dense_transpose(d, 15));
    a.transpose_in_place();
    EXPECT_EQ(a, orig);
  }
}

TEST(SparseMatrixTest, SymmetricUnchanged) {
  std::mt19937_64 rng(2);
  auto a = SparseMatrix::from_dense(8, random_spd(rng, 8));
  const auto orig = a;
  a.transpose_in_place();
  EXPECT_EQ(a, orig);
}

TEST(SparseMatrixTest, NonsymmetricPatternRejected) {
  auto a = SparseMatrix::from_csr(2, {0, 2, 3}, {0, 1, 1}, {2.0, 1.0, 3.0});
  EXPECT_FALSE(a.structurally_symmetric());
  EXPECT_THROW(a.transpose_in_place(), ContractViolation);
}

TEST(GmresTest, IdentitySystem) {
  auto a = SparseMatrix::from_dense(2, {1, 0, 0, 1});
  std::vector<double> b{1, 2}, x(2, 0.0);
  GmresWorkspace ws;
  const auto stats = solve_matrix(Team{}, a, JacobiPreconditioner(a.diagonal()), b, x, 1e-12,
                                  100, 20, ws);
  EXPECT_TRUE(stats.converged);
  EXPECT_LE(rel_diff(x, {1, 2}), 1e-14);
}

TEST(GmresTest, ZeroRightHandSideExitsImmediately) {
  auto a = SparseMatrix::from_dense(2, {2, 1, 0, 3});
  std::vector<double> b{0, 0}, x{5, 5};
  GmresWorkspace ws;
  const auto stats = solve_matrix(Team{}, a, JacobiPreconditioner(a.diagonal()), b, x, 1e-12,
                                  100, 20, ws);
  EXPECT_EQ(stats.iterations, 0);
  EXPECT_EQ(x, (std::vector<double>{0, 0}));
}

TEST(GmresTest, MatchesDenseSolve) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial);
    const auto d = random_system(rng, n);
    auto a = SparseMatrix::from_dense(n, d);
    std::vector<double> b(n), x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) b[i] = std::sin(1.0 + i);
    GmresWorkspace ws;
    solve_matrix(Team{}, a, JacobiPreconditioner(a.diagonal()), b, x, 1e-13, 500, 4, ws);
    EXPECT_LE(rel_diff(x, dense_solve(d, b)), 1e-11);
  }
}

TEST(GmresTest, RestartOneConvergesOnSpd) {
  std::mt19937_64 rng(4);
  const auto d = random_spd(rng, 10);
  auto a = SparseMatrix::from_dense(10, d);
  std::vector<double> b(10, 1.0), x(10, 0.0);
  GmresWorkspace ws;
  const auto stats =
      solve_matrix(Team{}, a, JacobiPreconditioner(a.diagonal()), b, x, 1e-10, 5000, 1, ws);
  EXPECT_TRUE(stats.converged);
  EXPECT_LE(rel_diff(x, dense_solve(d, b)), 1e-8);
}

TEST(GmresTest, MaxIterationsIsSolverFailure) {
  std::mt19937_64 rng(5);
  const auto d = random_system(rng, 30, 0.9);
  auto a = SparseMatrix::from_dense(30, d);
  std::vector<double> b(30, 1.0), x(30, 0.0);
  GmresWorkspace ws;
  try {
    solve_matrix(Team{}, a, JacobiPreconditioner(a.diagonal()), b, x, 1e-14, 2, 1, ws);
    FAIL() << "expected SolverFailure";
  } catch (const SolverFailure& e) {
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(GmresTest, TeamSolveIsBitIdenticalToSerial) {
  std::mt19937_64 rng(6);
  const std::size_t n = 700;
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  for (std::size_t i = 0; i + 1 < n; ++i) pairs.emplace_back(i, i + 1);
  for (std::size_t i = 0; i + 30 < n; i += 3) pairs.emplace_back(i, i + 30);
  auto a = SparseMatrix::from_pattern(n, pairs);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
      a.values()[k] = static_cast<std::size_t>(a.col()[k]) == i ? 4.0 : u(rng);
    }
  }
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = std::cos(0.1 * i);
  std::vector<double> serial(n, 0.0), team(n, 0.0);
  JacobiPreconditioner prec(a.diagonal());
  GmresWorkspace ws1, ws4;
  solve_matrix(Team{}, a, prec, b, serial, 1e-12, 1000, 20, ws1);
  ThreadPool::instance().run(4, [&](Team& t) {
    solve_matrix(t, a, prec, b, team, 1e-12, 1000, 20, ws4);
  });
  EXPECT_EQ(serial, team);
}

TEST(ExternalSolveTest, IdentityReverse) {
  auto a = SparseMatrix::from_dense(2, {1, 0, 0, 1});
  EXPECT_LE(rel_diff(reverse_through_solve(a, {1, 2}, {1, 0}), {1, 0}), 1e-14);
}

TEST(ExternalSolveTest, TwoByTwoReverse) {
  auto a = SparseMatrix::from_dense(2, {2, 1, 0, 3});
  const auto bbar = reverse_through_solve(a, {1, 1}, {1, 1});
  const auto oracle = dense_solve(dense_transpose(a.to_dense(), 2), {1, 1});
  EXPECT_NEAR(oracle[0], 0.5, 1e-15);
  EXPECT_NEAR(oracle[1], 1.0 / 6.0, 1e-15);
  EXPECT_LE(rel_diff(bbar, oracle), 1e-12);
}

TEST(ExternalSolveTest, DiagonalReverse) {
  auto a = SparseMatrix::from_dense(2, {2, 0, 0, 4});
  EXPECT_LE(rel_diff(reverse_through_solve(a, {3, 3}, {2, 4}), {1, 1}), 1e-14);
}

TEST(ExternalSolveTest, ZeroSeedLeavesInputsUntouched) {
  configure(Scheme::Linear);
  auto a = SparseMatrix::from_dense(2, {2, 1, 0, 3});
  std::vector<ActiveScalar> b{1.0, 2.0}, x(2);
  ExternalSolver solver;
  start_recording();
  for (auto& bi : b) register_input(bi);
  solver.solve(Team{}, a, b, x);
  stop_recording();
  resize_adjoints();
  {
    UseAdjoints use;
    set_derivative(b[0].identifier(), 0.25);
  }
  evaluate();
  UseAdjoints use;
  EXPECT_EQ(get_derivative(b[0].identifier()), 0.25);
  EXPECT_EQ(get_derivative(b[1].identifier()), 0.0);
  EXPECT_EQ(solver.last_node()->last_reverse_stats().iterations, 0);
}

TEST(ExternalSolveTest, ForwardValuesAndIdentifiers) {
  configure(Scheme::Reuse);
  auto a = SparseMatrix::from_dense(2, {2, 1, 0, 3});
  std::vector<ActiveScalar> b{3.0, 3.0}, x(2);
  ExternalSolver solver;
  start_recording();
  for (auto& bi : b) register_input(bi);
  solver.solve(Team{}, a, b, x);
  stop_recording();
  EXPECT_NEAR(x[0].value(), 1.0, 1e-12);
  EXPECT_NEAR(x[1].value(), 1.0, 1e-12);
  EXPECT_GT(x[0].identifier(), 0);
  EXPECT_NE(x[0].identifier(), x[1].identifier());
  EXPECT_EQ(tape_stats().externals, 1u);
  reset_tape();
}

TEST(ExternalSolveTest, RandomSpdAgainstDenseOracle) {
  std::mt19937_64 rng(7);
  const auto d = random_spd(rng, 10);
  auto a = SparseMatrix::from_dense(10, d);
  std::vector<double> b(10, 1.0), xbar(10);
  for (std::size_t i = 0; i < 10; ++i) xbar[i] = 1.0 + 0.1 * i;
  const auto bbar = reverse_through_solve(a, b, xbar);
  EXPECT_LE(rel_diff(bbar, dense_solve(dense_transpose(d, 10), xbar)), 1e-8);
}

TEST(ExternalSolveTest, TeamReverseMatchesSerial) {
  std::mt19937_64 rng(8);
  const auto d = random_system(rng, 20);
  auto a = SparseMatrix::from_dense(20, d);
  std::vector<double> b(20, 1.0), xbar(20);
  for (std::size_t i = 0; i < 20; ++i) xbar[i] = std::sin(1.0 + i);
  const auto serial = reverse_through_solve(a, b, xbar, 1);
  const auto team = reverse_through_solve(a, b, xbar, 3);
  EXPECT_EQ(serial, team);
}

TEST(ExternalSolveTest, MatchesBlackBoxTapedJacobi) {
  // Oracle: 200 Jacobi sweeps recorded statement by statement.
  std::mt19937_64 rng(9);
  const std::size_t n = 12;
  auto d = random_system(rng, n, 0.3);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] *= 2.0;  // fast Jacobi contraction
  auto a = SparseMatrix::from_dense(n, d);
  std::vector<double> b0(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    b0[i] = std::cos(0.5 * i);
    w[i] = 1.0 + 0.05 * i;
  }
  const auto bbar = reverse_through_solve(a, b0, w);

  configure(Scheme::Linear);
  std::vector<ActiveScalar> b(b0.begin(), b0.end()), x(n, 0.0);
  start_recording();
  for (auto& bi : b) register_input(bi);
  for (int it = 0; it < 200; ++it) {
    std::vector<ActiveScalar> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      ActiveScalar s = b[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && d[i * n + j] != 0.0) s -= d[i * n + j] * x[j];
      }
      next[i] = s / d[i * n + i];
    }
    x = next;
  }
  ActiveScalar f = 0.0;
  for (std::size_t i = 0; i < n; ++i) f += w[i] * x[i];
  stop_recording();
  resize_adjoints();
  {
    UseAdjoints use;
    set_derivative(f.identifier(), 1.0);
  }
  evaluate();
  std::vector<double> oracle(n);
  {
    UseAdjoints use;
    for (std::size_t i = 0; i < n; ++i) oracle[i] = get_derivative(b[i].identifier());
  }
  reset_tape();
  EXPECT_LE(rel_diff(bbar, oracle), 1e-6);
}

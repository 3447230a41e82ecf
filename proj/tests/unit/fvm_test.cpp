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

#include <cmath>
#include <random>
#include <vector>

#include "partape/fvm/solver.hpp"
#include "test_support.hpp"

using namespace partape;
using namespace partape::fvm;

namespace {

std::vector<double> values(const std::vector<ActiveScalar>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].value();
  return out;
}

std::vector<ActiveScalar> random_state(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 2.0);
  std::vector<ActiveScalar> u(n);
  for (auto& x : u) x = d(rng);
  return u;
}

ParallelConfig strategy(LoopStrategy s, int threads = 1) {
  ParallelConfig pc;
  pc.strategy = s;
  pc.threads = threads;
  return pc;
}

PhysicsConfig uniform_dirichlet(double c) {
  PhysicsConfig ph;
  ph.boundary_values.clear();
  ph.default_boundary = c;
  ph.source = 0.0;
  ph.initial_value = c;
  return ph;
}

class FvmTest : public ::testing::Test {
 protected:
  void SetUp() override { configure(Scheme::Linear); }
};

}  // namespace

TEST_F(FvmTest, ConstantStateIsSteady) {
  FvmSolver s(mesh::generate_grid(6, 5, 1.0, 0.8), uniform_dirichlet(0.7), {});
  const auto r = s.residual(s.initial_state());
  EXPECT_LE(partape::testing::max_abs(values(r)), 1e-15);
}

TEST_F(FvmTest, LinearFieldExactForPureDiffusion) {
  PhysicsConfig ph;
  ph.ax = ph.ay = 0.0;
  ph.source = 0.0;
  FvmSolver s(mesh::generate_grid(10, 2, 1.0, 0.2), ph, {});
  std::vector<ActiveScalar> u(s.size());
  for (std::size_t p = 0; p < u.size(); ++p) u[p] = 2.0 + 3.0 * s.mesh().points[p][0];
  const auto r = s.residual(u);
  std::vector<bool> boundary(s.size(), false);
  for (auto p : s.boundary_points()) boundary[static_cast<std::size_t>(p)] = true;
  int interior = 0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    if (boundary[p]) continue;
    ++interior;
    EXPECT_LE(std::abs(r[p].value()), 1e-12) << "point " << p;
  }
  EXPECT_EQ(interior, 9);
}

TEST_F(FvmTest, ColoringMatchesReduction) {
  const auto m = mesh::generate_grid(9, 7, 1.0, 1.0);
  const auto u = random_state(m.num_points(), 3);
  for (int threads : {1, 3}) {
    FvmSolver colored(m, {}, strategy(LoopStrategy::Coloring, threads));
    FvmSolver reduced(m, {}, strategy(LoopStrategy::Reduction, threads));
    ASSERT_TRUE(colored.plan().colored);
    ASSERT_FALSE(reduced.plan().colored);
    const auto a = values(colored.residual(u));
    const auto b = values(reduced.residual(u));
    for (std::size_t p = 0; p < a.size(); ++p) EXPECT_NEAR(a[p], b[p], 1e-14);
  }
}

TEST_F(FvmTest, ThreadCountDoesNotChangeResidual) {
  const auto m = mesh::generate_grid(8, 8, 1.0, 1.0);
  const auto u = random_state(m.num_points(), 5);
  ParallelConfig pc = strategy(LoopStrategy::Coloring, 1);
  pc.relax = false;
  pc.group_size = 16;
  FvmSolver one(m, {}, pc);
  pc.threads = 4;
  FvmSolver four(m, {}, pc);
  EXPECT_EQ(values(one.residual(u)), values(four.residual(u)));
}

TEST_F(FvmTest, InteriorFluxesTelescope) {
  FvmSolver s(mesh::generate_grid(7, 6, 1.0, 1.0), {}, {});
  auto u = random_state(s.size(), 7);
  auto total = [&] {
    double t = 0.0;
    for (const auto& r : s.residual(u)) t += r.value();
    return t;
  };
  const double before = total();
  std::vector<bool> boundary(s.size(), false);
  for (auto p : s.boundary_points()) boundary[static_cast<std::size_t>(p)] = true;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  for (std::size_t p = 0; p < u.size(); ++p) {
    if (!boundary[p]) u[p] = u[p].value() + d(rng);
  }
  EXPECT_NEAR(total(), before, 1e-12);
}

TEST_F(FvmTest, JacobianIsMinusResidualDerivative) {
  FvmSolver s(mesh::generate_grid(4, 3, 1.0, 1.0), {}, {});
  const auto u0 = random_state(s.size(), 11);
  const auto r0 = values(s.residual(u0));
  const auto k = s.jacobian(s.metrics()).to_dense();
  const std::size_t n = s.size();
  for (std::size_t j = 0; j < n; ++j) {
    auto u = u0;
    u[j] = u[j].value() + 1.0;  // R is affine in U
    const auto r = values(s.residual(u));
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(-(r[i] - r0[i]), k[i * n + j], 1e-13) << i << "," << j;
    }
  }
}

TEST_F(FvmTest, ZeroResidualIsFixedPoint) {
  PhysicsConfig ph = uniform_dirichlet(0.0);
  FvmSolver s(mesh::generate_grid(5, 5, 1.0, 1.0), ph, {});
  const auto u = s.initial_state();
  const auto next = s.step(u);
  EXPECT_EQ(s.last_residual_norm(), 0.0);
  EXPECT_EQ(values(next), values(u));
}

TEST_F(FvmTest, UniformDirichletConvergesImmediately) {
  FvmSolver s(mesh::generate_grid(6, 6, 1.0, 1.0), uniform_dirichlet(1.5), {});
  auto u = s.initial_state();
  const auto res = s.primal_solve(u, 1e-10, 50);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(res.iterations, 1);
  for (const auto& v : u) EXPECT_EQ(v.value(), 1.5);
}

TEST_F(FvmTest, PrimalConvergesMonotonically) {
  FvmSolver s(mesh::generate_grid(16, 16, 1.0, 1.0), {}, {});
  auto u = s.initial_state();
  std::vector<std::vector<double>> iterates{values(u)};
  int steps = 0;
  for (; steps < 200; ++steps) {
    u = s.step(u);
    iterates.push_back(values(u));
    if (s.last_residual_norm() == 0.0) break;
  }
  auto ustar = u;
  const auto res = s.primal_solve(ustar, 1e-12, 500);
  ASSERT_TRUE(res.converged);
  const auto target = values(ustar);
  std::vector<double> err;
  for (const auto& it : iterates) {
    double e = 0.0;
    for (std::size_t i = 0; i < it.size(); ++i) e = std::max(e, std::abs(it[i] - target[i]));
    err.push_back(e);
  }
  // Monotone decrease after a short transient, until round-off takes over.
  for (std::size_t k = 3; k + 1 < err.size() && err[k + 1] > 1e-11; ++k) {
    EXPECT_LT(err[k + 1], err[k]) << "step " << k;
  }
  EXPECT_LT(err.back(), 1e-8);
}

TEST_F(FvmTest, PrimalSolveAndRestart) {
  FvmSolver s(mesh::generate_grid(16, 16, 1.0, 1.0), {}, {});
  auto u = s.initial_state();
  const auto res = s.primal_solve(u, 1e-10, 500);
  ASSERT_TRUE(res.converged);
  EXPECT_GT(res.iterations, 1);
  const double j = s.objective(u).value();
  EXPECT_TRUE(std::isfinite(j));
  const auto again = s.primal_solve(u, 1e-10, 500, res.reference_norm);
  EXPECT_TRUE(again.converged);
  EXPECT_EQ(again.iterations, 0);
}

TEST_F(FvmTest, StrategiesAgreeOnConvergedState) {
  const auto m = mesh::generate_grid(12, 12, 1.0, 1.0);
  FvmSolver a(m, {}, strategy(LoopStrategy::Coloring, 2));
  FvmSolver b(m, {}, strategy(LoopStrategy::Reduction, 3));
  auto ua = a.initial_state();
  auto ub = b.initial_state();
  ASSERT_TRUE(a.primal_solve(ua, 1e-13, 500).converged);
  ASSERT_TRUE(b.primal_solve(ub, 1e-13, 500).converged);
  for (std::size_t p = 0; p < ua.size(); ++p) EXPECT_NEAR(ua[p].value(), ub[p].value(), 1e-12);
}

TEST_F(FvmTest, ObjectiveOfConstantState) {
  FvmSolver s(mesh::generate_grid(5, 4, 2.0, 1.25), {}, {});
  std::vector<ActiveScalar> u(s.size(), ActiveScalar(0.75));
  EXPECT_NEAR(s.objective(u).value(), 0.75 * 1.25, 1e-15);
}

TEST_F(FvmTest, ObjectiveScalesWithCoordinates) {
  FvmSolver s(mesh::generate_grid(5, 4, 1.0, 1.0), {}, {});
  const auto u = random_state(s.size(), 13);
  const double j1 = s.objective(u).value();
  auto x = mesh::coordinates_of<double>(s.mesh());
  for (auto& p : x) {
    p[0] *= 2.0;
    p[1] *= 2.0;
  }
  s.set_coordinates(x);
  EXPECT_NEAR(s.objective(u).value(), 2.0 * j1, 1e-14);
}

TEST_F(FvmTest, MissingObjectiveMarker) {
  PhysicsConfig ph;
  ph.objective_marker = "outlet";
  FvmSolver s(mesh::generate_grid(3, 3, 1.0, 1.0), ph, {});
  EXPECT_THROW(s.objective(s.initial_state()), ConfigError);
}

TEST_F(FvmTest, InvalidPhysicsRejected) {
  PhysicsConfig ph;
  ph.nu = 0.0;
  EXPECT_THROW(FvmSolver(mesh::generate_grid(3, 3, 1.0, 1.0), ph, {}), ConfigError);
}

TEST(LoopPlanTest, Strategies) {
  const auto m = mesh::generate_grid(10, 10, 1.0, 1.0);
  ParallelConfig pc;
  pc.threads = 4;
  pc.strategy = LoopStrategy::Reduction;
  EXPECT_FALSE(plan_loops(m, pc).colored);

  pc.strategy = LoopStrategy::Coloring;
  const auto adaptive = plan_loops(m, pc);
  ASSERT_TRUE(adaptive.colored);
  EXPECT_GE(adaptive.efficiency, pc.efficiency_threshold);
  EXPECT_LE(adaptive.group_size, pc.group_size);

  pc.relax = false;
  pc.group_size = 64;
  const auto fixed = plan_loops(m, pc);
  ASSERT_TRUE(fixed.colored);
  EXPECT_EQ(fixed.group_size, 64u);

  pc.max_colors = 1;
  EXPECT_THROW(plan_loops(m, pc), ConfigError);
  pc.strategy = LoopStrategy::Auto;
  EXPECT_FALSE(plan_loops(m, pc).colored);
  pc.relax = true;
  EXPECT_FALSE(plan_loops(m, pc).colored);

  pc.max_colors = 255;
  pc.relax = false;
  pc.group_size = m.num_edges();  // one group: efficiency 1/4
  EXPECT_FALSE(plan_loops(m, pc).colored);
  pc.strategy = LoopStrategy::Coloring;
  EXPECT_TRUE(plan_loops(m, pc).colored);
}

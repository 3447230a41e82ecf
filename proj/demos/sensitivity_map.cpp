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

// Shape sensitivities of the outflow integral: writes x, y, dJ/dx, dJ/dy for
// every mesh point as CSV.
//
//   sensitivity_map [NX NY [THREADS]] > map.csv

#include <cstdio>
#include <cstdlib>

#include "partape/adjoint/driver.hpp"
#include "partape/adjoint/fvm_problem.hpp"
#include "partape/fvm/solver.hpp"
#include "partape/mesh/mesh.hpp"

using namespace partape;

int main(int argc, char** argv) {
  int nx = 16, ny = 16, threads = 1;
  if (argc >= 3) {
    nx = std::atoi(argv[1]);
    ny = std::atoi(argv[2]);
  }
  if (argc >= 4) threads = std::atoi(argv[3]);

  configure(Scheme::Linear);
  const mesh::Mesh m = mesh::generate_grid(nx, ny, 1.0, 1.0);
  fvm::ParallelConfig pc;
  pc.threads = threads;
  linsolve::SolverSettings ls;
  ls.tol = ls.reverse_tol = 1e-12;
  fvm::FvmSolver solver(m, fvm::PhysicsConfig{}, pc, ls);

  auto u = solver.initial_state();
  const auto primal = solver.primal_solve(u, 1e-11, 500);
  adjoint::FvmProblem problem(solver, std::move(u));
  adjoint::AdjointSettings as;
  as.mode = adjoint::Mode::Gmres;
  as.tol = 1e-10;
  adjoint::DriverSettings ds;
  ds.threads = threads;
  const auto res = adjoint::run_adjoint(problem, as, ds);

  std::fprintf(stderr, "primal iterations %d, adjoint iterations %d, dJ/dsource %.10f\n",
               primal.iterations, res.gmres.iterations, res.sensitivity.gradient[0]);
  std::printf("x,y,dJ_dx,dJ_dy\n");
  for (std::size_t p = 0; p < m.num_points(); ++p) {
    std::printf("%.6f,%.6f,%.10e,%.10e\n", m.points[p][0], m.points[p][1],
                res.sensitivity.gradient[adjoint::FvmProblem::coordinate_index(p, 0)],
                res.sensitivity.gradient[adjoint::FvmProblem::coordinate_index(p, 1)]);
  }
  return 0;
}

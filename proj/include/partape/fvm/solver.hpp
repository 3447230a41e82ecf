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
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "partape/ad.hpp"
#include "partape/fvm/config.hpp"
#include "partape/linsolve/external_solve.hpp"
#include "partape/mesh/coloring.hpp"
#include "partape/mesh/mesh.hpp"
#include "partape/mesh/metrics.hpp"

namespace partape::fvm {

using Metrics = mesh::DualMetrics<ActiveScalar>;
using Coords = mesh::Coordinates<ActiveScalar>;

struct PrimalResult {
  int iterations = 0;
  bool converged = false;
  double reference_norm = 0.0;
  std::vector<double> residual_history;  // ||R(U_k)||_2 for every evaluated state
};

// Vertex-centered finite-volume discretization on the median dual of a
// triangle mesh. The state is one value per point; the parameters are the
// point coordinates and the source amplitude.
//
// Edge fluxes (outflow from edges[e][0] to edges[e][1]):
//   F = q (ua + ub)/2 + |q| (ua - ub)/2 + nu c (ua - ub),
//   q = a.n, c = (n.d)/(d.d), d = xb - xa.
// Boundary half faces couple to the Dirichlet value through a ghost state.
// R_i = S V_i - (sum of outflows of cell i).
class FvmSolver {
 public:
  FvmSolver(mesh::Mesh m, PhysicsConfig physics, ParallelConfig parallel,
            linsolve::SolverSettings linear = {})
      : mesh_(std::move(m)),
        physics_(std::move(physics)),
        parallel_(parallel),
        solver_(linear),
        coords_(mesh::coordinates_of<ActiveScalar>(mesh_)),
        source_(physics_.source) {
    physics_.validate();
    plan_ = plan_loops(mesh_, parallel_);
    build_boundary();
    build_pattern();
  }

  const mesh::Mesh& mesh() const { return mesh_; }
  const PhysicsConfig& physics() const { return physics_; }
  const ParallelConfig& parallel() const { return parallel_; }
  const LoopPlan& plan() const { return plan_; }
  std::size_t size() const { return mesh_.num_points(); }
  linsolve::ExternalSolver& linear_solver() { return solver_; }

  Coords& coordinates() { return coords_; }
  ActiveScalar& source() { return source_; }

  // Passive reset of the parameters.
  void set_coordinates(const mesh::Coordinates<double>& x) {
    if (x.size() != coords_.size()) throw ContractViolation("coordinate count does not match mesh");
    for (std::size_t p = 0; p < x.size(); ++p) {
      coords_[p][0] = x[p][0];
      coords_[p][1] = x[p][1];
    }
  }
  void set_source(double s) { source_ = s; }

  std::vector<ActiveScalar> initial_state() const {
    return std::vector<ActiveScalar>(size(), ActiveScalar(physics_.initial_value));
  }

  Metrics metrics() const { return mesh::compute_metrics(mesh_, coords_); }

  // R(U) in a parallel region of its own.
  std::vector<ActiveScalar> residual(const std::vector<ActiveScalar>& u) {
    check_size(u);
    const Metrics m = metrics();
    std::vector<ActiveScalar> r(size());
    std::vector<ActiveScalar> flux(plan_.colored ? 0 : mesh_.num_edges());
    parallel_region(parallel_.threads,
                    [&](const Team& team) { residual(team, u, m, r, flux); });
    return r;
  }

  // Collective residual. r is overwritten; flux holds one entry per edge when
  // the reduction strategy is in use.
  void residual(const Team& team, const std::vector<ActiveScalar>& u, const Metrics& m,
                std::vector<ActiveScalar>& r, std::vector<ActiveScalar>& flux) {
    worksharing_for(team, size(), [&](std::size_t p) { r[p] = source_ * m.volume[p]; });
    if (plan_.colored) {
      if (parallel_.no_shared_reading) set_no_shared_reading(true);
      for (const auto& groups : plan_.coloring.color_groups) {
        worksharing_for(team, groups.size(), [&](std::size_t k) {
          const mesh::EdgeGroup& g = plan_.coloring.groups[groups[k]];
          for (std::size_t e = g.begin; e < g.end; ++e) {
            const ActiveScalar f = edge_flux(u, m, e);
            r[static_cast<std::size_t>(mesh_.edges[e][0])] -= f;
            r[static_cast<std::size_t>(mesh_.edges[e][1])] += f;
          }
        });
      }
      if (parallel_.no_shared_reading) set_no_shared_reading(false);
    } else {
      pause_preaccumulation();
      worksharing_for(team, mesh_.num_edges(), [&](std::size_t e) { flux[e] = edge_flux(u, m, e); });
      worksharing_for(team, size(), [&](std::size_t p) {
        for (const auto& inc : plan_.gather.of(p)) {
          if (inc.sign > 0) {
            r[p] -= flux[inc.edge];
          } else {
            r[p] += flux[inc.edge];
          }
        }
      });
      resume_preaccumulation();
    }
    worksharing_for(team, boundary_points_.size(), [&](std::size_t k) {
      const auto p = static_cast<std::size_t>(boundary_points_[k]);
      const ActiveScalar b = boundary_flux(u, m, k);
      r[p] -= b;
    });
  }

  // K = -dR/dU (exact for this first-order scheme), passive.
  linsolve::SparseMatrix jacobian(const Metrics& m) const { return assemble(m, false); }

  // K + diag(lambda / CFL), the matrix of the implicit pseudo-time step.
  linsolve::SparseMatrix implicit_matrix(const Metrics& m) const { return assemble(m, true); }

  // One implicit pseudo-time step U' = U + M^{-1} R(U).
  std::vector<ActiveScalar> step(const std::vector<ActiveScalar>& u) {
    check_size(u);
    const Metrics m = metrics();
    const linsolve::SparseMatrix a = implicit_matrix(m);
    std::vector<ActiveScalar> r(size()), du(size()), out(size());
    std::vector<ActiveScalar> flux(plan_.colored ? 0 : mesh_.num_edges());
    parallel_region(parallel_.threads, [&](const Team& team) {
      residual(team, u, m, r, flux);
      solver_.solve(team, a, r, du);
      worksharing_for(team, size(), [&](std::size_t p) {
        out[p] = u[p];
        out[p] += du[p];
      });
    });
    double s = 0.0;
    for (const auto& v : r) s += v.value() * v.value();
    last_residual_norm_ = std::sqrt(s);
    return out;
  }

  // ||R(U)||_2 of the state passed to the most recent step().
  double last_residual_norm() const { return last_residual_norm_; }

  // Integral of U over the objective marker (trapezoidal per face).
  ActiveScalar objective(const std::vector<ActiveScalar>& u) const {
    check_size(u);
    const int marker = mesh_.marker_id(physics_.objective_marker);
    ActiveScalar j = 0.0;
    for (const auto& f : mesh_.boundary_faces()) {
      if (f.marker != marker) continue;
      const auto a = static_cast<std::size_t>(f.i);
      const auto b = static_cast<std::size_t>(f.j);
      const ActiveScalar tx = coords_[b][0] - coords_[a][0];
      const ActiveScalar ty = coords_[b][1] - coords_[a][1];
      j += sqrt(tx * tx + ty * ty) * (u[a] + u[b]) * 0.5;
    }
    return j;
  }

  ActiveScalar objective(const std::vector<ActiveScalar>& u, const Metrics& m) const {
    check_size(u);
    const int marker = mesh_.marker_id(physics_.objective_marker);
    ActiveScalar j = 0.0;
    const auto& faces = mesh_.boundary_faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].marker != marker) continue;
      j += m.face_length[f] * (u[static_cast<std::size_t>(faces[f].i)] +
                               u[static_cast<std::size_t>(faces[f].j)]) * 0.5;
    }
    return j;
  }

  // Iterates step() until ||R|| <= tol * reference (reference defaults to the
  // initial residual norm) or ||R|| <= abs_tol, or max_iters steps were taken.
  PrimalResult primal_solve(std::vector<ActiveScalar>& u, double tol, int max_iters,
                            double reference_norm = 0.0, double abs_tol = 1e-14) {
    PrimalResult res;
    for (int it = 0;; ++it) {
      std::vector<ActiveScalar> next = step(u);
      const double rn = last_residual_norm_;
      res.residual_history.push_back(rn);
      if (it == 0) res.reference_norm = reference_norm > 0.0 ? reference_norm : rn;
      if (rn <= tol * res.reference_norm || rn <= abs_tol) {
        res.converged = true;
        break;
      }
      if (it == max_iters) break;
      u = std::move(next);
      res.iterations = it + 1;
    }
    return res;
  }

  const std::vector<mesh::Index>& boundary_points() const { return boundary_points_; }

 private:
  void check_size(const std::vector<ActiveScalar>& u) const {
    if (u.size() != size()) throw ContractViolation("state size does not match point count");
  }

  ActiveScalar edge_flux(const std::vector<ActiveScalar>& u, const Metrics& m,
                         std::size_t e) const {
    const auto a = static_cast<std::size_t>(mesh_.edges[e][0]);
    const auto b = static_cast<std::size_t>(mesh_.edges[e][1]);
    const auto& n = m.normal[e];
    const auto& xa = coords_[a];
    const auto& xb = coords_[b];
    const std::array<const ActiveScalar*, 8> candidates{&u[a], &u[b], &n[0], &n[1],
                                                         &xa[0], &xa[1], &xb[0], &xb[1]};
    std::array<const ActiveScalar*, 8> inputs{};
    std::size_t k = 0;
    for (const ActiveScalar* c : candidates) {
      if (c->active()) inputs[k++] = c;
    }
    PreaccSession s = preacc_start(std::span<const ActiveScalar* const>(inputs.data(), k));
    const ActiveScalar q = n[0] * physics_.ax + n[1] * physics_.ay;
    const ActiveScalar dx = xb[0] - xa[0];
    const ActiveScalar dy = xb[1] - xa[1];
    const ActiveScalar c = (n[0] * dx + n[1] * dy) / (dx * dx + dy * dy);
    const ActiveScalar jump = u[a] - u[b];
    ActiveScalar f = 0.5 * q * (u[a] + u[b]) + 0.5 * abs(q) * jump + physics_.nu * c * jump;
    std::array<ActiveScalar*, 1> out{&f};
    preacc_finish(s, out);
    return f;
  }

  // Sum of the ghost-state fluxes over the half faces of boundary point k.
  // The face normals are shared with the neighbouring boundary point, so the
  // session may not run alongside that point's session.
  ActiveScalar boundary_flux(const std::vector<ActiveScalar>& u, const Metrics& m,
                             std::size_t k) const {
    const auto p = static_cast<std::size_t>(boundary_points_[k]);
    std::vector<const ActiveScalar*> inputs;
    if (u[p].active()) inputs.push_back(&u[p]);
    for (std::size_t i = boundary_offsets_[k]; i < boundary_offsets_[k + 1]; ++i) {
      for (const auto& c : m.face_normal[boundary_faces_of_[i]]) {
        if (c.active()) inputs.push_back(&c);
      }
    }
    PreaccSession s = preacc_start(std::span<const ActiveScalar* const>(inputs),
                                   PreaccKind::Hazardous);
    ActiveScalar b = 0.0;
    for (std::size_t i = boundary_offsets_[k]; i < boundary_offsets_[k + 1]; ++i) {
      const std::size_t f = boundary_faces_of_[i];
      const auto& fn = m.face_normal[f];
      const double ud = face_value_[f];
      const ActiveScalar q = 0.5 * (fn[0] * physics_.ax + fn[1] * physics_.ay);
      const ActiveScalar jump = u[p] - ud;
      b += 0.5 * q * (u[p] + ud) + 0.5 * abs(q) * jump +
           physics_.nu * physics_.boundary_penalty * jump;
    }
    std::array<ActiveScalar*, 1> out{&b};
    preacc_finish(s, out);
    return b;
  }

  void build_boundary() {
    const auto& faces = mesh_.boundary_faces();
    const auto names = mesh_.marker_names();
    face_value_.resize(faces.size());
    std::vector<std::vector<std::size_t>> of(size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
      face_value_[f] = faces[f].marker < 0
                           ? physics_.default_boundary
                           : physics_.boundary_value(names[static_cast<std::size_t>(faces[f].marker)]);
      of[static_cast<std::size_t>(faces[f].i)].push_back(f);
      of[static_cast<std::size_t>(faces[f].j)].push_back(f);
    }
    boundary_offsets_.push_back(0);
    for (std::size_t p = 0; p < size(); ++p) {
      if (of[p].empty()) continue;
      boundary_points_.push_back(static_cast<mesh::Index>(p));
      boundary_faces_of_.insert(boundary_faces_of_.end(), of[p].begin(), of[p].end());
      boundary_offsets_.push_back(boundary_faces_of_.size());
    }
  }

  void build_pattern() {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(mesh_.num_edges());
    for (const auto& e : mesh_.edges) {
      pairs.emplace_back(e[0], e[1]);
    }
    pattern_ = linsolve::SparseMatrix::from_pattern(size(), pairs);
    slots_.resize(mesh_.num_edges());
    for (std::size_t e = 0; e < mesh_.num_edges(); ++e) {
      const auto a = static_cast<std::size_t>(mesh_.edges[e][0]);
      const auto b = static_cast<std::size_t>(mesh_.edges[e][1]);
      slots_[e] = {pattern_.find(a, a), pattern_.find(a, b), pattern_.find(b, a), pattern_.find(b, b)};
    }
    diag_.resize(size());
    for (std::size_t p = 0; p < size(); ++p) diag_[p] = pattern_.find(p, p);
  }

  linsolve::SparseMatrix assemble(const Metrics& m, bool pseudo_time) const {
    linsolve::SparseMatrix k = pattern_;
    k.set_zero();
    auto& v = k.values();
    std::vector<double> lambda(size(), 0.0);
    const double ax = physics_.ax, ay = physics_.ay, nu = physics_.nu;
    for (std::size_t e = 0; e < mesh_.num_edges(); ++e) {
      const auto a = static_cast<std::size_t>(mesh_.edges[e][0]);
      const auto b = static_cast<std::size_t>(mesh_.edges[e][1]);
      const double n0 = m.normal[e][0].value(), n1 = m.normal[e][1].value();
      const double dx = coords_[b][0].value() - coords_[a][0].value();
      const double dy = coords_[b][1].value() - coords_[a][1].value();
      const double q = ax * n0 + ay * n1;
      const double c = (n0 * dx + n1 * dy) / (dx * dx + dy * dy);
      const double da = std::max(q, 0.0) + nu * c;
      const double db = std::min(q, 0.0) - nu * c;
      v[slots_[e][0]] += da;
      v[slots_[e][1]] += db;
      v[slots_[e][2]] -= da;
      v[slots_[e][3]] -= db;
      lambda[a] += std::abs(q) + nu * c;
      lambda[b] += std::abs(q) + nu * c;
    }
    const auto& faces = mesh_.boundary_faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const double q = 0.5 * (ax * m.face_normal[f][0].value() + ay * m.face_normal[f][1].value());
      const double d = std::max(q, 0.0) + nu * physics_.boundary_penalty;
      for (const auto p : {faces[f].i, faces[f].j}) {
        v[diag_[static_cast<std::size_t>(p)]] += d;
        lambda[static_cast<std::size_t>(p)] += std::abs(q) + nu * physics_.boundary_penalty;
      }
    }
    if (pseudo_time) {
      for (std::size_t p = 0; p < size(); ++p) v[diag_[p]] += lambda[p] / physics_.cfl;
    }
    return k;
  }

  mesh::Mesh mesh_;
  PhysicsConfig physics_;
  ParallelConfig parallel_;
  LoopPlan plan_;
  linsolve::ExternalSolver solver_;
  Coords coords_;
  ActiveScalar source_;
  double last_residual_norm_ = 0.0;

  std::vector<mesh::Index> boundary_points_;
  std::vector<std::size_t> boundary_offsets_;
  std::vector<std::size_t> boundary_faces_of_;
  std::vector<double> face_value_;

  linsolve::SparseMatrix pattern_;
  std::vector<std::array<std::size_t, 4>> slots_;
  std::vector<std::size_t> diag_;
};

}  // namespace partape::fvm

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

#include <memory>
#include <span>
#include <vector>

#include "partape/ad/active_scalar.hpp"
#include "partape/ad/adjoint_vector.hpp"
#include "partape/ad/runtime.hpp"
#include "partape/ad/tape.hpp"
#include "partape/linsolve/gmres.hpp"
#include "partape/linsolve/sparse_matrix.hpp"
#include "partape/parallel/parallel.hpp"

namespace partape::linsolve {

// Tape node of a linear solve x = A^{-1} b. The reverse callback solves
// A^T s = xbar with the same GMRES routine after transposing its private copy
// of A in place, then adds s to bbar. All members of the evaluating team take
// part in the transposed solve.
class LinearSolveNode : public ExternalFunction {
 public:
  LinearSolveNode(SparseMatrix a, std::vector<Identifier> b_ids, SolverSettings settings)
      : a_(std::move(a)), b_ids_(std::move(b_ids)), settings_(settings) {}

  std::vector<Identifier>& x_ids() { return x_ids_; }
  const std::vector<Identifier>& b_ids() const { return b_ids_; }
  const SparseMatrix& matrix() const { return a_; }
  const SolveStats& last_reverse_stats() const { return stats_; }
  int reverse_calls() const { return calls_; }

  void reverse(const Team& team, AdjointVector& adjoints) override {
    const std::size_t n = a_.size();
    if (team.master()) {
      double* adj = adjoints.data();
      rhs_.assign(n, 0.0);
      sol_.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const Identifier id = x_ids_[i];
        if (id == 0) continue;
        rhs_[i] = adj[id];
        adj[id] = 0.0;
      }
      if (!transposed_) {
        a_.transpose_in_place();
        prec_ = JacobiPreconditioner(a_.diagonal());
        transposed_ = true;
      }
      ++calls_;
    }
    team.sync();
    const SolveStats stats =
        solve_matrix(team, a_, prec_, rhs_, sol_, settings_.reverse_tol, settings_.max_iters,
                     settings_.restart, ws_);
    if (team.master()) {
      stats_ = stats;
      double* adj = adjoints.data();
      for (std::size_t i = 0; i < n; ++i) {
        if (b_ids_[i] != 0) adj[b_ids_[i]] += sol_[i];
      }
    }
    team.sync();
  }

 private:
  SparseMatrix a_;
  std::vector<Identifier> b_ids_;
  std::vector<Identifier> x_ids_;
  SolverSettings settings_;
  bool transposed_ = false;
  JacobiPreconditioner prec_;
  GmresWorkspace ws_;
  std::vector<double> rhs_, sol_;
  SolveStats stats_;
  int calls_ = 0;
};

// Linear solves with active right-hand sides. One instance is shared by all
// members of a team; solve() is collective.
class ExternalSolver {
 public:
  explicit ExternalSolver(SolverSettings settings = {}) : settings_(settings) {}

  const SolverSettings& settings() const { return settings_; }
  void set_settings(const SolverSettings& s) { settings_ = s; }
  const SolveStats& last_stats() const { return stats_; }
  const std::shared_ptr<LinearSolveNode>& last_node() const { return node_; }

  // x = A^{-1} b. When recording, the master registers the node with a deep
  // copy of A, the solution entries receive fresh identifiers, and every
  // member puts the node on its tape between two barriers.
  void solve(const Team& team, const SparseMatrix& a, std::span<const ActiveScalar> b,
             std::span<ActiveScalar> x) {
    if (b.size() != a.size() || x.size() != a.size()) {
      throw ContractViolation("linear solve: size mismatch");
    }
    barrier(team);
    if (team.master()) {
      rhs_.resize(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) rhs_[i] = b[i].value();
      sol_.assign(b.size(), 0.0);
      prec_ = JacobiPreconditioner(a.diagonal());
      node_.reset();
    }
    team.sync();
    const SolveStats stats = solve_matrix(team, a, prec_, rhs_, sol_, settings_.tol,
                                          settings_.max_iters, settings_.restart, ws_);
    Tape& tape = Runtime::get().tape();
    if (team.master()) {
      stats_ = stats;
      if (tape.active()) {
        std::vector<Identifier> b_ids(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) b_ids[i] = b[i].identifier();
        node_ = std::make_shared<LinearSolveNode>(a, std::move(b_ids), settings_);
        node_->x_ids().resize(x.size());
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = sol_[i];
        if (node_) {
          register_input(x[i]);
          node_->x_ids()[i] = x[i].identifier();
        }
      }
    }
    team.sync();
    if (tape.active() && node_) tape.push_external(node_);
    barrier(team);
  }

 private:
  SolverSettings settings_;
  GmresWorkspace ws_;
  JacobiPreconditioner prec_;
  std::vector<double> rhs_, sol_;
  std::shared_ptr<LinearSolveNode> node_;
  SolveStats stats_;
};

}  // namespace partape::linsolve

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
#include <string>
#include <vector>

#include "partape/ad.hpp"
#include "partape/bench/timers.hpp"
#include "partape/linsolve/gmres.hpp"

namespace partape::adjoint {

// A fixed-point iteration U <- G(U, X) with an objective J(U, X).
class Problem {
 public:
  virtual ~Problem() = default;
  // The converged state U*.
  virtual std::vector<ActiveScalar>& state() = 0;
  virtual std::vector<ActiveScalar> step(const std::vector<ActiveScalar>& u) = 0;
  virtual ActiveScalar objective(const std::vector<ActiveScalar>& u) = 0;
  // The parameters X, in a fixed order.
  virtual std::vector<ActiveScalar*> parameters() = 0;
};

enum class Mode { FixedPoint, Gmres };

inline const char* to_string(Mode m) { return m == Mode::FixedPoint ? "fixed-point" : "gmres"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "fixed-point") return Mode::FixedPoint;
  if (s == "gmres") return Mode::Gmres;
  throw ConfigError("unknown adjoint mode '" + s + "'");
}

struct DriverSettings {
  int threads = 1;            // team size of the seeding and extraction loops
  bool verify_clean = false;  // check that the adjoint vector is zero before each sweep
};

struct FixedPointResult {
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // ||Ubar_{i+1} - Ubar_i||_2 / ||Ubar_{i+1}||_2
};

struct Sensitivity {
  std::vector<double> gradient;  // one entry per parameter
  double checksum = 0.0;         // sum of |gradient|
};

// Discrete adjoint workflow: a primary recording of J(G(U*, X), X) over U*,
// reverse sweeps on it (fixed-point iteration or GMRES), a passive pass that
// clears identifiers, and a secondary recording over X for the final
// sensitivity.
class Driver {
 public:
  explicit Driver(Problem& problem, DriverSettings settings = {},
                  bench::PhaseTimer* timer = nullptr)
      : problem_(problem), settings_(settings), timer_(timer) {
    if (settings_.threads < 1) throw ConfigError("driver thread count must be at least 1");
  }

  bool recorded() const { return recorded_; }
  const std::vector<Identifier>& input_ids() const { return in_ids_; }
  const std::vector<Identifier>& output_ids() const { return out_ids_; }
  Identifier objective_id() const { return j_id_; }
  std::size_t output_count() const { return out_ids_.size() + 1; }
  const std::vector<ActiveScalar>& outputs() const { return outputs_; }
  const ActiveScalar& objective_value() const { return j_; }
  // Whether the last passive pass reproduced the recorded values bit for bit.
  bool passive_pass_identical() const { return passive_identical_; }

  void primary_recording() {
    if (recorded_) throw ContractViolation("a primary recording is still live");
    bench::ScopedPhase phase(timer_, bench::Phase::Recording);
    reset_tape();
    start_recording();
    try {
      auto& u = problem_.state();
      in_ids_.resize(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        register_input(u[i]);
        in_ids_[i] = u[i].identifier();
      }
      record_outputs(u);
    } catch (...) {
      stop_recording();
      throw;
    }
    stop_recording();
    recorded_ = true;
    sized_ = false;
  }

  // Ubar_{i+1} = dG/dU^T (Ubar_i + dJ/dU'^T): seeds the G outputs with ubar
  // and the objective with j_seed, evaluates, and extracts the U* adjoints.
  std::vector<double> iterate(const std::vector<double>& ubar, double j_seed = 1.0) {
    require_recording();
    if (ubar.size() != out_ids_.size()) throw ContractViolation("adjoint iterate has wrong size");
    std::vector<double> next(in_ids_.size());
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Management);
      if (!sized_) {
        resize_adjoints();
        sized_ = true;
      }
      if (settings_.verify_clean) verify_clean();
      parallel_region(settings_.threads, [&](const Team& team) {
        Bracket b;
        worksharing_for(team, out_ids_.size(),
                        [&](std::size_t i) { set_derivative(out_ids_[i], ubar[i]); });
        if (team.master()) set_derivative(j_id_, j_seed);
      });
    }
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Evaluation);
      parallel_evaluate(TapeSetPosition{}, end_, 0);
    }
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Management);
      // A complete sweep leaves only the input slots nonzero.
      parallel_region(settings_.threads, [&](const Team& team) {
        Bracket b;
        worksharing_for(team, in_ids_.size(), [&](std::size_t i) {
          next[i] = get_derivative(in_ids_[i]);
          set_derivative(in_ids_[i], 0.0);
        });
      });
    }
    return next;
  }

  // dJ~/dU, the sweep with zero state seed.
  std::vector<double> objective_gradient() {
    return iterate(std::vector<double>(out_ids_.size(), 0.0));
  }

  // Iterates from ubar (zero by default) until the relative update drops
  // below tol (tol = 0: run exactly max_iters iterations).
  FixedPointResult fixed_point(std::vector<double>& ubar, int max_iters, double tol = 0.0) {
    require_recording();
    if (ubar.empty()) ubar.assign(out_ids_.size(), 0.0);
    FixedPointResult res;
    for (int it = 0; it < max_iters; ++it) {
      std::vector<double> next = iterate(ubar);
      double d = 0.0, s = 0.0;
      for (std::size_t i = 0; i < next.size(); ++i) {
        d += (next[i] - ubar[i]) * (next[i] - ubar[i]);
        s += next[i] * next[i];
      }
      const double rel = s > 0.0 ? std::sqrt(d / s) : std::sqrt(d);
      res.history.push_back(rel);
      ubar = std::move(next);
      res.iterations = it + 1;
      if (tol > 0.0 && rel <= tol) {
        res.converged = true;
        break;
      }
    }
    return res;
  }

  // Solves (dG/dU^T - I) Ubar = -dJ~/dU^T matrix free; every operator
  // application is one reverse sweep. ubar holds the initial guess (zero if
  // empty). Non-convergence is reported in the returned stats.
  linsolve::SolveStats gmres(std::vector<double>& ubar, double tol, int restart, int max_iters) {
    require_recording();
    const std::size_t n = out_ids_.size();
    if (ubar.empty()) ubar.assign(n, 0.0);
    std::vector<double> rhs = objective_gradient();
    for (auto& v : rhs) v = -v;
    const Team solo;
    auto op = [&](const Team&, std::span<const double> in, std::span<double> out) {
      const std::vector<double> v(in.begin(), in.end());
      const std::vector<double> gv = iterate(v, 0.0);
      for (std::size_t i = 0; i < n; ++i) out[i] = gv[i] - in[i];
    };
    linsolve::JacobiPreconditioner identity;
    linsolve::GmresWorkspace ws;
    try {
      return linsolve::gmres(solo, op, identity, rhs, ubar, tol, max_iters, restart, ws);
    } catch (const SolverFailure& e) {
      linsolve::SolveStats failed;
      failed.iterations = max_iters;
      failed.residual = e.residual();
      return failed;
    }
  }

  // Re-evaluates J(G(U*, X), X) without recording, overwriting every stored
  // output with its passive value, then self-assigns U* and X.
  void passive_clear() {
    bench::ScopedPhase phase(timer_, bench::Phase::Recording);
    if (is_recording()) throw ContractViolation("passive_clear while recording");
    auto& u = problem_.state();
    const std::vector<ActiveScalar> out = problem_.step(u);
    const ActiveScalar j = problem_.objective(out);
    passive_identical_ = out.size() == outputs_.size() && j.value() == j_.value();
    for (std::size_t i = 0; i < outputs_.size() && i < out.size(); ++i) {
      if (out[i].value() != outputs_[i].value()) passive_identical_ = false;
      outputs_[i] = out[i].value();
    }
    j_ = j.value();
    for (auto& v : u) v = v.value();
    for (ActiveScalar* x : problem_.parameters()) *x = x->value();
    recorded_ = false;
    in_ids_.clear();
  }

  // Records J(G(U*, X), X) over X, seeds with ubar and 1.0, evaluates once and
  // returns dJ/dX. Identifiers are cleared again afterwards.
  Sensitivity secondary_recording(const std::vector<double>& ubar) {
    if (recorded_) throw ContractViolation("primary recording must be cleared first");
    auto params = problem_.parameters();
    std::vector<Identifier> ids(params.size());
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Recording);
      reset_tape();
      start_recording();
      try {
        for (std::size_t k = 0; k < params.size(); ++k) {
          register_input(*params[k]);
          ids[k] = params[k]->identifier();
        }
        record_outputs(problem_.state());
      } catch (...) {
        stop_recording();
        throw;
      }
      stop_recording();
    }
    if (ubar.size() != out_ids_.size()) throw ContractViolation("adjoint state has wrong size");
    Sensitivity s;
    s.gradient.resize(params.size());
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Management);
      resize_adjoints();
      if (settings_.verify_clean) verify_clean();
      Bracket b;
      for (std::size_t i = 0; i < out_ids_.size(); ++i) set_derivative(out_ids_[i], ubar[i]);
      set_derivative(j_id_, 1.0);
    }
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Evaluation);
      parallel_evaluate(TapeSetPosition{}, end_, 0);
    }
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Management);
      Bracket b;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        s.gradient[k] = get_derivative(ids[k]);
        set_derivative(ids[k], 0.0);
        s.checksum += std::abs(s.gradient[k]);
      }
    }
    {
      bench::ScopedPhase phase(timer_, bench::Phase::Recording);
      for (auto& o : outputs_) o = o.value();
      j_ = j_.value();
      for (ActiveScalar* x : params) *x = x->value();
    }
    return s;
  }

 private:
  // Use-bracket of the calling thread, only taken under the optimized
  // adjoint-vector protocol.
  struct Bracket {
    bool on = Runtime::get().adjoint_vector_optimized();
    Bracket() {
      if (on) begin_use_adjoints();
    }
    ~Bracket() {
      if (on) end_use_adjoints();
    }
  };

  void require_recording() const {
    if (!recorded_) throw ContractViolation("no live primary recording");
  }

  void record_outputs(const std::vector<ActiveScalar>& u) {
    outputs_ = problem_.step(u);
    out_ids_.resize(outputs_.size());
    for (std::size_t i = 0; i < outputs_.size(); ++i) {
      register_output(outputs_[i]);
      out_ids_[i] = outputs_[i].identifier();
    }
    j_ = problem_.objective(outputs_);
    register_output(j_);
    j_id_ = j_.identifier();
    end_ = get_position();
  }

  static void verify_clean() {
    AdjointVector& v = Runtime::get().adjoints();
    const double* a = v.data();
    for (std::size_t i = 0; i < v.capacity(); ++i) {
      if (a[i] != 0.0) {
        throw StructuralError("adjoint entry " + std::to_string(i) + " not reset between sweeps");
      }
    }
  }

  Problem& problem_;
  DriverSettings settings_;
  bench::PhaseTimer* timer_;
  bool recorded_ = false;
  bool sized_ = false;
  bool passive_identical_ = false;
  std::vector<Identifier> in_ids_;
  std::vector<Identifier> out_ids_;
  Identifier j_id_ = 0;
  std::vector<ActiveScalar> outputs_;
  ActiveScalar j_;
  TapeSetPosition end_;
};

struct AdjointSettings {
  Mode mode = Mode::FixedPoint;
  int iterations = 300;  // fixed-point iterations, or GMRES iteration limit
  double tol = 0.0;      // 0: fixed iteration count
  int restart = 50;
};

struct AdjointResult {
  std::vector<double> ubar;
  Sensitivity sensitivity;
  FixedPointResult fixed_point;
  linsolve::SolveStats gmres;
  bool converged = false;
};

// Runs the whole workflow on a problem whose state is already converged.
inline AdjointResult run_adjoint(Problem& problem, const AdjointSettings& as,
                                 DriverSettings ds = {}, bench::PhaseTimer* timer = nullptr) {
  Driver d(problem, ds, timer);
  AdjointResult r;
  d.primary_recording();
  if (as.mode == Mode::FixedPoint) {
    r.fixed_point = d.fixed_point(r.ubar, as.iterations, as.tol);
    r.converged = as.tol > 0.0 ? r.fixed_point.converged : true;
  } else {
    r.gmres = d.gmres(r.ubar, as.tol > 0.0 ? as.tol : 1e-10, as.restart, as.iterations);
    r.converged = r.gmres.converged;
  }
  d.passive_clear();
  r.sensitivity = d.secondary_recording(r.ubar);
  return r;
}

}  // namespace partape::adjoint

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
#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "partape/ad.hpp"
#include "partape/adjoint/driver.hpp"
#include "partape/adjoint/fvm_problem.hpp"
#include "partape/bench/config.hpp"
#include "partape/bench/timers.hpp"
#include "partape/fvm/solver.hpp"
#include "partape/mesh/mesh.hpp"

namespace partape::bench {

struct PhaseSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline constexpr const char* kReportPhases[] = {"recording", "management", "evaluation",
                                                "non_ad", "total"};

struct BenchReport {
  BenchConfig config;
  std::string cell;  // matrix axis assignment, empty outside matrices
  bool ok = true;
  std::string error;

  std::map<std::string, PhaseSummary> phases;  // keys from kReportPhases, seconds
  int measured_reps = 0;

  TapeStats tape;  // primary recording
  std::vector<TapeStats> tape_per_thread;
  TapeStats secondary_tape;
  bool tape_deterministic = true;  // identical tape stats in every repetition
  std::size_t adjoint_capacity = 0;
  long long memory_hwm_kb = -1;    // process high-water mark, -1 if unknown

  double objective = 0.0;
  double source_sensitivity = 0.0;
  double gradient_checksum = 0.0;
  std::vector<double> gradient;
  std::vector<double> ubar;

  int primal_iterations = 0;
  bool primal_converged = false;
  int adjoint_iterations = 0;
  double adjoint_residual = 0.0;
  bool adjoint_converged = false;

  bool colored = false;
  std::size_t group_size = 0;
  double coloring_efficiency = 0.0;
};

// VmHWM from /proc/self/status, in kB.
inline long long memory_high_water_kb() {
  std::ifstream is("/proc/self/status");
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      try {
        return std::stoll(line.substr(6));
      } catch (...) {
        return -1;
      }
    }
  }
  return -1;
}

inline mesh::Mesh build_mesh(const BenchConfig& c) {
  if (!c.mesh_path.empty()) return mesh::load_mesh(c.mesh_path);
  return mesh::generate_grid(c.nx, c.ny, c.lx, c.ly);
}

struct PipelineSample {
  std::array<double, 5> seconds{};  // in kReportPhases order
  TapeStats tape;
  std::vector<TapeStats> tape_per_thread;
  TapeStats secondary_tape;
};

// Applies the AD-related fields to the process-wide runtime. Resets all tapes
// and identifiers.
inline void apply_runtime(const BenchConfig& c) {
  configure(c.scheme);
  set_preacc_mode(c.preacc);
  set_adjoint_vector_optimized(c.adjoint_vector_opt);
}

// One execution of primal solve, adjoint solve and sensitivity evaluation.
inline PipelineSample run_pipeline(const BenchConfig& c, const mesh::Mesh& m, BenchReport& out) {
  using Clock = std::chrono::steady_clock;
  apply_runtime(c);
  PipelineSample s;
  PhaseTimer timer;
  const auto t0 = Clock::now();

  fvm::FvmSolver solver(m, c.physics, c.parallel, c.linear);
  out.colored = solver.plan().colored;
  out.group_size = solver.plan().group_size;
  out.coloring_efficiency = solver.plan().efficiency;
  auto u = solver.initial_state();
  const auto primal = solver.primal_solve(u, c.primal_tol, c.primal_max_iters);
  out.primal_iterations = primal.iterations;
  out.primal_converged = primal.converged;
  out.objective = solver.objective(u).value();

  adjoint::FvmProblem problem(solver, std::move(u));
  adjoint::DriverSettings ds;
  ds.threads = c.parallel.threads;
  adjoint::Driver driver(problem, ds, &timer);
  driver.primary_recording();
  s.tape = tape_stats();
  for (int t = 0; t < c.parallel.threads; ++t) {
    s.tape_per_thread.push_back(Runtime::get().tape(t).stats());
  }

  std::vector<double> ubar;
  if (c.adjoint.mode == adjoint::Mode::FixedPoint) {
    const auto fp = driver.fixed_point(ubar, c.adjoint.iterations, c.adjoint.tol);
    out.adjoint_iterations = fp.iterations;
    out.adjoint_residual = fp.history.empty() ? 0.0 : fp.history.back();
    out.adjoint_converged = c.adjoint.tol > 0.0 ? fp.converged : true;
  } else {
    const auto st = driver.gmres(ubar, c.adjoint.tol > 0.0 ? c.adjoint.tol : 1e-10,
                                 c.adjoint.restart, c.adjoint.iterations);
    out.adjoint_iterations = st.iterations;
    out.adjoint_residual = st.residual;
    out.adjoint_converged = st.converged;
  }
  driver.passive_clear();
  const auto sens = driver.secondary_recording(ubar);
  s.secondary_tape = tape_stats();
  out.adjoint_capacity = Runtime::get().adjoints().capacity();
  reset_tape();

  const double total = std::chrono::duration<double>(Clock::now() - t0).count();
  s.seconds[0] = timer.seconds(Phase::Recording);
  s.seconds[1] = timer.seconds(Phase::Management);
  s.seconds[2] = timer.seconds(Phase::Evaluation);
  s.seconds[3] = std::max(0.0, total - timer.total_seconds());
  s.seconds[4] = total;

  out.gradient = sens.gradient;
  out.gradient_checksum = sens.checksum;
  out.source_sensitivity = sens.gradient.empty() ? 0.0 : sens.gradient[0];
  out.ubar = std::move(ubar);
  return s;
}

// Tape of a single residual evaluation R(U) with U as the only inputs.
inline TapeStats residual_tape_stats(const BenchConfig& c) {
  c.validate();
  const mesh::Mesh m = build_mesh(c);
  apply_runtime(c);
  fvm::FvmSolver solver(m, c.physics, c.parallel, c.linear);
  TapeStats s;
  {
    auto u = solver.initial_state();
    start_recording();
    for (auto& v : u) register_input(v);
    const auto r = solver.residual(u);
    stop_recording();
    s = tape_stats();
  }
  reset_tape();
  return s;
}

// warmup + reps executions of the pipeline; phase times are summarized over
// the measured repetitions. Failures end the run with a partial report.
inline BenchReport run_benchmark(const BenchConfig& c) {
  BenchReport r;
  r.config = c;
  try {
    c.validate();
    const mesh::Mesh m = build_mesh(c);
    std::vector<PipelineSample> samples;
    for (int k = 0; k < c.warmup + c.reps; ++k) {
      PipelineSample s = run_pipeline(c, m, r);
      if (k < c.warmup) continue;
      if (!samples.empty() && (s.tape.bytes != samples.front().tape.bytes ||
                               s.tape.statements != samples.front().tape.statements)) {
        r.tape_deterministic = false;
      }
      samples.push_back(std::move(s));
      r.measured_reps = static_cast<int>(samples.size());
      r.tape = samples.front().tape;
      r.tape_per_thread = samples.front().tape_per_thread;
      r.secondary_tape = samples.front().secondary_tape;
      for (std::size_t p = 0; p < 5; ++p) {
        PhaseSummary sum;
        sum.min = samples.front().seconds[p];
        sum.max = sum.min;
        for (const auto& x : samples) {
          sum.mean += x.seconds[p];
          sum.min = std::min(sum.min, x.seconds[p]);
          sum.max = std::max(sum.max, x.seconds[p]);
        }
        sum.mean /= static_cast<double>(samples.size());
        r.phases[kReportPhases[p]] = sum;
      }
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
    if (is_recording()) stop_recording();
  }
  r.memory_hwm_kb = memory_high_water_kb();
  return r;
}

using Axes = std::vector<std::pair<std::string, std::vector<std::string>>>;

// Cartesian product over the axes (the first axis varies slowest). Cells
// that fail are reported and the matrix continues.
inline std::vector<BenchReport> run_matrix(const BenchConfig& base, const Axes& axes) {
  std::size_t cells = 1;
  for (const auto& [key, values] : axes) {
    if (values.empty()) throw ConfigError("matrix axis '" + key + "' has no values");
    cells *= values.size();
  }
  std::vector<BenchReport> out;
  out.reserve(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    BenchConfig c = base;
    std::string label;
    std::size_t rest = cell;
    std::vector<std::size_t> pick(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      pick[a] = rest % axes[a].second.size();
      rest /= axes[a].second.size();
    }
    BenchReport failed;
    bool ok = true;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& [key, values] = axes[a];
      if (!label.empty()) label += ";";
      label += key + "=" + values[pick[a]];
      try {
        set_option(c, key, values[pick[a]]);
      } catch (const std::exception& e) {
        ok = false;
        failed.error = e.what();
      }
    }
    BenchReport r;
    if (ok) {
      r = run_benchmark(c);
    } else {
      r = std::move(failed);
      r.config = c;
      r.ok = false;
    }
    r.cell = label;
    out.push_back(std::move(r));
  }
  return out;
}

// Parses "key=v1,v2,..." into an axis.
inline std::pair<std::string, std::vector<std::string>> parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("axis must look like key=v1,v2");
  std::pair<std::string, std::vector<std::string>> axis{text.substr(0, eq), {}};
  std::string rest = text.substr(eq + 1);
  std::size_t pos = 0;
  while (true) {
    const auto comma = rest.find(',', pos);
    const std::string v = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (v.empty()) throw ConfigError("empty value in axis '" + text + "'");
    axis.second.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return axis;
}

}  // namespace partape::bench

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

// partape: primal solve, adjoint solve and benchmark runs of the
// finite-volume model problem.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "partape/bench/config.hpp"
#include "partape/bench/report.hpp"
#include "partape/bench/run.hpp"

namespace {

using partape::bench::BenchConfig;

struct Flag {
  const char* name;  // command-line spelling
  const char* key;   // configuration key
  const char* help;
};

constexpr Flag kFlags[] = {
    {"--mesh", "mesh", "mesh file (points/edges/marker sections)"},
    {"--edge-color-group-size", "edge_color_group_size", "edges per color group"},
    {"--edge-coloring-relax", "edge_coloring_relax", "on|off: shrink groups until efficient"},
    {"--loop-strategy", "loop_strategy", "coloring|reduction|auto"},
    {"--cfl", "cfl", "pseudo-time CFL number"},
    {"--nu", "nu", "diffusion coefficient"},
    {"--primal-tol", "primal_tol", "relative residual reduction of the primal solve"},
    {"--primal-max-iters", "primal_max_iters", "primal iteration limit"},
    {"--adjoint-mode", "adjoint_mode", "fixed-point|gmres"},
    {"--adjoint-iters", "adjoint_iters", "adjoint iterations (fixed point) or limit (gmres)"},
    {"--gmres-restart", "gmres_restart", "GMRES restart length of the adjoint solve"},
    {"--adjoint-tol", "adjoint_tol", "adjoint convergence tolerance, 0 runs all iterations"},
    {"--scheme", "scheme", "linear|reuse"},
    {"--preacc", "preacc", "on|off|hybrid"},
    {"--threads", "threads", "team size"},
    {"--shared-read-opt", "shared_read_opt", "on|off: non-atomic reverse sweep on colored loops"},
    {"--adjoint-vector-opt", "adjoint_vector_opt", "on|off: bracketed adjoint vector access"},
    {"--reps", "reps", "measured repetitions"},
    {"--warmup", "warmup", "discarded warm-up runs"},
    {"--seed", "seed", "RNG seed"},
};

struct Options {
  std::string config;
  std::vector<std::string> grid;
  std::map<std::string, std::string> values;  // flag name -> text
  std::string report;
  std::string out;
  std::vector<std::string> axes;
};

void add_common(CLI::App* app, Options& o, bool with_report) {
  app->add_option("--config", o.config, "key = value file; flags override it");
  app->add_option("--grid", o.grid, "generated grid with NX x NY cells")->expected(2);
  for (const Flag& f : kFlags) {
    app->add_option_function<std::string>(
        f.name, [&o, name = f.name](const std::string& v) { o.values[name] = v; }, f.help);
  }
  if (with_report) {
    app->add_option("--report", o.report, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--out", o.out, "report file, stdout if omitted");
  }
}

BenchConfig build_config(const Options& o) {
  BenchConfig c = partape::bench::default_config();
  if (!o.config.empty()) partape::bench::load_config(c, o.config);
  if (!o.grid.empty()) partape::bench::set_option(c, "grid", o.grid[0] + " " + o.grid[1]);
  for (const Flag& f : kFlags) {
    const auto it = o.values.find(f.name);
    if (it != o.values.end()) partape::bench::set_option(c, f.key, it->second);
  }
  c.validate();
  return c;
}

void print_summary(const std::vector<std::pair<std::string, nlohmann::ordered_json>>& rows,
                   const std::string& format) {
  if (format == "json") {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : rows) j[k] = v;
    std::cout << j.dump(2) << "\n";
    return;
  }
  for (const auto& [k, v] : rows) {
    std::cout << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
  }
}

int run_primal(const Options& o) {
  const BenchConfig c = build_config(o);
  partape::bench::apply_runtime(c);
  const auto m = partape::bench::build_mesh(c);
  partape::fvm::FvmSolver solver(m, c.physics, c.parallel, c.linear);
  auto u = solver.initial_state();
  const auto res = solver.primal_solve(u, c.primal_tol, c.primal_max_iters);
  const double final_norm = res.residual_history.empty() ? 0.0 : res.residual_history.back();
  print_summary({{"mesh", c.mesh_label()},
                 {"points", m.num_points()},
                 {"edges", m.num_edges()},
                 {"loop_plan", solver.plan().colored ? "coloring" : "reduction"},
                 {"group_size", solver.plan().group_size},
                 {"iterations", res.iterations},
                 {"converged", res.converged},
                 {"initial_residual", res.reference_norm},
                 {"final_residual", final_norm},
                 {"objective", solver.objective(u).value()}},
                o.report);
  return res.converged ? 0 : 3;
}

int run_adjoint(const Options& o) {
  BenchConfig c = build_config(o);
  c.reps = 1;
  c.warmup = 0;
  const auto r = partape::bench::run_benchmark(c);
  if (!r.ok) {
    std::cerr << "partape: " << r.error << "\n";
    return 1;
  }
  print_summary({{"mesh", c.mesh_label()},
                 {"adjoint_mode", partape::adjoint::to_string(c.adjoint.mode)},
                 {"primal_iterations", r.primal_iterations},
                 {"adjoint_iterations", r.adjoint_iterations},
                 {"adjoint_residual", r.adjoint_residual},
                 {"adjoint_converged", r.adjoint_converged},
                 {"objective", r.objective},
                 {"source_sensitivity", r.source_sensitivity},
                 {"gradient_checksum", r.gradient_checksum},
                 {"tape_statements", r.tape.statements},
                 {"tape_bytes", r.tape.bytes}},
                o.report);
  return r.adjoint_converged ? 0 : 3;
}

int emit(const std::vector<partape::bench::BenchReport>& reports, const Options& o) {
  const auto format = partape::bench::parse_report_format(o.report.empty() ? "csv" : o.report);
  partape::bench::emit_report(reports, format, o.out);
  int failed = 0;
  for (const auto& r : reports) {
    if (r.ok) continue;
    ++failed;
    std::cerr << "partape: " << (r.cell.empty() ? "run" : r.cell) << " failed: " << r.error << "\n";
  }
  return failed == 0 ? 0 : 2;
}

int run_bench(const Options& o) { return emit({partape::bench::run_benchmark(build_config(o))}, o); }

int run_matrix(const Options& o) {
  const BenchConfig c = build_config(o);
  partape::bench::Axes axes;
  for (const auto& a : o.axes) axes.push_back(partape::bench::parse_axis(a));
  return emit(partape::bench::run_matrix(c, axes), o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partape: parallel tape-based adjoints of a finite-volume model problem"};
  app.require_subcommand(1);
  Options o;
  auto* primal = app.add_subcommand("primal", "solve the primal problem");
  auto* adjoint = app.add_subcommand("adjoint", "run one primal and adjoint solve");
  auto* bench = app.add_subcommand("bench", "time the adjoint pipeline");
  auto* matrix = app.add_subcommand("matrix", "bench over a configuration product");
  for (auto* s : {primal, adjoint, bench, matrix}) add_common(s, o, true);
  primal->get_option("--out")->description("unused by primal");
  adjoint->get_option("--out")->description("unused by adjoint");
  matrix->add_option("--axis", o.axes, "key=v1,v2,... (repeatable)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*primal) return run_primal(o);
    if (*adjoint) return run_adjoint(o);
    if (*bench) return run_bench(o);
    return run_matrix(o);
  } catch (const std::exception& e) {
    std::cerr << "partape: " << e.what() << "\n";
    return 1;
  }
}

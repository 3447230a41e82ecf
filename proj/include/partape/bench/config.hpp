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

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "partape/ad.hpp"
#include "partape/adjoint/driver.hpp"
#include "partape/errors.hpp"
#include "partape/fvm/config.hpp"
#include "partape/linsolve/gmres.hpp"

namespace partape::bench {

// Everything one benchmark run depends on. Fields are addressed by the same
// keys in config files, on the command line and in matrix axes.
struct BenchConfig {
  // mesh
  std::string mesh_path;  // empty: generated grid
  int nx = 16;
  int ny = 16;
  double lx = 1.0;
  double ly = 1.0;

  // AD
  Scheme scheme = Scheme::Linear;
  PreaccMode preacc = PreaccMode::On;
  bool adjoint_vector_opt = true;

  fvm::PhysicsConfig physics;
  fvm::ParallelConfig parallel;
  linsolve::SolverSettings linear;

  double primal_tol = 1e-10;
  int primal_max_iters = 1000;

  adjoint::AdjointSettings adjoint;

  int reps = 5;
  int warmup = 1;
  std::uint64_t seed = 1;

  std::string mesh_label() const {
    if (!mesh_path.empty()) return mesh_path;
    return "grid:" + std::to_string(nx) + "x" + std::to_string(ny);
  }

  void validate() const {
    if (reps < 1) throw ConfigError("reps must be at least 1");
    if (warmup < 0) throw ConfigError("warmup must not be negative");
    if (mesh_path.empty() && (nx < 2 || ny < 2)) throw ConfigError("grid needs at least 2x2 cells");
    if (parallel.threads < 1 || parallel.threads > kMaxThreads) {
      throw ConfigError("threads must be in [1, " + std::to_string(kMaxThreads) + "]");
    }
    if (adjoint.iterations < 1) throw ConfigError("adjoint_iters must be at least 1");
    if (adjoint.restart < 1) throw ConfigError("gmres_restart must be at least 1");
    physics.validate();
  }
};

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected on/off, got '" + v + "'");
}

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  T out{};
  if (!(ss >> out) || !(ss >> std::ws).eof()) {
    throw ConfigError(key + ": cannot parse '" + v + "'");
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Sets one field from its textual value.
inline void set_option(BenchConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  const std::string& v = value;
  if (key == "mesh") {
    c.mesh_path = v;
  } else if (key == "grid") {
    std::istringstream ss(v);
    int nx = 0, ny = 0;
    char sep = 0;
    if (v.find('x') != std::string::npos) {
      ss >> nx >> sep >> ny;
    } else {
      ss >> nx >> ny;
    }
    if (!ss || nx < 2 || ny < 2) throw ConfigError("grid: expected 'NX NY' with NX, NY >= 2");
    c.nx = nx;
    c.ny = ny;
    c.mesh_path.clear();
  } else if (key == "lx") {
    c.lx = parse_number<double>(key, v);
  } else if (key == "ly") {
    c.ly = parse_number<double>(key, v);
  } else if (key == "scheme") {
    if (v == "linear") {
      c.scheme = Scheme::Linear;
    } else if (v == "reuse") {
      c.scheme = Scheme::Reuse;
    } else {
      throw ConfigError("scheme: expected linear or reuse, got '" + v + "'");
    }
  } else if (key == "preacc") {
    if (v == "on") {
      c.preacc = PreaccMode::On;
    } else if (v == "off") {
      c.preacc = PreaccMode::Off;
    } else if (v == "hybrid") {
      c.preacc = PreaccMode::Hybrid;
    } else {
      throw ConfigError("preacc: expected on, off or hybrid, got '" + v + "'");
    }
  } else if (key == "shared_read_opt") {
    c.parallel.no_shared_reading = parse_bool(key, v);
  } else if (key == "adjoint_vector_opt") {
    c.adjoint_vector_opt = parse_bool(key, v);
  } else if (key == "threads") {
    c.parallel.threads = parse_number<int>(key, v);
  } else if (key == "loop_strategy") {
    c.parallel.strategy = fvm::parse_loop_strategy(v);
  } else if (key == "edge_color_group_size") {
    const auto g = parse_number<long long>(key, v);
    if (g < 1) throw ConfigError("edge_color_group_size must be at least 1");
    c.parallel.group_size = static_cast<std::size_t>(g);
  } else if (key == "edge_coloring_relax") {
    c.parallel.relax = parse_bool(key, v);
  } else if (key == "efficiency_threshold") {
    c.parallel.efficiency_threshold = parse_number<double>(key, v);
  } else if (key == "max_colors") {
    c.parallel.max_colors = parse_number<int>(key, v);
  } else if (key == "cfl") {
    c.physics.cfl = parse_number<double>(key, v);
  } else if (key == "nu") {
    c.physics.nu = parse_number<double>(key, v);
  } else if (key == "source") {
    c.physics.source = parse_number<double>(key, v);
  } else if (key == "velocity_x") {
    c.physics.ax = parse_number<double>(key, v);
  } else if (key == "velocity_y") {
    c.physics.ay = parse_number<double>(key, v);
  } else if (key == "boundary_penalty") {
    c.physics.boundary_penalty = parse_number<double>(key, v);
  } else if (key == "default_boundary") {
    c.physics.default_boundary = parse_number<double>(key, v);
  } else if (key == "initial_value") {
    c.physics.initial_value = parse_number<double>(key, v);
  } else if (key == "objective_marker") {
    c.physics.objective_marker = v;
  } else if (key.rfind("boundary.", 0) == 0 && key.size() > 9) {
    c.physics.boundary_values[key.substr(9)] = parse_number<double>(key, v);
  } else if (key == "primal_tol") {
    c.primal_tol = parse_number<double>(key, v);
  } else if (key == "primal_max_iters") {
    c.primal_max_iters = parse_number<int>(key, v);
  } else if (key == "adjoint_mode") {
    c.adjoint.mode = adjoint::parse_mode(v);
  } else if (key == "adjoint_iters") {
    c.adjoint.iterations = parse_number<int>(key, v);
  } else if (key == "adjoint_tol") {
    c.adjoint.tol = parse_number<double>(key, v);
  } else if (key == "gmres_restart") {
    c.adjoint.restart = parse_number<int>(key, v);
  } else if (key == "linsolve.tol") {
    c.linear.tol = parse_number<double>(key, v);
  } else if (key == "linsolve.reverse_tol") {
    c.linear.reverse_tol = parse_number<double>(key, v);
  } else if (key == "linsolve.max_iters") {
    c.linear.max_iters = parse_number<int>(key, v);
  } else if (key == "linsolve.restart") {
    c.linear.restart = parse_number<int>(key, v);
  } else if (key == "reps") {
    c.reps = parse_number<int>(key, v);
  } else if (key == "warmup") {
    c.warmup = parse_number<int>(key, v);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

// Lines of `key = value`; '#' starts a comment.
inline void apply_config(BenchConfig& c, std::istream& is) {
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", n);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_option(c, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), n);
    }
  }
}

inline void load_config(BenchConfig& c, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  apply_config(c, is);
}

// Defaults plus the PARTAPE_THREADS environment variable.
inline BenchConfig default_config() {
  BenchConfig c;
  if (const char* t = std::getenv("PARTAPE_THREADS")) {
    set_option(c, "threads", t);
  }
  return c;
}

// The fields that identify a configuration in reports.
inline std::vector<std::pair<std::string, std::string>> describe(const BenchConfig& c) {
  auto num = [](double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
  };
  return {
      {"mesh", c.mesh_label()},
      {"scheme", to_string(c.scheme)},
      {"preacc", to_string(c.preacc)},
      {"shared_read_opt", c.parallel.no_shared_reading ? "on" : "off"},
      {"adjoint_vector_opt", c.adjoint_vector_opt ? "on" : "off"},
      {"threads", std::to_string(c.parallel.threads)},
      {"loop_strategy", fvm::to_string(c.parallel.strategy)},
      {"edge_color_group_size", std::to_string(c.parallel.group_size)},
      {"edge_coloring_relax", c.parallel.relax ? "on" : "off"},
      {"cfl", num(c.physics.cfl)},
      {"nu", num(c.physics.nu)},
      {"adjoint_mode", adjoint::to_string(c.adjoint.mode)},
      {"adjoint_iters", std::to_string(c.adjoint.iterations)},
      {"adjoint_tol", num(c.adjoint.tol)},
      {"reps", std::to_string(c.reps)},
      {"warmup", std::to_string(c.warmup)},
  };
}

}  // namespace partape::bench

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

#include <map>
#include <string>

#include "partape/errors.hpp"
#include "partape/mesh/coloring.hpp"
#include "partape/mesh/mesh.hpp"

namespace partape::fvm {

// Steady scalar convection-diffusion with constant velocity (ax, ay),
// diffusivity nu, a uniform source and weak Dirichlet values per boundary
// marker. Faces on unlisted markers use default_boundary.
struct PhysicsConfig {
  double ax = 1.0;
  double ay = 0.3;
  double nu = 0.05;
  double cfl = 50.0;
  double boundary_penalty = 2.0;  // diffusive coupling to the ghost value
  std::map<std::string, double> boundary_values{{"left", 1.0}};
  double default_boundary = 0.0;
  double source = 1.0;
  double initial_value = 0.0;
  std::string objective_marker = "right";

  void validate() const {
    if (!(nu > 0.0)) throw ConfigError("diffusivity nu must be positive");
    if (!(cfl > 0.0)) throw ConfigError("cfl must be positive");
    if (!(boundary_penalty > 0.0)) throw ConfigError("boundary_penalty must be positive");
  }

  double boundary_value(const std::string& marker) const {
    const auto it = boundary_values.find(marker);
    return it == boundary_values.end() ? default_boundary : it->second;
  }
};

enum class LoopStrategy { Coloring, Reduction, Auto };

inline const char* to_string(LoopStrategy s) {
  switch (s) {
    case LoopStrategy::Coloring: return "coloring";
    case LoopStrategy::Reduction: return "reduction";
    case LoopStrategy::Auto: return "auto";
  }
  return "?";
}

inline LoopStrategy parse_loop_strategy(const std::string& s) {
  if (s == "coloring") return LoopStrategy::Coloring;
  if (s == "reduction") return LoopStrategy::Reduction;
  if (s == "auto") return LoopStrategy::Auto;
  throw ConfigError("unknown loop strategy '" + s + "'");
}

struct ParallelConfig {
  int threads = 1;
  LoopStrategy strategy = LoopStrategy::Auto;
  std::size_t group_size = 512;
  bool relax = true;  // adapt the group size by bisection
  double efficiency_threshold = 0.875;
  int max_colors = 255;
  bool no_shared_reading = true;  // declare exclusive reads in colored edge loops
};

// How the edge loop of the residual is parallelized.
struct LoopPlan {
  bool colored = false;
  std::size_t group_size = 0;
  double efficiency = 0.0;
  int probes = 0;
  mesh::Coloring coloring;
  mesh::GatherStructure gather;
  std::string note;
};

// coloring: adaptive size when relaxing (group size 1 ignoring efficiency if
//   nothing is admissible), the configured size otherwise; failure is an error.
// auto: as coloring, but falls back to reductions instead of failing, and
//   without relaxing also when the efficiency is below the threshold.
// reduction: always reductions.
inline LoopPlan plan_loops(const mesh::Mesh& m, const ParallelConfig& pc) {
  if (pc.threads < 1) throw ConfigError("thread count must be at least 1");
  if (pc.group_size < 1) throw ConfigError("edge color group size must be at least 1");
  LoopPlan plan;
  plan.gather = mesh::reduction_gather_structure(m);
  if (pc.strategy == LoopStrategy::Reduction) {
    plan.note = "reduction requested";
    return plan;
  }
  const bool fallback_ok = pc.strategy == LoopStrategy::Auto;
  auto use = [&](mesh::Coloring c) {
    plan.colored = true;
    plan.group_size = c.group_size;
    plan.efficiency = mesh::coloring_efficiency(c, pc.threads);
    plan.coloring = std::move(c);
  };
  if (pc.relax) {
    auto a = mesh::adaptive_group_size(m, pc.group_size, pc.threads, pc.efficiency_threshold,
                                       pc.max_colors);
    plan.probes = a.probes;
    if (!a.fallback) {
      use(std::move(a.coloring));
      plan.note = "adaptive group size";
      return plan;
    }
    if (fallback_ok) {
      plan.note = "no admissible group size, using reductions";
      return plan;
    }
    auto c = mesh::color_edges(m, 1, pc.max_colors);
    if (!c.ok) throw ConfigError("edge coloring failed even with group size 1: " + c.reason);
    use(std::move(c));
    plan.note = "no admissible group size, using group size 1";
    return plan;
  }
  auto c = mesh::color_edges(m, pc.group_size, pc.max_colors);
  if (!c.ok) {
    if (fallback_ok) {
      plan.note = "coloring failed, using reductions: " + c.reason;
      return plan;
    }
    throw ConfigError("edge coloring failed: " + c.reason);
  }
  const double eff = mesh::coloring_efficiency(c, pc.threads);
  if (fallback_ok && eff < pc.efficiency_threshold) {
    plan.note = "coloring efficiency below threshold, using reductions";
    return plan;
  }
  use(std::move(c));
  plan.note = "fixed group size";
  return plan;
}

}  // namespace partape::fvm

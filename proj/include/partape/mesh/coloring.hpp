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

#include <bitset>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "partape/errors.hpp"
#include "partape/mesh/mesh.hpp"

namespace partape::mesh {

inline constexpr int kMaxColorLimit = 256;

struct EdgeGroup {
  int color;
  std::size_t begin;  // edge range [begin, end)
  std::size_t end;
};

// Groups are contiguous runs of group_size edges (the last may be shorter).
// Within one color no two groups share a point, so each group can be handed
// to one thread without write conflicts.
struct Coloring {
  bool ok = false;
  std::string reason;
  std::size_t group_size = 0;
  std::size_t num_edges = 0;
  int colors = 0;
  std::vector<EdgeGroup> groups;
  std::vector<std::vector<std::size_t>> color_groups;  // group indices per color
};

// Greedy first-fit coloring of edge groups. Returns ok == false when more
// than max_colors colors would be needed.
inline Coloring color_edges(const std::vector<Edge>& edges, std::size_t num_points,
                            std::size_t group_size, int max_colors = 255) {
  if (group_size < 1) throw ContractViolation("edge color group size must be at least 1");
  if (max_colors < 1 || max_colors > kMaxColorLimit) {
    throw ContractViolation("max_colors must be in [1, " + std::to_string(kMaxColorLimit) + "]");
  }
  Coloring c;
  c.group_size = group_size;
  c.num_edges = edges.size();
  std::vector<std::bitset<kMaxColorLimit>> used(num_points);
  for (std::size_t begin = 0; begin < edges.size(); begin += group_size) {
    const std::size_t end = std::min(edges.size(), begin + group_size);
    std::bitset<kMaxColorLimit> forbidden;
    for (std::size_t e = begin; e < end; ++e) {
      forbidden |= used[static_cast<std::size_t>(edges[e][0])];
      forbidden |= used[static_cast<std::size_t>(edges[e][1])];
    }
    int color = 0;
    while (color < max_colors && forbidden.test(static_cast<std::size_t>(color))) ++color;
    if (color == max_colors) {
      c.ok = false;
      c.reason = "more than " + std::to_string(max_colors) + " colors needed";
      c.groups.clear();
      c.color_groups.clear();
      c.colors = 0;
      return c;
    }
    for (std::size_t e = begin; e < end; ++e) {
      used[static_cast<std::size_t>(edges[e][0])].set(static_cast<std::size_t>(color));
      used[static_cast<std::size_t>(edges[e][1])].set(static_cast<std::size_t>(color));
    }
    if (color >= c.colors) {
      c.colors = color + 1;
      c.color_groups.resize(static_cast<std::size_t>(c.colors));
    }
    c.color_groups[static_cast<std::size_t>(color)].push_back(c.groups.size());
    c.groups.push_back({color, begin, end});
  }
  c.ok = true;
  return c;
}

inline Coloring color_edges(const Mesh& m, std::size_t group_size, int max_colors = 255) {
  return color_edges(m.edges, m.num_points(), group_size, max_colors);
}

// Useful work over busy slots when every group occupies one thread slot of
// group_size edges and each color is processed in ceil(groups / threads)
// rounds.
inline double coloring_efficiency(const Coloring& c, int num_threads) {
  if (num_threads < 1) throw ContractViolation("num_threads must be at least 1");
  if (!c.ok || c.num_edges == 0) return 0.0;
  const auto t = static_cast<std::size_t>(num_threads);
  double slots = 0.0;
  for (const auto& groups : c.color_groups) {
    const std::size_t rounds = (groups.size() + t - 1) / t;
    slots += static_cast<double>(t * c.group_size * rounds);
  }
  return static_cast<double>(c.num_edges) / slots;
}

// Largest s in [1, max_size] with admissible(s), assuming admissibility is
// monotone (admissible sizes form a prefix). The upper bound is probed first;
// results are memoized. Returns 0 if no size is admissible.
inline std::size_t bisect_largest_admissible(std::size_t max_size,
                                             const std::function<bool(std::size_t)>& admissible,
                                             int* probes = nullptr) {
  if (max_size < 1) throw ContractViolation("max group size must be at least 1");
  std::map<std::size_t, bool> memo;
  int count = 0;
  auto probe = [&](std::size_t s) {
    auto it = memo.find(s);
    if (it != memo.end()) return it->second;
    ++count;
    return memo[s] = admissible(s);
  };
  std::size_t result = 0;
  if (probe(max_size)) {
    result = max_size;
  } else {
    std::size_t lo = 0, hi = max_size;  // lo admissible (0 = none), hi not
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (probe(mid)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    result = lo;
  }
  if (probes != nullptr) *probes = count;
  return result;
}

struct AdaptiveColoring {
  bool fallback = true;  // no admissible size: use the reduction strategy
  std::size_t group_size = 0;
  double efficiency = 0.0;
  int probes = 0;
  Coloring coloring;
};

// Largest group size up to max_size whose coloring succeeds with efficiency
// at least `threshold` for `num_threads` threads.
inline AdaptiveColoring adaptive_group_size(const Mesh& m, std::size_t max_size, int num_threads,
                                            double threshold = 0.875, int max_colors = 255) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ContractViolation("efficiency threshold must be in (0, 1]");
  }
  std::map<std::size_t, Coloring> tried;
  auto admissible = [&](std::size_t s) {
    Coloring c = color_edges(m, s, max_colors);
    const bool ok = c.ok && coloring_efficiency(c, num_threads) >= threshold;
    tried.emplace(s, std::move(c));
    return ok;
  };
  AdaptiveColoring out;
  const std::size_t size = bisect_largest_admissible(max_size, admissible, &out.probes);
  if (size == 0) return out;
  out.fallback = false;
  out.group_size = size;
  out.coloring = std::move(tried.at(size));
  out.efficiency = coloring_efficiency(out.coloring, num_threads);
  return out;
}

// Incident edges of one point with orientation sign (+1 tail, -1 head).
struct Incidence {
  std::size_t edge;
  int sign;
};

// Per-point incidence lists in CSR form, for edge loops that store per-edge
// results and gather them per point afterwards.
struct GatherStructure {
  std::vector<std::size_t> offsets;  // size num_points + 1
  std::vector<Incidence> entries;

  std::span<const Incidence> of(std::size_t point) const {
    return {entries.data() + offsets[point], offsets[point + 1] - offsets[point]};
  }
};

inline GatherStructure reduction_gather_structure(const Mesh& m) {
  GatherStructure g;
  g.offsets.assign(m.num_points() + 1, 0);
  for (const auto& e : m.edges) {
    ++g.offsets[static_cast<std::size_t>(e[0]) + 1];
    ++g.offsets[static_cast<std::size_t>(e[1]) + 1];
  }
  for (std::size_t p = 0; p < m.num_points(); ++p) g.offsets[p + 1] += g.offsets[p];
  g.entries.resize(g.offsets.back());
  std::vector<std::size_t> fill(g.offsets.begin(), g.offsets.end() - 1);
  for (std::size_t e = 0; e < m.num_edges(); ++e) {
    g.entries[fill[static_cast<std::size_t>(m.edges[e][0])]++] = {e, +1};
    g.entries[fill[static_cast<std::size_t>(m.edges[e][1])]++] = {e, -1};
  }
  return g;
}

}  // namespace partape::mesh

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

#include <atomic>
#include <cstddef>
#include <string>
#include <vector>

#include "partape/ad/runtime.hpp"
#include "partape/ad/tape.hpp"
#include "partape/errors.hpp"
#include "partape/parallel/team.hpp"

namespace partape {

namespace detail {

// Adjoint access through a raw pointer (caller holds a use-bracket).
struct RawAccess {
  double* adj;
  double take(Identifier id) {
    const double w = adj[id];
    adj[id] = 0.0;
    return w;
  }
  void add(Identifier id, double v) { adj[id] += v; }
  void add_atomic(Identifier id, double v) {
    std::atomic_ref<double>(adj[id]).fetch_add(v, std::memory_order_relaxed);
  }
  double get(Identifier id) const { return id == 0 ? 0.0 : adj[id]; }
  void set(Identifier id, double v) { adj[id] = v; }
};

// Adjoint access that locks and bounds-checks on every call.
struct LockedAccess {
  AdjointVector* vec;
  double take(Identifier id) {
    const double w = vec->locked_get(id);
    vec->locked_set(id, 0.0);
    return w;
  }
  void add(Identifier id, double v) { vec->locked_add(id, v); }
  void add_atomic(Identifier id, double v) { vec->locked_add(id, v); }
  double get(Identifier id) { return vec->locked_get(id); }
  void set(Identifier id, double v) { vec->locked_set(id, v); }
};

// Reverse sweep over statements [from, to) of one tape. `atomics` enables
// atomic increments for statements carrying the atomic mark. External nodes
// are handed to `on_external`; a null handler rejects them.
template <class Access, class OnExternal>
void reverse_statements(const Tape& tape, const Position& from, const Position& to,
                        Access& access, bool atomics, OnExternal&& on_external) {
  const double* partials = tape.partials();
  const Identifier* ids = tape.arg_ids();
  std::size_t arg = to.arg;
  std::size_t ext = to.external;
  Tape::LhsCursor lhs(tape, to.statement);
  for (std::size_t i = to.statement; i-- > from.statement;) {
    const std::uint8_t c = tape.count_byte(i);
    const int n = c & Tape::kCountMask;
    if (n == Tape::kExternalMarker) {
      --ext;
      on_external(tape.external(ext));
      continue;
    }
    arg -= static_cast<std::size_t>(n);
    const double w = access.take(lhs.at(i));
    if (w == 0.0) continue;
    const double* p = partials + arg;
    const Identifier* a = ids + arg;
    if (atomics && (c & Tape::kAtomicBit) != 0) {
      for (int j = 0; j < n; ++j) access.add_atomic(a[j], p[j] * w);
    } else {
      for (int j = 0; j < n; ++j) access.add(a[j], p[j] * w);
    }
  }
}

struct Segment {
  bool region = false;
  std::size_t region_id = 0;
  Position from;
  Position to;
};

inline std::vector<Segment> split_segments(Runtime& rt, const TapeSetPosition& from,
                                           const TapeSetPosition& to) {
  const Tape& master = rt.tape(0);
  const auto& events = master.events();
  std::vector<Segment> out;
  Position cursor = from.threads[0];
  const std::size_t last = to.threads[0].event;
  for (std::size_t e = from.threads[0].event; e < last; ++e) {
    const ParallelEvent& ev = events[e];
    if (ev.kind == EventKind::RegionBegin) {
      out.push_back({false, 0, cursor, ev.position});
      const auto id = static_cast<std::size_t>(ev.aux);
      std::size_t end = e + 1;
      while (end < events.size() && events[end].kind != EventKind::RegionEnd) ++end;
      if (end >= last) throw StructuralError("evaluation range splits a parallel region");
      if (id < from.regions || id >= to.regions) {
        throw StructuralError("region outside the exported region table range");
      }
      out.push_back({true, id, ev.position, events[end].position});
      cursor = events[end].position;
      e = end;
    } else if (ev.kind == EventKind::RegionEnd) {
      throw StructuralError("evaluation range starts inside a parallel region");
    }
  }
  out.push_back({false, 0, cursor, to.threads[0]});
  return out;
}

// Phase boundaries (RegionBegin, barriers, RegionEnd) of thread t in region r.
inline std::vector<Position> region_phases(Runtime& rt, std::size_t region, int t) {
  const auto& events = rt.tape(t).events();
  std::size_t e = rt.regions()[region].begin_event[static_cast<std::size_t>(t)];
  if (e >= events.size() || events[e].kind != EventKind::RegionBegin ||
      static_cast<std::size_t>(events[e].aux) != region) {
    throw StructuralError("thread " + std::to_string(t) + " has no record of region " +
                          std::to_string(region));
  }
  std::vector<Position> phases{events[e].position};
  for (++e; e < events.size(); ++e) {
    const ParallelEvent& ev = events[e];
    if (ev.kind == EventKind::Barrier) phases.push_back(ev.position);
    if (ev.kind == EventKind::RegionEnd) {
      phases.push_back(ev.position);
      return phases;
    }
  }
  throw StructuralError("region " + std::to_string(region) + " is not closed on thread " +
                        std::to_string(t));
}

}  // namespace detail

// Reverse evaluation of everything recorded between two exported positions.
//
// Serial segments are evaluated by the calling thread without atomics.
// Parallel regions are replayed backwards phase by phase (phases are the
// stretches between barriers), each phase followed by a team barrier, with
// atomic increments where the statement marks request them. `workers` is
// either 0 (reuse each region's recorded team size) or 1 (evaluate every
// region serially, used as an oracle).
inline void parallel_evaluate(const TapeSetPosition& from, const TapeSetPosition& to,
                              int workers = 0) {
  Runtime& rt = Runtime::get();
  if (workers != 0 && workers != 1) {
    throw ContractViolation("parallel_evaluate supports workers = 0 (recorded) or 1");
  }
  AdjointVector& vec = rt.adjoints();
  const auto needed = static_cast<std::size_t>(rt.ids().max_identifier()) + 1;
  if (vec.capacity() < needed) {
    if (rt.adjoint_vector_optimized()) {
      throw ContractViolation("adjoint vector too small for evaluation: capacity " +
                              std::to_string(vec.capacity()) + ", need " +
                              std::to_string(needed));
    }
    vec.resize(needed);
  }

  const auto segments = detail::split_segments(rt, from, to);

  vec.begin_use();
  struct EndUse {
    AdjointVector& v;
    ~EndUse() { v.end_use(); }
  } end_use{vec};

  detail::RawAccess raw{vec.data()};
  const Team solo;

  for (auto s = segments.rbegin(); s != segments.rend(); ++s) {
    if (!s->region) {
      detail::reverse_statements(rt.tape(0), s->from, s->to, raw, false,
                                 [&](ExternalFunction& f) { f.reverse(solo, vec); });
      continue;
    }
    const int team_size = rt.regions()[s->region_id].team_size;
    std::vector<std::vector<Position>> phases(static_cast<std::size_t>(team_size));
    for (int t = 0; t < team_size; ++t) {
      phases[static_cast<std::size_t>(t)] = detail::region_phases(rt, s->region_id, t);
      if (phases[static_cast<std::size_t>(t)].size() != phases[0].size()) {
        throw StructuralError("threads disagree on the barrier count of region " +
                              std::to_string(s->region_id));
      }
    }
    const std::size_t num_phases = phases[0].size() - 1;

    if (workers == 1 || team_size == 1) {
      for (std::size_t k = num_phases; k-- > 0;) {
        for (int t = 0; t < team_size; ++t) {
          const auto& ph = phases[static_cast<std::size_t>(t)];
          detail::reverse_statements(rt.tape(t), ph[k], ph[k + 1], raw, false,
                                     [&](ExternalFunction& f) {
                                       if (t == 0) f.reverse(solo, vec);
                                     });
        }
      }
      continue;
    }

    ThreadPool::instance().run(team_size, [&](Team& team) {
      detail::RawAccess access{raw.adj};
      const auto& ph = phases[static_cast<std::size_t>(team.index())];
      const Tape& tape = rt.tape(team.index());
      for (std::size_t k = num_phases; k-- > 0;) {
        detail::reverse_statements(tape, ph[k], ph[k + 1], access, true,
                                   [&](ExternalFunction& f) { f.reverse(team, vec); });
        team.sync();
      }
    });
  }
}

// Reverse evaluation of the whole recording.
inline void evaluate() {
  Runtime& rt = Runtime::get();
  parallel_evaluate(TapeSetPosition{}, rt.position(), 0);
}

inline void evaluate(const TapeSetPosition& from, const TapeSetPosition& to) {
  parallel_evaluate(from, to, 0);
}

}  // namespace partape

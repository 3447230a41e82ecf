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

#include <functional>
#include <string>

#include "partape/ad/runtime.hpp"
#include "partape/errors.hpp"
#include "partape/parallel/team.hpp"

namespace partape {

// Runs `body` on a team of `num_threads` threads, each recording on its own
// tape. Recording is active on every member iff it is active on the caller.
// Only one level of parallel regions is supported.
inline void parallel_region(int num_threads, const std::function<void(const Team&)>& body) {
  Runtime& rt = Runtime::get();
  ThreadContext& caller = rt.thread_context();
  if (caller.in_region) throw UnsupportedFeature("nested parallel regions are not supported");
  if (caller.preacc.open) {
    throw ContractViolation("preaccumulation sessions must not span parallel regions");
  }
  const bool recording = rt.tape().active();
  const int pause = caller.pause_count;
  std::size_t region_id = 0;
  if (recording) {
    region_id = rt.regions().size();
    rt.regions().push_back(RegionRecord{num_threads, {}});
  }

  ThreadPool::instance().run(num_threads, [&](Team& team) {
    const int t = team.index();
    Tape& tape = rt.tape(t);
    ThreadContext& ctx = rt.thread_context(t);
    ctx.in_region = true;
    ctx.team_size = team.size();
    ctx.no_shared_reading = false;
    ctx.master_depth = 0;
    ctx.pause_count = pause;
    tape.set_active(recording);
    if (recording) {
      rt.regions()[region_id].begin_event[static_cast<std::size_t>(t)] = tape.events().size();
      tape.push_event(EventKind::RegionBegin, t, static_cast<std::int64_t>(region_id));
    }
    tape.set_atomic_marking(true);

    struct Leave {
      Tape& tape;
      ThreadContext& ctx;
      int t;
      int pause;
      ~Leave() {
        ctx.pause_count = pause;
        tape.set_atomic_marking(false);
        ctx.in_region = false;
        ctx.team_size = 1;
        ctx.no_shared_reading = false;
        if (t != 0) tape.set_active(false);
      }
    } leave{tape, ctx, t, pause};

    body(team);

    if (ctx.preacc.open) {
      throw ContractViolation("preaccumulation session left open at region end");
    }
    if (ctx.pause_count != pause) {
      throw ContractViolation("unbalanced pause/resume of preaccumulation in parallel region");
    }
    if (recording) tape.push_event(EventKind::RegionEnd, t, static_cast<std::int64_t>(region_id));
  });
}

inline bool in_parallel_region() { return Runtime::get().thread_context().in_region; }

// Team-wide synchronization point, mirrored in the reverse sweep.
inline void barrier(const Team& team) {
  Runtime& rt = Runtime::get();
  Tape& tape = rt.tape();
  if (tape.active() && rt.thread_context().in_region) {
    tape.push_event(EventKind::Barrier, team.index(), 0);
  }
  team.sync();
}

// Statically scheduled loop: member t processes [t*n/T, (t+1)*n/T).
template <class Body>
void worksharing_for(const Team& team, std::size_t n, Body&& body, bool nowait = false) {
  Runtime& rt = Runtime::get();
  if (!rt.thread_context().in_region) {
    throw ContractViolation("worksharing_for called outside a parallel region");
  }
  Tape& tape = rt.tape();
  const auto [begin, end] = team.chunk(n);
  if (tape.active()) {
    tape.push_event(EventKind::ChunkBegin, team.index(), static_cast<std::int64_t>(begin));
  }
  for (std::size_t i = begin; i < end; ++i) body(i);
  if (tape.active()) {
    tape.push_event(EventKind::ChunkEnd, team.index(), static_cast<std::int64_t>(end));
  }
  if (!nowait) barrier(team);
}

// Barrier, body on the master only, barrier. Statements recorded in the body
// are evaluated without atomics.
template <class Body>
void master_section(const Team& team, Body&& body) {
  barrier(team);
  if (team.master()) {
    Runtime& rt = Runtime::get();
    ThreadContext& ctx = rt.thread_context();
    Tape& tape = rt.tape();
    const bool marking = tape.atomic_marking();
    ++ctx.master_depth;
    tape.set_atomic_marking(false);
    try {
      body();
    } catch (...) {
      --ctx.master_depth;
      tape.set_atomic_marking(marking);
      throw;
    }
    --ctx.master_depth;
    tape.set_atomic_marking(marking);
  }
  barrier(team);
}

// Declares (enabled) or revokes the exclusive-read property for subsequently
// recorded statements of the calling thread. Call on every member of the team.
// Has no effect on serial statements, which are never evaluated atomically.
inline void set_no_shared_reading(bool enabled) {
  Runtime& rt = Runtime::get();
  ThreadContext& ctx = rt.thread_context();
  Tape& tape = rt.tape();
  ctx.no_shared_reading = enabled;
  if (!ctx.in_region) return;
  tape.set_atomic_marking(!enabled && ctx.master_depth == 0);
  if (tape.active()) {
    tape.push_event(EventKind::ModeSwitch, this_thread_index(), enabled ? 0 : 1);
  }
}

}  // namespace partape

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
#include <functional>
#include <initializer_list>
#include <mutex>
#include <span>
#include <vector>

#include "partape/ad/active_scalar.hpp"
#include "partape/ad/evaluate.hpp"
#include "partape/ad/runtime.hpp"
#include "partape/errors.hpp"

namespace partape {

// Handle of a local preaccumulation. Inert sessions (preaccumulation off,
// paused, disabled by hybrid mode, or no active recording) turn finish into
// a no-op.
class PreaccSession {
 public:
  bool inert() const { return inert_; }
  std::size_t input_count() const { return inputs_; }

 private:
  friend PreaccSession preacc_start(std::span<const ActiveScalar* const>, PreaccKind);
  bool inert_ = true;
  std::size_t inputs_ = 0;
};

// Instrumentation points inside preacc_finish, used by tests that need to
// interleave two sessions deterministically.
enum class PreaccStage { AfterEvaluate, AfterRead };
inline thread_local std::function<void(PreaccStage)> preacc_debug_hook;

namespace detail {
inline std::mutex& hazardous_preacc_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline PreaccSession preacc_start(std::span<const ActiveScalar* const> inputs,
                                  PreaccKind kind = PreaccKind::ParallelSafe) {
  Runtime& rt = Runtime::get();
  ThreadContext& ctx = rt.thread_context();
  Tape& tape = rt.tape();
  if (ctx.preacc.open) {
    throw ContractViolation("a preaccumulation session is already open on this thread");
  }
  const PreaccMode mode = rt.preacc_mode();
  const bool inert = !tape.active() || mode == PreaccMode::Off ||
                     (mode == PreaccMode::Hybrid && kind == PreaccKind::Hazardous) ||
                     ctx.pause_count > 0;
  PreaccState& st = ctx.preacc;
  st.inputs.clear();
  if (!inert) {
    for (const ActiveScalar* in : inputs) {
      if (in->identifier() == 0) {
        throw ContractViolation("passive value registered as preaccumulation input");
      }
      if (std::find(st.inputs.begin(), st.inputs.end(), in->identifier()) == st.inputs.end()) {
        st.inputs.push_back(in->identifier());
      }
    }
  }
  st.open = true;
  st.inert = inert;
  st.kind = kind;
  st.start = tape.position();

  PreaccSession s;
  s.inert_ = inert;
  s.inputs_ = st.inputs.size();
  return s;
}

// Inputs must be lvalues: rvalue registration is rejected at compile time
// because std::cref of a temporary is deleted.
inline PreaccSession preacc_start(
    std::initializer_list<std::reference_wrapper<const ActiveScalar>> inputs,
    PreaccKind kind = PreaccKind::ParallelSafe) {
  std::vector<const ActiveScalar*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& r : inputs) ptrs.push_back(&r.get());
  return preacc_start(std::span<const ActiveScalar* const>(ptrs), kind);
}

namespace detail {

template <class Access>
void preacc_jacobian(const Tape& tape, const PreaccState& st, const Position& end,
                     const std::vector<Identifier>& outputs, Access& access,
                     std::vector<double>& jacobian) {
  const std::size_t n_in = st.inputs.size();
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    access.set(outputs[k], 1.0);
    reverse_statements(tape, st.start, end, access, false, [](ExternalFunction&) {
      throw UnsupportedFeature("external functions inside preaccumulation sessions");
    });
    if (preacc_debug_hook) preacc_debug_hook(PreaccStage::AfterEvaluate);
    for (std::size_t j = 0; j < n_in; ++j) jacobian[k * n_in + j] = access.get(st.inputs[j]);
    if (preacc_debug_hook) preacc_debug_hook(PreaccStage::AfterRead);
    for (std::size_t j = 0; j < n_in; ++j) access.set(st.inputs[j], 0.0);
  }
}

}  // namespace detail

// Replaces the statements recorded since preacc_start by one statement per
// active output whose arguments are all session inputs, with partials taken
// from the dense local Jacobian (zeros included).
//
// The Jacobian is obtained by one local reverse sweep per output over the
// thread's own tape segment, using the shared adjoint vector: one capacity
// check and one use-bracket for the whole session.
inline void preacc_finish(PreaccSession& session, std::span<ActiveScalar* const> outputs) {
  Runtime& rt = Runtime::get();
  ThreadContext& ctx = rt.thread_context();
  Tape& tape = rt.tape();
  PreaccState& st = ctx.preacc;
  if (!st.open) throw ContractViolation("preacc_finish without an open session");
  st.open = false;
  if (st.inert || session.inert()) return;

  const Position end = tape.position();
  if (end.event != st.start.event) {
    throw UnsupportedFeature("parallel constructs inside a preaccumulation session");
  }
  const std::vector<Identifier> assigned = tape.lhs_between(st.start, end);
  std::vector<ActiveScalar*> active;
  std::vector<Identifier> out_ids;
  for (ActiveScalar* out : outputs) {
    const Identifier id = out->identifier();
    if (id == 0) continue;
    if (std::find(assigned.begin(), assigned.end(), id) == assigned.end() ||
        std::find(st.inputs.begin(), st.inputs.end(), id) != st.inputs.end()) {
      throw StructuralError("preaccumulation output " + std::to_string(id) +
                            " was not computed inside the session");
    }
    active.push_back(out);
    out_ids.push_back(id);
  }

  const std::size_t n_in = st.inputs.size();
  std::vector<double> jacobian(out_ids.size() * n_in, 0.0);
  {
    std::unique_lock<std::mutex> hazard;
    if (st.kind == PreaccKind::Hazardous && ctx.in_region && ctx.team_size > 1) {
      hazard = std::unique_lock<std::mutex>(detail::hazardous_preacc_mutex());
    }
    AdjointVector& vec = rt.adjoints();
    if (rt.adjoint_vector_optimized()) {
      vec.ensure(static_cast<std::size_t>(rt.ids().max_identifier()) + 1);
      vec.begin_use();
      detail::RawAccess access{vec.data()};
      try {
        detail::preacc_jacobian(tape, st, end, out_ids, access, jacobian);
      } catch (...) {
        vec.end_use();
        throw;
      }
      vec.end_use();
    } else {
      detail::LockedAccess access{&vec};
      detail::preacc_jacobian(tape, st, end, out_ids, access, jacobian);
    }
  }

  tape.reset_to(st.start);
  for (std::size_t k = 0; k < active.size(); ++k) {
    record_statement(*active[k], std::span<const double>(jacobian.data() + k * n_in, n_in),
                     std::span<const Identifier>(st.inputs));
  }
}

inline void preacc_finish(PreaccSession& session,
                          std::initializer_list<std::reference_wrapper<ActiveScalar>> outputs) {
  std::vector<ActiveScalar*> ptrs;
  ptrs.reserve(outputs.size());
  for (const auto& r : outputs) ptrs.push_back(&r.get());
  preacc_finish(session, std::span<ActiveScalar* const>(ptrs));
}

// Counted: n pauses need n resumes. Inside a parallel region every member
// calls these (the region checks balance on exit).
inline void pause_preaccumulation() {
  Runtime& rt = Runtime::get();
  ++rt.thread_context().pause_count;
  Tape& tape = rt.tape();
  if (tape.active()) tape.push_event(EventKind::PreaccPause, this_thread_index(), 0);
}

inline void resume_preaccumulation() {
  Runtime& rt = Runtime::get();
  ThreadContext& ctx = rt.thread_context();
  if (ctx.pause_count == 0) {
    throw ContractViolation("resume_preaccumulation without matching pause");
  }
  --ctx.pause_count;
  Tape& tape = rt.tape();
  if (tape.active()) tape.push_event(EventKind::PreaccResume, this_thread_index(), 0);
}

inline bool preaccumulation_paused() { return Runtime::get().thread_context().pause_count > 0; }

}  // namespace partape

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

#include <cstddef>

#include "partape/ad/active_scalar.hpp"
#include "partape/ad/evaluate.hpp"
#include "partape/ad/runtime.hpp"

namespace partape {

// Clears all recordings, identifiers and adjoints and selects the identifier
// management scheme. No active variable may be alive.
inline void configure(Scheme scheme) { Runtime::get().configure(scheme); }

inline void start_recording() { Runtime::get().tape().set_active(true); }
inline void stop_recording() { Runtime::get().tape().set_active(false); }
inline bool is_recording() { return Runtime::get().tape().active(); }

inline TapeSetPosition get_position() { return Runtime::get().position(); }

// Empties every thread tape (positions become invalid). Under the linear
// scheme identifier numbering restarts at 1.
inline void reset_tape() { Runtime::get().reset_tapes(); }
inline void reset_tape_to(const TapeSetPosition& p) { Runtime::get().reset_to(p); }

inline TapeStats tape_stats() { return Runtime::get().stats(); }

inline void resize_adjoints(std::size_t n) { Runtime::get().adjoints().resize(n); }

// Sizes the adjoint vector for every identifier issued so far.
inline void resize_adjoints() {
  Runtime& rt = Runtime::get();
  rt.adjoints().ensure(static_cast<std::size_t>(rt.ids().max_identifier()) + 1);
}

inline void begin_use_adjoints() { Runtime::get().adjoints().begin_use(); }
inline void end_use_adjoints() { Runtime::get().adjoints().end_use(); }

class UseAdjoints {
 public:
  UseAdjoints() { begin_use_adjoints(); }
  ~UseAdjoints() { end_use_adjoints(); }
  UseAdjoints(const UseAdjoints&) = delete;
  UseAdjoints& operator=(const UseAdjoints&) = delete;
};

// With the optimized adjoint-vector protocol these perform neither bounds
// checks nor locking; callers size the vector and hold a use-bracket.
inline void set_derivative(Identifier id, double v) {
  Runtime& rt = Runtime::get();
  if (rt.adjoint_vector_optimized()) {
    rt.adjoints().set(id, v);
  } else {
    rt.adjoints().locked_set(id, v);
  }
}

inline double get_derivative(Identifier id) {
  Runtime& rt = Runtime::get();
  if (rt.adjoint_vector_optimized()) return rt.adjoints().get(id);
  return rt.adjoints().locked_get(id);
}

inline void reset_adjoints() { Runtime::get().adjoints().reset(); }

inline void set_preacc_mode(PreaccMode m) { Runtime::get().set_preacc_mode(m); }
inline PreaccMode preacc_mode() { return Runtime::get().preacc_mode(); }

// false selects per-access locking with implicit resizing.
inline void set_adjoint_vector_optimized(bool on) { Runtime::get().set_adjoint_vector_optimized(on); }

inline IdentifierAudit audit_identifiers() { return Runtime::get().ids().audit(); }

inline Identifier acquire_identifier() { return Runtime::get().ids().acquire(); }
inline void release_identifier(Identifier id) { Runtime::get().ids().release(id); }

}  // namespace partape

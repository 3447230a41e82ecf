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

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "partape/ad/adjoint_vector.hpp"
#include "partape/ad/identifiers.hpp"
#include "partape/ad/tape.hpp"
#include "partape/errors.hpp"
#include "partape/parallel/team.hpp"

namespace partape {

enum class PreaccMode { On, Off, Hybrid };

// Sessions marked Hazardous may share inputs with a simultaneous session on
// another thread. Hybrid mode disables them.
enum class PreaccKind { ParallelSafe, Hazardous };

inline const char* to_string(PreaccMode m) {
  switch (m) {
    case PreaccMode::On: return "on";
    case PreaccMode::Off: return "off";
    case PreaccMode::Hybrid: return "hybrid";
  }
  return "?";
}

// Positions of every thread tape plus the region table, exported and
// restored together.
struct TapeSetPosition {
  std::array<Position, kMaxThreads> threads{};
  std::size_t regions = 0;

  friend bool operator==(const TapeSetPosition&, const TapeSetPosition&) = default;
};

struct RegionRecord {
  int team_size = 1;
  std::array<std::size_t, kMaxThreads> begin_event{};
};

struct PreaccState {
  bool open = false;
  bool inert = false;
  PreaccKind kind = PreaccKind::ParallelSafe;
  Position start;
  std::vector<Identifier> inputs;
};

// Per-thread recording context.
struct alignas(64) ThreadContext {
  bool in_region = false;
  int team_size = 1;
  bool no_shared_reading = false;
  int master_depth = 0;
  int pause_count = 0;
  PreaccState preacc;
};

// Process-wide AD runtime: identifier manager, adjoint vector, one tape per
// thread index and the parallel-event bookkeeping that goes with them.
class Runtime {
 public:
  static Runtime& get() {
    static Runtime runtime;
    return runtime;
  }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  Scheme scheme() const { return ids_.scheme(); }

  // Drops all tapes, identifiers and adjoints and switches the scheme. No
  // active variable may be alive.
  void configure(Scheme scheme) {
    ids_.reset(scheme);
    for (auto& t : tapes_) {
      t.reset(scheme);
      t.set_active(false);
      t.set_atomic_marking(false);
    }
    for (auto& c : threads_) c = ThreadContext{};
    regions_.clear();
    adjoints_.clear();
  }

  IdentifierManager& ids() { return ids_; }
  AdjointVector& adjoints() { return adjoints_; }

  Tape& tape() { return tapes_[static_cast<std::size_t>(this_thread_index())]; }
  Tape& tape(int thread) { return tapes_[static_cast<std::size_t>(thread)]; }
  ThreadContext& thread_context() {
    return threads_[static_cast<std::size_t>(this_thread_index())];
  }
  ThreadContext& thread_context(int thread) {
    return threads_[static_cast<std::size_t>(thread)];
  }

  std::vector<RegionRecord>& regions() { return regions_; }

  bool adjoint_vector_optimized() const { return adjoint_vector_optimized_; }
  void set_adjoint_vector_optimized(bool on) { adjoint_vector_optimized_ = on; }

  PreaccMode preacc_mode() const { return preacc_mode_; }
  void set_preacc_mode(PreaccMode m) { preacc_mode_ = m; }

  TapeSetPosition position() {
    TapeSetPosition p;
    for (std::size_t t = 0; t < tapes_.size(); ++t) p.threads[t] = tapes_[t].position();
    p.regions = regions_.size();
    return p;
  }

  void reset_to(const TapeSetPosition& p) {
    for (std::size_t t = 0; t < tapes_.size(); ++t) tapes_[t].reset_to(p.threads[t]);
    if (p.regions > regions_.size()) throw StructuralError("region table shorter than position");
    regions_.resize(p.regions);
  }

  // Clears every tape. Under the linear scheme identifier numbering restarts.
  void reset_tapes() {
    for (auto& t : tapes_) t.reset(ids_.scheme());
    regions_.clear();
    if (ids_.scheme() == Scheme::Linear) ids_.restart();
  }

  TapeStats stats() const {
    TapeStats s;
    for (const auto& t : tapes_) s += t.stats();
    return s;
  }

 private:
  Runtime() = default;

  IdentifierManager ids_;
  AdjointVector adjoints_;
  std::array<Tape, kMaxThreads> tapes_;
  std::array<ThreadContext, kMaxThreads> threads_;
  std::vector<RegionRecord> regions_;
  bool adjoint_vector_optimized_ = true;
  PreaccMode preacc_mode_ = PreaccMode::On;
};

}  // namespace partape

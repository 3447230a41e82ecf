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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "partape/ad/identifiers.hpp"
#include "partape/errors.hpp"

namespace partape {

class Team;
class AdjointVector;

// A node whose reverse behaviour is a hand-written callback. Every team
// member that reaches the node during a reverse sweep calls reverse() with
// its team handle; implementations coordinate through the team.
class ExternalFunction {
 public:
  virtual ~ExternalFunction() = default;
  virtual void reverse(const Team& team, AdjointVector& adjoints) = 0;
};

// Opaque marker into a tape. Positions compare by statement count.
struct Position {
  std::size_t statement = 0;
  std::size_t arg = 0;
  std::size_t run = 0;
  std::size_t external = 0;
  std::size_t event = 0;

  friend bool operator==(const Position&, const Position&) = default;
};

enum class EventKind : std::uint8_t {
  RegionBegin,
  RegionEnd,
  ChunkBegin,
  ChunkEnd,
  Barrier,
  ModeSwitch,
  PreaccPause,
  PreaccResume,
};

struct ParallelEvent {
  EventKind kind;
  int thread;
  Position position;
  // RegionBegin/RegionEnd: region id. ModeSwitch: 1 = atomic, 0 = plain.
  // Barrier: barrier ordinal within the region. Chunk*: chunk begin index.
  std::int64_t aux;
};

struct TapeStats {
  std::size_t statements = 0;
  std::size_t arg_entries = 0;
  std::size_t externals = 0;
  std::size_t bytes = 0;

  TapeStats& operator+=(const TapeStats& o) {
    statements += o.statements;
    arg_entries += o.arg_entries;
    externals += o.externals;
    bytes += o.bytes;
    return *this;
  }
};

// Modeled byte cost of the statement stream: one byte for the argument count,
// eight for each partial, four for each argument identifier, and under the
// reuse scheme four more for the explicit left-hand-side identifier.
struct StatementLayout {
  static constexpr std::size_t kCountBytes = 1;
  static constexpr std::size_t kPartialBytes = 8;
  static constexpr std::size_t kIdentifierBytes = 4;
  static constexpr std::size_t kLhsBytes = 4;

  static std::size_t bytes(Scheme scheme, std::size_t statements, std::size_t args) {
    const std::size_t per_stmt = kCountBytes + (scheme == Scheme::Reuse ? kLhsBytes : 0);
    return statements * per_stmt + args * (kPartialBytes + kIdentifierBytes);
  }
};

// Append-only statement stream of one thread (Jacobian taping: partials are
// stored at recording time).
//
// Under the reuse scheme the left-hand-side identifier of each statement is
// stored explicitly. Under the linear scheme it is implicit: consecutive
// statements with consecutive identifiers form a run and only the first
// identifier of each run is kept.
class alignas(64) Tape {
 public:
  static constexpr int kMaxArgs = 126;
  static constexpr std::uint8_t kExternalMarker = 127;
  static constexpr std::uint8_t kAtomicBit = 0x80;
  static constexpr std::uint8_t kCountMask = 0x7f;

  Scheme scheme() const { return scheme_; }
  bool active() const { return active_; }
  void set_active(bool on) { active_ = on; }

  // Marks subsequent statements for atomic adjoint increments.
  bool atomic_marking() const { return atomic_marking_; }
  void set_atomic_marking(bool on) { atomic_marking_ = on; }

  void push_statement(Identifier lhs, const double* partials, const Identifier* ids, int n) {
    if (n > kMaxArgs) throw RecordingError("statement has too many arguments");
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(partials[i])) {
        throw RecordingError("non-finite partial derivative recorded for argument " +
                             std::to_string(ids[i]));
      }
    }
    const std::size_t index = counts_.size();
    counts_.push_back(static_cast<std::uint8_t>(n) | (atomic_marking_ ? kAtomicBit : 0));
    if (scheme_ == Scheme::Reuse) {
      lhs_.push_back(lhs);
    } else if (runs_.empty() ||
               runs_.back().first_id + static_cast<Identifier>(index - runs_.back().start) != lhs) {
      runs_.push_back({index, lhs});
    }
    partials_.insert(partials_.end(), partials, partials + n);
    ids_.insert(ids_.end(), ids, ids + n);
  }

  void push_external(std::shared_ptr<ExternalFunction> fn) {
    counts_.push_back(kExternalMarker);
    if (scheme_ == Scheme::Reuse) lhs_.push_back(0);
    externals_.push_back(std::move(fn));
  }

  void push_event(EventKind kind, int thread, std::int64_t aux) {
    events_.push_back({kind, thread, position(), aux});
  }

  Position position() const {
    return {counts_.size(), ids_.size(), runs_.size(), externals_.size(), events_.size()};
  }

  // Empties the tape and adopts `scheme` for future statements.
  void reset(Scheme scheme) {
    scheme_ = scheme;
    counts_.clear();
    lhs_.clear();
    runs_.clear();
    partials_.clear();
    ids_.clear();
    externals_.clear();
    events_.clear();
  }

  void reset_to(const Position& p) {
    if (p.statement > counts_.size() || p.arg > ids_.size() || p.event > events_.size()) {
      throw StructuralError("reset to a position beyond the end of the tape");
    }
    counts_.resize(p.statement);
    if (scheme_ == Scheme::Reuse) lhs_.resize(p.statement);
    runs_.resize(std::min(p.run, runs_.size()));
    while (!runs_.empty() && runs_.back().start >= p.statement) runs_.pop_back();
    partials_.resize(p.arg);
    ids_.resize(p.arg);
    externals_.resize(p.external);
    events_.resize(p.event);
  }

  TapeStats stats() const { return stats_between(Position{}, position()); }

  TapeStats stats_between(const Position& from, const Position& to) const {
    TapeStats s;
    s.externals = to.external - from.external;
    s.statements = to.statement - from.statement - s.externals;
    s.arg_entries = to.arg - from.arg;
    s.bytes = StatementLayout::bytes(scheme_, s.statements, s.arg_entries);
    return s;
  }

  // Read access used by the evaluators.
  std::uint8_t count_byte(std::size_t i) const { return counts_[i]; }
  const double* partials() const { return partials_.data(); }
  const Identifier* arg_ids() const { return ids_.data(); }
  const std::vector<ParallelEvent>& events() const { return events_; }
  ExternalFunction& external(std::size_t i) const { return *externals_[i]; }

  // Walks left-hand-side identifiers backwards from statement `end`.
  class LhsCursor {
   public:
    LhsCursor(const Tape& tape, std::size_t end) : tape_(tape) {
      if (tape.scheme_ == Scheme::Linear && !tape.runs_.empty() && end > 0) {
        auto it = std::upper_bound(
            tape.runs_.begin(), tape.runs_.end(), end - 1,
            [](std::size_t v, const Run& r) { return v < r.start; });
        run_ = static_cast<std::size_t>(it - tape.runs_.begin());
      }
    }
    // Identifier of statement i; calls must be made for decreasing i.
    Identifier at(std::size_t i) {
      if (tape_.scheme_ == Scheme::Reuse) return tape_.lhs_[i];
      while (run_ > 0 && tape_.runs_[run_ - 1].start > i) --run_;
      const Run& r = tape_.runs_[run_ - 1];
      return r.first_id + static_cast<Identifier>(i - r.start);
    }

   private:
    const Tape& tape_;
    std::size_t run_ = 0;
  };

  // Identifiers assigned by statements in [from, to).
  std::vector<Identifier> lhs_between(const Position& from, const Position& to) const {
    std::vector<Identifier> out;
    LhsCursor cursor(*this, to.statement);
    for (std::size_t i = to.statement; i-- > from.statement;) {
      if ((counts_[i] & kCountMask) == kExternalMarker) continue;
      out.push_back(cursor.at(i));
    }
    return out;
  }

 private:
  struct Run {
    std::size_t start;
    Identifier first_id;
  };

  Scheme scheme_ = Scheme::Linear;
  bool active_ = false;
  bool atomic_marking_ = false;
  std::vector<std::uint8_t> counts_;
  std::vector<Identifier> lhs_;
  std::vector<Run> runs_;
  std::vector<double> partials_;
  std::vector<Identifier> ids_;
  std::vector<std::shared_ptr<ExternalFunction>> externals_;
  std::vector<ParallelEvent> events_;
};

}  // namespace partape

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
#include <chrono>

#include "partape/errors.hpp"

namespace partape::bench {

enum class Phase { Recording, Management, Evaluation };

inline constexpr std::array<Phase, 3> kPhases{Phase::Recording, Phase::Management,
                                              Phase::Evaluation};

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Recording: return "recording";
    case Phase::Management: return "management";
    case Phase::Evaluation: return "evaluation";
  }
  return "?";
}

// Accumulates wall time per AD phase on the orchestrating thread. Phases do
// not nest; whatever is not inside a phase counts as non-AD time.
class PhaseTimer {
 public:
  using Clock = std::chrono::steady_clock;

  void start(Phase p) {
    if (running_) {
      throw ContractViolation(std::string("phase ") + to_string(p) + " started inside phase " +
                              to_string(current_));
    }
    running_ = true;
    current_ = p;
    t0_ = Clock::now();
  }

  void stop(Phase p) {
    if (!running_ || current_ != p) {
      throw ContractViolation(std::string("phase ") + to_string(p) + " stopped but not running");
    }
    elapsed_[static_cast<std::size_t>(p)] += Clock::now() - t0_;
    running_ = false;
  }

  bool running() const { return running_; }

  double seconds(Phase p) const {
    return std::chrono::duration<double>(elapsed_[static_cast<std::size_t>(p)]).count();
  }

  double total_seconds() const {
    double s = 0.0;
    for (Phase p : kPhases) s += seconds(p);
    return s;
  }

  void clear() {
    if (running_) throw ContractViolation("clearing a running phase timer");
    elapsed_ = {};
  }

 private:
  bool running_ = false;
  Phase current_ = Phase::Recording;
  Clock::time_point t0_;
  std::array<Clock::duration, 3> elapsed_{};
};

// Times a scope; a null timer makes it a no-op.
class ScopedPhase {
 public:
  ScopedPhase(PhaseTimer* timer, Phase p) : timer_(timer), phase_(p) {
    if (timer_ != nullptr) timer_->start(p);
  }
  ~ScopedPhase() {
    if (timer_ != nullptr && timer_->running()) timer_->stop(phase_);
  }
  ScopedPhase(const ScopedPhase&) = delete;
  ScopedPhase& operator=(const ScopedPhase&) = delete;

 private:
  PhaseTimer* timer_;
  Phase phase_;
};

}  // namespace partape::bench

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
#include <array>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include "partape/errors.hpp"
#include "partape/parallel/team.hpp"

namespace partape {

using Identifier = std::int32_t;

enum class Scheme { Linear, Reuse };

inline const char* to_string(Scheme s) {
  return s == Scheme::Linear ? "linear" : "reuse";
}

struct IdentifierAudit {
  std::size_t live = 0;
  std::size_t pooled = 0;
  std::size_t unissued = 0;
};

inline bool debug_ids_from_env() {
  const char* v = std::getenv("PARTAPE_DEBUG_IDS");
  return v != nullptr && std::strcmp(v, "1") == 0;
}

// Hands out identifiers to active variables.
//
// Linear: identifiers are issued in increasing order per thread and never
// handed out twice until the numbering is restarted with restart(). Release
// is a no-op.
//
// Reuse: every thread owns a LIFO pool. Released identifiers go to the pool of
// the releasing thread and are preferred over fresh ones. Fresh identifiers
// come from a shared atomic counter in blocks of kBlockSize.
//
// With debug accounting on (PARTAPE_DEBUG_IDS=1 or set_debug(true)) every
// identifier's state is tracked so that double releases are caught and
// audit() can verify the live/pooled/unissued partition.
class IdentifierManager {
 public:
  static constexpr Identifier kBlockSize = 1024;

  explicit IdentifierManager(Scheme scheme = Scheme::Linear)
      : scheme_(scheme), debug_(debug_ids_from_env()) {}

  Scheme scheme() const { return scheme_; }
  bool debug() const { return debug_; }

  // Only valid when no variable holds an identifier.
  void reset(Scheme scheme) {
    scheme_ = scheme;
    restart();
  }

  void set_debug(bool on) {
    std::lock_guard lock(debug_mutex_);
    debug_ = on;
    state_.clear();
    if (on) {
      state_.assign(static_cast<std::size_t>(next_fresh_.load()), kUnissued);
      // Anything handed out before debugging started counts as live.
      for (std::size_t i = 1; i < state_.size(); ++i) state_[i] = kLive;
      for (auto& t : threads_) {
        for (Identifier id : t.pool) state_[static_cast<std::size_t>(id)] = kPooled;
        for (Identifier id = t.next; id < t.end; ++id)
          state_[static_cast<std::size_t>(id)] = kUnissued;
      }
    }
  }

  // Forget every issued identifier and start numbering at 1 again.
  void restart() {
    next_fresh_.store(1);
    for (auto& t : threads_) {
      t.pool.clear();
      t.next = t.end = 0;
    }
    std::lock_guard lock(debug_mutex_);
    state_.clear();
  }

  Identifier acquire() {
    ThreadState& t = threads_[static_cast<std::size_t>(this_thread_index())];
    Identifier id;
    if (scheme_ == Scheme::Reuse && !t.pool.empty()) {
      id = t.pool.back();
      t.pool.pop_back();
      if (debug_) transition(id, kPooled, kLive, "acquire of non-pooled identifier");
      return id;
    }
    if (t.next == t.end) {
      t.next = next_fresh_.fetch_add(kBlockSize, std::memory_order_relaxed);
      t.end = t.next + kBlockSize;
    }
    id = t.next++;
    if (debug_) transition(id, kUnissued, kLive, "identifier issued twice");
    return id;
  }

  void release(Identifier id) {
    if (scheme_ == Scheme::Linear || id == 0) return;
    if (debug_) transition(id, kLive, kPooled, "double release of identifier");
    threads_[static_cast<std::size_t>(this_thread_index())].pool.push_back(id);
  }

  // Largest identifier that may currently be in use; the adjoint vector needs
  // max_identifier() + 1 entries.
  Identifier max_identifier() const {
    return next_fresh_.load(std::memory_order_relaxed) - 1;
  }

  std::size_t pool_size(int thread) const {
    return threads_[static_cast<std::size_t>(thread)].pool.size();
  }

  bool in_pool(Identifier id) const {
    for (const auto& t : threads_) {
      if (std::find(t.pool.begin(), t.pool.end(), id) != t.pool.end()) return true;
    }
    return false;
  }

  // Counts identifiers below the fresh counter by state. Must not race with
  // acquire/release. Throws IdentifierError if debug accounting disagrees.
  IdentifierAudit audit() const {
    IdentifierAudit a;
    const auto total = static_cast<std::size_t>(max_identifier());
    for (const auto& t : threads_) {
      a.pooled += t.pool.size();
      a.unissued += static_cast<std::size_t>(t.end - t.next);
    }
    if (a.pooled + a.unissued > total) {
      throw IdentifierError("identifier accounting exceeds issued range");
    }
    a.live = total - a.pooled - a.unissued;
    if (!debug_) return a;

    std::lock_guard lock(debug_mutex_);
    std::vector<std::uint8_t> seen(total + 1, 0);
    for (const auto& t : threads_) {
      for (Identifier id : t.pool) {
        const auto i = static_cast<std::size_t>(id);
        if (i == 0 || i > total || seen[i]++ != 0 || state_at(i) != kPooled) {
          throw IdentifierError("pool corruption at identifier " + std::to_string(id));
        }
      }
      for (Identifier id = t.next; id < t.end; ++id) {
        const auto i = static_cast<std::size_t>(id);
        if (seen[i]++ != 0 || state_at(i) != kUnissued) {
          throw IdentifierError("unissued range corrupted at " + std::to_string(id));
        }
      }
    }
    std::size_t live = 0;
    for (std::size_t i = 1; i <= total; ++i) {
      if (seen[i] == 0) {
        if (state_at(i) != kLive) {
          throw IdentifierError("identifier " + std::to_string(i) + " leaked");
        }
        ++live;
      }
    }
    if (live != a.live) throw IdentifierError("live identifier count mismatch");
    return a;
  }

 private:
  static constexpr std::uint8_t kUnissued = 0;
  static constexpr std::uint8_t kLive = 1;
  static constexpr std::uint8_t kPooled = 2;

  struct alignas(64) ThreadState {
    std::vector<Identifier> pool;
    Identifier next = 0;
    Identifier end = 0;
  };

  std::uint8_t state_at(std::size_t i) const {
    return i < state_.size() ? state_[i] : kUnissued;
  }

  void transition(Identifier id, std::uint8_t from, std::uint8_t to, const char* what) {
    std::lock_guard lock(debug_mutex_);
    const auto i = static_cast<std::size_t>(id);
    if (i >= state_.size()) state_.resize(std::max(i + 1, state_.size() * 2), kUnissued);
    if (state_[i] != from) throw IdentifierError(std::string(what) + ": " + std::to_string(id));
    state_[i] = to;
  }

  Scheme scheme_;
  std::array<ThreadState, kMaxThreads> threads_{};
  std::atomic<Identifier> next_fresh_{1};
  bool debug_;
  mutable std::mutex debug_mutex_;
  std::vector<std::uint8_t> state_;
};

}  // namespace partape

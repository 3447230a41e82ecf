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
#include <cassert>
#include <cstddef>
#include <mutex>
#include <shared_mutex>
#include <vector>

#include "partape/ad/identifiers.hpp"
#include "partape/errors.hpp"
#include "partape/parallel/team.hpp"

namespace partape {

// Shared array of adjoint values indexed by identifier.
//
// Guarded by a shared mutex: resizing takes the exclusive lock, usage takes
// the shared lock. In the optimized protocol callers size the vector once
// with resize() and then bracket a batch of raw get/set calls with
// begin_use()/end_use(), so a batch costs one shared acquisition. The locking
// protocol (`locked_*`) takes the shared lock per access and resizes on
// demand; it exists to measure what the optimized protocol saves.
//
// Index 0 belongs to passive values: writes to it are allowed, reads return 0.
class AdjointVector {
 public:
  std::size_t capacity() const { return capacity_.load(std::memory_order_acquire); }

  // Grows to at least n entries (never shrinks). New entries are zero.
  void resize(std::size_t n) {
    if (depth_[slot()] > 0) {
      throw ContractViolation("resize_adjoints called inside an open use-bracket");
    }
    std::unique_lock lock(mutex_);
    grow_locked(n);
  }

  void ensure(std::size_t n) {
    if (capacity() < n) resize(n);
  }

  // Brackets are reference counted per thread; only the outermost one
  // acquires the shared lock.
  void begin_use() {
    int& d = depth_[slot()];
    if (d++ == 0) {
      mutex_.lock_shared();
      acquisitions_.fetch_add(1, std::memory_order_relaxed);
    }
  }

  void end_use() {
    int& d = depth_[slot()];
    if (d == 0) throw ContractViolation("end_use_adjoints without matching begin");
    if (--d == 0) mutex_.unlock_shared();
  }

  bool in_use_by_this_thread() const { return depth_[slot()] > 0; }

  // Raw access; the caller holds a use-bracket and has ensured capacity.
  double* data() { return values_.data(); }
  double get(Identifier id) const {
    assert(static_cast<std::size_t>(id) < values_.size());
    return id == 0 ? 0.0 : values_[static_cast<std::size_t>(id)];
  }
  void set(Identifier id, double v) {
    assert(static_cast<std::size_t>(id) < values_.size());
    values_[static_cast<std::size_t>(id)] = v;
  }

  // Per-access locking with implicit resizing.
  double locked_get(Identifier id) {
    if (id == 0) return 0.0;
    const auto i = static_cast<std::size_t>(id);
    implicit_grow(i + 1);
    SharedUse use(*this);
    return values_[i];
  }
  void locked_set(Identifier id, double v) {
    const auto i = static_cast<std::size_t>(id);
    implicit_grow(i + 1);
    SharedUse use(*this);
    values_[i] = v;
  }
  void locked_add(Identifier id, double v) {
    const auto i = static_cast<std::size_t>(id);
    implicit_grow(i + 1);
    SharedUse use(*this);
    std::atomic_ref<double>(values_[i]).fetch_add(v, std::memory_order_relaxed);
  }

  // Zeroes every entry. No concurrent users allowed.
  void reset() { std::fill(values_.begin(), values_.end(), 0.0); }

  // Drops storage entirely (used when the runtime is reinitialized).
  void clear() {
    std::unique_lock lock(mutex_);
    values_.clear();
    values_.shrink_to_fit();
    capacity_.store(0, std::memory_order_release);
  }

  std::size_t shared_acquisitions() const {
    return acquisitions_.load(std::memory_order_relaxed);
  }

 private:
  // Shared acquisition that is skipped when the thread already holds a
  // bracket (shared_mutex is not recursive).
  class SharedUse {
   public:
    explicit SharedUse(AdjointVector& v) : v_(v), owns_(!v.in_use_by_this_thread()) {
      if (owns_) {
        v_.mutex_.lock_shared();
        v_.acquisitions_.fetch_add(1, std::memory_order_relaxed);
      }
    }
    ~SharedUse() {
      if (owns_) v_.mutex_.unlock_shared();
    }
    SharedUse(const SharedUse&) = delete;
    SharedUse& operator=(const SharedUse&) = delete;

   private:
    AdjointVector& v_;
    bool owns_;
  };

  static std::size_t slot() { return static_cast<std::size_t>(this_thread_index()); }

  void implicit_grow(std::size_t n) {
    if (capacity() >= n) return;
    if (in_use_by_this_thread()) {
      throw ContractViolation("adjoint index out of range inside a use-bracket");
    }
    std::unique_lock lock(mutex_);
    grow_locked(n);
  }

  void grow_locked(std::size_t n) {
    const std::size_t cap = values_.size();
    if (n <= cap) return;
    const std::size_t target = std::max(n, cap + cap / 2);
    values_.resize(target, 0.0);
    capacity_.store(target, std::memory_order_release);
  }

  std::vector<double> values_;
  std::atomic<std::size_t> capacity_{0};
  mutable std::shared_mutex mutex_;
  std::array<int, kMaxThreads> depth_{};
  std::atomic<std::size_t> acquisitions_{0};
};

}  // namespace partape

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

#include <barrier>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "partape/errors.hpp"

namespace partape {

// Upper bound on team sizes; tapes and identifier pools are preallocated per
// thread index.
inline constexpr int kMaxThreads = 64;

namespace detail {
inline thread_local int tl_thread_index = 0;
}  // namespace detail

// Index of the calling thread within the persistent pool. The thread that
// drives the library (usually main) is index 0.
inline int this_thread_index() { return detail::tl_thread_index; }

// Handle given to every member of a running team. A default constructed team
// is the serial team of size one.
class Team {
 public:
  Team() = default;
  Team(int index, int size, std::barrier<>* sync)
      : index_(index), size_(size), sync_(sync) {}

  int index() const { return index_; }
  int size() const { return size_; }
  bool master() const { return index_ == 0; }

  // Plain synchronization, not logged anywhere.
  void sync() const {
    if (sync_ != nullptr && size_ > 1) sync_->arrive_and_wait();
  }

  // Static contiguous chunk [begin, end) of [0, n) owned by this member.
  std::pair<std::size_t, std::size_t> chunk(std::size_t n) const {
    const auto t = static_cast<std::size_t>(index_);
    const auto s = static_cast<std::size_t>(size_);
    return {t * n / s, (t + 1) * n / s};
  }

 private:
  friend class ThreadPool;
  int index_ = 0;
  int size_ = 1;
  std::barrier<>* sync_ = nullptr;
};

// Persistent worker pool. run() executes a job on `n` threads, the caller
// acting as member 0. Workers keep their thread index for their lifetime, so
// member t of every team is always the same OS thread.
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    start_cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  bool busy() const { return busy_; }

  void run(int n, const std::function<void(Team&)>& job) {
    if (n < 1 || n > kMaxThreads) {
      throw ContractViolation("team size out of range: " + std::to_string(n));
    }
    if (busy_) throw UnsupportedFeature("thread pool is already running a team");
    if (n == 1) {
      Team solo;
      job(solo);
      return;
    }
    busy_ = true;
    std::barrier<> sync(n);
    {
      std::lock_guard lock(mutex_);
      while (static_cast<int>(workers_.size()) < n - 1) {
        const int index = static_cast<int>(workers_.size()) + 1;
        workers_.emplace_back([this, index] { worker_loop(index); });
      }
      job_ = &job;
      team_size_ = n;
      sync_ = &sync;
      pending_ = n - 1;
      error_ = nullptr;
      ++generation_;
    }
    start_cv_.notify_all();

    Team self(0, n, &sync);
    try {
      job(self);
    } catch (...) {
      record_error(std::current_exception());
      sync.arrive_and_drop();
    }
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    sync_ = nullptr;
    busy_ = false;
    if (error_) {
      auto e = error_;
      error_ = nullptr;
      lock.unlock();
      std::rethrow_exception(e);
    }
  }

 private:
  ThreadPool() = default;

  void record_error(std::exception_ptr e) {
    std::lock_guard lock(error_mutex_);
    if (!error_) error_ = std::move(e);
  }

  void worker_loop(int index) {
    detail::tl_thread_index = index;
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(Team&)>* job = nullptr;
      std::barrier<>* sync = nullptr;
      int size = 0;
      {
        std::unique_lock lock(mutex_);
        start_cv_.wait(lock, [&] {
          return stop_ || (generation_ != seen && index < team_size_);
        });
        if (stop_) return;
        seen = generation_;
        job = job_;
        sync = sync_;
        size = team_size_;
      }
      Team self(index, size, sync);
      try {
        (*job)(self);
      } catch (...) {
        record_error(std::current_exception());
        sync->arrive_and_drop();
      }
      {
        std::lock_guard lock(mutex_);
        --pending_;
      }
      done_cv_.notify_all();
    }
  }

  std::mutex mutex_;
  std::mutex error_mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> workers_;
  const std::function<void(Team&)>* job_ = nullptr;
  std::barrier<>* sync_ = nullptr;
  int team_size_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  std::exception_ptr error_;
  bool stop_ = false;
  bool busy_ = false;
};

}  // namespace partape

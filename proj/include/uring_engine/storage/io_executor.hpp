// Copyright 2026 The uring-engine Authors
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

#include <cstdint>
#include <span>
#include <vector>

#include "uring_engine/io/ring.hpp"
#include "uring_engine/sched/scheduler.hpp"

namespace uring_engine::storage {

/// How the buffer pool waits for I/O: blocking on the ring, or suspending the
/// calling fiber.
class IoExecutor {
 public:
  virtual ~IoExecutor() = default;

  virtual io::IoCompletion execute(const io::IoRequest& request) = 0;
  /// All requests go out together; returns completions in request order.
  virtual std::vector<io::IoCompletion> execute_batch(std::span<const io::IoRequest> requests) = 0;

  /// True when other tasks may run while this one waits (frames can then be
  /// observed mid-load by another task).
  virtual bool can_park() const noexcept = 0;
  virtual void park(sched::WaitQueue& queue) = 0;
  virtual void wake_all(sched::WaitQueue& queue) = 0;

  /// Times the caller gave up the CPU waiting for I/O or a wait queue.
  virtual std::uint64_t suspensions() const noexcept = 0;

  /// Transaction-logic stand-in: virtual cycles on a simulated ring, a busy
  /// loop otherwise.
  virtual void compute(std::uint64_t cycles) = 0;

  virtual io::Ring& ring() noexcept = 0;
};

/// Blocks on the ring for every request (single task, no overlap).
class SyncExecutor final : public IoExecutor {
 public:
  explicit SyncExecutor(io::Ring& ring) : ring_(ring) {}

  io::IoCompletion execute(const io::IoRequest& request) override;
  std::vector<io::IoCompletion> execute_batch(std::span<const io::IoRequest> requests) override;
  bool can_park() const noexcept override { return false; }
  void park(sched::WaitQueue&) override;
  void wake_all(sched::WaitQueue&) override {}
  std::uint64_t suspensions() const noexcept override { return suspensions_; }
  void compute(std::uint64_t cycles) override;
  io::Ring& ring() noexcept override { return ring_; }

 private:
  io::Ring& ring_;
  std::uint64_t next_tag_ = 0;
  std::uint64_t suspensions_ = 0;
  std::vector<io::IoCompletion> scratch_;
};

/// Suspends the current fiber of `scheduler` on every request.
class FiberExecutor final : public IoExecutor {
 public:
  explicit FiberExecutor(sched::Scheduler& scheduler) : sched_(scheduler) {}

  io::IoCompletion execute(const io::IoRequest& request) override;
  std::vector<io::IoCompletion> execute_batch(std::span<const io::IoRequest> requests) override;
  bool can_park() const noexcept override { return true; }
  void park(sched::WaitQueue& queue) override;
  void wake_all(sched::WaitQueue& queue) override { sched_.wake_all(queue); }
  std::uint64_t suspensions() const noexcept override { return suspensions_; }
  void compute(std::uint64_t cycles) override;
  io::Ring& ring() noexcept override { return sched_.ring(); }

 private:
  sched::Scheduler& sched_;
  std::uint64_t suspensions_ = 0;
};

/// Spends `cycles` on the ring's virtual clock when it has one, else spins.
void spend_compute(io::Ring& ring, std::uint64_t cycles);

}  // namespace uring_engine::storage

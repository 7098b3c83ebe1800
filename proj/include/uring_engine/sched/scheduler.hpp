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

#include <chrono>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "uring_engine/io/ring.hpp"

namespace uring_engine::sched {

/// Flush threshold of the adaptive policy: clamp(floor(inflight / max(runnable, 1)), 1, max_batch).
constexpr std::size_t flush_threshold(std::size_t inflight, std::size_t runnable, std::size_t max_batch) noexcept {
  std::size_t t = inflight / (runnable == 0 ? 1 : runnable);
  if (t < 1) t = 1;
  if (max_batch >= 1 && t > max_batch) t = max_batch;
  return t;
}

/// True when the queued submissions should be handed to the ring now. With
/// nothing runnable the queue is always flushed so the CPU never idles on
/// unsubmitted work.
constexpr bool adaptive_flush_decision(std::size_t queued, std::size_t inflight, std::size_t runnable,
                                       std::size_t max_batch) noexcept {
  return runnable == 0 || queued >= flush_threshold(inflight, runnable, max_batch);
}

enum class FlushPolicy {
  Adaptive,   // adaptive_flush_decision after every pass over the ready queue
  Immediate,  // every await submits at once
};

enum class FiberState { Runnable, AwaitingIo, Parked, Finished };

using FiberId = std::uint64_t;

struct SchedulerConfig {
  std::size_t max_fibers = 128;
  std::size_t max_batch = 32;
  FlushPolicy policy = FlushPolicy::Adaptive;
  std::size_t stack_bytes = 128 * 1024;
};

struct SchedulerReport {
  std::uint64_t tx_completed = 0;  // fibers that ran to completion
  std::uint64_t flushes = 0;       // non-empty submissions
  std::uint64_t submitted = 0;
  double mean_batch_size = 0.0;
  std::uint64_t reap_calls = 0;
  std::uint64_t steps = 0;
};

/// Stopping rule for run(): no new fibers are taken from the task source once
/// `max_tasks` were spawned or the deadline passed; running fibers drain.
struct RunLimits {
  std::optional<std::uint64_t> max_tasks;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

class Scheduler;

/// Fibers blocked on an event that is not an I/O completion (e.g. a page
/// another fiber is loading).
class WaitQueue {
 public:
  bool empty() const noexcept { return waiters_.empty(); }
  std::size_t size() const noexcept { return waiters_.size(); }

 private:
  friend class Scheduler;
  std::deque<FiberId> waiters_;
};

/// Single-threaded cooperative scheduler over one ring. Fibers await I/O;
/// submissions are batched per the configured flush policy.
class Scheduler {
 public:
  using Task = std::function<void()>;
  /// Produces the next task, or nullopt when exhausted.
  using TaskSource = std::function<std::optional<Task>()>;

  Scheduler(io::Ring& ring, SchedulerConfig config = {});
  ~Scheduler();
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  FiberId spawn(Task task);
  /// Waits out in-flight I/O, then unwinds and destroys every fiber. run()
  /// does this itself before rethrowing a fiber's exception or Deadlock.
  void abandon() noexcept;

  /// Runs until every fiber finished. Rethrows the first exception escaping a fiber.
  SchedulerReport run();
  /// Keeps up to max_fibers live fibers fed from `source` until it is
  /// exhausted or `limits` stop it, then drains.
  SchedulerReport run(const TaskSource& source, RunLimits limits = {});

  // ---- callable from inside a fiber ----

  /// Stages `request`, suspends the fiber until its completion arrives.
  /// Enqueue errors are thrown before suspending.
  io::IoCompletion await_io(const io::IoRequest& request);
  /// Stages all requests together and resumes once every one completed.
  std::vector<io::IoCompletion> await_batch(std::span<const io::IoRequest> requests);
  void yield();
  void park(WaitQueue& queue);
  /// Callable from inside or outside fibers.
  void wake_all(WaitQueue& queue);

  static Scheduler* current() noexcept;
  static bool in_fiber() noexcept;
  FiberId current_id() const;

  // ---- introspection ----
  std::size_t runnable() const noexcept { return ready_.size(); }
  std::size_t queued() const noexcept { return queued_; }
  std::size_t inflight() const noexcept { return inflight_; }
  std::size_t live_fibers() const noexcept { return fibers_.size(); }
  std::optional<FiberState> state(FiberId id) const;
  std::vector<FiberId> ready_queue() const;
  const SchedulerReport& report() const noexcept { return report_; }
  const SchedulerConfig& config() const noexcept { return config_; }
  io::Ring& ring() noexcept { return ring_; }

  /// Called after every flush with (queued-before-flush, inflight, runnable).
  /// Test hook for policy tracing.
  std::function<void(std::size_t, std::size_t, std::size_t)> on_flush;
  /// Called before every reap with (min, queued, runnable). Test hook.
  std::function<void(std::size_t, std::size_t, std::size_t)> on_reap;

 private:
  struct Fiber;
  struct Waiter {
    Fiber* fiber;
    std::size_t slot;
    std::uint64_t user_tag;
  };

  Fiber& self() const;
  void suspend(Fiber& f, FiberState state);
  void resume(Fiber& f);
  void make_room(std::size_t n);
  void flush();
  void dispatch(const io::IoCompletion& c);
  void maybe_flush();
  SchedulerReport finish_report();

  io::Ring& ring_;
  SchedulerConfig config_;
  struct StackPool;
  std::unique_ptr<StackPool> stacks_;
  std::unordered_map<FiberId, std::unique_ptr<Fiber>> fibers_;
  std::deque<Fiber*> ready_;
  std::unordered_map<std::uint64_t, Waiter> waiters_;
  std::vector<io::IoCompletion> reaped_;
  Fiber* running_ = nullptr;
  FiberId next_id_ = 0;
  std::uint64_t next_tag_ = 0;
  std::size_t queued_ = 0;
  std::size_t inflight_ = 0;
  std::exception_ptr error_;
  SchedulerReport report_;
};

}  // namespace uring_engine::sched

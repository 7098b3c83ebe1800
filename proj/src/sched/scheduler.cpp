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

#include "uring_engine/sched/scheduler.hpp"

#include <boost/context/detail/exception.hpp>
#include <boost/context/fiber.hpp>
#include <boost/context/pooled_fixedsize_stack.hpp>

#include "uring_engine/common/error.hpp"

namespace uring_engine::sched {

namespace ctx = boost::context;

namespace {
thread_local Scheduler* tl_current = nullptr;

struct CurrentGuard {
  Scheduler* prev;
  explicit CurrentGuard(Scheduler* s) : prev(tl_current) { tl_current = s; }
  ~CurrentGuard() { tl_current = prev; }
};
}  // namespace

struct Scheduler::StackPool {
  explicit StackPool(std::size_t bytes) : alloc(bytes) {}
  ctx::pooled_fixedsize_stack alloc;
};

struct Scheduler::Fiber {
  FiberId id = 0;
  FiberState state = FiberState::Runnable;
  Task task;
  ctx::fiber context;  // the fiber itself while suspended
  ctx::fiber caller;   // the scheduler while the fiber runs
  std::vector<io::IoCompletion> results;
  std::size_t remaining = 0;
};

Scheduler::Scheduler(io::Ring& ring, SchedulerConfig config)
    : ring_(ring), config_(config), stacks_(std::make_unique<StackPool>(config.stack_bytes)) {
  if (config_.max_fibers == 0) raise(ErrorCode::ConfigError, "max_fibers must be positive");
  if (config_.max_batch == 0) raise(ErrorCode::ConfigError, "max_batch must be positive");
}

Scheduler::~Scheduler() { abandon(); }

void Scheduler::abandon() noexcept {
  // Let the device finish with caller buffers before fibers unwind.
  try {
    if (queued_ > 0) flush();
    while (inflight_ > 0) {
      reaped_.clear();
      ring_.reap_into(reaped_, 1, inflight_, std::chrono::seconds(1));
      for (auto& c : reaped_) {
        auto it = waiters_.find(c.tag);
        if (it != waiters_.end() && !c.more_coming) {
          waiters_.erase(it);
          --inflight_;
        }
      }
    }
  } catch (...) {
  }
  CurrentGuard guard(this);
  fibers_.clear();
  ready_.clear();
  queued_ = 0;
}

Scheduler* Scheduler::current() noexcept { return tl_current; }
bool Scheduler::in_fiber() noexcept { return tl_current != nullptr && tl_current->running_ != nullptr; }

Scheduler::Fiber& Scheduler::self() const {
  if (running_ == nullptr || tl_current != this) raise(ErrorCode::NotInFiber, "called outside a scheduler fiber");
  return *running_;
}

FiberId Scheduler::current_id() const { return self().id; }

FiberId Scheduler::spawn(Task task) {
  if (fibers_.size() >= config_.max_fibers) raise(ErrorCode::AtCapacity, "live fiber limit reached");
  auto fiber = std::make_unique<Fiber>();
  Fiber* f = fiber.get();
  f->id = next_id_++;
  f->task = std::move(task);
  f->context = ctx::fiber(std::allocator_arg, stacks_->alloc, [this, f](ctx::fiber&& caller) {
    f->caller = std::move(caller);
    try {
      f->task();
    } catch (const ctx::detail::forced_unwind&) {
      throw;
    } catch (...) {
      if (!error_) error_ = std::current_exception();
    }
    f->state = FiberState::Finished;
    return std::move(f->caller);
  });
  fibers_.emplace(f->id, std::move(fiber));
  ready_.push_back(f);
  return f->id;
}

void Scheduler::resume(Fiber& f) {
  running_ = &f;
  f.state = FiberState::Runnable;
  f.context = std::move(f.context).resume();
  running_ = nullptr;
  if (f.state == FiberState::Finished) {
    ++report_.tx_completed;
    fibers_.erase(f.id);
  }
}

void Scheduler::suspend(Fiber& f, FiberState state) {
  f.state = state;
  f.caller = std::move(f.caller).resume();
}

void Scheduler::make_room(std::size_t n) {
  if (ring_.staged() + n > ring_.sq_capacity()) flush();
}

void Scheduler::flush() {
  std::size_t before = queued_;
  std::size_t n = ring_.submit();
  if (n == 0) return;
  ++report_.flushes;
  report_.submitted += n;
  inflight_ += queued_;
  queued_ = 0;
  if (on_flush) on_flush(before, inflight_ - before, ready_.size());
}

void Scheduler::maybe_flush() {
  if (queued_ == 0) return;
  if (config_.policy == FlushPolicy::Immediate ||
      adaptive_flush_decision(queued_, inflight_, ready_.size(), config_.max_batch))
    flush();
}

void Scheduler::dispatch(const io::IoCompletion& c) {
  auto it = waiters_.find(c.tag);
  if (it == waiters_.end()) return;
  Waiter w = it->second;
  if (!c.more_coming) {
    waiters_.erase(it);
    --inflight_;
  }
  if (w.fiber == nullptr) return;
  io::IoCompletion out = c;
  out.tag = w.user_tag;
  w.fiber->results[w.slot] = out;
  if (--w.fiber->remaining == 0) ready_.push_back(w.fiber);
}

io::IoCompletion Scheduler::await_io(const io::IoRequest& request) {
  return await_batch(std::span<const io::IoRequest>(&request, 1))[0];
}

std::vector<io::IoCompletion> Scheduler::await_batch(std::span<const io::IoRequest> requests) {
  Fiber& f = self();
  if (requests.empty()) return {};
  f.results.assign(requests.size(), io::IoCompletion{});
  f.remaining = requests.size();
  std::vector<std::uint64_t> staged_tags;
  try {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      make_room(requests[i].flags.link_timeout ? 2 : 1);
      io::IoRequest r = requests[i];
      r.tag = next_tag_++;
      ring_.enqueue(r);
      waiters_.emplace(r.tag, Waiter{&f, i, requests[i].tag});
      staged_tags.push_back(r.tag);
      ++queued_;
    }
  } catch (...) {
    for (auto t : staged_tags) waiters_.at(t).fiber = nullptr;
    f.remaining = 0;
    throw;
  }
  if (config_.policy == FlushPolicy::Immediate) flush();
  suspend(f, FiberState::AwaitingIo);
  return std::move(f.results);
}

void Scheduler::yield() {
  Fiber& f = self();
  ready_.push_back(&f);
  suspend(f, FiberState::Runnable);
}

void Scheduler::park(WaitQueue& queue) {
  Fiber& f = self();
  queue.waiters_.push_back(f.id);
  suspend(f, FiberState::Parked);
}

void Scheduler::wake_all(WaitQueue& queue) {
  for (FiberId id : queue.waiters_) {
    auto it = fibers_.find(id);
    if (it == fibers_.end() || it->second->state != FiberState::Parked) continue;
    it->second->state = FiberState::Runnable;
    ready_.push_back(it->second.get());
  }
  queue.waiters_.clear();
}

std::optional<FiberState> Scheduler::state(FiberId id) const {
  auto it = fibers_.find(id);
  if (it == fibers_.end()) {
    if (id < next_id_) return FiberState::Finished;
    return std::nullopt;
  }
  return it->second->state;
}

std::vector<FiberId> Scheduler::ready_queue() const {
  std::vector<FiberId> ids;
  for (const Fiber* f : ready_) ids.push_back(f->id);
  return ids;
}

SchedulerReport Scheduler::run() { return run([]() -> std::optional<Task> { return std::nullopt; }); }

SchedulerReport Scheduler::run(const TaskSource& source, RunLimits limits) {
  if (running_ != nullptr) raise(ErrorCode::InvalidRequest, "run() called from inside a fiber");
  CurrentGuard guard(this);
  bool exhausted = false;
  std::uint64_t spawned = 0;
  auto refill = [&] {
    while (!exhausted && fibers_.size() < config_.max_fibers) {
      if ((limits.max_tasks && spawned >= *limits.max_tasks) ||
          (limits.deadline && std::chrono::steady_clock::now() >= *limits.deadline)) {
        exhausted = true;
        break;
      }
      std::optional<Task> t = source();
      if (!t) {
        exhausted = true;
        break;
      }
      spawn(std::move(*t));
      ++spawned;
    }
  };
  refill();
  if (fibers_.empty() && inflight_ == 0 && queued_ == 0) return finish_report();

  for (;;) {
    ++report_.steps;
    for (std::size_t n = ready_.size(); n > 0 && !ready_.empty(); --n) {
      Fiber* f = ready_.front();
      ready_.pop_front();
      resume(*f);
      if (error_) {
        std::exception_ptr e = std::exchange(error_, nullptr);
        abandon();
        std::rethrow_exception(e);
      }
    }
    refill();
    maybe_flush();
    if (fibers_.empty() && queued_ == 0 && inflight_ == 0) break;
    if (ready_.empty() && inflight_ == 0 && queued_ == 0) {
      abandon();
      raise(ErrorCode::Deadlock, "fibers blocked with no runnable work and no I/O in flight");
    }
    if (inflight_ == 0) continue;
    std::size_t min = ready_.empty() ? 1 : 0;
    if (on_reap) on_reap(min, queued_, ready_.size());
    reaped_.clear();
    ring_.reap_into(reaped_, min, std::max<std::size_t>(inflight_, 1));
    ++report_.reap_calls;
    for (const io::IoCompletion& c : reaped_) dispatch(c);
  }
  return finish_report();
}

SchedulerReport Scheduler::finish_report() {
  report_.mean_batch_size = report_.flushes == 0 ? 0.0 : double(report_.submitted) / double(report_.flushes);
  return report_;
}

}  // namespace uring_engine::sched

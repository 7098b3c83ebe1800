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

#include <cerrno>
#include <deque>
#include <queue>
#include <unordered_map>

#include "backend.hpp"
#include "uring_engine/common/error.hpp"

namespace uring_engine::io::detail {

namespace {

/// Deterministic stand-in for a storage device. Requests run on unbounded
/// parallel channels (up to max_inflight) and complete at start + latency of
/// their kind, in virtual time. Data moves at completion time.
class SimBackend final : public RingBackend {
 public:
  SimBackend(const SimDeviceConfig& config, std::uint32_t sq, std::uint32_t cq)
      : config_(config), sq_capacity_(sq), cq_capacity_(cq) {}

  bool supports(const IoRequest& r) const override {
    if (is_socket_op(r.kind)) return false;
    return !(r.flags.multishot || r.flags.provided_buffer_ring || r.flags.zero_copy);
  }

  bool has_free_slots(std::size_t n) const override { return staged_.size() + n <= sq_capacity_; }

  void stage(const IoRequest& r) override { staged_.push_back(r); }

  std::size_t submit() override {
    const std::size_t n = staged_.size();
    if (n == 0) return 0;
    charge_submission_cpu();
    const std::uint64_t now = clock_.now_ns();
    std::optional<std::uint64_t> predecessor;
    for (IoRequest& r : staged_) {
      std::uint64_t id = next_id_++;
      bool linked = r.flags.link_to_next;
      ops_.emplace(id, Op{std::move(r), {}});
      if (predecessor) ops_.at(*predecessor).successor = id;
      else start(id, now);
      predecessor = linked ? std::optional<std::uint64_t>(id) : std::nullopt;
    }
    staged_.clear();
    outstanding_ += n;
    return n;
  }

  std::size_t reap(std::vector<IoCompletion>& out, std::size_t min, std::size_t max,
                   std::optional<std::chrono::microseconds> timeout) override {
    const std::uint64_t start_time = clock_.now_ns();
    deliver_until(clock_.now_ns());
    while (ready_.size() < min) {
      if (events_.empty()) {
        if (timeout) {
          clock_.advance(std::uint64_t(timeout->count()) * 1000);
          raise(ErrorCode::TimedOut, "no completion pending on simulated device");
        }
        raise(ErrorCode::InvalidRequest, "reap would block forever: nothing outstanding");
      }
      std::uint64_t next = events_.top().time;
      if (timeout && next > start_time + std::uint64_t(timeout->count()) * 1000) {
        clock_.advance_to(start_time + std::uint64_t(timeout->count()) * 1000);
        raise(ErrorCode::TimedOut, "fewer than min completions within timeout");
      }
      clock_.advance_to(next);
      deliver_until(next);
    }
    std::size_t n = 0;
    while (!ready_.empty() && n < max) {
      out.push_back(ready_.front());
      ready_.pop_front();
      ++n;
    }
    outstanding_ -= n;
    stats.completions += n;
    return n;
  }

  std::uint32_t sq_capacity() const override { return sq_capacity_; }
  std::uint32_t cq_capacity() const override { return cq_capacity_; }
  std::size_t staged() const override { return staged_.size(); }
  std::size_t outstanding() const override { return outstanding_; }
  VirtualClock* virtual_clock() override { return &clock_; }
  const SimDeviceConfig* sim_config() const override { return &config_; }

 private:
  struct Op {
    IoRequest request;
    std::optional<std::uint64_t> successor;
    bool timed_out = false;
  };
  struct Event {
    std::uint64_t time;
    std::uint64_t id;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : id > o.id; }
  };

  std::uint64_t latency_of(OpKind kind) const {
    switch (kind) {
      case OpKind::Read:
      case OpKind::NvmeRead: return std::uint64_t(config_.read_latency.count());
      case OpKind::Write:
      case OpKind::NvmeWrite: return std::uint64_t(config_.write_latency.count());
      case OpKind::Fsync:
      case OpKind::NvmeFlush: return std::uint64_t(config_.fsync_latency.count());
      default: return std::uint64_t(config_.nop_latency.count());
    }
  }

  void charge_submission_cpu() {
    if (!config_.cpu.enabled) return;
    std::uint64_t reads = 0, writes = 0;
    for (const IoRequest& r : staged_) {
      if (r.kind == OpKind::Read || r.kind == OpKind::NvmeRead) ++reads;
      if (r.kind == OpKind::Write || r.kind == OpKind::NvmeWrite) ++writes;
    }
    const SimCpuModel& m = config_.cpu;
    std::uint64_t cycles = reads * (reads == 1 ? m.read_single_cycles : m.read_batch_cycles) +
                           writes * (writes == 1 ? m.write_single_cycles : m.write_batch_cycles);
    clock_.spend_cycles(cycles, m.clock_hz);
  }

  void start(std::uint64_t id, std::uint64_t t) {
    if (config_.max_inflight != 0 && inflight_ >= config_.max_inflight) {
      waiting_.push_back(id);
      return;
    }
    ++inflight_;
    Op& op = ops_.at(id);
    std::uint64_t latency = latency_of(op.request.kind);
    if (op.request.flags.link_timeout) {
      auto limit = std::uint64_t(op.request.flags.link_timeout->count()) * 1000;
      if (limit < latency) {
        latency = limit;
        op.timed_out = true;
      }
    }
    events_.push(Event{t + latency, id});
  }

  void deliver_until(std::uint64_t t) {
    while (!events_.empty() && events_.top().time <= t) {
      Event e = events_.top();
      events_.pop();
      deliver(e);
    }
  }

  void deliver(const Event& e) {
    auto node = ops_.extract(e.id);
    Op& op = node.mapped();
    IoCompletion c;
    c.tag = op.request.tag;
    c.timestamp_ns = e.time;
    bool ok = true;
    if (op.timed_out) {
      c.error = ECANCELED;
      ok = false;
    } else {
      int res = transfer(op.request);
      if (res < 0) {
        c.error = -res;
        ok = false;
      } else {
        c.bytes = std::uint32_t(res);
        if (is_storage_transfer(op.request.kind) && std::size_t(res) < op.request.buffer.size()) ok = false;
      }
    }
    ready_.push_back(c);
    --inflight_;
    if (!waiting_.empty()) {
      std::uint64_t next = waiting_.front();
      waiting_.pop_front();
      start(next, e.time);
    }
    if (op.successor) {
      if (ok) start(*op.successor, e.time);
      else cancel_chain(*op.successor, e.time);
    }
  }

  void cancel_chain(std::uint64_t id, std::uint64_t t) {
    for (std::optional<std::uint64_t> cur = id; cur;) {
      auto node = ops_.extract(*cur);
      IoCompletion c;
      c.tag = node.mapped().request.tag;
      c.error = ECANCELED;
      c.timestamp_ns = t;
      ready_.push_back(c);
      cur = node.mapped().successor;
    }
  }

  static int transfer(const IoRequest& r) {
    if (r.target.fd < 0 || r.kind == OpKind::Nop || r.kind == OpKind::Fsync || r.kind == OpKind::NvmeFlush) {
      return is_storage_transfer(r.kind) ? int(r.buffer.size()) : 0;
    }
    IoRequest plain = r;
    if (r.kind == OpKind::NvmeRead) plain.kind = OpKind::Read;
    if (r.kind == OpKind::NvmeWrite) plain.kind = OpKind::Write;
    return execute_blocking(plain);
  }

  SimDeviceConfig config_;
  std::uint32_t sq_capacity_, cq_capacity_;
  VirtualClock clock_;
  std::vector<IoRequest> staged_;
  std::unordered_map<std::uint64_t, Op> ops_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::deque<std::uint64_t> waiting_;
  std::deque<IoCompletion> ready_;
  std::uint64_t next_id_ = 0;
  std::uint32_t inflight_ = 0;
  std::size_t outstanding_ = 0;
};

}  // namespace

std::unique_ptr<RingBackend> make_sim_backend(const SimDeviceConfig& config, std::uint32_t sq, std::uint32_t cq) {
  return std::make_unique<SimBackend>(config, sq, cq);
}

}  // namespace uring_engine::io::detail

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

#include "uring_engine/storage/io_executor.hpp"

#include <unordered_map>

#include "uring_engine/common/cycles.hpp"
#include "uring_engine/common/error.hpp"

namespace uring_engine::storage {

void spend_compute(io::Ring& ring, std::uint64_t cycles) {
  if (cycles == 0) return;
  if (io::VirtualClock* clock = ring.virtual_clock()) {
    clock->spend_cycles(cycles, ring.sim_config()->cpu.clock_hz);
    return;
  }
  spin_cycles(cycles);
}

io::IoCompletion SyncExecutor::execute(const io::IoRequest& request) {
  return execute_batch(std::span<const io::IoRequest>(&request, 1))[0];
}

std::vector<io::IoCompletion> SyncExecutor::execute_batch(std::span<const io::IoRequest> requests) {
  std::vector<io::IoCompletion> out(requests.size());
  if (requests.empty()) return out;
  std::unordered_map<std::uint64_t, std::size_t> slot;
  std::size_t pending = 0;
  auto drain = [&](std::size_t min) {
    scratch_.clear();
    ring_.reap_into(scratch_, min, pending);
    for (const io::IoCompletion& c : scratch_) {
      auto it = slot.find(c.tag);
      if (it == slot.end() || c.more_coming) continue;
      out[it->second] = c;
      out[it->second].tag = requests[it->second].tag;
      slot.erase(it);
      --pending;
    }
  };
  for (std::size_t i = 0; i < requests.size(); ++i) {
    std::size_t need = requests[i].flags.link_timeout ? 2 : 1;
    if (ring_.staged() + need > ring_.sq_capacity()) ring_.submit();
    io::IoRequest r = requests[i];
    r.tag = next_tag_++;
    ring_.enqueue(r);
    slot.emplace(r.tag, i);
    ++pending;
  }
  ring_.submit();
  ++suspensions_;
  while (pending > 0) drain(1);
  return out;
}

void SyncExecutor::park(sched::WaitQueue&) {
  raise(ErrorCode::Deadlock, "synchronous executor cannot wait for another task");
}

void SyncExecutor::compute(std::uint64_t cycles) { spend_compute(ring_, cycles); }

io::IoCompletion FiberExecutor::execute(const io::IoRequest& request) {
  ++suspensions_;
  return sched_.await_io(request);
}

std::vector<io::IoCompletion> FiberExecutor::execute_batch(std::span<const io::IoRequest> requests) {
  ++suspensions_;
  return sched_.await_batch(requests);
}

void FiberExecutor::park(sched::WaitQueue& queue) {
  ++suspensions_;
  sched_.park(queue);
}

void FiberExecutor::compute(std::uint64_t cycles) { spend_compute(sched_.ring(), cycles); }

}  // namespace uring_engine::storage

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
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "uring_engine/io/request.hpp"

namespace uring_engine::io {

enum class Backend { UringDefault, UringSqpoll, UringIopoll, UringPassthrough, PosixSync, Simulated };

std::string_view to_string(Backend backend) noexcept;
std::optional<Backend> parse_backend(std::string_view name) noexcept;

constexpr bool is_uring(Backend b) noexcept {
  return b == Backend::UringDefault || b == Backend::UringSqpoll || b == Backend::UringIopoll ||
         b == Backend::UringPassthrough;
}

inline constexpr std::uint32_t kMaxStorageRequestBytes = 512 * 1024;

struct RingConfig {
  Backend backend = Backend::UringDefault;
  std::uint32_t sq_depth = 128;
  std::uint32_t cq_depth = 0;  // 0 selects 2 x sq_depth
  bool defer_taskrun = true;
  bool coop_taskrun = false;
  bool single_issuer = true;
  std::uint32_t sqpoll_idle_ms = 1000;
  std::optional<int> sqpoll_cpu;
  std::uint32_t napi_busy_poll_us = 0;
  bool force_async_workers = false;
  bool auto_submit = false;  // submit staged requests instead of raising SqFull
  std::uint32_t max_storage_request_bytes = kMaxStorageRequestBytes;  // 0 = uncapped

  /// Valid defaults for `backend`: DeferTR + single issuer where the kernel
  /// allows it, plain single issuer for SQPoll.
  static RingConfig for_backend(Backend backend);
};

/// CPU cost charged to virtual time by the simulated backend at submit. Batch
/// prices apply when a submission carries more than one request of a kind.
struct SimCpuModel {
  bool enabled = false;
  double clock_hz = 3.7e9;
  std::uint64_t read_single_cycles = 10200;
  std::uint64_t read_batch_cycles = 5400;
  std::uint64_t write_single_cycles = 10200;
  std::uint64_t write_batch_cycles = 5700;
};

struct SimDeviceConfig {
  std::chrono::nanoseconds read_latency = std::chrono::microseconds(70);
  std::chrono::nanoseconds write_latency = std::chrono::microseconds(12);
  std::chrono::nanoseconds fsync_latency{0};
  std::chrono::nanoseconds nop_latency{0};
  std::uint32_t max_inflight = 0;  // 0 = unbounded
  SimCpuModel cpu;
};

/// Virtual time source of a simulated device. Nanosecond resolution.
class VirtualClock {
 public:
  std::uint64_t now_ns() const noexcept { return now_; }
  void advance(std::uint64_t ns) noexcept { now_ += ns; }
  void advance_to(std::uint64_t t) noexcept {
    if (t > now_) now_ = t;
  }
  /// Charges `cycles` of CPU work at `clock_hz`.
  void spend_cycles(std::uint64_t cycles, double clock_hz) noexcept {
    now_ += std::uint64_t(double(cycles) * 1e9 / clock_hz + 0.5);
  }

 private:
  std::uint64_t now_ = 0;
};

struct BufferTable {
  std::uint32_t count = 0;
};

struct FileTable {
  std::uint32_t count = 0;
  std::uint32_t generation = 0;
  FixedFile at(std::uint32_t index) const noexcept { return FixedFile{index, generation}; }
};

struct RingStats {
  std::uint64_t enqueued = 0;
  std::uint64_t submitted = 0;
  std::uint64_t submit_calls = 0;   // non-empty submissions
  std::uint64_t completions = 0;
  std::uint64_t kernel_enters = 0;  // syscalls into the ring (uring backends)
};

namespace detail {
class RingBackend;
}

/// Submission/completion ring over one of several backends. Confined to one
/// thread at a time; may be moved between threads but never shared.
class Ring {
 public:
  static Ring create(const RingConfig& config, const SimDeviceConfig& sim = {});

  Ring(Ring&&) noexcept;
  Ring& operator=(Ring&&) noexcept;
  ~Ring();

  /// Stages a request. Nothing reaches the backend before submit().
  Ticket enqueue(const IoRequest& request);

  /// Hands all staged requests to the backend in one transition.
  std::size_t submit();

  /// Returns between `min` and `max` completions. Throws TimedOut when fewer
  /// than `min` arrive within `timeout`; completions gathered so far are kept
  /// for the next call.
  std::vector<IoCompletion> reap(std::size_t min, std::size_t max,
                                 std::optional<std::chrono::microseconds> timeout = std::nullopt);

  /// Same as reap() but appends into `out`, returning the number appended.
  std::size_t reap_into(std::vector<IoCompletion>& out, std::size_t min, std::size_t max,
                        std::optional<std::chrono::microseconds> timeout = std::nullopt);

  BufferTable register_buffers(std::span<const std::span<std::byte>> regions);
  FileTable register_files(std::span<const int> fds);

  /// Installs a provided-buffer group for multishot / buffer-select receives:
  /// `storage` is cut into `count` buffers of `buffer_size` bytes, ids 0..count-1.
  void register_buffer_group(std::uint16_t group, std::span<std::byte> storage, std::uint32_t buffer_size);
  /// Returns buffer `id` of `group` to the kernel after the caller consumed it.
  void recycle_buffer(std::uint16_t group, std::uint16_t id);
  std::span<std::byte> group_buffer(std::uint16_t group, std::uint16_t id) const;

  const RingConfig& config() const noexcept { return config_; }
  std::uint32_t sq_capacity() const noexcept;
  std::uint32_t cq_capacity() const noexcept;
  std::size_t staged() const noexcept;
  /// Submitted requests whose final completion has not been reaped.
  std::size_t outstanding() const noexcept;
  const RingStats& stats() const noexcept;
  int native_fd() const noexcept;  // -1 unless backed by a kernel ring

  /// Non-null for the simulated backend.
  VirtualClock* virtual_clock() noexcept;
  const SimDeviceConfig* sim_config() const noexcept;

  /// Thread that first used the ring, and whether any other thread did since.
  std::thread::id owner_thread() const noexcept { return owner_; }
  bool shared_across_threads() const noexcept { return shared_; }

 private:
  Ring(RingConfig config, std::unique_ptr<detail::RingBackend> backend);
  void validate(const IoRequest& request) const;
  void note_thread() noexcept;

  RingConfig config_;
  std::unique_ptr<detail::RingBackend> backend_;
  std::uint64_t next_ticket_ = 0;
  std::vector<std::span<std::byte>> buffers_;
  std::uint32_t file_count_ = 0;
  std::uint32_t file_generation_ = 0;
  struct BufferGroupInfo {
    std::span<std::byte> storage;
    std::uint32_t buffer_size = 0;
  };
  std::map<std::uint16_t, BufferGroupInfo> groups_;
  std::thread::id owner_{};
  bool shared_ = false;
};

/// True when the running kernel accepts io_uring_setup.
bool uring_available() noexcept;

}  // namespace uring_engine::io

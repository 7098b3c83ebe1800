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
#include <deque>
#include <functional>
#include <string>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "uring_engine/common/aligned_buffer.hpp"
#include "uring_engine/storage/io_executor.hpp"
#include "uring_engine/storage/page_file.hpp"

namespace uring_engine::storage {

using FrameId = std::uint32_t;

enum class Intent { Read, Write };

enum class FrameStatus : std::uint8_t {
  Free,      // unmapped, on the free list
  Reserved,  // unmapped, held by a FrameReservation
  Loading,   // mapped, read in flight
  Resident,
  Writing,   // mapped, chosen as victim, write-back in flight
};

struct FrameMeta {
  std::optional<PageId> page;
  std::uint32_t pin_count = 0;
  bool ref_bit = false;
  bool dirty = false;
  FrameStatus status = FrameStatus::Free;

  friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

struct FrameRef {
  PageId page = 0;
  FrameId frame = 0;
  std::span<std::byte> data;
  bool missed = false;  // this fix issued the read
};

struct BufferPoolConfig {
  std::size_t frames = 0;
  std::size_t evict_batch_size = 8;
  /// Register pool memory with the ring and issue fixed-buffer I/O.
  bool register_buffers = false;
  /// Issue NVMe read/write commands instead of file reads/writes.
  bool nvme_commands = false;
  std::uint32_t nvme_nsid = 1;
  std::uint8_t nvme_lba_shift = 12;
};

struct BufferPoolStats {
  std::uint64_t fixes = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t reads = 0;   // read I/Os issued
  std::uint64_t writes = 0;  // write I/Os issued
  std::uint64_t evictions = 0;
  std::uint64_t write_batches = 0;
  std::uint64_t waits = 0;  // fixes that parked on a frame in transit

  friend bool operator==(const BufferPoolStats&, const BufferPoolStats&) = default;
};

class BufferPool;

/// Unmapped frames set aside for page allocations that must not suspend
/// (B-tree splits). Unused frames return to the free list on destruction.
class FrameReservation {
 public:
  FrameReservation() = default;
  FrameReservation(FrameReservation&& o) noexcept;
  FrameReservation& operator=(FrameReservation&& o) noexcept;
  ~FrameReservation();

  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }

 private:
  friend class BufferPool;
  void release() noexcept;
  BufferPool* pool_ = nullptr;
  std::vector<FrameId> frames_;
};

/// Metadata of the whole pool; used for snapshot/restore in exhaustive tests.
struct PoolState {
  std::vector<FrameMeta> frames;
  std::unordered_map<PageId, FrameId> table;
  std::deque<FrameId> free_list;
  std::size_t hand = 0;
  std::uint64_t page_count = 0;
  BufferPoolStats stats;
};

/// Fixed array of page frames with clock-sweep (second chance) replacement
/// and batched write-back of dirty victims.
class BufferPool {
 public:
  BufferPool(PageFile& file, IoExecutor& executor, BufferPoolConfig config);
  BufferPool(const BufferPool&) = delete;
  BufferPool& operator=(const BufferPool&) = delete;

  /// Pins `page`, loading it on a miss. Throws InvalidPage, PoolExhausted, IoError.
  FrameRef fix(PageId page, Intent intent = Intent::Read);
  /// Drops one pin; `dirty` is ORed into the frame. Throws NotFixed.
  void unfix(PageId page, bool dirty = false);

  /// Runs the clock for up to `k` victims, writes dirty ones back in one
  /// batch and frees them. Returns the number of frames freed.
  std::size_t evict_batch(std::size_t k);
  /// Writes every dirty frame back in batches. Throws PinnedRemain.
  std::size_t flush_all();

  /// Appends a new zeroed page to the file and pins it in a frame (dirty).
  FrameRef allocate_page();
  FrameRef allocate_page(FrameReservation& reservation);
  /// Obtains `n` unmapped frames, evicting as needed (may suspend).
  FrameReservation reserve(std::size_t n);

  // ---- introspection ----
  std::size_t frame_count() const noexcept { return meta_.size(); }
  const FrameMeta& frame(FrameId id) const { return meta_.at(id); }
  std::optional<FrameId> frame_of(PageId page) const;
  std::span<std::byte> frame_data(FrameId id);
  std::size_t clock_hand() const noexcept { return hand_; }
  const std::deque<FrameId>& free_list() const noexcept { return free_; }
  const BufferPoolStats& stats() const noexcept { return stats_; }
  const BufferPoolConfig& config() const noexcept { return config_; }
  PageFile& file() noexcept { return file_; }
  IoExecutor& executor() noexcept { return exec_; }
  std::size_t resident_pages() const noexcept { return table_.size(); }

  /// Invoked for every page unmapped by eviction (B-tree epoch hook).
  std::function<void(PageId)> on_evict;

  PoolState snapshot() const;
  /// Restores metadata captured by snapshot(); frame contents are not restored.
  void restore(const PoolState& state);
  /// Checks table/frame bijection and free-list consistency. Returns an
  /// error description, empty when consistent.
  std::string check_invariants() const;

 private:
  friend class FrameReservation;

  FrameId obtain_frame();
  /// A free frame, evicting a batch if needed; nullopt when nothing is evictable.
  std::optional<FrameId> try_obtain_frame();
  /// Parks until frames may have been released, or throws PoolExhausted
  /// when no other task could release any.
  void wait_for_frame();
  std::vector<FrameId> select_victims(std::size_t k);
  std::size_t evict_and_free(std::size_t k, std::optional<FrameId>* keep);
  io::IoRequest page_request(bool write, PageId page, FrameId frame, std::uint64_t tag);
  void return_frames(std::span<const FrameId> frames) noexcept;
  void wake_frame_waiters();

  PageFile& file_;
  IoExecutor& exec_;
  BufferPoolConfig config_;
  AlignedBuffer memory_;
  std::size_t region_bytes_ = 0;
  std::vector<FrameMeta> meta_;
  std::vector<sched::WaitQueue> waiters_;  // per frame, for Loading/Writing
  sched::WaitQueue frame_available_;
  std::unordered_map<PageId, FrameId> table_;
  std::deque<FrameId> free_;
  std::size_t hand_ = 0;
  std::size_t in_transit_ = 0;
  BufferPoolStats stats_;
};

}  // namespace uring_engine::storage

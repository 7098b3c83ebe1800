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

#include "uring_engine/storage/buffer_pool.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <utility>
#include <string>
#include <unordered_set>

#include "uring_engine/common/error.hpp"

namespace uring_engine::storage {

namespace {
constexpr std::size_t kMaxRegionBytes = std::size_t(256) << 20;
}

FrameReservation::FrameReservation(FrameReservation&& o) noexcept
    : pool_(std::exchange(o.pool_, nullptr)), frames_(std::move(o.frames_)) {}

FrameReservation& FrameReservation::operator=(FrameReservation&& o) noexcept {
  if (this != &o) {
    release();
    pool_ = std::exchange(o.pool_, nullptr);
    frames_ = std::move(o.frames_);
  }
  return *this;
}

FrameReservation::~FrameReservation() { release(); }

void FrameReservation::release() noexcept {
  if (pool_ != nullptr && !frames_.empty()) pool_->return_frames(frames_);
  frames_.clear();
}

BufferPool::BufferPool(PageFile& file, IoExecutor& executor, BufferPoolConfig config)
    : file_(file), exec_(executor), config_(config) {
  if (config_.frames == 0) raise(ErrorCode::ConfigError, "buffer pool needs at least one frame");
  if (config_.frames > std::numeric_limits<FrameId>::max()) raise(ErrorCode::ConfigError, "too many frames");
  const std::size_t page = file_.page_size();
  memory_ = AlignedBuffer(config_.frames * page, std::max<std::size_t>(page, 4096));
  meta_.resize(config_.frames);
  waiters_.resize(config_.frames);
  for (FrameId f = 0; f < config_.frames; ++f) free_.push_back(f);

  if (config_.register_buffers) {
    region_bytes_ = std::min(memory_.size(), kMaxRegionBytes / page * page);
    std::vector<std::span<std::byte>> regions;
    for (std::size_t off = 0; off < memory_.size(); off += region_bytes_)
      regions.push_back(memory_.span().subspan(off, std::min(region_bytes_, memory_.size() - off)));
    exec_.ring().register_buffers(regions);
  }
}

std::span<std::byte> BufferPool::frame_data(FrameId id) {
  const std::size_t page = file_.page_size();
  return memory_.span().subspan(std::size_t(id) * page, page);
}

std::optional<FrameId> BufferPool::frame_of(PageId page) const {
  auto it = table_.find(page);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

io::IoRequest BufferPool::page_request(bool write, PageId page, FrameId frame, std::uint64_t tag) {
  io::IoRequest r = write ? io::IoRequest::write(tag, file_.target(), file_.offset_of(page), frame_data(frame))
                          : io::IoRequest::read(tag, file_.target(), file_.offset_of(page), frame_data(frame));
  if (config_.nvme_commands) {
    r.kind = write ? io::OpKind::NvmeWrite : io::OpKind::NvmeRead;
    r.target.nsid = config_.nvme_nsid;
    r.target.lba_shift = config_.nvme_lba_shift;
  }
  if (config_.register_buffers) r.buffer_index = std::uint32_t(std::size_t(frame) * file_.page_size() / region_bytes_);
  return r;
}

FrameRef BufferPool::fix(PageId page, Intent) {
  if (page >= file_.page_count()) raise(ErrorCode::InvalidPage, "page " + std::to_string(page) + " beyond page count");
  ++stats_.fixes;
  bool missed = false;
  for (;;) {
    auto it = table_.find(page);
    if (it != table_.end()) {
      FrameId f = it->second;
      FrameMeta& m = meta_[f];
      if (m.status == FrameStatus::Loading || m.status == FrameStatus::Writing) {
        ++stats_.waits;
        exec_.park(waiters_[f]);
        continue;
      }
      ++m.pin_count;
      m.ref_bit = true;
      if (!missed) ++stats_.hits;
      return FrameRef{page, f, frame_data(f)};
    }
    if (!missed) {
      ++stats_.misses;
      missed = true;
    }
    FrameId f = obtain_frame();
    if (table_.count(page) != 0) {  // loaded by another task while we waited for a frame
      FrameId one[1] = {f};
      return_frames(one);
      continue;
    }
    FrameMeta& m = meta_[f];
    m = FrameMeta{page, 1, true, false, FrameStatus::Loading};
    table_[page] = f;
    ++in_transit_;
    ++stats_.reads;
    io::IoCompletion c;
    auto unmap = [&] {
      --in_transit_;
      table_.erase(page);
      FrameId one[1] = {f};
      return_frames(one);
      exec_.wake_all(waiters_[f]);
    };
    try {
      c = exec_.execute(page_request(false, page, f, page));
    } catch (...) {
      unmap();
      throw;
    }
    if (!c.ok() || c.bytes != file_.page_size()) {
      unmap();
      raise(ErrorCode::IoError, "read of page " + std::to_string(page) + " failed: " +
                                    (c.ok() ? "short read" : std::string(std::strerror(c.error))));
    }
    --in_transit_;
    m.status = FrameStatus::Resident;
    exec_.wake_all(waiters_[f]);
    return FrameRef{page, f, frame_data(f), true};
  }
}

void BufferPool::unfix(PageId page, bool dirty) {
  auto it = table_.find(page);
  if (it == table_.end()) raise(ErrorCode::NotFixed, "page " + std::to_string(page) + " is not mapped");
  FrameMeta& m = meta_[it->second];
  if (m.pin_count == 0) raise(ErrorCode::NotFixed, "page " + std::to_string(page) + " is not pinned");
  --m.pin_count;
  m.dirty = m.dirty || dirty;
  if (m.pin_count == 0) wake_frame_waiters();
}

std::vector<FrameId> BufferPool::select_victims(std::size_t k) {
  std::vector<FrameId> victims;
  const std::size_t n = meta_.size();
  for (std::size_t steps = 0; victims.size() < k && steps < 2 * n; ++steps) {
    FrameId i = FrameId(hand_);
    hand_ = (hand_ + 1) % n;
    FrameMeta& m = meta_[i];
    if (m.status != FrameStatus::Resident || m.pin_count > 0) continue;
    if (m.ref_bit) {
      m.ref_bit = false;
      continue;
    }
    m.status = FrameStatus::Writing;
    victims.push_back(i);
  }
  return victims;
}

std::size_t BufferPool::evict_and_free(std::size_t k, std::optional<FrameId>* keep) {
  std::vector<FrameId> victims = select_victims(k);
  if (victims.empty()) {
    if (keep != nullptr) return 0;
    raise(ErrorCode::PoolExhausted, "no evictable frame after two clock sweeps");
  }
  std::vector<io::IoRequest> writes;
  std::vector<FrameId> written;
  for (FrameId v : victims) {
    if (!meta_[v].dirty) continue;
    writes.push_back(page_request(true, *meta_[v].page, v, *meta_[v].page));
    written.push_back(v);
  }
  if (!writes.empty()) {
    in_transit_ += victims.size();
    ++stats_.write_batches;
    stats_.writes += writes.size();
    auto revert = [&] {
      in_transit_ -= victims.size();
      for (FrameId v : victims) {
        meta_[v].status = FrameStatus::Resident;
        exec_.wake_all(waiters_[v]);
      }
    };
    std::vector<io::IoCompletion> done;
    try {
      done = exec_.execute_batch(writes);
    } catch (...) {
      revert();
      throw;
    }
    bool failed = false;
    for (std::size_t i = 0; i < done.size(); ++i) {
      if (done[i].ok() && done[i].bytes == file_.page_size()) meta_[written[i]].dirty = false;
      else failed = true;
    }
    if (failed) {
      revert();
      raise(ErrorCode::IoError, "write-back of an eviction batch failed");
    }
    in_transit_ -= victims.size();
  }
  for (FrameId v : victims) {
    PageId page = *meta_[v].page;
    table_.erase(page);
    meta_[v] = FrameMeta{};
    ++stats_.evictions;
    if (on_evict) on_evict(page);
    exec_.wake_all(waiters_[v]);
  }
  std::size_t first = 0;
  if (keep != nullptr) {
    *keep = victims[0];
    first = 1;
  }
  for (std::size_t i = first; i < victims.size(); ++i) free_.push_back(victims[i]);
  if (victims.size() > first) wake_frame_waiters();
  return victims.size();
}

std::size_t BufferPool::evict_batch(std::size_t k) {
  if (k == 0) return 0;
  return evict_and_free(k, nullptr);
}

std::optional<FrameId> BufferPool::try_obtain_frame() {
  if (!free_.empty()) {
    FrameId f = free_.front();
    free_.pop_front();
    return f;
  }
  std::optional<FrameId> keep;
  evict_and_free(std::max<std::size_t>(config_.evict_batch_size, 1), &keep);
  if (!keep && !free_.empty()) {  // another task freed frames while we wrote back
    keep = free_.front();
    free_.pop_front();
  }
  return keep;
}

void BufferPool::wait_for_frame() {
  bool held = in_transit_ > 0;
  for (std::size_t i = 0; i < meta_.size() && !held; ++i)
    held = meta_[i].pin_count > 0 || meta_[i].status == FrameStatus::Reserved;
  if (!exec_.can_park() || !held) raise(ErrorCode::PoolExhausted, "no evictable frame after two clock sweeps");
  ++stats_.waits;
  exec_.park(frame_available_);
}

FrameId BufferPool::obtain_frame() {
  for (;;) {
    if (auto f = try_obtain_frame()) return *f;
    wait_for_frame();
  }
}

void BufferPool::return_frames(std::span<const FrameId> frames) noexcept {
  for (FrameId f : frames) {
    meta_[f] = FrameMeta{};
    free_.push_back(f);
  }
  wake_frame_waiters();
}

void BufferPool::wake_frame_waiters() {
  if (!frame_available_.empty()) exec_.wake_all(frame_available_);
}

std::size_t BufferPool::flush_all() {
  for (const FrameMeta& m : meta_) {
    if (m.pin_count > 0) raise(ErrorCode::PinnedRemain, "flush_all with pinned frames");
  }
  std::vector<io::IoRequest> writes;
  std::vector<FrameId> frames;
  for (FrameId f = 0; f < meta_.size(); ++f) {
    if (meta_[f].status == FrameStatus::Resident && meta_[f].dirty) {
      writes.push_back(page_request(true, *meta_[f].page, f, *meta_[f].page));
      frames.push_back(f);
    }
  }
  if (writes.empty()) return 0;
  ++stats_.write_batches;
  stats_.writes += writes.size();
  auto done = exec_.execute_batch(writes);
  for (std::size_t i = 0; i < done.size(); ++i) {
    if (!done[i].ok() || done[i].bytes != file_.page_size())
      raise(ErrorCode::IoError, "flush of page " + std::to_string(*meta_[frames[i]].page) + " failed");
    meta_[frames[i]].dirty = false;
  }
  return writes.size();
}

FrameReservation BufferPool::reserve(std::size_t n) {
  FrameReservation r;
  r.pool_ = this;
  for (;;) {
    while (r.frames_.size() < n) {
      auto f = try_obtain_frame();
      if (!f) break;
      meta_[*f].status = FrameStatus::Reserved;
      r.frames_.push_back(*f);
    }
    if (r.frames_.size() == n) return r;
    // Holding a partial set while waiting could deadlock against another reserver.
    r.release();
    wait_for_frame();
  }
}

FrameRef BufferPool::allocate_page(FrameReservation& reservation) {
  if (reservation.pool_ != this || reservation.frames_.empty())
    raise(ErrorCode::InvalidRequest, "reservation exhausted");
  FrameId f = reservation.frames_.back();
  reservation.frames_.pop_back();
  PageId page = file_.grow();
  std::memset(frame_data(f).data(), 0, file_.page_size());
  meta_[f] = FrameMeta{page, 1, true, true, FrameStatus::Resident};
  table_[page] = f;
  return FrameRef{page, f, frame_data(f)};
}

FrameRef BufferPool::allocate_page() {
  FrameReservation r = reserve(1);
  return allocate_page(r);
}

PoolState BufferPool::snapshot() const {
  return PoolState{meta_, table_, free_, hand_, file_.page_count(), stats_};
}

void BufferPool::restore(const PoolState& s) {
  meta_ = s.frames;
  table_ = s.table;
  free_ = s.free_list;
  hand_ = s.hand;
  file_.set_page_count(s.page_count);
  stats_ = s.stats;
  in_transit_ = 0;
}

std::string BufferPool::check_invariants() const {
  for (const auto& [page, f] : table_) {
    if (f >= meta_.size()) return "table points outside the pool";
    if (meta_[f].page != page) return "frame " + std::to_string(f) + " does not hold its table page";
  }
  std::size_t mapped = 0;
  for (FrameId f = 0; f < meta_.size(); ++f) {
    const FrameMeta& m = meta_[f];
    if (m.page) {
      ++mapped;
      auto it = table_.find(*m.page);
      if (it == table_.end() || it->second != f) return "mapped frame missing from table";
    } else if (m.pin_count > 0 || m.dirty) {
      return "unmapped frame pinned or dirty";
    }
  }
  if (mapped != table_.size()) return "table is not injective";
  std::unordered_set<FrameId> seen;
  for (FrameId f : free_) {
    if (!seen.insert(f).second) return "frame twice on the free list";
    if (meta_[f].page || meta_[f].status != FrameStatus::Free) return "free frame is mapped";
  }
  return {};
}

}  // namespace uring_engine::storage

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

#include <cstring>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "clock_model.hpp"
#include "memory_executor.hpp"
#include "test_util.hpp"
#include "uring_engine/io/ring.hpp"
#include "uring_engine/sched/scheduler.hpp"
#include "uring_engine/storage/buffer_pool.hpp"

using namespace uring_engine;
using namespace uring_engine::storage;

namespace {

void stamp(std::span<std::byte> data, std::uint64_t value) {
  for (std::size_t i = 0; i + 8 <= data.size(); i += 8) std::memcpy(data.data() + i, &value, 8);
}

std::uint64_t read_stamp(std::span<const std::byte> data) {
  std::uint64_t v;
  std::memcpy(&v, data.data(), 8);
  return v;
}

}  // namespace

TEST(BufferPool, RejectsZeroFrames) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  EXPECT_ERROR_CODE(BufferPool(file, exec, {.frames = 0}), ErrorCode::ConfigError);
}

TEST(BufferPool, FixBeyondPageCountIsInvalid) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  EXPECT_ERROR_CODE(pool.fix(4), ErrorCode::InvalidPage);
  EXPECT_EQ(exec.log.size(), 0u);
}

TEST(BufferPool, MissThenHit) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  auto a = pool.fix(3);
  EXPECT_EQ(a.page, 3u);
  EXPECT_EQ(a.frame, 0u);
  EXPECT_EQ(pool.stats().misses, 1u);
  auto b = pool.fix(3);
  EXPECT_EQ(b.frame, a.frame);
  EXPECT_EQ(pool.stats().hits, 1u);
  EXPECT_EQ(pool.frame(a.frame).pin_count, 2u);
  EXPECT_EQ(exec.log.size(), 1u);
  EXPECT_EQ(exec.log[0].offset, 4u * 4096);  // page 3 sits after the header page
}

TEST(BufferPool, UnfixErrors) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  EXPECT_ERROR_CODE(pool.unfix(1), ErrorCode::NotFixed);
  pool.fix(1);
  pool.unfix(1);
  EXPECT_ERROR_CODE(pool.unfix(1), ErrorCode::NotFixed);
}

TEST(BufferPool, DirtyIsOred) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  auto r = pool.fix(0);
  pool.unfix(0, true);
  pool.fix(0);
  pool.unfix(0, false);
  EXPECT_TRUE(pool.frame(r.frame).dirty);
}

TEST(BufferPool, PinnedFramesAreNeverVictims) {
  auto file = PageFile::detached(4096, 8);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 3});
  pool.fix(0);
  pool.fix(1);
  pool.fix(2);
  EXPECT_ERROR_CODE(pool.fix(3), ErrorCode::PoolExhausted);
  EXPECT_EQ(pool.resident_pages(), 3u);
  pool.unfix(1);
  pool.fix(3);  // second sweep takes frame 1 after clearing its bit
  EXPECT_FALSE(pool.frame_of(1).has_value());
  EXPECT_EQ(pool.frame_of(3), FrameId(1));
  EXPECT_EQ(pool.check_invariants(), "");
}

TEST(BufferPool, EvictBatchWritesDirtyVictimsTogether) {
  auto file = PageFile::detached(4096, 8);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 4, .evict_batch_size = 4});
  std::vector<PageId> evicted;
  pool.on_evict = [&](PageId p) { evicted.push_back(p); };
  for (PageId p = 0; p < 4; ++p) {
    pool.fix(p);
    pool.unfix(p, p % 2 == 0);
  }
  exec.log.clear();
  exec.batches = 0;
  EXPECT_EQ(pool.evict_batch(4), 4u);
  EXPECT_EQ(exec.batches, 1u);
  ASSERT_EQ(exec.log.size(), 2u);
  EXPECT_TRUE(exec.log[0].write);
  EXPECT_EQ(exec.log[0].offset, 1u * 4096);
  EXPECT_EQ(exec.log[1].offset, 3u * 4096);
  EXPECT_EQ(evicted, (std::vector<PageId>{0, 1, 2, 3}));
  EXPECT_EQ(pool.free_list().size(), 4u);
  EXPECT_EQ(pool.stats().write_batches, 1u);
}

TEST(BufferPool, MissWithFullPoolKeepsOneVictimAndFreesTheRest) {
  auto file = PageFile::detached(4096, 16);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 8, .evict_batch_size = 8});
  for (PageId p = 0; p < 8; ++p) {
    pool.fix(p);
    pool.unfix(p);
  }
  pool.fix(8);
  EXPECT_EQ(pool.resident_pages(), 1u);
  EXPECT_EQ(pool.free_list().size(), 7u);
}

TEST(BufferPool, EvictWithNothingEvictableIsExhausted) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  EXPECT_ERROR_CODE(pool.evict_batch(1), ErrorCode::PoolExhausted);
  EXPECT_EQ(pool.evict_batch(0), 0u);
}

TEST(BufferPool, FlushAllWithPinsFails) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  pool.fix(0);
  EXPECT_ERROR_CODE(pool.flush_all(), ErrorCode::PinnedRemain);
  pool.unfix(0, true);
  EXPECT_EQ(pool.flush_all(), 1u);
  EXPECT_EQ(pool.flush_all(), 0u);
}

TEST(BufferPool, ReadFailureLeavesPageUnmapped) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  exec.fail_reads = 1;
  EXPECT_ERROR_CODE(pool.fix(2), ErrorCode::IoError);
  EXPECT_FALSE(pool.frame_of(2).has_value());
  EXPECT_EQ(pool.free_list().size(), 2u);
  EXPECT_EQ(pool.check_invariants(), "");
  pool.fix(2);
}

TEST(BufferPool, WriteBackFailureKeepsVictimsDirty) {
  auto file = PageFile::detached(4096, 4);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 1});
  pool.fix(0);
  pool.unfix(0, true);
  exec.fail_writes = 1;
  EXPECT_ERROR_CODE(pool.fix(1), ErrorCode::IoError);
  ASSERT_EQ(pool.frame_of(0), FrameId(0));
  EXPECT_TRUE(pool.frame(0).dirty);
  EXPECT_EQ(pool.frame(0).status, FrameStatus::Resident);
  pool.fix(1);
  EXPECT_EQ(exec.store.count(file.offset_of(0)), 1u);
}

TEST(BufferPool, ReservationReturnsUnusedFrames) {
  auto file = PageFile::detached(4096, 0);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 4});
  {
    auto r = pool.reserve(3);
    EXPECT_EQ(r.size(), 3u);
    EXPECT_EQ(pool.free_list().size(), 1u);
    auto page = pool.allocate_page(r);
    EXPECT_EQ(page.page, 0u);
    EXPECT_EQ(file.page_count(), 1u);
    EXPECT_TRUE(pool.frame(page.frame).dirty);
    EXPECT_EQ(pool.frame(page.frame).pin_count, 1u);
  }
  EXPECT_EQ(pool.free_list().size(), 3u);
  EXPECT_EQ(pool.check_invariants(), "");
}

TEST(BufferPool, RoundTripThroughRealFile) {
  TempFile tmp;
  {
    auto file = PageFile::create(tmp.path(), 4096);
    auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync));
    SyncExecutor exec(ring);
    BufferPool pool(file, exec, {.frames = 2});
    for (int i = 0; i < 6; ++i) {
      auto r = pool.allocate_page();
      stamp(r.data, 1000 + r.page);
      pool.unfix(r.page, true);
    }
    pool.flush_all();
    file.write_header();
  }
  auto file = PageFile::open(tmp.path());
  EXPECT_EQ(file.page_count(), 6u);
  auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync));
  SyncExecutor exec(ring);
  BufferPool pool(file, exec, {.frames = 3});
  for (PageId p = 0; p < 6; ++p) {
    auto r = pool.fix(p);
    EXPECT_EQ(read_stamp(r.data), 1000 + p);
    pool.unfix(p);
  }
}

TEST(BufferPool, RegisteredBuffersCarryRegionIndex) {
  auto file = PageFile::detached(4096, 4);
  auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::Simulated));
  SyncExecutor exec(ring);
  BufferPool pool(file, exec, {.frames = 4, .register_buffers = true});
  pool.fix(0);
  pool.fix(1);
  EXPECT_EQ(ring.stats().submitted, 2u);
}

TEST(BufferPool, FlushAllMatchesShadowCopy) {
  std::mt19937_64 rng{7};
  const PageId pages = 40;
  auto file = PageFile::detached(512, pages);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 8, .evict_batch_size = 3});
  std::map<PageId, std::vector<std::byte>> shadow;
  for (int i = 0; i < 20000; ++i) {
    PageId p = rng() % pages;
    auto r = pool.fix(p);
    bool write = rng() % 3 == 0;
    if (write) {
      for (auto& b : r.data) b = std::byte(rng());
      shadow[p].assign(r.data.begin(), r.data.end());
    } else if (shadow.count(p)) {
      ASSERT_TRUE(std::equal(r.data.begin(), r.data.end(), shadow[p].begin())) << "page " << p;
    }
    pool.unfix(p, write);
  }
  pool.flush_all();
  for (auto& [p, bytes] : shadow) {
    auto it = exec.store.find(file.offset_of(p));
    ASSERT_NE(it, exec.store.end());
    EXPECT_EQ(it->second, bytes) << "page " << p;
  }
}

TEST(BufferPool, SnapshotRestoreRoundTrip) {
  auto file = PageFile::detached(4096, 8);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 3});
  pool.fix(0);
  auto s = pool.snapshot();
  pool.unfix(0, true);
  pool.fix(5);
  pool.restore(s);
  EXPECT_EQ(pool.frame(0).pin_count, 1u);
  EXPECT_FALSE(pool.frame_of(5).has_value());
  EXPECT_EQ(pool.stats(), s.stats);
}

TEST(BufferPool, ConcurrentFibersSeeConsistentPages) {
  io::SimDeviceConfig sim;
  sim.max_inflight = 4;
  auto cfg = io::RingConfig::for_backend(io::Backend::Simulated);
  auto ring = io::Ring::create(cfg, sim);
  const PageId pages = 32;
  TempFile tmp;
  auto file = PageFile::create(tmp.path(), 512);
  file.set_page_count(pages);
  ASSERT_EQ(::ftruncate(file.fd(), (pages + 1) * 512), 0);
  sched::Scheduler sched(ring, {.max_fibers = 16});
  FiberExecutor exec(sched);
  BufferPool pool(file, exec, {.frames = 6, .evict_batch_size = 2});
  // Pages start as zeros; a page's stamp counts how many times it was written.
  std::vector<std::uint64_t> expected(pages, 0);
  for (int f = 0; f < 16; ++f) {
    sched.spawn([&, f] {
      std::mt19937_64 rng{std::uint64_t(f)};
      for (int i = 0; i < 200; ++i) {
        PageId p = rng() % pages;
        auto r = pool.fix(p);
        ASSERT_EQ(read_stamp(r.data), expected[p]) << "page " << p;
        bool write = rng() & 1;
        if (write) stamp(r.data, ++expected[p]);
        pool.unfix(p, write);
      }
    });
  }
  sched.run();
  EXPECT_EQ(pool.check_invariants(), "");
  EXPECT_GT(pool.stats().waits, 0u);
  EXPECT_GT(pool.stats().evictions, 0u);
}

TEST(ClockOracle, ExhaustiveSmallPools) {
  for (std::size_t frames = 1; frames <= 3; ++frames) {
    for (std::size_t batch : {1, 2}) {
      auto r = clock_model::exhaustive(frames, 7, batch);
      EXPECT_EQ(r.first_mismatch, "") << "frames " << frames << " batch " << batch;
      EXPECT_GT(r.traces, 1u);
    }
  }
}

TEST(ClockOracle, RandomTraces) {
  auto r = clock_model::random_traces(3000, 64, 11);
  EXPECT_EQ(r.first_mismatch, "");
  EXPECT_EQ(r.traces, 3000u);
}

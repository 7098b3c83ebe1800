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

#include <unistd.h>

#include <cstring>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "memory_executor.hpp"
#include "test_util.hpp"
#include "uring_engine/io/ring.hpp"
#include "uring_engine/sched/scheduler.hpp"
#include "uring_engine/storage/btree.hpp"

using namespace uring_engine;
using namespace uring_engine::storage;

namespace {

std::vector<std::byte> value_for(std::uint64_t key, std::uint64_t version, std::size_t width) {
  std::vector<std::byte> v(width);
  std::mt19937_64 g{key * 1315423911u + version};
  for (auto& b : v) b = std::byte(g());
  return v;
}

struct MemTree {
  explicit MemTree(std::size_t frames, std::uint32_t width = 128, std::uint32_t page_size = 4096)
      : file(PageFile::detached(page_size)),
        pool(file, exec, {.frames = frames}),
        tree(BTree::create(pool, {.value_width = width})) {}
  MemoryExecutor exec;
  PageFile file;
  BufferPool pool;
  BTree tree;
};

}  // namespace

TEST(Fanout, Capacities) {
  EXPECT_EQ(leaf_capacity(4096, 128), 30u);  // (4096 - 16) / 136
  EXPECT_EQ(inner_capacity(4096), 254u);     // (4096 - 24) / 16
  EXPECT_EQ(bulk_page_count(0, 4096, 128), 1u);
  EXPECT_EQ(bulk_page_count(30, 4096, 128), 1u);
  EXPECT_EQ(bulk_page_count(31, 4096, 128), 3u);
  // 1000 tuples: 34 leaves under one root.
  EXPECT_EQ(bulk_page_count(1000, 4096, 128), 35u);
}

TEST(BTree, EmptyTreeLookupIsAbsent) {
  MemTree t(8);
  EXPECT_FALSE(t.tree.lookup(42).has_value());
  EXPECT_EQ(t.tree.check_structure(), "");
}

TEST(BTree, FirstUpsertMakesSingleLeaf) {
  MemTree t(8);
  EXPECT_EQ(t.tree.upsert(5, value_for(5, 0, 128)), UpsertResult::Inserted);
  EXPECT_EQ(t.tree.height(), 1u);
  EXPECT_EQ(t.tree.size(), 1u);
  EXPECT_EQ(*t.tree.lookup(5), value_for(5, 0, 128));
}

TEST(BTree, UpdateKeepsSize) {
  MemTree t(8);
  t.tree.upsert(5, value_for(5, 0, 128));
  EXPECT_EQ(t.tree.upsert(5, value_for(5, 1, 128)), UpsertResult::Updated);
  EXPECT_EQ(t.tree.size(), 1u);
  EXPECT_EQ(*t.tree.lookup(5), value_for(5, 1, 128));
}

TEST(BTree, RejectsWrongValueWidth) {
  MemTree t(8);
  EXPECT_ERROR_CODE(t.tree.upsert(1, value_for(1, 0, 64)), ErrorCode::InvalidRequest);
}

TEST(BTree, RejectsZeroValueWidth) {
  MemoryExecutor exec;
  auto file = PageFile::detached(4096);
  BufferPool pool(file, exec, {.frames = 4});
  EXPECT_ERROR_CODE(BTree::create(pool, {.value_width = 0}), ErrorCode::ConfigError);
}

TEST(BTree, SequentialInsertsSplit) {
  MemTree t(16);
  for (Key k = 0; k < 200; ++k) t.tree.upsert(k, value_for(k, 0, 128));
  EXPECT_GT(t.tree.stats().splits, 0u);
  EXPECT_GE(t.tree.height(), 2u);
  for (Key k = 0; k < 200; ++k) ASSERT_EQ(*t.tree.lookup(k), value_for(k, 0, 128)) << k;
  EXPECT_EQ(t.tree.check_structure(), "");
}

TEST(BTree, RandomOpsMatchOrderedMap) {
  // Small pages give a deep tree; a small pool forces eviction traffic.
  MemTree t(16, 24, 512);
  std::map<Key, std::vector<std::byte>> oracle;
  std::mt19937_64 rng{3};
  for (int i = 0; i < 10000; ++i) {
    Key k = rng() % 5000;
    auto v = value_for(k, i, 24);
    auto r = t.tree.upsert(k, v);
    EXPECT_EQ(r == UpsertResult::Inserted, oracle.count(k) == 0);
    oracle[k] = v;
  }
  for (int i = 0; i < 10000; ++i) {
    Key k = rng() % 6000;
    auto got = t.tree.lookup(k);
    auto it = oracle.find(k);
    ASSERT_EQ(got.has_value(), it != oracle.end()) << k;
    if (got) ASSERT_EQ(*got, it->second) << k;
  }
  EXPECT_EQ(t.tree.size(), oracle.size());
  EXPECT_EQ(t.tree.check_structure(), "");
  auto all = t.tree.scan();
  ASSERT_EQ(all.size(), oracle.size());
  std::size_t i = 0;
  for (auto& [k, v] : oracle) {
    EXPECT_EQ(all[i].first, k);
    EXPECT_EQ(all[i].second, v);
    ++i;
  }
  EXPECT_GT(t.pool.stats().evictions, 0u);
  EXPECT_GT(t.tree.height(), 2u);
}

TEST(BTree, UpdateModifiesInPlace) {
  MemTree t(8);
  t.tree.upsert(9, value_for(9, 0, 128));
  EXPECT_TRUE(t.tree.update(9, [](std::span<std::byte> v) { v[0] = std::byte(0xAB); }));
  EXPECT_EQ((*t.tree.lookup(9))[0], std::byte(0xAB));
  EXPECT_FALSE(t.tree.update(10, [](std::span<std::byte>) {}));
}

TEST(BTree, EpochBumpsOnSplitAndEviction) {
  MemTree t(4);
  const auto e0 = t.tree.epoch();
  for (Key k = 0; k < 30; ++k) t.tree.upsert(k, value_for(k, 0, 128));
  EXPECT_EQ(t.tree.epoch(), e0);  // one leaf holds 30 entries
  t.tree.upsert(30, value_for(30, 0, 128));
  EXPECT_EQ(t.tree.epoch(), e0 + 1);
  t.pool.evict_batch(1);
  EXPECT_EQ(t.tree.epoch(), e0 + 2);
}

TEST(BTree, SyncTraversalNeverRestarts) {
  MemTree t(8, 24, 512);
  for (Key k = 0; k < 3000; ++k) t.tree.upsert(k * 7 % 3001, value_for(k, 0, 24));
  for (Key k = 0; k < 3000; ++k) t.tree.lookup(k);
  EXPECT_EQ(t.tree.stats().restarts, 0u);
}

TEST(BTree, PersistsThroughFile) {
  TempFile tmp;
  std::map<Key, std::vector<std::byte>> oracle;
  {
    auto file = PageFile::create(tmp.path(), 4096);
    auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync));
    SyncExecutor exec(ring);
    BufferPool pool(file, exec, {.frames = 8});
    auto tree = BTree::create(pool, {.value_width = 100});
    std::mt19937_64 rng{5};
    for (int i = 0; i < 2000; ++i) {
      Key k = rng();
      oracle[k] = value_for(k, 0, 100);
      tree.upsert(k, oracle[k]);
    }
    pool.flush_all();
    tree.save_meta();
    file.write_header();
  }
  auto file = PageFile::open(tmp.path());
  auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync));
  SyncExecutor exec(ring);
  BufferPool pool(file, exec, {.frames = 8});
  auto tree = BTree::open(pool);
  EXPECT_EQ(tree.size(), oracle.size());
  for (auto& [k, v] : oracle) ASSERT_EQ(*tree.lookup(k), v);
  EXPECT_EQ(tree.check_structure(), "");
}

TEST(BTree, OpenRejectsFileWithoutTree) {
  auto file = PageFile::detached(4096, 1);
  MemoryExecutor exec;
  BufferPool pool(file, exec, {.frames = 2});
  EXPECT_ERROR_CODE(BTree::open(pool), ErrorCode::BadFormat);
}

TEST(BulkLoad, PageCountFollowsFanout) {
  TempFile tmp;
  auto file = PageFile::create(tmp.path(), 4096);
  bulk_load(file, 128, 1000, [](Key k, std::span<std::byte> v) { std::memcpy(v.data(), &k, 8); });
  EXPECT_EQ(file.page_count(), bulk_page_count(1000, 4096, 128));
  EXPECT_EQ(::lseek(file.fd(), 0, SEEK_END), off_t((file.page_count() + 1) * 4096));

  auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync));
  SyncExecutor exec(ring);
  BufferPool pool(file, exec, {.frames = 4});
  auto tree = BTree::open(pool);
  EXPECT_EQ(tree.size(), 1000u);
  EXPECT_EQ(tree.height(), 2u);
  EXPECT_EQ(tree.check_structure(), "");
  for (Key k = 0; k < 1000; ++k) {
    auto v = tree.lookup(k);
    ASSERT_TRUE(v);
    Key stored;
    std::memcpy(&stored, v->data(), 8);
    EXPECT_EQ(stored, k);
  }
  EXPECT_FALSE(tree.lookup(1000));
  tree.upsert(1000, std::vector<std::byte>(128));
  EXPECT_EQ(tree.check_structure(), "");
}

TEST(BulkLoad, ThreeLevels) {
  TempFile tmp;
  auto file = PageFile::create(tmp.path(), 512);
  const std::uint64_t n = 10000;
  bulk_load(file, 16, n, [](Key, std::span<std::byte> v) { std::memset(v.data(), 1, v.size()); });
  auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync));
  SyncExecutor exec(ring);
  BufferPool pool(file, exec, {.frames = 16});
  auto tree = BTree::open(pool);
  EXPECT_EQ(file.page_count(), bulk_page_count(n, 512, 16));
  EXPECT_EQ(tree.height(), 3u);
  EXPECT_EQ(tree.check_structure(), "");
}

namespace {

// Real file on a simulated ring so fibers suspend on every miss.
struct FiberTree {
  FiberTree(std::size_t frames, std::uint64_t tuples)
      : ring(io::Ring::create(io::RingConfig::for_backend(io::Backend::Simulated))),
        file(PageFile::create(tmp.path(), 512)),
        sched(ring, {.max_fibers = 32, .stack_bytes = 1 << 20}),
        exec(sched) {
    bulk_load(file, 16, tuples, [](Key k, std::span<std::byte> v) { std::memcpy(v.data(), &k, 8); });
    pool.emplace(file, exec, BufferPoolConfig{.frames = frames});
    tree.emplace(BTree::open(*pool));
  }
  TempFile tmp;
  io::Ring ring;
  PageFile file;
  sched::Scheduler sched;
  FiberExecutor exec;
  std::optional<BufferPool> pool;
  std::optional<BTree> tree;
};

}  // namespace

TEST(BTreeFibers, ForcedEpochBumpRestartsOnce) {
  FiberTree t(16, 1000);
  bool bumped = false;
  t.tree->after_suspend = [&] {
    if (!bumped) {
      bumped = true;
      t.tree->bump_epoch();
    }
  };
  std::optional<std::vector<std::byte>> got;
  t.sched.spawn([&] { got = t.tree->lookup(777); });
  t.sched.run();
  EXPECT_TRUE(bumped);
  EXPECT_EQ(t.tree->stats().restarts, 1u);
  ASSERT_TRUE(got);
  Key stored;
  std::memcpy(&stored, got->data(), 8);
  EXPECT_EQ(stored, 777u);
}

TEST(BTreeFibers, TooManyRestarts) {
  FiberTree t(2, 1000);  // every step misses, so every step suspends
  t.tree->after_suspend = [&] { t.tree->bump_epoch(); };
  t.sched.spawn([&] { EXPECT_ERROR_CODE(t.tree->lookup(5), ErrorCode::TooManyRestarts); });
  t.sched.run();
  EXPECT_EQ(t.tree->stats().restarts, 65u);
}

TEST(BTreeFibers, ConcurrentUpsertsMatchOracle) {
  FiberTree t(160, 2000);  // 16 fibers x (path pins + split reservation) fit
  std::map<Key, std::uint64_t> oracle;
  for (Key k = 0; k < 2000; ++k) oracle[k] = k;
  for (int f = 0; f < 16; ++f) {
    t.sched.spawn([&, f] {
      std::mt19937_64 rng{std::uint64_t(f) + 100};
      for (int i = 0; i < 300; ++i) {
        Key k = rng() % 6000;
        std::uint64_t v = rng();
        std::vector<std::byte> bytes(16);
        std::memcpy(bytes.data(), &v, 8);
        t.tree->upsert(k, bytes);
        oracle[k] = v;
        auto got = t.tree->lookup(rng() % 6000);
        (void)got;
      }
    });
  }
  t.sched.run();
  t.sched.spawn([&] {
    EXPECT_EQ(t.tree->check_structure(), "");
    EXPECT_EQ(t.tree->size(), oracle.size());
    for (auto& [k, v] : oracle) {
      auto got = t.tree->lookup(k);
      ASSERT_TRUE(got) << k;
      std::uint64_t stored;
      std::memcpy(&stored, got->data(), 8);
      ASSERT_EQ(stored, v) << k;
    }
  });
  t.sched.run();
  EXPECT_GT(t.tree->stats().restarts, 0u);
}

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
#include <fstream>
#include <iterator>
#include <map>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "uring_engine/io/ring.hpp"
#include "uring_engine/storage/btree.hpp"
#include "uring_engine/storage/io_executor.hpp"
#include "uring_engine/workload/ycsb.hpp"

using namespace uring_engine;
using namespace uring_engine::workload;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

WorkloadConfig small_config(const std::string& path) {
  WorkloadConfig c;
  c.path = path;
  c.tuples = 6000;  // 200 leaves of 30 entries
  c.ops = 3000;
  c.fibers = 16;
  c.pool_bytes = 80 * 4096;
  c.simulate = true;
  c.seed = 9;
  return c;
}

}  // namespace

TEST(Workload, ZeroValueWidthIsConfigError) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  c.value_width = 0;
  EXPECT_ERROR_CODE(load(c), ErrorCode::ConfigError);
}

TEST(Workload, ValidateRejectsBadFields) {
  WorkloadConfig c;
  c.update_fraction = 1.5;
  EXPECT_ERROR_CODE(validate(c), ErrorCode::ConfigError);
  c = {};
  c.page_size = 3000;
  EXPECT_ERROR_CODE(validate(c), ErrorCode::ConfigError);
  c = {};
  c.distribution = "zipf";
  EXPECT_ERROR_CODE(validate(c), ErrorCode::ConfigError);
  c = {};
  c.pool_bytes = 4096 * 10;
  EXPECT_ERROR_CODE(validate(c), ErrorCode::ConfigError);
}

TEST(Workload, LoadPageCountFollowsFanout) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  c.tuples = 1000;
  auto d = load(c);
  // ceil(1000 / floor(4080 / 136)) leaves plus one root.
  EXPECT_EQ(d.leaf_pages, 34u);
  EXPECT_EQ(d.page_count, 35u);
  EXPECT_EQ(d.height, 2u);
  EXPECT_EQ(read_file(tmp.path()).size(), (35u + 1) * 4096);
}

TEST(Workload, ReloadIsByteIdentical) {
  TempFile a, b;
  auto c = small_config(a.path());
  load(c);
  c.path = b.path();
  load(c);
  EXPECT_EQ(read_file(a.path()), read_file(b.path()));
  c.seed = 10;
  load(c);
  EXPECT_NE(read_file(a.path()), read_file(b.path()));
}

TEST(Workload, ZeroOpsGivesZeroMetrics) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  load(c);
  c.ops = 0;
  auto m = run(c, Variant::Fibers);
  EXPECT_EQ(m.tps, 0);
  EXPECT_EQ(m.ops, 0u);
  EXPECT_EQ(m.reads_issued, 0u);
}

TEST(Workload, VariantNames) {
  ASSERT_EQ(variant_ladder().size(), 9u);
  for (Variant v : variant_ladder()) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_EQ(to_string(Variant::BatchEvict), "+batch-evict");
  EXPECT_FALSE(parse_variant("turbo"));
  auto t = traits_of(Variant::BatchSubmit, false);
  EXPECT_TRUE(t.batch_evict && t.fibers);
  EXPECT_EQ(t.policy, sched::FlushPolicy::Adaptive);
  EXPECT_FALSE(t.reg_bufs);
}

TEST(Workload, UnsupportedVariants) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  load(c);
  EXPECT_ERROR_CODE(run(c, Variant::RegBufs), ErrorCode::VariantUnsupported);
  c.simulate = false;
  c.nvme_device = "";
  EXPECT_ERROR_CODE(run(c, Variant::Passthru), ErrorCode::VariantUnsupported);
  EXPECT_ERROR_CODE(run(c, Variant::Sqpoll), ErrorCode::VariantUnsupported);
}

TEST(Workload, SimulatedRunsAreDeterministic) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  for (Variant v : {Variant::UringSync, Variant::BatchSubmit}) {
    load(c);
    auto a = run(c, v);
    load(c);
    auto b = run(c, v);
    EXPECT_EQ(a.tps, b.tps) << to_string(v);
    EXPECT_EQ(a.page_fault_rate, b.page_fault_rate);
    EXPECT_EQ(a.reads_issued, b.reads_issued);
    EXPECT_EQ(a.writes_issued, b.writes_issued);
    EXPECT_EQ(a.mean_batch, b.mean_batch);
  }
}

TEST(Workload, FinalContentsMatchOperationStream) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  c.update_fraction = 0.6;
  load(c);
  auto m = run(c, Variant::BatchSubmit);
  ASSERT_EQ(m.ops, c.ops);

  std::map<std::uint64_t, std::uint64_t> increments;
  TxStream stream(c.seed, c.tuples, c.update_fraction);
  for (std::uint64_t i = 0; i < m.warmup_ops + m.ops; ++i) {
    Tx t = stream.next();
    if (t.update) ++increments[t.key];
  }

  auto file = storage::PageFile::open(c.path);
  auto ring = io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync));
  storage::SyncExecutor exec(ring);
  storage::BufferPool pool(file, exec, {.frames = 64});
  auto tree = storage::BTree::open(pool);
  std::vector<std::byte> initial(c.value_width), got(c.value_width);
  for (std::uint64_t k = 0; k < c.tuples; ++k) {
    initial_value(c.seed, k, initial);
    std::uint64_t base, now;
    std::memcpy(&base, initial.data(), 8);
    ASSERT_TRUE(tree.lookup_into(k, got));
    std::memcpy(&now, got.data(), 8);
    ASSERT_EQ(now - base, increments[k]) << "key " << k;
    ASSERT_EQ(std::memcmp(got.data() + 8, initial.data() + 8, c.value_width - 8), 0);
  }
}

TEST(Workload, FullyCachedPoolHasNoFaultsAfterWarmup) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  c.pool_bytes = 512 * 4096;
  load(c);
  auto m = run(c, Variant::BatchSubmit);
  EXPECT_EQ(m.page_fault_rate, 0.0);
  EXPECT_EQ(m.reads_issued, 0u);
  EXPECT_GT(m.warmup_ops, 0u);
}

TEST(Workload, ReadsTrackFaultRate) {
  TempFile tmp;
  auto c = small_config(tmp.path());
  c.ops = 20000;
  load(c);
  auto m = run(c, Variant::BatchEvict);
  EXPECT_GT(m.page_fault_rate, 0.3);
  // One leaf per transaction; inner pages stay resident.
  EXPECT_NEAR(double(m.reads_issued), m.page_fault_rate * double(m.ops), 0.05 * double(m.reads_issued));
}

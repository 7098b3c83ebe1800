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

#include "uring_engine/workload/ycsb.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>

#include "uring_engine/common/error.hpp"
#include "uring_engine/storage/btree.hpp"
#include "uring_engine/storage/buffer_pool.hpp"
#include "uring_engine/storage/io_executor.hpp"

namespace uring_engine::workload {

using storage::BTree;
using storage::BufferPool;
using storage::PageFile;

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::string_view kVariantNames[] = {"posix-sync",   "uring-sync", "+batch-evict",
                                              "+fibers",      "+batch-submit", "+reg-bufs",
                                              "+passthru",    "+iopoll",    "+sqpoll"};

}  // namespace

void validate(const WorkloadConfig& c) {
  auto bad = [](const std::string& m) { raise(ErrorCode::ConfigError, m); };
  if (c.value_width == 0) bad("value_width must be positive");
  if (c.tuples == 0) bad("tuples must be positive");
  if (!(c.update_fraction >= 0.0 && c.update_fraction <= 1.0)) bad("update_fraction must be in [0,1]");
  if (c.page_size < 512 || (c.page_size & (c.page_size - 1)) != 0) bad("page_size must be a power of two >= 512");
  if (storage::leaf_capacity(c.page_size, c.value_width) < 2) bad("value_width too large for page_size");
  if (c.distribution != "uniform") bad("only the uniform distribution is supported");
  if (c.fibers == 0) bad("fibers must be positive");
  if (c.evict_batch == 0) bad("evict_batch must be positive");
  // A lookup or update pins at most two pages at a time.
  if (c.pool_bytes / c.page_size < 2 * c.fibers + 2) bad("pool too small for the fiber count");
  if (c.duration_s && *c.duration_s <= 0) bad("duration must be positive");
}

void initial_value(std::uint64_t seed, std::uint64_t key, std::span<std::byte> out) {
  std::uint64_t state = seed ^ (key * 0xd1b54a32d192ed03ull);
  for (std::size_t i = 0; i < out.size(); i += 8) {
    std::uint64_t v = splitmix64(state);
    std::memcpy(out.data() + i, &v, std::min<std::size_t>(8, out.size() - i));
  }
}

DatabaseFiles plan(const WorkloadConfig& c) {
  validate(c);
  DatabaseFiles d;
  d.path = c.path;
  const std::uint64_t lc = storage::leaf_capacity(c.page_size, c.value_width);
  d.leaf_pages = std::max<std::uint64_t>(1, (c.tuples + lc - 1) / lc);
  d.page_count = storage::bulk_page_count(c.tuples, c.page_size, c.value_width);
  d.inner_pages = d.page_count - d.leaf_pages;
  std::uint64_t n = d.leaf_pages;
  d.height = 1;
  while (n > 1) {
    n = (n + storage::inner_capacity(c.page_size)) / (storage::inner_capacity(c.page_size) + 1);
    ++d.height;
  }
  d.file_bytes = (d.page_count + 1) * c.page_size;
  return d;
}

DatabaseFiles load(const WorkloadConfig& c) {
  DatabaseFiles d = plan(c);
  PageFile file = PageFile::create(c.path, c.page_size, false);
  storage::bulk_load(file, c.value_width, c.tuples,
                     [&](storage::Key k, std::span<std::byte> out) { initial_value(c.seed, k, out); });
  file.sync();
  return d;
}

std::string_view to_string(Variant v) noexcept { return kVariantNames[int(v)]; }

std::optional<Variant> parse_variant(std::string_view name) noexcept {
  for (int i = 0; i < 9; ++i)
    if (kVariantNames[i] == name) return Variant(i);
  return std::nullopt;
}

const std::vector<Variant>& variant_ladder() {
  static const std::vector<Variant> ladder = {Variant::PosixSync,   Variant::UringSync, Variant::BatchEvict,
                                              Variant::Fibers,      Variant::BatchSubmit, Variant::RegBufs,
                                              Variant::Passthru,    Variant::Iopoll,    Variant::Sqpoll};
  return ladder;
}

VariantTraits traits_of(Variant v, bool simulate) {
  VariantTraits t;
  const int level = int(v);
  t.backend = v == Variant::PosixSync ? io::Backend::PosixSync : io::Backend::UringDefault;
  t.batch_evict = level >= int(Variant::BatchEvict);
  t.fibers = level >= int(Variant::Fibers);
  t.policy = level >= int(Variant::BatchSubmit) ? sched::FlushPolicy::Adaptive : sched::FlushPolicy::Immediate;
  t.reg_bufs = level >= int(Variant::RegBufs);
  t.passthru = level >= int(Variant::Passthru);
  if (v == Variant::Passthru) t.backend = io::Backend::UringPassthrough;
  if (v == Variant::Iopoll) t.backend = io::Backend::UringIopoll;
  if (v == Variant::Sqpoll) t.backend = io::Backend::UringSqpoll;
  if (simulate) t.backend = io::Backend::Simulated;
  return t;
}

TxStream::TxStream(std::uint64_t seed, std::uint64_t tuples, double update_fraction)
    : rng_(seed), key_(0, tuples - 1), update_(update_fraction) {}

Tx TxStream::next() {
  Tx t;
  t.key = key_(rng_);
  t.update = update_(rng_);
  return t;
}

RunMetrics run(const WorkloadConfig& c, Variant variant) {
  validate(c);
  const VariantTraits traits = traits_of(variant, c.simulate);
  if (c.simulate && int(variant) > int(Variant::BatchSubmit))
    raise(ErrorCode::VariantUnsupported, std::string(to_string(variant)) + " has no simulated counterpart");
  if (traits.passthru) {
    struct stat st {};
    if (c.nvme_device.empty() || ::stat(c.nvme_device.c_str(), &st) != 0 || !S_ISCHR(st.st_mode))
      raise(ErrorCode::VariantUnsupported, std::string(to_string(variant)) + " needs an NVMe character device");
  }
  if (traits.backend != io::Backend::Simulated && traits.backend != io::Backend::PosixSync && !io::uring_available())
    raise(ErrorCode::VariantUnsupported, "io_uring is not available on this host");
  if (c.ops == 0 && !c.duration_s) return RunMetrics{};

  PageFile file = PageFile::open(c.path, c.direct_io && !c.simulate);
  io::RingConfig rc = io::RingConfig::for_backend(traits.backend);
  rc.sq_depth = c.ring_depth;
  io::Ring ring = io::Ring::create(rc, c.sim);

  std::optional<sched::Scheduler> sched;
  std::unique_ptr<storage::IoExecutor> exec;
  if (traits.fibers) {
    sched.emplace(ring, sched::SchedulerConfig{.max_fibers = c.fibers, .max_batch = c.max_batch, .policy = traits.policy});
    exec = std::make_unique<storage::FiberExecutor>(*sched);
  } else {
    exec = std::make_unique<storage::SyncExecutor>(ring);
  }
  storage::BufferPoolConfig pc;
  pc.frames = c.pool_bytes / c.page_size;
  pc.evict_batch_size = traits.batch_evict ? c.evict_batch : 1;
  pc.register_buffers = traits.reg_bufs;
  pc.nvme_commands = traits.passthru;
  BufferPool pool(file, *exec, pc);
  BTree tree = BTree::open(pool);
  if (tree.value_width() != c.value_width) raise(ErrorCode::ConfigError, "value_width differs from the loaded database");

  TxStream stream(c.seed, c.tuples, c.update_fraction);
  std::vector<std::byte> scratch(c.value_width);
  std::uint64_t faulted = 0;
  std::uint64_t done = 0;
  auto execute = [&](Tx t, std::vector<std::byte>& buf) {
    std::uint32_t faults = 0;
    if (t.update) {
      tree.update(
          t.key,
          [](std::span<std::byte> v) {
            std::uint64_t x;
            std::memcpy(&x, v.data(), 8);
            ++x;
            std::memcpy(v.data(), &x, 8);
          },
          &faults);
    } else {
      tree.lookup_into(t.key, buf, &faults);
    }
    exec->compute(c.compute_cycles_per_tx);
    if (faults > 0) ++faulted;
    ++done;
  };

  auto pool_warm = [&] { return pool.free_list().empty() || pool.resident_pages() >= file.page_count(); };

  RunMetrics m;
  // Warmup: the first full pool fill is not measured.
  if (c.warmup) {
    if (sched) {
      sched::Scheduler::TaskSource warm = [&]() -> std::optional<sched::Scheduler::Task> {
        if (pool_warm()) return std::nullopt;
        Tx t = stream.next();
        return [&, t] {
          std::vector<std::byte> buf(c.value_width);
          execute(t, buf);
        };
      };
      sched->run(warm);
    } else {
      while (!pool_warm()) execute(stream.next(), scratch);
    }
    m.warmup_ops = done;
  }

  const auto stats0 = pool.stats();
  const auto ring0 = ring.stats();
  const auto restarts0 = tree.stats().restarts;
  faulted = 0;
  done = 0;
  io::VirtualClock* vclock = ring.virtual_clock();
  const std::uint64_t v0 = vclock ? vclock->now_ns() : 0;
  const auto w0 = std::chrono::steady_clock::now();
  std::optional<std::chrono::steady_clock::time_point> deadline;
  if (c.duration_s)
    deadline = w0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(*c.duration_s));

  if (sched) {
    std::uint64_t issued = 0;
    sched::Scheduler::TaskSource source = [&]() -> std::optional<sched::Scheduler::Task> {
      if (!c.duration_s && issued >= c.ops) return std::nullopt;
      ++issued;
      Tx t = stream.next();
      return [&, t] {
        std::vector<std::byte> buf(c.value_width);
        execute(t, buf);
      };
    };
    sched::RunLimits limits;
    limits.deadline = deadline;
    sched->run(source, limits);
  } else {
    for (std::uint64_t i = 0; c.duration_s || i < c.ops; ++i) {
      if (deadline && (i & 63) == 0 && std::chrono::steady_clock::now() >= *deadline) break;
      execute(stream.next(), scratch);
    }
  }

  const auto w1 = std::chrono::steady_clock::now();
  m.ops = done;
  m.wall_time = std::chrono::duration<double>(w1 - w0).count();
  m.measured_time = vclock ? double(vclock->now_ns() - v0) / 1e9 : m.wall_time;
  m.tps = m.measured_time > 0 ? double(done) / m.measured_time : 0;
  m.page_fault_rate = done ? double(faulted) / double(done) : 0;
  m.reads_issued = pool.stats().reads - stats0.reads;
  m.writes_issued = pool.stats().writes - stats0.writes;
  const auto ring1 = ring.stats();
  const std::uint64_t calls = ring1.submit_calls - ring0.submit_calls;
  m.mean_batch = calls ? double(ring1.submitted - ring0.submitted) / double(calls) : 0;
  m.restarts = tree.stats().restarts - restarts0;

  // Persist updates so a later run or check sees them.
  if (sched) {
    sched->spawn([&] { pool.flush_all(); });
    sched->run();
  } else {
    pool.flush_all();
  }
  return m;
}

}  // namespace uring_engine::workload

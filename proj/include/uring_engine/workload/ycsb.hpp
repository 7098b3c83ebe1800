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
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "uring_engine/io/ring.hpp"
#include "uring_engine/sched/scheduler.hpp"

namespace uring_engine::workload {

struct WorkloadConfig {
  std::uint64_t tuples = 10'000'000;
  std::uint32_t value_width = 128;
  double update_fraction = 1.0;
  std::string distribution = "uniform";
  std::uint64_t ops = 1'000'000;
  std::optional<double> duration_s;  // stops spawning after this many wall seconds
  std::size_t fibers = 128;
  std::uint64_t pool_bytes = std::uint64_t(1) << 30;
  std::uint32_t page_size = 4096;
  std::uint64_t compute_cycles_per_tx = 0;
  std::uint64_t seed = 42;

  std::string path = "/tmp/uring-engine-ycsb.db";
  bool direct_io = false;
  std::size_t evict_batch = 8;
  std::size_t max_batch = 32;
  std::uint32_t ring_depth = 256;
  bool warmup = true;
  /// Serve page I/O from a simulated device (data still comes from `path`).
  bool simulate = false;
  io::SimDeviceConfig sim;
  /// NVMe generic character device for the passthrough variants.
  std::string nvme_device;
};

/// Throws ConfigError on out-of-range fields.
void validate(const WorkloadConfig& config);

struct DatabaseFiles {
  std::string path;
  std::uint64_t page_count = 0;
  std::uint32_t height = 0;
  std::uint64_t leaf_pages = 0;
  std::uint64_t inner_pages = 0;
  std::uint64_t file_bytes = 0;
};

/// Bulk-builds the tree of keys 0..tuples-1 with seeded values and writes the header.
DatabaseFiles load(const WorkloadConfig& config);
/// Shape of the tree load() would build, without writing anything.
DatabaseFiles plan(const WorkloadConfig& config);

/// Initial value of `key` for `seed`.
void initial_value(std::uint64_t seed, std::uint64_t key, std::span<std::byte> out);

/// Cumulative engine ladder; each step adds one technique to the previous.
enum class Variant { PosixSync, UringSync, BatchEvict, Fibers, BatchSubmit, RegBufs, Passthru, Iopoll, Sqpoll };

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> parse_variant(std::string_view name) noexcept;
const std::vector<Variant>& variant_ladder();

struct VariantTraits {
  io::Backend backend = io::Backend::UringDefault;
  bool batch_evict = false;
  bool fibers = false;
  sched::FlushPolicy policy = sched::FlushPolicy::Immediate;
  bool reg_bufs = false;
  bool passthru = false;
};
VariantTraits traits_of(Variant v, bool simulate);

struct RunMetrics {
  double tps = 0;
  double page_fault_rate = 0;  // transactions that issued at least one read
  std::uint64_t reads_issued = 0;
  std::uint64_t writes_issued = 0;
  double mean_batch = 0;  // requests per submission
  double wall_time = 0;   // seconds of real time in the measured phase
  double measured_time = 0;  // seconds tps is based on (virtual when simulated)
  std::uint64_t ops = 0;
  std::uint64_t warmup_ops = 0;
  std::uint64_t restarts = 0;
};

/// One transaction of the operation stream.
struct Tx {
  std::uint64_t key = 0;
  bool update = false;
};

/// Deterministic operation stream for a seed.
class TxStream {
 public:
  TxStream(std::uint64_t seed, std::uint64_t tuples, double update_fraction);
  Tx next();

 private:
  std::mt19937_64 rng_;
  std::uniform_int_distribution<std::uint64_t> key_;
  std::bernoulli_distribution update_;
};

/// Runs warmup (until the pool is full or the database is resident) and then
/// `ops` transactions. An update adds 1 to the value's first 8 bytes (little-endian).
/// Throws VariantUnsupported, ConfigError, IoError.
RunMetrics run(const WorkloadConfig& config, Variant variant);

}  // namespace uring_engine::workload

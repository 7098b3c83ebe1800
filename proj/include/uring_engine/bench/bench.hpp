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
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uring_engine/io/ring.hpp"

namespace uring_engine::bench {

/// One measurement. Skipped or unsupported configurations carry a metric of
/// the form "skipped:<reason>" or "unsupported:<reason>" and value 0.
struct ResultRow {
  std::string bench;
  std::string variant;
  std::string param;
  std::string metric;
  double value = 0;
  std::string host;
  std::string timestamp;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr std::string_view kCsvVersionLine = "# uring-engine-results v1";
inline constexpr std::string_view kCsvHeader = "bench,variant,param,metric,value,host,timestamp";

std::string host_name();
std::string utc_timestamp();
/// Host column for cycle metrics: host name plus the cycle source.
std::string host_with_clock();

/// Thread-safe row sink shared by a bench's workers.
class Collector {
 public:
  void add(ResultRow row);
  void add(std::string_view bench, std::string_view variant, std::string_view param, std::string_view metric,
           double value, bool cycle_metric = false);
  void skip(std::string_view bench, std::string_view variant, std::string_view param, std::string_view reason);
  std::vector<ResultRow> rows() const;

 private:
  mutable std::mutex mu_;
  std::vector<ResultRow> rows_;
};

std::string to_csv(const std::vector<ResultRow>& rows);
/// Throws ConfigError on a missing version line, wrong header or malformed row.
std::vector<ResultRow> parse_csv(std::string_view text);
std::string to_json(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_json(std::string_view text);

double median(std::vector<double> v);
double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

// ---------------------------------------------------------------------------

struct NopConfig {
  std::vector<std::uint32_t> batch_sizes{1, 2, 4, 8, 16, 32, 64};
  std::uint64_t iterations = 1'000'000;  // NOPs per batch size
  io::Backend backend = io::Backend::UringDefault;
};
/// cycles_per_op per batch size: median over rounds of (enqueue + submit + reap) / batch.
void bench_nop(const NopConfig& cfg, Collector& out);

struct WriteLatencyConfig {
  std::vector<std::uint32_t> batch_sizes{1, 8, 32, 64, 128};
  double target_iops = 100'000;
  std::string device = "/tmp/uring-engine-bench.dat";
  std::uint64_t requests = 8192;  // per batch size
  std::uint32_t block_size = 4096;
  std::uint64_t file_bytes = 64ull << 20;
  bool direct_io = true;
};
/// Paced (token bucket) write batches; mean_us and stddev_us per batch size.
void bench_write_latency(const WriteLatencyConfig& cfg, Collector& out);

struct BlockSizeConfig {
  std::vector<std::uint32_t> block_sizes{4096, 16384, 65536, 262144, 1048576};
  std::vector<std::string> modes{"default", "+reg-bufs", "+passthru", "+iopoll"};
  bool write = false;
  std::string device = "/tmp/uring-engine-bench.dat";
  std::string nvme_device;  // generic char device for +passthru
  std::uint64_t bytes_per_size = 256ull << 20;
  std::uint64_t file_bytes = 64ull << 20;
  std::uint32_t queue_depth = 8;
  std::uint32_t logical_block = 4096;
  bool direct_io = false;  // default mode; +iopoll always uses direct I/O
};
void bench_blocksize(const BlockSizeConfig& cfg, Collector& out);

struct DurableConfig {
  std::vector<std::string> variants{"write-then-fsync", "linked-write-fsync", "osync-write", "passthru-write-flush",
                                    "passthru-iopoll-write"};
  std::string device = "/tmp/uring-engine-bench.dat";
  std::string nvme_device;
  std::uint64_t iterations = 2000;
  std::uint32_t block_size = 4096;
  bool direct_io = false;
};
void bench_durable(const DurableConfig& cfg, Collector& out);

struct PingPongConfig {
  std::string transport = "tcp";  // tcp | udp
  std::vector<std::string> modes{"defer-tr", "defer-tr+reg-files", "defer-tr+reg-bufs", "defer-tr+napi",
                                 "sqpoll",   "sqpoll+reg-files",   "sqpoll+reg-bufs",   "sqpoll+napi"};
  std::uint32_t msg_bytes = 8;
  std::uint64_t exchanges = 10'000;
};
void bench_pingpong(const PingPongConfig& cfg, Collector& out);

struct MsgSizeConfig {
  bool recv_path = false;
  std::vector<std::string> variants;  // empty: default + zero-copy (send) or single-shot + multishot (recv)
  std::vector<std::uint32_t> msg_sizes{64, 256, 1024, 4096, 16384, 65536, 262144, 1048576};
  std::uint64_t bytes_per_size = 64ull << 20;
};
void bench_msgsize(const MsgSizeConfig& cfg, Collector& out);

/// Smallest size from which `candidate` beats `baseline` (lower cycles per
/// byte) at every larger size. Inputs are parallel to `sizes`.
std::optional<std::uint32_t> detect_crossover(const std::vector<std::uint32_t>& sizes,
                                              const std::vector<double>& baseline,
                                              const std::vector<double>& candidate);

/// Host capabilities as rows with metric "available" (1/0) or a value.
void doctor(Collector& out);
bool has_nvme_char_device();

}  // namespace uring_engine::bench

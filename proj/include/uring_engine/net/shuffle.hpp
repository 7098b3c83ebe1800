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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uring_engine::net {

using Key = std::uint64_t;

std::uint32_t crc32c(std::span<const std::byte> data, std::uint32_t seed = 0) noexcept;

/// Node owning `key`. Stable across processes and builds.
std::uint32_t partition_of(Key key, std::uint32_t nodes) noexcept;

// ---------------------------------------------------------------------------
// Wire format: 24-byte little-endian header followed by the payload.

inline constexpr std::uint32_t kChunkMagic = 0x55525348;  // "URSH"
inline constexpr std::uint16_t kChunkVersion = 1;
inline constexpr std::size_t kChunkHeaderBytes = 24;
inline constexpr std::uint16_t kChunkFlagEndOfStream = 1;

struct ChunkHeader {
  std::uint32_t magic = kChunkMagic;
  std::uint16_t version = kChunkVersion;
  std::uint16_t flags = 0;
  std::uint16_t source_node = 0;
  std::uint16_t partition = 0;
  std::uint32_t tuple_count = 0;
  std::uint32_t payload_len = 0;
  std::uint32_t crc = 0;

  friend bool operator==(const ChunkHeader&, const ChunkHeader&) = default;
};

void write_header(std::span<std::byte> out, const ChunkHeader& h) noexcept;
/// Parses a header. Throws Truncated (short input) or BadMagic.
ChunkHeader read_header(std::span<const std::byte> in);

/// Frames `tuples` (tuple_count x tuple_width bytes). Fills payload_len,
/// tuple_count and crc; the other fields come from `meta`.
std::vector<std::byte> encode_chunk(const ChunkHeader& meta, std::span<const std::byte> tuples,
                                    std::size_t tuple_width);

struct DecodedChunk {
  ChunkHeader header;
  std::span<const std::byte> payload;
  std::size_t frame_bytes = 0;
};

/// Decodes the frame at the front of `bytes`. Throws Truncated when the frame
/// is incomplete, BadMagic, or CrcMismatch. A nonzero `tuple_width` also
/// checks payload_len against the tuple count (Truncated on disagreement).
DecodedChunk decode_chunk(std::span<const std::byte> bytes, std::size_t tuple_width = 0);

// ---------------------------------------------------------------------------

struct Morsel {
  std::uint64_t start = 0;
  std::uint64_t len = 0;
};

inline constexpr std::uint64_t kDefaultMorselTuples = 16384;

/// Hands out disjoint ranges of [0, total) to concurrent callers.
class MorselCursor {
 public:
  explicit MorselCursor(std::uint64_t total, std::uint64_t morsel_len = kDefaultMorselTuples);
  std::optional<Morsel> next() noexcept;
  std::uint64_t total() const noexcept { return total_; }

 private:
  std::uint64_t total_;
  std::uint64_t len_;
  std::atomic<std::uint64_t> cursor_{0};
};

// ---------------------------------------------------------------------------

struct TupleRef {
  Key key = 0;
  const std::byte* tuple = nullptr;
};

/// Partitioned open-addressing hash table. Entries point at tuple storage
/// owned by the caller. Partition p belongs to owner p % owners; only that
/// owner may insert into it.
class ProbeTable {
 public:
  ProbeTable(std::uint32_t partitions, std::size_t expected_entries, std::uint32_t owners,
             double max_load = 0.75);

  std::uint32_t partitions() const noexcept { return std::uint32_t(parts_.size()); }
  std::uint32_t partition_for(Key key) const noexcept;
  std::uint32_t owner_of(std::uint32_t partition) const noexcept { return partition % owners_; }

  /// Hashes the whole batch, then inserts. Validates ownership and capacity
  /// for the batch before touching the table (OwnershipViolation, TableFull).
  void insert_batch(std::uint32_t owner, std::span<const TupleRef> batch);
  void insert(std::uint32_t owner, TupleRef t) { insert_batch(owner, {&t, 1}); }

  const std::byte* find(Key key) const noexcept;
  std::vector<const std::byte*> find_all(Key key) const;
  std::size_t size() const noexcept;
  std::size_t partition_size(std::uint32_t p) const noexcept { return parts_[p].used; }

 private:
  struct Slot {
    Key key = 0;
    const std::byte* tuple = nullptr;
  };
  struct Partition {
    std::vector<Slot> slots;
    std::size_t used = 0;
  };
  std::vector<Partition> parts_;
  std::uint32_t owners_;
  std::size_t limit_;  // max entries per partition
};

// ---------------------------------------------------------------------------

enum class ShuffleBackend { Ring, Readiness };

std::string_view to_string(ShuffleBackend b) noexcept;
std::optional<ShuffleBackend> parse_shuffle_backend(std::string_view name) noexcept;

struct ShuffleConfig {
  std::uint32_t nodes = 1;
  std::uint32_t node_id = 0;
  std::uint32_t workers = 1;
  std::uint32_t tuple_width = 64;
  std::uint32_t chunk_bytes = 1 << 20;  // payload capacity per chunk
  std::uint64_t table_bytes = 64 << 20;  // input generated on this node
  ShuffleBackend backend = ShuffleBackend::Ring;
  bool zero_copy_send = false;
  bool zero_copy_recv = false;
  bool multishot_recv = false;
  bool poll_first = false;
  bool build_probe_table = false;
  std::uint64_t seed = 1;

  /// host:port of every node's listener, indexed by node id. Unused with one node.
  std::vector<std::string> peers;
  /// Worker w runs on cpus[w % size]; empty leaves placement to the OS.
  std::vector<int> cpus;
  std::uint32_t inflight_chunks = 4;
  std::uint64_t morsel_tuples = kDefaultMorselTuples;
  std::uint32_t connect_timeout_ms = 20000;
  std::uint32_t stall_timeout_ms = 60000;

  void validate() const;  // ConfigError
  std::uint64_t tuples_per_node() const noexcept { return table_bytes / tuple_width; }
  /// Everything the peers must agree on, as a canonical string.
  std::string fingerprint() const;
};

/// Order-independent digest of a tuple multiset.
struct PartitionChecksum {
  std::uint64_t sum = 0;
  std::uint64_t count = 0;

  void add(std::span<const std::byte> tuple) noexcept;
  void merge(const PartitionChecksum& o) noexcept {
    sum += o.sum;
    count += o.count;
  }
  friend bool operator==(const PartitionChecksum&, const PartitionChecksum&) = default;
};

/// Deterministic tuple `index` of node `node`'s input. The key occupies the
/// first eight bytes.
Key tuple_key(std::uint64_t seed, std::uint32_t node, std::uint64_t index) noexcept;
void generate_tuple(std::uint64_t seed, std::uint32_t node, std::uint64_t index, std::span<std::byte> out) noexcept;

/// Checks that for every partition p the senders' contributions add up to
/// what node p received. Throws ChecksumMismatch naming the first bad partition.
void verify_checksums(const std::vector<std::vector<PartitionChecksum>>& sent_by_node,
                      const std::vector<PartitionChecksum>& received_by_node);

struct ShuffleReport {
  std::vector<std::uint64_t> egress_bytes;   // per peer node, wire bytes
  std::vector<std::uint64_t> ingress_bytes;  // per peer node
  double runtime_s = 0;
  std::vector<PartitionChecksum> sent;   // this node's contribution per partition
  PartitionChecksum received;            // what arrived for this node's partition
  std::vector<PartitionChecksum> global; // verified per-partition totals
  std::uint64_t tuples_sent = 0;         // generated and routed, local included
  std::uint64_t tuples_received = 0;     // landed here, local included
  std::uint64_t local_tuples = 0;
  std::uint64_t chunks_sent = 0;
  std::uint64_t probe_entries = 0;
  bool verified = false;
  std::vector<std::string> annotations;
};

/// Runs this node's side of the all-to-all shuffle. Blocks until every node
/// has finished and the checksums were cross-checked.
/// Throws ConfigMismatch, PeerDisconnected, PeerUnreachable, ChecksumMismatch.
ShuffleReport shuffle_run(const ShuffleConfig& config);

}  // namespace uring_engine::net

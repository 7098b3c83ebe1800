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

#include <nmmintrin.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

#include "uring_engine/common/error.hpp"
#include "uring_engine/net/shuffle.hpp"

namespace uring_engine::net {
namespace {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint32_t range_reduce(std::uint64_t h, std::uint32_t n) noexcept {
  return std::uint32_t((static_cast<unsigned __int128>(h) * n) >> 64);
}

template <typename T>
T load_le(const std::byte* p) noexcept {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;  // little-endian hosts only (x86-64, aarch64)
}
template <typename T>
void store_le(std::byte* p, T v) noexcept {
  std::memcpy(p, &v, sizeof v);
}

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ 0x82F63B78u : c >> 1;
    t[i] = c;
  }
  return t;
}

__attribute__((target("sse4.2"))) std::uint32_t crc32c_hw(const std::byte* p, std::size_t n,
                                                         std::uint32_t crc) noexcept {
  std::uint64_t c = crc;
  while (n >= 8) {
    c = _mm_crc32_u64(c, load_le<std::uint64_t>(p));
    p += 8;
    n -= 8;
  }
  auto c32 = std::uint32_t(c);
  while (n-- > 0) c32 = _mm_crc32_u8(c32, std::uint8_t(*p++));
  return c32;
}

std::uint32_t crc32c_sw(const std::byte* p, std::size_t n, std::uint32_t crc) noexcept {
  static const auto table = make_crc_table();
  while (n-- > 0) crc = table[(crc ^ std::uint8_t(*p++)) & 0xff] ^ (crc >> 8);
  return crc;
}

}  // namespace

std::uint32_t crc32c(std::span<const std::byte> data, std::uint32_t seed) noexcept {
  static const bool hw = __builtin_cpu_supports("sse4.2");
  std::uint32_t crc = ~seed;
  crc = hw ? crc32c_hw(data.data(), data.size(), crc) : crc32c_sw(data.data(), data.size(), crc);
  return ~crc;
}

std::uint32_t partition_of(Key key, std::uint32_t nodes) noexcept {
  if (nodes <= 1) return 0;
  return range_reduce(mix64(key), nodes);
}

void write_header(std::span<std::byte> out, const ChunkHeader& h) noexcept {
  std::byte* p = out.data();
  store_le(p + 0, h.magic);
  store_le(p + 4, h.version);
  store_le(p + 6, h.flags);
  store_le(p + 8, h.source_node);
  store_le(p + 10, h.partition);
  store_le(p + 12, h.tuple_count);
  store_le(p + 16, h.payload_len);
  store_le(p + 20, h.crc);
}

ChunkHeader read_header(std::span<const std::byte> in) {
  if (in.size() < kChunkHeaderBytes) raise(ErrorCode::Truncated, "chunk header incomplete");
  const std::byte* p = in.data();
  ChunkHeader h;
  h.magic = load_le<std::uint32_t>(p + 0);
  if (h.magic != kChunkMagic) raise(ErrorCode::BadMagic, "chunk magic mismatch");
  h.version = load_le<std::uint16_t>(p + 4);
  h.flags = load_le<std::uint16_t>(p + 6);
  h.source_node = load_le<std::uint16_t>(p + 8);
  h.partition = load_le<std::uint16_t>(p + 10);
  h.tuple_count = load_le<std::uint32_t>(p + 12);
  h.payload_len = load_le<std::uint32_t>(p + 16);
  h.crc = load_le<std::uint32_t>(p + 20);
  return h;
}

std::vector<std::byte> encode_chunk(const ChunkHeader& meta, std::span<const std::byte> tuples,
                                    std::size_t tuple_width) {
  if (tuple_width == 0 || tuples.size() % tuple_width != 0)
    raise(ErrorCode::ConfigError, "payload is not a whole number of tuples");
  if (tuples.size() > 0xffffffffu) raise(ErrorCode::ConfigError, "payload above 4 GiB");
  ChunkHeader h = meta;
  h.magic = kChunkMagic;
  h.tuple_count = std::uint32_t(tuples.size() / tuple_width);
  h.payload_len = std::uint32_t(tuples.size());
  h.crc = crc32c(tuples);
  std::vector<std::byte> out(kChunkHeaderBytes + tuples.size());
  write_header(out, h);
  if (!tuples.empty()) std::memcpy(out.data() + kChunkHeaderBytes, tuples.data(), tuples.size());
  return out;
}

DecodedChunk decode_chunk(std::span<const std::byte> bytes, std::size_t tuple_width) {
  DecodedChunk d;
  d.header = read_header(bytes);
  d.frame_bytes = kChunkHeaderBytes + d.header.payload_len;
  if (bytes.size() < d.frame_bytes) raise(ErrorCode::Truncated, "chunk payload incomplete");
  if (tuple_width != 0 && std::uint64_t(d.header.tuple_count) * tuple_width != d.header.payload_len)
    raise(ErrorCode::Truncated, "payload_len disagrees with tuple_count x tuple_width");
  d.payload = bytes.subspan(kChunkHeaderBytes, d.header.payload_len);
  if (crc32c(d.payload) != d.header.crc) raise(ErrorCode::CrcMismatch, "chunk payload checksum mismatch");
  return d;
}

// ---------------------------------------------------------------------------

MorselCursor::MorselCursor(std::uint64_t total, std::uint64_t morsel_len)
    : total_(total), len_(std::max<std::uint64_t>(1, morsel_len)) {}

std::optional<Morsel> MorselCursor::next() noexcept {
  std::uint64_t start = cursor_.fetch_add(len_, std::memory_order_relaxed);
  if (start >= total_) return std::nullopt;
  return Morsel{start, std::min(len_, total_ - start)};
}

// ---------------------------------------------------------------------------

ProbeTable::ProbeTable(std::uint32_t partitions, std::size_t expected_entries, std::uint32_t owners,
                       double max_load)
    : owners_(owners) {
  if (partitions == 0 || owners == 0) raise(ErrorCode::ConfigError, "probe table needs partitions and owners");
  if (!(max_load > 0 && max_load < 1)) raise(ErrorCode::ConfigError, "max_load must be in (0, 1)");
  std::size_t per = (expected_entries + partitions - 1) / partitions;
  // Headroom for hash skew between partitions.
  per = per + per / 4 + 16;
  std::size_t slots = std::bit_ceil(std::size_t(double(per) / max_load) + 1);
  limit_ = std::size_t(double(slots) * max_load);
  parts_.resize(partitions);
  for (auto& p : parts_) p.slots.resize(slots);
}

std::uint32_t ProbeTable::partition_for(Key key) const noexcept {
  return range_reduce(mix64(key ^ 0x5bd1e9955bd1e995ULL), partitions());
}

void ProbeTable::insert_batch(std::uint32_t owner, std::span<const TupleRef> batch) {
  struct Pending {
    std::uint32_t part;
    std::size_t slot;
  };
  std::vector<Pending> plan(batch.size());
  std::vector<std::size_t> adds;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::uint32_t p = partition_for(batch[i].key);
    if (owner_of(p) != owner)
      raise(ErrorCode::OwnershipViolation, "tuple belongs to partition " + std::to_string(p) +
                                               " owned by worker " + std::to_string(owner_of(p)));
    const auto& slots = parts_[p].slots;
    plan[i] = {p, std::size_t(mix64(batch[i].key)) & (slots.size() - 1)};
    __builtin_prefetch(&slots[plan[i].slot], 1);
  }
  {
    std::vector<std::size_t> per(parts_.size(), 0);
    for (const auto& pl : plan) ++per[pl.part];
    for (std::size_t p = 0; p < parts_.size(); ++p)
      if (parts_[p].used + per[p] > limit_)
        raise(ErrorCode::TableFull, "partition " + std::to_string(p) + " over its load bound");
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Partition& part = parts_[plan[i].part];
    std::size_t mask = part.slots.size() - 1;
    std::size_t s = plan[i].slot;
    while (part.slots[s].tuple != nullptr) s = (s + 1) & mask;
    part.slots[s] = Slot{batch[i].key, batch[i].tuple};
    ++part.used;
  }
}

const std::byte* ProbeTable::find(Key key) const noexcept {
  const Partition& part = parts_[partition_for(key)];
  std::size_t mask = part.slots.size() - 1;
  for (std::size_t s = std::size_t(mix64(key)) & mask;; s = (s + 1) & mask) {
    const Slot& slot = part.slots[s];
    if (slot.tuple == nullptr) return nullptr;
    if (slot.key == key) return slot.tuple;
  }
}

std::vector<const std::byte*> ProbeTable::find_all(Key key) const {
  std::vector<const std::byte*> out;
  const Partition& part = parts_[partition_for(key)];
  std::size_t mask = part.slots.size() - 1;
  for (std::size_t s = std::size_t(mix64(key)) & mask;; s = (s + 1) & mask) {
    const Slot& slot = part.slots[s];
    if (slot.tuple == nullptr) return out;
    if (slot.key == key) out.push_back(slot.tuple);
  }
}

std::size_t ProbeTable::size() const noexcept {
  std::size_t n = 0;
  for (const auto& p : parts_) n += p.used;
  return n;
}

// ---------------------------------------------------------------------------

void PartitionChecksum::add(std::span<const std::byte> tuple) noexcept {
  Key key = load_le<std::uint64_t>(tuple.data());
  std::uint64_t crc = crc32c(tuple);
  sum += mix64(key ^ (crc << 32) ^ crc ^ (std::uint64_t(tuple.size()) << 48));
  ++count;
}

Key tuple_key(std::uint64_t seed, std::uint32_t node, std::uint64_t index) noexcept {
  return mix64(seed * 0x9e3779b97f4a7c15ULL + (std::uint64_t(node) << 44) + index);
}

void generate_tuple(std::uint64_t seed, std::uint32_t node, std::uint64_t index, std::span<std::byte> out) noexcept {
  std::uint64_t key = tuple_key(seed, node, index);
  std::size_t words = out.size() / 8;
  std::byte* p = out.data();
  store_le(p, key);
  std::uint64_t w = key;
  for (std::size_t i = 1; i < words; ++i) {
    w += 0x9e3779b97f4a7c15ULL;
    store_le(p + 8 * i, w);
  }
  std::size_t tail = out.size() - words * 8;
  if (tail != 0) {
    w += 0x9e3779b97f4a7c15ULL;
    std::memcpy(p + words * 8, &w, tail);
  }
}

void verify_checksums(const std::vector<std::vector<PartitionChecksum>>& sent_by_node,
                      const std::vector<PartitionChecksum>& received_by_node) {
  for (std::size_t p = 0; p < received_by_node.size(); ++p) {
    PartitionChecksum expect;
    for (const auto& sender : sent_by_node) {
      if (sender.size() != received_by_node.size())
        raise(ErrorCode::ChecksumMismatch, "sender reported a different partition count");
      expect.merge(sender[p]);
    }
    if (!(expect == received_by_node[p]))
      raise(ErrorCode::ChecksumMismatch,
            "partition " + std::to_string(p) + ": sent " + std::to_string(expect.count) + " tuples, received " +
                std::to_string(received_by_node[p].count));
  }
}

std::string_view to_string(ShuffleBackend b) noexcept {
  return b == ShuffleBackend::Ring ? "ring" : "readiness";
}

std::optional<ShuffleBackend> parse_shuffle_backend(std::string_view name) noexcept {
  if (name == "ring") return ShuffleBackend::Ring;
  if (name == "readiness" || name == "epoll") return ShuffleBackend::Readiness;
  return std::nullopt;
}

void ShuffleConfig::validate() const {
  auto bad = [](const std::string& m) { raise(ErrorCode::ConfigError, m); };
  if (nodes == 0 || nodes > 65535) bad("nodes must be in [1, 65535]");
  if (node_id >= nodes) bad("node_id must be below nodes");
  if (workers == 0) bad("workers must be at least 1");
  if (tuple_width < 64 || tuple_width > 4096) bad("tuple_width must be in [64, 4096]");
  if (chunk_bytes < tuple_width) bad("chunk_bytes must hold at least one tuple");
  if (chunk_bytes > (64u << 20)) bad("chunk_bytes above 64 MiB");
  if (inflight_chunks == 0) bad("inflight_chunks must be at least 1");
  if (morsel_tuples == 0) bad("morsel_tuples must be at least 1");
  if (nodes > 1 && peers.size() != nodes) bad("peers must list one host:port per node");
}

std::string ShuffleConfig::fingerprint() const {
  std::string s;
  auto put = [&](std::string_view k, std::uint64_t v) {
    s += k;
    s += '=';
    s += std::to_string(v);
    s += ';';
  };
  put("nodes", nodes);
  put("workers", workers);
  put("tuple_width", tuple_width);
  put("chunk_bytes", chunk_bytes);
  put("table_bytes", table_bytes);
  put("backend", std::uint64_t(backend));
  put("zc_send", zero_copy_send);
  put("zc_recv", zero_copy_recv);
  put("multishot", multishot_recv);
  put("poll_first", poll_first);
  put("probe", build_probe_table);
  put("seed", seed);
  put("inflight", inflight_chunks);
  put("morsel", morsel_tuples);
  return s;
}

}  // namespace uring_engine::net

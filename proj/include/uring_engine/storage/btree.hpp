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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uring_engine/storage/buffer_pool.hpp"

namespace uring_engine::storage {

using Key = std::uint64_t;

inline constexpr std::size_t kNodeHeaderBytes = 16;
inline constexpr PageId kNoPage = ~PageId(0);

enum class NodeKind : std::uint16_t { Leaf = 1, Inner = 2 };

/// Entries per leaf: 8-byte key plus `value_width` bytes each.
constexpr std::size_t leaf_capacity(std::size_t page_size, std::size_t value_width) {
  return (page_size - kNodeHeaderBytes) / (8 + value_width);
}
/// Separator keys per inner node (children = keys + 1).
constexpr std::size_t inner_capacity(std::size_t page_size) {
  return (page_size - kNodeHeaderBytes - 8) / 16;
}

/// Pages of a tree bulk-built from `tuples` sorted keys with full nodes.
std::uint64_t bulk_page_count(std::uint64_t tuples, std::size_t page_size, std::size_t value_width);

struct BTreeConfig {
  std::uint32_t value_width = 128;
  std::uint32_t max_restarts = 64;
};

enum class UpsertResult { Inserted, Updated };

struct BTreeStats {
  std::uint64_t restarts = 0;
  std::uint64_t splits = 0;
  std::uint64_t traversals = 0;
};

/// Views a node page. Layout: kind u16, count u16, pad u32, next-leaf u64,
/// then leaf entries (key, value) or inner keys[cap] followed by children[cap + 1].
class NodeView {
 public:
  NodeView(std::span<std::byte> page, std::size_t value_width);

  NodeKind kind() const;
  void set_kind(NodeKind k);
  std::size_t count() const;
  void set_count(std::size_t n);
  PageId next_leaf() const;
  void set_next_leaf(PageId p);

  std::size_t capacity() const;
  Key key(std::size_t i) const;
  void set_key(std::size_t i, Key k);
  std::span<std::byte> value(std::size_t i);
  PageId child(std::size_t i) const;
  void set_child(std::size_t i, PageId p);

  /// First index whose key is >= k.
  std::size_t lower_bound(Key k) const;
  /// Child index covering k in an inner node.
  std::size_t child_index(Key k) const;

 private:
  std::byte* entry(std::size_t i) const;
  std::span<std::byte> page_;
  std::size_t value_width_;
};

/// B+tree of fixed-width entries over a buffer pool. One tree per page file;
/// its root and shape live in the file's meta area.
class BTree {
 public:
  /// Starts an empty tree (a single leaf root) in an empty file.
  static BTree create(BufferPool& pool, BTreeConfig config);
  /// Attaches to a tree previously saved with save_meta(). Throws BadFormat.
  static BTree open(BufferPool& pool, std::uint32_t max_restarts = 64);

  BTree(BTree&&) = default;

  UpsertResult upsert(Key key, std::span<const std::byte> value);
  std::optional<std::vector<std::byte>> lookup(Key key);
  /// Copies the value into `out`. Returns false when absent. `faults`, when
  /// given, receives the number of page reads this call issued.
  bool lookup_into(Key key, std::span<std::byte> out, std::uint32_t* faults = nullptr);
  /// Runs `modify` on the stored value in place. Returns false when absent.
  bool update(Key key, const std::function<void(std::span<std::byte>)>& modify, std::uint32_t* faults = nullptr);

  /// Writes root/height/size into the file meta area (header page is
  /// rewritten by PageFile::write_header()).
  void save_meta();

  std::uint64_t epoch() const noexcept { return *epoch_; }
  void bump_epoch() noexcept { ++*epoch_; }
  const BTreeStats& stats() const noexcept { return stats_; }
  PageId root() const noexcept { return root_; }
  std::uint32_t height() const noexcept { return height_; }
  std::uint64_t size() const noexcept { return size_; }
  std::uint32_t value_width() const noexcept { return value_width_; }
  BufferPool& pool() noexcept { return *pool_; }

  /// Called after a traversal step that suspended, before the epoch check.
  std::function<void()> after_suspend;

  /// Walks the whole tree; returns a description of the first violated
  /// structural invariant, empty when none. Needs a quiescent pool.
  std::string check_structure();
  /// All entries left to right via the leaf chain.
  std::vector<std::pair<Key, std::vector<std::byte>>> scan();

 private:
  BTree(BufferPool& pool, std::uint32_t value_width, std::uint32_t max_restarts);

  template <typename Fn>
  bool visit_leaf(Key key, bool write, std::uint32_t* faults, Fn&& fn);
  void restart_or_throw(std::uint32_t& restarts);
  void split_and_insert(std::vector<PageId>& path, Key key, std::span<const std::byte> value,
                        FrameReservation& reservation);

  BufferPool* pool_;
  std::uint32_t value_width_;
  std::uint32_t max_restarts_;
  PageId root_ = 0;
  std::uint32_t height_ = 1;
  std::uint64_t size_ = 0;
  std::unique_ptr<std::uint64_t> epoch_;  // stable address for the eviction hook
  BTreeStats stats_;
};

/// Writes a tree of keys 0..tuples-1 directly to `file` with full nodes:
/// leaves first, then each inner level. `value_of(key, out)` fills values.
/// Deterministic for a deterministic `value_of`.
void bulk_load(PageFile& file, std::uint32_t value_width, std::uint64_t tuples,
               const std::function<void(Key, std::span<std::byte>)>& value_of);

}  // namespace uring_engine::storage

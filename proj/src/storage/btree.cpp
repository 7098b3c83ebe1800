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

#include "uring_engine/storage/btree.hpp"

#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "uring_engine/common/aligned_buffer.hpp"
#include "uring_engine/common/error.hpp"

namespace uring_engine::storage {

namespace {

constexpr char kTreeMagic[4] = {'B', 'T', 'R', 'E'};

template <typename T>
T load(const std::byte* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
template <typename T>
void store(std::byte* p, T v) {
  std::memcpy(p, &v, sizeof v);
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

std::uint64_t bulk_page_count(std::uint64_t tuples, std::size_t page_size, std::size_t value_width) {
  std::uint64_t n = std::max<std::uint64_t>(1, ceil_div(tuples, leaf_capacity(page_size, value_width)));
  std::uint64_t total = n;
  while (n > 1) {
    n = ceil_div(n, inner_capacity(page_size) + 1);
    total += n;
  }
  return total;
}

// ---- NodeView ----

NodeView::NodeView(std::span<std::byte> page, std::size_t value_width) : page_(page), value_width_(value_width) {}

NodeKind NodeView::kind() const { return NodeKind(load<std::uint16_t>(page_.data())); }
void NodeView::set_kind(NodeKind k) { store(page_.data(), std::uint16_t(k)); }
std::size_t NodeView::count() const { return load<std::uint16_t>(page_.data() + 2); }
void NodeView::set_count(std::size_t n) { store(page_.data() + 2, std::uint16_t(n)); }
PageId NodeView::next_leaf() const { return load<PageId>(page_.data() + 8); }
void NodeView::set_next_leaf(PageId p) { store(page_.data() + 8, p); }

std::size_t NodeView::capacity() const {
  return kind() == NodeKind::Leaf ? leaf_capacity(page_.size(), value_width_) : inner_capacity(page_.size());
}

std::byte* NodeView::entry(std::size_t i) const { return page_.data() + kNodeHeaderBytes + i * (8 + value_width_); }

Key NodeView::key(std::size_t i) const {
  if (kind() == NodeKind::Leaf) return load<Key>(entry(i));
  return load<Key>(page_.data() + kNodeHeaderBytes + i * 8);
}

void NodeView::set_key(std::size_t i, Key k) {
  if (kind() == NodeKind::Leaf) store(entry(i), k);
  else store(page_.data() + kNodeHeaderBytes + i * 8, k);
}

std::span<std::byte> NodeView::value(std::size_t i) { return {entry(i) + 8, value_width_}; }

PageId NodeView::child(std::size_t i) const {
  return load<PageId>(page_.data() + kNodeHeaderBytes + inner_capacity(page_.size()) * 8 + i * 8);
}
void NodeView::set_child(std::size_t i, PageId p) {
  store(page_.data() + kNodeHeaderBytes + inner_capacity(page_.size()) * 8 + i * 8, p);
}

std::size_t NodeView::lower_bound(Key k) const {
  std::size_t lo = 0, hi = count();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (key(mid) < k) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}

std::size_t NodeView::child_index(Key k) const {
  std::size_t lo = 0, hi = count();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (key(mid) <= k) lo = mid + 1;
    else hi = mid;
  }
  return lo;
}

// ---- BTree ----

BTree::BTree(BufferPool& pool, std::uint32_t value_width, std::uint32_t max_restarts)
    : pool_(&pool), value_width_(value_width), max_restarts_(max_restarts), epoch_(std::make_unique<std::uint64_t>(0)) {
  pool.on_evict = [e = epoch_.get()](PageId) { ++*e; };
}

BTree BTree::create(BufferPool& pool, BTreeConfig config) {
  if (config.value_width == 0) raise(ErrorCode::ConfigError, "value_width must be positive");
  if (leaf_capacity(pool.file().page_size(), config.value_width) < 2)
    raise(ErrorCode::ConfigError, "value_width too large for the page size");
  BTree t(pool, config.value_width, config.max_restarts);
  FrameRef r = pool.allocate_page();
  NodeView n(r.data, t.value_width_);
  n.set_kind(NodeKind::Leaf);
  n.set_count(0);
  n.set_next_leaf(kNoPage);
  pool.unfix(r.page, true);
  t.root_ = r.page;
  t.height_ = 1;
  t.save_meta();
  return t;
}

BTree BTree::open(BufferPool& pool, std::uint32_t max_restarts) {
  auto m = pool.file().meta();
  if (std::memcmp(m.data(), kTreeMagic, 4) != 0) raise(ErrorCode::BadFormat, "page file holds no tree");
  auto width = load<std::uint32_t>(m.data() + 4);
  if (width == 0) raise(ErrorCode::BadFormat, "tree value width is zero");
  BTree t(pool, width, max_restarts);
  t.root_ = load<PageId>(m.data() + 8);
  t.height_ = load<std::uint32_t>(m.data() + 16);
  t.size_ = load<std::uint64_t>(m.data() + 20);
  if (t.root_ >= pool.file().page_count()) raise(ErrorCode::BadFormat, "tree root beyond page count");
  return t;
}

void BTree::save_meta() {
  auto m = pool_->file().meta();
  std::memcpy(m.data(), kTreeMagic, 4);
  store(m.data() + 4, value_width_);
  store(m.data() + 8, root_);
  store(m.data() + 16, height_);
  store(m.data() + 20, size_);
}

void BTree::restart_or_throw(std::uint32_t& restarts) {
  ++stats_.restarts;
  if (++restarts > max_restarts_)
    raise(ErrorCode::TooManyRestarts, "traversal restarted " + std::to_string(restarts - 1) + " times");
}

namespace {

struct Pinned {
  PageId page;
  std::span<std::byte> data;
};

}  // namespace

// Descends from the root to the leaf covering `key`. With `keep_path` every
// node stays pinned, otherwise only the leaf. Returns false (nothing pinned)
// when a suspension coincided with an epoch change.
template <typename Path>
static bool descend(BufferPool& pool, std::uint64_t& epoch, const std::function<void()>& hook, PageId root,
                    Key key, bool keep_path, std::uint32_t value_width, Path& path, std::uint32_t* faults) {
  IoExecutor& ex = pool.executor();
  const std::uint64_t start_epoch = epoch;
  PageId page = root;
  auto release = [&] {
    for (auto& p : path) pool.unfix(p.page);
    path.clear();
  };
  try {
    for (;;) {
      const std::uint64_t before = ex.suspensions();
      FrameRef r = pool.fix(page);
      path.push_back({r.page, r.data});
      if (faults != nullptr && r.missed) ++*faults;
      if (ex.can_park() && ex.suspensions() != before) {
        if (hook) hook();
        if (epoch != start_epoch) {
          release();
          return false;
        }
      }
      if (!keep_path && path.size() > 1) {
        pool.unfix(path.front().page);
        path.erase(path.begin());
      }
      NodeView n(r.data, value_width);
      if (n.kind() == NodeKind::Leaf) return true;
      page = n.child(n.child_index(key));
    }
  } catch (...) {
    release();
    throw;
  }
}

template <typename Fn>
bool BTree::visit_leaf(Key key, bool write, std::uint32_t* faults, Fn&& fn) {
  std::uint32_t restarts = 0;
  for (;;) {
    ++stats_.traversals;
    std::vector<Pinned> path;
    if (!descend(*pool_, *epoch_, after_suspend, root_, key, false, value_width_, path, faults)) {
      restart_or_throw(restarts);
      continue;
    }
    NodeView leaf(path.back().data, value_width_);
    std::size_t pos = leaf.lower_bound(key);
    bool found = pos < leaf.count() && leaf.key(pos) == key;
    if (found) fn(leaf.value(pos));
    pool_->unfix(path.back().page, found && write);
    return found;
  }
}

std::optional<std::vector<std::byte>> BTree::lookup(Key key) {
  std::optional<std::vector<std::byte>> out;
  visit_leaf(key, false, nullptr, [&](std::span<std::byte> v) { out.emplace(v.begin(), v.end()); });
  return out;
}

bool BTree::lookup_into(Key key, std::span<std::byte> out, std::uint32_t* faults) {
  return visit_leaf(key, false, faults, [&](std::span<std::byte> v) {
    std::memcpy(out.data(), v.data(), std::min(out.size(), v.size()));
  });
}

bool BTree::update(Key key, const std::function<void(std::span<std::byte>)>& modify, std::uint32_t* faults) {
  return visit_leaf(key, true, faults, modify);
}

UpsertResult BTree::upsert(Key key, std::span<const std::byte> value) {
  if (value.size() != value_width_) raise(ErrorCode::InvalidRequest, "value width does not match the tree");
  std::uint32_t restarts = 0;
  FrameReservation reservation;
  for (;;) {
    ++stats_.traversals;
    std::vector<Pinned> path;
    if (!descend(*pool_, *epoch_, after_suspend, root_, key, true, value_width_, path, nullptr)) {
      restart_or_throw(restarts);
      continue;
    }
    auto release = [&](std::size_t dirty_from) {
      for (std::size_t i = 0; i < path.size(); ++i) pool_->unfix(path[i].page, i >= dirty_from);
    };
    NodeView leaf(path.back().data, value_width_);
    const std::size_t n = leaf.count();
    const std::size_t pos = leaf.lower_bound(key);
    if (pos < n && leaf.key(pos) == key) {
      std::memcpy(leaf.value(pos).data(), value.data(), value_width_);
      release(path.size() - 1);
      return UpsertResult::Updated;
    }
    if (n < leaf.capacity()) {
      std::byte* base = path.back().data.data() + kNodeHeaderBytes;
      const std::size_t w = 8 + value_width_;
      std::memmove(base + (pos + 1) * w, base + pos * w, (n - pos) * w);
      leaf.set_count(n + 1);
      leaf.set_key(pos, key);
      std::memcpy(leaf.value(pos).data(), value.data(), value_width_);
      ++size_;
      release(path.size() - 1);
      return UpsertResult::Inserted;
    }
    if (reservation.size() < path.size() + 1) {
      // Frames for the split must be in hand before the path is pinned:
      // obtaining them may suspend.
      const std::size_t need = path.size() + 1;
      release(path.size());
      reservation = FrameReservation{};
      reservation = pool_->reserve(need);
      continue;
    }
    std::vector<PageId> pages;
    for (auto& p : path) pages.push_back(p.page);
    split_and_insert(pages, key, value, reservation);
    ++size_;
    release(0);
    return UpsertResult::Inserted;
  }
}

void BTree::split_and_insert(std::vector<PageId>& path, Key key, std::span<const std::byte> value,
                             FrameReservation& reservation) {
  const std::size_t w = 8 + value_width_;
  auto data_of = [&](PageId p) { return pool_->frame_data(*pool_->frame_of(p)); };

  // Leaf: merge the new entry and split the n + 1 entries in halves.
  NodeView leaf(data_of(path.back()), value_width_);
  const std::size_t n = leaf.count();
  std::vector<std::byte> entries((n + 1) * w);
  const std::size_t pos = leaf.lower_bound(key);
  std::byte* base = data_of(path.back()).data() + kNodeHeaderBytes;
  std::memcpy(entries.data(), base, pos * w);
  store(entries.data() + pos * w, key);
  std::memcpy(entries.data() + pos * w + 8, value.data(), value_width_);
  std::memcpy(entries.data() + (pos + 1) * w, base + pos * w, (n - pos) * w);

  const std::size_t left = (n + 1) / 2;
  FrameRef right = pool_->allocate_page(reservation);
  NodeView r(right.data, value_width_);
  r.set_kind(NodeKind::Leaf);
  r.set_count(n + 1 - left);
  r.set_next_leaf(leaf.next_leaf());
  std::memcpy(right.data.data() + kNodeHeaderBytes, entries.data() + left * w, (n + 1 - left) * w);
  std::memcpy(base, entries.data(), left * w);
  leaf.set_count(left);
  leaf.set_next_leaf(right.page);
  pool_->unfix(right.page, true);

  Key sep = r.key(0);
  PageId new_child = right.page;
  std::size_t level = path.size() - 1;
  ++stats_.splits;

  for (;;) {
    if (level == 0) {
      FrameRef root = pool_->allocate_page(reservation);
      NodeView nr(root.data, value_width_);
      nr.set_kind(NodeKind::Inner);
      nr.set_count(1);
      nr.set_next_leaf(kNoPage);
      nr.set_key(0, sep);
      nr.set_child(0, path[0]);
      nr.set_child(1, new_child);
      pool_->unfix(root.page, true);
      root_ = root.page;
      ++height_;
      break;
    }
    --level;
    NodeView parent(data_of(path[level]), value_width_);
    const std::size_t m = parent.count();
    const std::size_t idx = parent.child_index(sep);
    std::vector<Key> keys(m + 1);
    std::vector<PageId> kids(m + 2);
    for (std::size_t i = 0, j = 0; i < m + 1; ++i) keys[i] = i == idx ? sep : parent.key(j++);
    for (std::size_t i = 0, j = 0; i < m + 2; ++i) kids[i] = i == idx + 1 ? new_child : parent.child(j++);
    if (m < parent.capacity()) {
      parent.set_count(m + 1);
      for (std::size_t i = 0; i < m + 1; ++i) parent.set_key(i, keys[i]);
      for (std::size_t i = 0; i < m + 2; ++i) parent.set_child(i, kids[i]);
      break;
    }
    const std::size_t mid = (m + 1) / 2;
    FrameRef rp = pool_->allocate_page(reservation);
    NodeView ri(rp.data, value_width_);
    ri.set_kind(NodeKind::Inner);
    ri.set_next_leaf(kNoPage);
    ri.set_count(m - mid);
    for (std::size_t i = mid + 1; i < m + 1; ++i) ri.set_key(i - mid - 1, keys[i]);
    for (std::size_t i = mid + 1; i < m + 2; ++i) ri.set_child(i - mid - 1, kids[i]);
    parent.set_count(mid);
    for (std::size_t i = 0; i < mid; ++i) parent.set_key(i, keys[i]);
    for (std::size_t i = 0; i <= mid; ++i) parent.set_child(i, kids[i]);
    pool_->unfix(rp.page, true);
    sep = keys[mid];
    new_child = rp.page;
    ++stats_.splits;
  }
  bump_epoch();
}

std::vector<std::pair<Key, std::vector<std::byte>>> BTree::scan() {
  std::vector<std::pair<Key, std::vector<std::byte>>> out;
  PageId page = root_;
  for (;;) {
    FrameRef r = pool_->fix(page);
    NodeView n(r.data, value_width_);
    if (n.kind() == NodeKind::Leaf) {
      pool_->unfix(page);
      break;
    }
    PageId next = n.child(0);
    pool_->unfix(page);
    page = next;
  }
  while (page != kNoPage) {
    FrameRef r = pool_->fix(page);
    NodeView n(r.data, value_width_);
    for (std::size_t i = 0; i < n.count(); ++i) {
      auto v = n.value(i);
      out.emplace_back(n.key(i), std::vector<std::byte>(v.begin(), v.end()));
    }
    PageId next = n.next_leaf();
    pool_->unfix(page);
    page = next;
  }
  return out;
}

std::string BTree::check_structure() {
  std::uint64_t entries = 0;
  std::string err;
  std::function<void(PageId, std::uint32_t, std::optional<Key>, std::optional<Key>)> walk =
      [&](PageId page, std::uint32_t depth, std::optional<Key> lo, std::optional<Key> hi) {
        if (!err.empty()) return;
        FrameRef r = pool_->fix(page);
        NodeView n(r.data, value_width_);
        std::vector<PageId> kids;
        std::vector<Key> keys;
        const bool is_leaf = n.kind() == NodeKind::Leaf;
        if (!is_leaf && n.kind() != NodeKind::Inner) err = "page " + std::to_string(page) + " has no node kind";
        else if (n.count() > n.capacity()) err = "page " + std::to_string(page) + " over capacity";
        else if (!is_leaf && n.count() == 0) err = "empty inner node";
        else if (is_leaf != (depth == height_)) err = "leaf depth differs from height";
        if (err.empty()) {
          for (std::size_t i = 0; i < n.count(); ++i) keys.push_back(n.key(i));
          for (std::size_t i = 0; i + 1 < keys.size(); ++i)
            if (keys[i] >= keys[i + 1]) err = "keys not strictly sorted in page " + std::to_string(page);
          for (Key k : keys)
            if ((lo && k < *lo) || (hi && k >= *hi)) err = "key outside parent range in page " + std::to_string(page);
          if (is_leaf) entries += n.count();
          else
            for (std::size_t i = 0; i <= n.count(); ++i) kids.push_back(n.child(i));
        }
        pool_->unfix(page);
        for (std::size_t i = 0; i < kids.size() && err.empty(); ++i)
          walk(kids[i], depth + 1, i == 0 ? lo : std::optional<Key>(keys[i - 1]),
               i == keys.size() ? hi : std::optional<Key>(keys[i]));
      };
  walk(root_, 1, std::nullopt, std::nullopt);
  if (!err.empty()) return err;
  if (entries != size_) return "tree holds " + std::to_string(entries) + " entries, size says " + std::to_string(size_);
  auto all = scan();
  if (all.size() != size_) return "leaf chain misses entries";
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    if (all[i].first >= all[i + 1].first) return "leaf chain out of order";
  return {};
}

void bulk_load(PageFile& file, std::uint32_t value_width, std::uint64_t tuples,
               const std::function<void(Key, std::span<std::byte>)>& value_of) {
  if (value_width == 0) raise(ErrorCode::ConfigError, "value_width must be positive");
  if (file.fd() < 0) raise(ErrorCode::ConfigError, "bulk load needs a backing file");
  const std::size_t ps = file.page_size();
  const std::size_t lc = leaf_capacity(ps, value_width);
  const std::size_t ic = inner_capacity(ps);
  if (lc < 2) raise(ErrorCode::ConfigError, "value_width too large for the page size");

  constexpr std::size_t kChunkPages = 256;
  AlignedBuffer chunk(kChunkPages * ps, 4096);
  std::size_t filled = 0;
  PageId next_page = 0;
  PageId chunk_first = 0;
  auto flush = [&] {
    if (filled == 0) return;
    const std::size_t bytes = filled * ps;
    std::size_t done = 0;
    while (done < bytes) {
      ssize_t n = ::pwrite(file.fd(), chunk.data() + done, bytes - done, off_t(file.offset_of(chunk_first) + done));
      if (n < 0) raise_errno(errno == ENOSPC ? ErrorCode::OutOfSpace : ErrorCode::IoError, "bulk load write", errno);
      done += std::size_t(n);
    }
    filled = 0;
  };
  auto new_page = [&]() -> std::span<std::byte> {
    if (filled == kChunkPages) flush();
    if (filled == 0) chunk_first = next_page;
    auto s = chunk.span().subspan(filled * ps, ps);
    std::memset(s.data(), 0, ps);
    ++filled;
    ++next_page;
    return s;
  };

  struct Child {
    PageId page;
    Key min;
  };
  std::vector<Child> level;
  const std::uint64_t leaves = std::max<std::uint64_t>(1, ceil_div(tuples, lc));
  for (std::uint64_t l = 0; l < leaves; ++l) {
    const PageId id = next_page;
    NodeView n(new_page(), value_width);
    n.set_kind(NodeKind::Leaf);
    const Key first = l * lc;
    const std::size_t count = std::size_t(std::min<std::uint64_t>(lc, tuples - std::min(tuples, first)));
    n.set_count(count);
    n.set_next_leaf(l + 1 < leaves ? id + 1 : kNoPage);
    for (std::size_t i = 0; i < count; ++i) {
      n.set_key(i, first + i);
      value_of(first + i, n.value(i));
    }
    level.push_back({id, first});
  }
  std::uint32_t height = 1;
  while (level.size() > 1) {
    std::vector<Child> up;
    for (std::size_t g = 0; g < level.size(); g += ic + 1) {
      const std::size_t kids = std::min(ic + 1, level.size() - g);
      const PageId id = next_page;
      NodeView n(new_page(), value_width);
      n.set_kind(NodeKind::Inner);
      n.set_next_leaf(kNoPage);
      n.set_count(kids - 1);
      for (std::size_t i = 0; i < kids; ++i) {
        n.set_child(i, level[g + i].page);
        if (i > 0) n.set_key(i - 1, level[g + i].min);
      }
      up.push_back({id, level[g].min});
    }
    level = std::move(up);
    ++height;
  }
  flush();
  file.set_page_count(next_page);
  auto m = file.meta();
  std::memcpy(m.data(), kTreeMagic, 4);
  store(m.data() + 4, value_width);
  store(m.data() + 8, level[0].page);
  store(m.data() + 16, height);
  store(m.data() + 20, tuples);
  file.write_header();
}

}  // namespace uring_engine::storage

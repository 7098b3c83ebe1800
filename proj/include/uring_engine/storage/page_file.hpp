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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uring_engine/common/fd.hpp"
#include "uring_engine/io/request.hpp"

namespace uring_engine::storage {

using PageId = std::uint64_t;

inline constexpr char kPageFileMagic[4] = {'U', 'B', 'P', 'F'};
inline constexpr std::uint32_t kPageFileVersion = 1;
inline constexpr std::size_t kPageFileHeaderBytes = 32;
/// Bytes after the fixed header that upper layers may use for their own metadata.
inline constexpr std::size_t kPageFileMetaBytes = 96;

/// Backing store of a buffer pool. Byte 0 holds the header
/// {"UBPF", version u32, page_size u32, page_count u64} (little-endian),
/// logical page i lives at (i + 1) * page_size.
class PageFile {
 public:
  /// Truncates/creates `path` and writes a header with page_count 0.
  static PageFile create(const std::string& path, std::uint32_t page_size, bool direct = false);
  /// Opens an existing file and validates the header. Throws BadFormat.
  static PageFile open(const std::string& path, bool direct = false);
  /// No backing fd: for executors that serve I/O themselves (tests, simulation).
  static PageFile detached(std::uint32_t page_size, std::uint64_t page_count = 0);

  int fd() const noexcept { return fd_.get(); }
  bool direct() const noexcept { return direct_; }
  std::uint32_t page_size() const noexcept { return page_size_; }
  std::uint64_t page_count() const noexcept { return page_count_; }
  std::uint64_t offset_of(PageId page) const noexcept { return (page + 1) * std::uint64_t(page_size_); }
  io::Target target() const noexcept { return io::Target::file(fd_.get(), direct_, logical_block_); }

  /// Appends a logical page (the file grows lazily on first write-back).
  PageId grow() noexcept { return page_count_++; }
  void set_page_count(std::uint64_t n) noexcept { page_count_ = n; }

  std::span<std::byte> meta() noexcept { return meta_; }
  std::span<const std::byte> meta() const noexcept { return meta_; }

  /// Rewrites the header page synchronously.
  void write_header();
  /// Header page bytes as written by write_header().
  std::vector<std::byte> header_bytes() const;
  void sync();

 private:
  PageFile() = default;

  UniqueFd fd_;
  bool direct_ = false;
  std::uint32_t page_size_ = 4096;
  std::uint32_t logical_block_ = 4096;
  std::uint64_t page_count_ = 0;
  std::array<std::byte, kPageFileMetaBytes> meta_{};
};

}  // namespace uring_engine::storage

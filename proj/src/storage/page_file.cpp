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

#include "uring_engine/storage/page_file.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "uring_engine/common/aligned_buffer.hpp"
#include "uring_engine/common/error.hpp"

namespace uring_engine::storage {

namespace {

void put_u32(std::byte* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = std::byte((v >> (8 * i)) & 0xff);
}
void put_u64(std::byte* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = std::byte((v >> (8 * i)) & 0xff);
}
std::uint32_t get_u32(const std::byte* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const std::byte* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

bool valid_page_size(std::uint32_t s) { return s >= 512 && (s & (s - 1)) == 0; }

int open_flags(bool direct) { return O_RDWR | O_CLOEXEC | (direct ? O_DIRECT : 0); }

}  // namespace

PageFile PageFile::create(const std::string& path, std::uint32_t page_size, bool direct) {
  if (!valid_page_size(page_size)) raise(ErrorCode::ConfigError, "page_size must be a power of two >= 512");
  int fd = ::open(path.c_str(), open_flags(direct) | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) raise_errno(ErrorCode::IoError, "open " + path, errno);
  PageFile f;
  f.fd_.reset(fd);
  f.direct_ = direct;
  f.page_size_ = page_size;
  f.logical_block_ = direct ? std::min<std::uint32_t>(page_size, 4096) : 4096;
  f.write_header();
  return f;
}

PageFile PageFile::open(const std::string& path, bool direct) {
  int fd = ::open(path.c_str(), open_flags(direct));
  if (fd < 0) raise_errno(ErrorCode::IoError, "open " + path, errno);
  PageFile f;
  f.fd_.reset(fd);
  f.direct_ = direct;
  AlignedBuffer head(4096, 4096);
  ssize_t n = ::pread(fd, head.data(), 4096, 0);
  if (n < ssize_t(kPageFileHeaderBytes + kPageFileMetaBytes)) raise(ErrorCode::BadFormat, "page file header truncated");
  if (std::memcmp(head.data(), kPageFileMagic, 4) != 0) raise(ErrorCode::BadFormat, "bad page file magic");
  if (get_u32(head.data() + 4) != kPageFileVersion) raise(ErrorCode::BadFormat, "unsupported page file version");
  f.page_size_ = get_u32(head.data() + 8);
  if (!valid_page_size(f.page_size_)) raise(ErrorCode::BadFormat, "bad page size in header");
  f.logical_block_ = direct ? std::min<std::uint32_t>(f.page_size_, 4096) : 4096;
  f.page_count_ = get_u64(head.data() + 12);
  std::memcpy(f.meta_.data(), head.data() + kPageFileHeaderBytes, kPageFileMetaBytes);
  return f;
}

PageFile PageFile::detached(std::uint32_t page_size, std::uint64_t page_count) {
  if (!valid_page_size(page_size)) raise(ErrorCode::ConfigError, "page_size must be a power of two >= 512");
  PageFile f;
  f.page_size_ = page_size;
  f.page_count_ = page_count;
  return f;
}

std::vector<std::byte> PageFile::header_bytes() const {
  std::vector<std::byte> page(page_size_);
  std::memcpy(page.data(), kPageFileMagic, 4);
  put_u32(page.data() + 4, kPageFileVersion);
  put_u32(page.data() + 8, page_size_);
  put_u64(page.data() + 12, page_count_);
  std::memcpy(page.data() + kPageFileHeaderBytes, meta_.data(), kPageFileMetaBytes);
  return page;
}

void PageFile::write_header() {
  if (!fd_) return;
  auto bytes = header_bytes();
  AlignedBuffer buf(page_size_, 4096);
  std::memcpy(buf.data(), bytes.data(), page_size_);
  ssize_t n = ::pwrite(fd_.get(), buf.data(), page_size_, 0);
  if (n != ssize_t(page_size_)) raise_errno(ErrorCode::IoError, "write page file header", n < 0 ? errno : EIO);
}

void PageFile::sync() {
  if (fd_ && ::fdatasync(fd_.get()) != 0) raise_errno(ErrorCode::IoError, "fdatasync page file", errno);
}

}  // namespace uring_engine::storage

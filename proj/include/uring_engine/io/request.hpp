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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace uring_engine::io {

enum class OpKind : std::uint8_t { Nop, Read, Write, Fsync, NvmeRead, NvmeWrite, NvmeFlush, Send, Recv };

std::string_view to_string(OpKind kind) noexcept;

constexpr bool is_storage_transfer(OpKind k) noexcept {
  return k == OpKind::Read || k == OpKind::Write || k == OpKind::NvmeRead || k == OpKind::NvmeWrite;
}
constexpr bool is_socket_op(OpKind k) noexcept { return k == OpKind::Send || k == OpKind::Recv; }
constexpr bool is_nvme_command(OpKind k) noexcept {
  return k == OpKind::NvmeRead || k == OpKind::NvmeWrite || k == OpKind::NvmeFlush;
}

/// Slot in a ring's registered-file table. The generation pins the table
/// instance the index was issued from.
struct FixedFile {
  std::uint32_t index = 0;
  std::uint32_t generation = 0;
};

/// File, block device, NVMe character device or socket a request targets.
struct Target {
  int fd = -1;
  std::optional<FixedFile> fixed;
  bool direct = false;               // opened with O_DIRECT
  std::uint32_t logical_block = 4096;
  std::uint32_t nsid = 0;            // NVMe namespace (passthrough only)
  std::uint32_t lba_shift = 9;       // log2 of the namespace LBA size

  static Target file(int fd, bool direct = false, std::uint32_t logical_block = 4096) {
    Target t;
    t.fd = fd;
    t.direct = direct;
    t.logical_block = logical_block;
    return t;
  }
  static Target socket(int fd) {
    Target t;
    t.fd = fd;
    return t;
  }
};

struct RequestFlags {
  bool link_to_next = false;
  /// Cancels this request if it has not completed within the interval. The
  /// runtime attaches the timeout as this request's link target.
  std::optional<std::chrono::microseconds> link_timeout;
  bool zero_copy = false;
  bool multishot = false;
  bool poll_first = false;
  bool provided_buffer_ring = false;
};

struct IoRequest {
  std::uint64_t tag = 0;
  OpKind kind = OpKind::Nop;
  Target target;
  std::uint64_t offset = 0;
  std::span<std::byte> buffer;
  std::optional<std::uint32_t> buffer_index;  // registered-buffer slot
  std::uint16_t buffer_group = 0;             // provided-buffer group (Recv)
  bool datasync = false;                      // Fsync only
  RequestFlags flags;

  static IoRequest nop(std::uint64_t tag) {
    IoRequest r;
    r.tag = tag;
    return r;
  }
  static IoRequest read(std::uint64_t tag, Target t, std::uint64_t offset, std::span<std::byte> buf) {
    IoRequest r;
    r.tag = tag;
    r.kind = OpKind::Read;
    r.target = t;
    r.offset = offset;
    r.buffer = buf;
    return r;
  }
  static IoRequest write(std::uint64_t tag, Target t, std::uint64_t offset, std::span<std::byte> buf) {
    IoRequest r = read(tag, t, offset, buf);
    r.kind = OpKind::Write;
    return r;
  }
  static IoRequest fsync(std::uint64_t tag, Target t, bool datasync = false) {
    IoRequest r;
    r.tag = tag;
    r.kind = OpKind::Fsync;
    r.target = t;
    r.datasync = datasync;
    return r;
  }
  static IoRequest send(std::uint64_t tag, Target t, std::span<std::byte> buf) {
    IoRequest r;
    r.tag = tag;
    r.kind = OpKind::Send;
    r.target = t;
    r.buffer = buf;
    return r;
  }
  static IoRequest recv(std::uint64_t tag, Target t, std::span<std::byte> buf) {
    IoRequest r = send(tag, t, buf);
    r.kind = OpKind::Recv;
    return r;
  }
};

struct IoCompletion {
  std::uint64_t tag = 0;
  int error = 0;                   // errno value, 0 on success
  std::uint32_t bytes = 0;
  bool more_coming = false;        // multishot continuation
  std::optional<std::uint16_t> buffer_id;
  std::uint64_t timestamp_ns = 0;  // virtual time on the simulated backend

  bool ok() const noexcept { return error == 0; }
};

/// Position of a staged request in the ring's enqueue order.
struct Ticket {
  std::uint64_t seq = 0;
  friend bool operator==(Ticket, Ticket) = default;
};

}  // namespace uring_engine::io

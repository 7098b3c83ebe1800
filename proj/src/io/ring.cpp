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

#include "uring_engine/io/ring.hpp"

#include <algorithm>
#include <bit>
#include <map>

#include "backend.hpp"
#include "uring_abi.hpp"
#include "uring_engine/common/error.hpp"

namespace uring_engine::io {

namespace {

constexpr std::uint32_t kMaxSqDepth = 32768;
constexpr std::uint32_t kMaxCqDepth = 65536;
constexpr std::size_t kMaxRegisteredBuffers = 16384;
constexpr std::size_t kMaxRegisteredFiles = 32768;
constexpr std::uintptr_t kPageSize = 4096;

std::uint32_t round_depth(std::uint32_t d) { return std::bit_ceil(d); }

}  // namespace

std::string_view to_string(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Nop: return "nop";
    case OpKind::Read: return "read";
    case OpKind::Write: return "write";
    case OpKind::Fsync: return "fsync";
    case OpKind::NvmeRead: return "nvme-read";
    case OpKind::NvmeWrite: return "nvme-write";
    case OpKind::NvmeFlush: return "nvme-flush";
    case OpKind::Send: return "send";
    case OpKind::Recv: return "recv";
  }
  return "?";
}

std::string_view to_string(Backend backend) noexcept {
  switch (backend) {
    case Backend::UringDefault: return "uring-default";
    case Backend::UringSqpoll: return "uring-sqpoll";
    case Backend::UringIopoll: return "uring-iopoll";
    case Backend::UringPassthrough: return "uring-passthrough";
    case Backend::PosixSync: return "posix-sync";
    case Backend::Simulated: return "simulated";
  }
  return "?";
}

std::optional<Backend> parse_backend(std::string_view name) noexcept {
  for (Backend b : {Backend::UringDefault, Backend::UringSqpoll, Backend::UringIopoll, Backend::UringPassthrough,
                    Backend::PosixSync, Backend::Simulated}) {
    if (to_string(b) == name) return b;
  }
  return std::nullopt;
}

RingConfig RingConfig::for_backend(Backend backend) {
  RingConfig c;
  c.backend = backend;
  if (backend == Backend::UringSqpoll) c.defer_taskrun = false;
  return c;
}

Ring Ring::create(const RingConfig& in, const SimDeviceConfig& sim) {
  RingConfig config = in;
  if (config.sq_depth == 0 || config.sq_depth > kMaxSqDepth)
    raise(ErrorCode::InvalidDepth, "sq_depth must be in [1, 32768]");
  config.sq_depth = round_depth(config.sq_depth);
  config.cq_depth = config.cq_depth == 0 ? config.sq_depth * 2 : config.cq_depth;
  if (config.cq_depth > kMaxCqDepth) raise(ErrorCode::InvalidDepth, "cq_depth above 65536");
  config.cq_depth = round_depth(config.cq_depth);
  if (config.cq_depth < config.sq_depth) raise(ErrorCode::InvalidDepth, "cq_depth smaller than sq_depth");
  if (config.defer_taskrun && !config.single_issuer)
    raise(ErrorCode::IncompatibleFlags, "defer_taskrun requires single_issuer");
  if (config.defer_taskrun && config.coop_taskrun)
    raise(ErrorCode::IncompatibleFlags, "defer_taskrun and coop_taskrun are exclusive");

  std::unique_ptr<detail::RingBackend> backend;
  switch (config.backend) {
    case Backend::PosixSync: backend = detail::make_posix_backend(config.sq_depth); break;
    case Backend::Simulated: backend = detail::make_sim_backend(sim, config.sq_depth, config.cq_depth); break;
    default: backend = detail::make_uring_backend(config, config.sq_depth, config.cq_depth); break;
  }
  return Ring(config, std::move(backend));
}

Ring::Ring(RingConfig config, std::unique_ptr<detail::RingBackend> backend)
    : config_(config), backend_(std::move(backend)) {}
Ring::Ring(Ring&&) noexcept = default;
Ring& Ring::operator=(Ring&&) noexcept = default;
Ring::~Ring() = default;

void Ring::note_thread() noexcept {
  auto self = std::this_thread::get_id();
  if (owner_ == std::thread::id{}) owner_ = self;
  else if (owner_ != self) shared_ = true;
}

void Ring::validate(const IoRequest& r) const {
  const RequestFlags& f = r.flags;
  if ((f.multishot || f.provided_buffer_ring) && r.kind != OpKind::Recv)
    raise(ErrorCode::InvalidRequest, "multishot / provided-buffer-ring apply only to Recv");
  if ((f.zero_copy || f.poll_first) && !is_socket_op(r.kind))
    raise(ErrorCode::InvalidRequest, "zero-copy / poll-first apply only to Send and Recv");

  if (config_.backend == Backend::UringIopoll && is_storage_transfer(r.kind) && !r.target.direct)
    raise(ErrorCode::IncompatibleFlags, "iopoll ring requires direct-I/O targets");
  if (!backend_->supports(r))
    raise(ErrorCode::KindUnsupportedByBackend,
          std::string(to_string(r.kind)) + " not supported by " + std::string(to_string(config_.backend)));

  if (is_storage_transfer(r.kind)) {
    if (config_.max_storage_request_bytes != 0 && r.buffer.size() > config_.max_storage_request_bytes)
      raise(ErrorCode::InvalidRequest, "storage request larger than the per-request cap");
    std::uint64_t block = is_nvme_command(r.kind) ? (std::uint64_t(1) << r.target.lba_shift) : 0;
    if (r.target.direct) block = std::max<std::uint64_t>(block, r.target.logical_block);
    if (block != 0) {
      auto addr = reinterpret_cast<std::uintptr_t>(r.buffer.data());
      if (r.offset % block != 0 || r.buffer.size() % block != 0 || addr % block != 0)
        raise(ErrorCode::Misaligned, "offset, length and address must be multiples of the logical block");
    }
  }

  if (r.buffer_index) {
    if (*r.buffer_index >= buffers_.size()) raise(ErrorCode::BadBufferIndex, "buffer index not registered");
    std::span<std::byte> region = buffers_[*r.buffer_index];
    if (r.buffer.data() < region.data() || r.buffer.data() + r.buffer.size() > region.data() + region.size())
      raise(ErrorCode::BadBufferIndex, "buffer lies outside its registered region");
  }
  if (r.target.fixed) {
    if (r.target.fixed->generation != file_generation_ || r.target.fixed->index >= file_count_)
      raise(ErrorCode::BadFileIndex, "file index not in the current file table");
  }
}

Ticket Ring::enqueue(const IoRequest& request) {
  note_thread();
  validate(request);
  std::size_t slots = request.flags.link_timeout ? 2 : 1;
  if (!backend_->has_free_slots(slots)) {
    if (!config_.auto_submit || backend_->staged() == 0) raise(ErrorCode::SqFull, "submission queue full");
    submit();
    if (!backend_->has_free_slots(slots)) raise(ErrorCode::SqFull, "submission queue full");
  }
  backend_->stage(request);
  ++backend_->stats.enqueued;
  return Ticket{next_ticket_++};
}

std::size_t Ring::submit() {
  note_thread();
  std::size_t n = backend_->submit();
  if (n > 0) {
    backend_->stats.submitted += n;
    ++backend_->stats.submit_calls;
  }
  return n;
}

std::vector<IoCompletion> Ring::reap(std::size_t min, std::size_t max,
                                     std::optional<std::chrono::microseconds> timeout) {
  std::vector<IoCompletion> out;
  reap_into(out, min, max, timeout);
  return out;
}

std::size_t Ring::reap_into(std::vector<IoCompletion>& out, std::size_t min, std::size_t max,
                            std::optional<std::chrono::microseconds> timeout) {
  note_thread();
  if (min > max) raise(ErrorCode::InvalidRequest, "reap min exceeds max");
  if (max == 0) return 0;
  return backend_->reap(out, min, max, timeout);
}

BufferTable Ring::register_buffers(std::span<const std::span<std::byte>> regions) {
  note_thread();
  if (regions.size() > kMaxRegisteredBuffers) raise(ErrorCode::TooManyRegions, "more than 16384 regions");
  std::vector<std::span<std::byte>> sorted(regions.begin(), regions.end());
  for (auto r : sorted) {
    if (reinterpret_cast<std::uintptr_t>(r.data()) % kPageSize != 0 || r.empty())
      raise(ErrorCode::NotAligned, "registered regions must be page-aligned and non-empty");
  }
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a.data() < b.data(); });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1].data() + sorted[i - 1].size() > sorted[i].data())
      raise(ErrorCode::InvalidRequest, "registered regions overlap");
  }
  backend_->register_buffers(regions);
  buffers_.assign(regions.begin(), regions.end());
  return BufferTable{std::uint32_t(buffers_.size())};
}

FileTable Ring::register_files(std::span<const int> fds) {
  note_thread();
  if (fds.size() > kMaxRegisteredFiles) raise(ErrorCode::TooManyFiles, "more than 32768 files");
  backend_->register_files(fds);
  file_count_ = std::uint32_t(fds.size());
  ++file_generation_;
  return FileTable{file_count_, file_generation_};
}

void Ring::register_buffer_group(std::uint16_t group, std::span<std::byte> storage, std::uint32_t buffer_size) {
  note_thread();
  if (buffer_size == 0 || storage.size() < buffer_size)
    raise(ErrorCode::InvalidRequest, "buffer group needs at least one buffer");
  if (storage.size() / buffer_size > 65536) raise(ErrorCode::TooManyRegions, "more than 65536 buffers in group");
  backend_->register_buffer_group(group, storage, buffer_size);
  groups_[group] = BufferGroupInfo{storage, buffer_size};
}

std::span<std::byte> Ring::group_buffer(std::uint16_t group, std::uint16_t id) const {
  auto it = groups_.find(group);
  if (it == groups_.end()) raise(ErrorCode::BadBufferIndex, "unknown buffer group");
  std::size_t count = it->second.storage.size() / it->second.buffer_size;
  if (id >= count) raise(ErrorCode::BadBufferIndex, "buffer id outside group");
  return it->second.storage.subspan(std::size_t(id) * it->second.buffer_size, it->second.buffer_size);
}

void Ring::recycle_buffer(std::uint16_t group, std::uint16_t id) {
  backend_->recycle_buffer(group, id, group_buffer(group, id));
}

std::uint32_t Ring::sq_capacity() const noexcept { return backend_->sq_capacity(); }
std::uint32_t Ring::cq_capacity() const noexcept { return backend_->cq_capacity(); }
std::size_t Ring::staged() const noexcept { return backend_->staged(); }
std::size_t Ring::outstanding() const noexcept { return backend_->outstanding(); }
const RingStats& Ring::stats() const noexcept { return backend_->stats; }
int Ring::native_fd() const noexcept { return backend_->native_fd(); }
VirtualClock* Ring::virtual_clock() noexcept { return backend_->virtual_clock(); }
const SimDeviceConfig* Ring::sim_config() const noexcept { return backend_->sim_config(); }

bool uring_available() noexcept {
  static const bool available = [] {
    io_uring_params p{};
    int fd = abi::sys_setup(4, &p);
    if (fd < 0) return false;
    ::close(fd);
    return true;
  }();
  return available;
}

}  // namespace uring_engine::io

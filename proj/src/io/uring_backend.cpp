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

#include <sys/mman.h>
#include <sys/socket.h>
#include <sys/uio.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <deque>
#include <unordered_map>

#include "backend.hpp"
#include "uring_abi.hpp"
#include "uring_engine/common/aligned_buffer.hpp"
#include "uring_engine/common/cycles.hpp"
#include "uring_engine/common/error.hpp"
#include "uring_engine/common/fd.hpp"

namespace uring_engine::io::detail {

namespace {

constexpr std::uint64_t kInternalBit = 1ULL << 63;

template <typename T>
T load_acquire(T* p) {
  return std::atomic_ref<T>(*p).load(std::memory_order_acquire);
}
template <typename T>
void store_release(T* p, T v) {
  std::atomic_ref<T>(*p).store(v, std::memory_order_release);
}

struct Mapping {
  void* ptr = MAP_FAILED;
  std::size_t len = 0;
  Mapping() = default;
  Mapping(int fd, std::size_t length, std::uint64_t offset) : len(length) {
    ptr = ::mmap(nullptr, length, PROT_READ | PROT_WRITE, MAP_SHARED | MAP_POPULATE, fd, off_t(offset));
    if (ptr == MAP_FAILED) raise_errno(ErrorCode::BackendFailure, "mmap io_uring region", errno);
  }
  Mapping(Mapping&& o) noexcept : ptr(std::exchange(o.ptr, MAP_FAILED)), len(o.len) {}
  Mapping& operator=(Mapping&& o) noexcept {
    std::swap(ptr, o.ptr);
    std::swap(len, o.len);
    return *this;
  }
  ~Mapping() {
    if (ptr != MAP_FAILED) ::munmap(ptr, len);
  }
  template <typename T>
  T* at(std::uint32_t offset) const {
    return reinterpret_cast<T*>(static_cast<char*>(ptr) + offset);
  }
};

struct Pending {
  std::uint32_t generation = 0;  // upper half of user_data; stale CQEs miss
  bool live = false;
  std::uint64_t tag = 0;
  bool zero_copy_send = false;
  bool result_seen = false;
  bool notif_seen = false;
  int result = 0;
  std::unique_ptr<abi::KernelTimespec> timeout;
};

struct BufferGroup {
  AlignedBuffer ring_memory;
  abi::BufRing* entries = nullptr;
  std::uint32_t mask = 0;
  std::uint16_t tail = 0;
};

class UringBackend final : public RingBackend {
 public:
  UringBackend(const RingConfig& config, std::uint32_t sq, std::uint32_t cq) : config_(config) {
    io_uring_params params{};
    std::uint32_t flags = abi::kSetupCqSize | abi::kSetupSubmitAll;
    switch (config.backend) {
      case Backend::UringSqpoll:
        flags |= abi::kSetupSqpoll;
        params.sq_thread_idle = config.sqpoll_idle_ms;
        if (config.sqpoll_cpu) {
          flags |= abi::kSetupSqAff;
          params.sq_thread_cpu = std::uint32_t(*config.sqpoll_cpu);
        }
        break;
      case Backend::UringIopoll: flags |= abi::kSetupIopoll; break;
      case Backend::UringPassthrough: flags |= abi::kSetupSqe128 | abi::kSetupCqe32; break;
      default: break;
    }
    if (config.single_issuer) flags |= abi::kSetupSingleIssuer | abi::kSetupRDisabled;
    if (config.defer_taskrun) flags |= abi::kSetupDeferTaskrun;
    if (config.coop_taskrun) flags |= abi::kSetupCoopTaskrun | abi::kSetupTaskrunFlag;
    params.flags = flags;
    params.cq_entries = cq;

    int fd = abi::sys_setup(sq, &params);
    if (fd < 0) {
      int err = errno;
      bool mode_flags = config.backend == Backend::UringSqpoll || config.backend == Backend::UringIopoll ||
                        config.defer_taskrun || config.coop_taskrun;
      if (err == EINVAL && mode_flags) raise_errno(ErrorCode::IncompatibleFlags, "io_uring_setup", err);
      raise_errno(ErrorCode::UnsupportedBackend, "io_uring_setup", err);
    }
    fd_.reset(fd);
    enabled_ = !config.single_issuer;
    sqpoll_ = config.backend == Backend::UringSqpoll;
    sqe_stride_ = (flags & abi::kSetupSqe128) ? 2 : 1;
    cqe_stride_ = (flags & abi::kSetupCqe32) ? 2 : 1;

    std::size_t sq_len = params.sq_off.array + params.sq_entries * sizeof(std::uint32_t);
    std::size_t cq_len = params.cq_off.cqes + params.cq_entries * sizeof(abi::Cqe) * cqe_stride_;
    if (params.features & IORING_FEAT_SINGLE_MMAP) {
      sq_len = cq_len = std::max(sq_len, cq_len);
      sq_map_ = Mapping(fd, sq_len, abi::kOffSqRing);
    } else {
      sq_map_ = Mapping(fd, sq_len, abi::kOffSqRing);
      cq_map_ = Mapping(fd, cq_len, abi::kOffCqRing);
    }
    const Mapping& cqm = (params.features & IORING_FEAT_SINGLE_MMAP) ? sq_map_ : cq_map_;
    sqe_map_ = Mapping(fd, params.sq_entries * sizeof(abi::Sqe) * sqe_stride_, abi::kOffSqes);

    sq_head_ = sq_map_.at<std::uint32_t>(params.sq_off.head);
    sq_tail_ = sq_map_.at<std::uint32_t>(params.sq_off.tail);
    sq_flags_ = sq_map_.at<std::uint32_t>(params.sq_off.flags);
    sq_array_ = sq_map_.at<std::uint32_t>(params.sq_off.array);
    sq_mask_ = *sq_map_.at<std::uint32_t>(params.sq_off.ring_mask);
    sq_entries_ = params.sq_entries;
    cq_head_ = cqm.at<std::uint32_t>(params.cq_off.head);
    cq_tail_ = cqm.at<std::uint32_t>(params.cq_off.tail);
    cq_mask_ = *cqm.at<std::uint32_t>(params.cq_off.ring_mask);
    cq_entries_ = params.cq_entries;
    cqes_ = cqm.at<abi::Cqe>(params.cq_off.cqes);
    sqes_ = static_cast<abi::Sqe*>(sqe_map_.ptr);
    local_tail_ = *sq_tail_;
    flushed_tail_ = local_tail_;

    if (config.napi_busy_poll_us > 0) {
      abi::Napi napi{};
      napi.busy_poll_to = config.napi_busy_poll_us;
      napi.prefer_busy_poll = 1;
      if (abi::sys_register(fd, abi::kRegisterNapi, &napi, 1) < 0)
        raise_errno(ErrorCode::UnsupportedBackend, "register NAPI busy poll", errno);
    }
  }

  bool supports(const IoRequest& r) const override {
    if (r.kind == OpKind::Recv && r.flags.zero_copy) return false;  // needs a NIC rx queue (zcrx)
    if (is_nvme_command(r.kind)) return config_.backend == Backend::UringPassthrough;
    if (config_.backend == Backend::UringIopoll)
      return r.kind == OpKind::Nop || r.kind == OpKind::Read || r.kind == OpKind::Write;
    return true;
  }

  bool has_free_slots(std::size_t n) const override {
    std::uint32_t head = load_acquire(sq_head_);
    return local_tail_ - head + n <= sq_entries_;
  }

  void stage(const IoRequest& r) override {
    std::uint32_t slot;
    if (free_slots_.empty()) {
      slot = std::uint32_t(slots_.size());
      slots_.emplace_back();
    } else {
      slot = free_slots_.back();
      free_slots_.pop_back();
    }
    Pending& p = slots_[slot];
    p.live = true;
    ++p.generation;
    p.tag = r.tag;
    p.zero_copy_send = r.kind == OpKind::Send && r.flags.zero_copy;
    p.result_seen = p.notif_seen = false;
    p.result = 0;
    p.timeout.reset();
    const std::uint64_t id = (std::uint64_t(p.generation & 0x7fffffffu) << 32) | slot;

    abi::Sqe* sqe = next_sqe();
    fill(*sqe, r);
    sqe->user_data = id;
    if (config_.force_async_workers) sqe->flags |= abi::kSqeAsync;
    if (r.flags.link_to_next) sqe->flags |= abi::kSqeIoLink;

    if (r.flags.link_timeout) {
      sqe->flags |= abi::kSqeIoLink;
      p.timeout = std::make_unique<abi::KernelTimespec>();
      auto us = r.flags.link_timeout->count();
      p.timeout->tv_sec = us / 1000000;
      p.timeout->tv_nsec = (us % 1000000) * 1000;
      abi::Sqe* t = next_sqe();
      std::memset(t, 0, sizeof(abi::Sqe) * sqe_stride_);
      t->opcode = abi::kOpLinkTimeout;
      t->fd = -1;
      t->addr = reinterpret_cast<std::uint64_t>(p.timeout.get());
      t->len = 1;
      t->user_data = id | kInternalBit;
      if (r.flags.link_to_next) t->flags |= abi::kSqeIoLink;
    }
    ++staged_;
  }

  std::size_t submit() override {
    ensure_enabled();
    std::uint32_t to_submit = local_tail_ - flushed_tail_;
    std::size_t requests = staged_;
    if (to_submit == 0) return 0;
    store_release(sq_tail_, local_tail_);
    flushed_tail_ = local_tail_;
    if (sqpoll_) {
      std::atomic_thread_fence(std::memory_order_seq_cst);
      if (std::atomic_ref<std::uint32_t>(*sq_flags_).load(std::memory_order_relaxed) & abi::kSqNeedWakeup) {
        ++stats.kernel_enters;
        if (abi::sys_enter(fd_.get(), 0, 0, abi::kEnterSqWakeup, nullptr, 0) < 0)
          raise_errno(ErrorCode::BackendFailure, "io_uring_enter(SQ_WAKEUP)", errno);
      }
    } else {
      while (to_submit > 0) {
        ++stats.kernel_enters;
        int ret = abi::sys_enter(fd_.get(), to_submit, 0, 0, nullptr, 0);
        if (ret < 0) {
          if (errno == EINTR) continue;
          if (errno == EAGAIN || errno == EBUSY) {
            drain_cq(carry_, SIZE_MAX);
            continue;
          }
          raise_errno(ErrorCode::BackendFailure, "io_uring_enter(submit)", errno);
        }
        to_submit -= std::uint32_t(ret);
      }
    }
    staged_ = 0;
    outstanding_ += requests;
    return requests;
  }

  std::size_t reap(std::vector<IoCompletion>& out, std::size_t min, std::size_t max,
                   std::optional<std::chrono::microseconds> timeout) override {
    ensure_enabled();
    const std::size_t start = out.size();
    auto got = [&] { return out.size() - start; };
    while (!carry_.empty() && got() < max) {
      out.push_back(carry_.front());
      carry_.pop_front();
    }
    drain_cq(out, max - got());
    if (got() == 0 && min == 0 && outstanding_ > 0) {
      // DeferTR and IOPoll rings only post completions while inside the kernel.
      enter_getevents(0, nullptr);
      drain_cq(out, max - got());
    }
    if (!timeout && got() < min && outstanding_ < min - got())
      raise(ErrorCode::InvalidRequest, "reap would block forever: too few requests outstanding");
    const std::uint64_t deadline = timeout ? steady_nanos() + std::uint64_t(timeout->count()) * 1000 : 0;
    while (got() < min) {
      std::uint32_t need = std::uint32_t(min - got());
      if (timeout) {
        std::uint64_t now = steady_nanos();
        std::int64_t remaining = now >= deadline ? 0 : std::int64_t(deadline - now);
        abi::KernelTimespec ts{remaining / 1000000000, remaining % 1000000000};
        if (!enter_getevents(need, &ts)) {
          drain_cq(out, max - got());
          if (got() >= min) break;
          for (std::size_t i = start; i < out.size(); ++i) carry_.push_back(out[i]);
          out.resize(start);
          raise(ErrorCode::TimedOut, "fewer than min completions within timeout");
        }
      } else {
        enter_getevents(need, nullptr);
      }
      drain_cq(out, max - got());
    }
    stats.completions += got();
    return got();
  }

  void register_buffers(std::span<const std::span<std::byte>> regions) override {
    if (buffers_registered_) {
      abi::sys_register(fd_.get(), abi::kUnregisterBuffers, nullptr, 0);
      buffers_registered_ = false;
    }
    if (regions.empty()) return;
    std::vector<iovec> iov;
    iov.reserve(regions.size());
    for (auto r : regions) iov.push_back(iovec{r.data(), r.size()});
    if (abi::sys_register(fd_.get(), abi::kRegisterBuffers, iov.data(), unsigned(iov.size())) < 0) {
      int err = errno;
      raise_errno(err == EINVAL || err == EFAULT ? ErrorCode::TooManyRegions : ErrorCode::BackendFailure,
                  "register buffers", err);
    }
    buffers_registered_ = true;
  }

  void register_files(std::span<const int> fds) override {
    if (files_registered_) {
      abi::sys_register(fd_.get(), abi::kUnregisterFiles, nullptr, 0);
      files_registered_ = false;
    }
    if (fds.empty()) return;
    if (abi::sys_register(fd_.get(), abi::kRegisterFiles, fds.data(), unsigned(fds.size())) < 0) {
      int err = errno;
      raise_errno(err == EMFILE || err == EINVAL ? ErrorCode::TooManyFiles : ErrorCode::BackendFailure,
                  "register files", err);
    }
    files_registered_ = true;
  }

  void register_buffer_group(std::uint16_t group, std::span<std::byte> storage, std::uint32_t size) override {
    std::uint32_t count = std::uint32_t(storage.size() / size);
    std::uint32_t entries = 1;
    while (entries < count) entries <<= 1;
    if (entries > 32768) raise(ErrorCode::TooManyRegions, "provided-buffer group larger than 32768 entries");
    BufferGroup g;
    g.ring_memory = AlignedBuffer(entries * sizeof(abi::BufRing), 4096);
    g.entries = reinterpret_cast<abi::BufRing*>(g.ring_memory.data());
    g.mask = entries - 1;
    abi::BufReg reg{};
    reg.ring_addr = reinterpret_cast<std::uint64_t>(g.entries);
    reg.ring_entries = entries;
    reg.bgid = group;
    if (abi::sys_register(fd_.get(), abi::kRegisterPbufRing, &reg, 1) < 0)
      raise_errno(ErrorCode::UnsupportedBackend, "register provided-buffer ring", errno);
    auto [it, inserted] = groups_.insert_or_assign(group, std::move(g));
    for (std::uint32_t i = 0; i < count; ++i)
      push_buffer(it->second, std::uint16_t(i), storage.subspan(std::size_t(i) * size, size));
    publish(it->second);
  }

  void recycle_buffer(std::uint16_t group, std::uint16_t id, std::span<std::byte> buffer) override {
    auto it = groups_.find(group);
    if (it == groups_.end()) raise(ErrorCode::BadBufferIndex, "unknown buffer group");
    push_buffer(it->second, id, buffer);
    publish(it->second);
  }

  std::uint32_t sq_capacity() const override { return sq_entries_; }
  std::uint32_t cq_capacity() const override { return cq_entries_; }
  std::size_t staged() const override { return staged_; }
  std::size_t outstanding() const override { return outstanding_; }
  int native_fd() const override { return fd_.get(); }

 private:
  void ensure_enabled() {
    if (enabled_) return;
    if (abi::sys_register(fd_.get(), abi::kRegisterEnableRings, nullptr, 0) < 0)
      raise_errno(ErrorCode::BackendFailure, "enable ring", errno);
    enabled_ = true;
  }

  abi::Sqe* next_sqe() {
    if (!has_free_slots(1)) raise(ErrorCode::SqFull, "submission queue full");
    std::uint32_t idx = local_tail_ & sq_mask_;
    sq_array_[idx] = idx;
    ++local_tail_;
    abi::Sqe* sqe = sqes_ + std::size_t(idx) * sqe_stride_;
    std::memset(sqe, 0, sizeof(abi::Sqe) * sqe_stride_);
    return sqe;
  }

  void fill(abi::Sqe& sqe, const IoRequest& r) const {
    if (r.target.fixed) {
      sqe.fd = std::int32_t(r.target.fixed->index);
      sqe.flags |= abi::kSqeFixedFile;
    } else {
      sqe.fd = r.target.fd;
    }
    auto addr = reinterpret_cast<std::uint64_t>(r.buffer.data());
    auto len = std::uint32_t(r.buffer.size());
    switch (r.kind) {
      case OpKind::Nop:
        sqe.opcode = abi::kOpNop;
        sqe.fd = -1;
        sqe.flags &= std::uint8_t(~abi::kSqeFixedFile);
        break;
      case OpKind::Read:
      case OpKind::Write: {
        bool fixed = r.buffer_index.has_value();
        if (r.kind == OpKind::Read) sqe.opcode = fixed ? abi::kOpReadFixed : abi::kOpRead;
        else sqe.opcode = fixed ? abi::kOpWriteFixed : abi::kOpWrite;
        if (fixed) sqe.buf_index = std::uint16_t(*r.buffer_index);
        sqe.addr = addr;
        sqe.len = len;
        sqe.off = r.offset;
        break;
      }
      case OpKind::Fsync:
        sqe.opcode = abi::kOpFsync;
        sqe.op_flags = r.datasync ? abi::kFsyncDatasync : 0;
        break;
      case OpKind::NvmeRead:
      case OpKind::NvmeWrite:
      case OpKind::NvmeFlush: {
        sqe.opcode = abi::kOpUringCmd;
        sqe.off = abi::kNvmeUringCmdIo;  // cmd_op in the low word
        auto* cmd = reinterpret_cast<abi::NvmeUringCmd*>(reinterpret_cast<char*>(&sqe) + 48);
        cmd->nsid = r.target.nsid;
        if (r.kind == OpKind::NvmeFlush) {
          cmd->opcode = abi::kNvmeCmdFlush;
        } else {
          cmd->opcode = r.kind == OpKind::NvmeRead ? abi::kNvmeCmdRead : abi::kNvmeCmdWrite;
          std::uint64_t slba = r.offset >> r.target.lba_shift;
          std::uint32_t nlb = (len >> r.target.lba_shift) - 1;
          cmd->addr = addr;
          cmd->data_len = len;
          cmd->cdw10 = std::uint32_t(slba & 0xffffffffu);
          cmd->cdw11 = std::uint32_t(slba >> 32);
          cmd->cdw12 = nlb;
          if (r.buffer_index) {
            sqe.op_flags = 1;  // IORING_URING_CMD_FIXED
            sqe.buf_index = std::uint16_t(*r.buffer_index);
          }
        }
        break;
      }
      case OpKind::Send:
        sqe.opcode = r.flags.zero_copy ? abi::kOpSendZc : abi::kOpSend;
        sqe.addr = addr;
        sqe.len = len;
        sqe.op_flags = MSG_NOSIGNAL;
        if (r.flags.poll_first) sqe.ioprio |= abi::kRecvSendPollFirst;
        if (r.flags.zero_copy && r.buffer_index) {
          sqe.ioprio |= abi::kRecvSendFixedBuf;
          sqe.buf_index = std::uint16_t(*r.buffer_index);
        }
        break;
      case OpKind::Recv:
        sqe.opcode = abi::kOpRecv;
        if (r.flags.poll_first) sqe.ioprio |= abi::kRecvSendPollFirst;
        if (r.flags.multishot || r.flags.provided_buffer_ring) {
          if (r.flags.multishot) sqe.ioprio |= abi::kRecvMultishot;
          sqe.flags |= abi::kSqeBufferSelect;
          sqe.buf_index = r.buffer_group;
        } else {
          sqe.addr = addr;
          sqe.len = len;
        }
        break;
    }
  }

  // Returns false on timeout.
  bool enter_getevents(std::uint32_t min_complete, const abi::KernelTimespec* ts) {
    for (;;) {
      ++stats.kernel_enters;
      int ret;
      if (ts != nullptr) {
        abi::GeteventsArg arg{};
        arg.ts = reinterpret_cast<std::uint64_t>(ts);
        ret = abi::sys_enter(fd_.get(), 0, min_complete, abi::kEnterGetEvents | abi::kEnterExtArg, &arg,
                             sizeof(arg));
      } else {
        ret = abi::sys_enter(fd_.get(), 0, min_complete, abi::kEnterGetEvents, nullptr, 0);
      }
      if (ret >= 0) return true;
      if (errno == ETIME) return false;
      if (errno == EINTR) {
        if (ts != nullptr) return true;  // let the caller recompute the remaining time
        continue;
      }
      if (errno == EAGAIN || errno == EBUSY) return true;
      raise_errno(ErrorCode::BackendFailure, "io_uring_enter(getevents)", errno);
    }
  }

  void drain_cq(std::vector<IoCompletion>& out, std::size_t limit) {
    drain_cq_impl([&](const IoCompletion& c) { out.push_back(c); }, limit);
  }
  void drain_cq(std::deque<IoCompletion>& out, std::size_t limit) {
    drain_cq_impl([&](const IoCompletion& c) { out.push_back(c); }, limit);
  }

  template <typename Sink>
  void drain_cq_impl(Sink&& sink, std::size_t limit) {
    std::uint32_t head = *cq_head_;
    std::uint32_t tail = load_acquire(cq_tail_);
    std::size_t emitted = 0;
    const std::uint64_t now = steady_nanos();
    while (head != tail && emitted < limit) {
      const abi::Cqe& cqe = cqes_[std::size_t(head & cq_mask_) * cqe_stride_];
      ++head;
      if (cqe.user_data & kInternalBit) continue;
      const std::uint32_t slot = std::uint32_t(cqe.user_data);
      if (slot >= slots_.size()) continue;
      Pending& p = slots_[slot];
      if (!p.live || (p.generation & 0x7fffffffu) != std::uint32_t(cqe.user_data >> 32)) continue;
      if (p.zero_copy_send) {
        if (cqe.flags & abi::kCqeNotif) {
          p.notif_seen = true;
        } else {
          p.result_seen = true;
          p.result = cqe.res;
          if (!(cqe.flags & abi::kCqeMore)) p.notif_seen = true;
        }
        if (!(p.result_seen && p.notif_seen)) continue;
        sink(make_completion(p.tag, p.result, 0, now));
        release(slot);
        --outstanding_;
        ++emitted;
        continue;
      }
      IoCompletion c = make_completion(p.tag, cqe.res, cqe.flags, now);
      if (!c.more_coming) {
        release(slot);
        --outstanding_;
      }
      sink(c);
      ++emitted;
    }
    store_release(cq_head_, head);
  }

  void release(std::uint32_t slot) {
    slots_[slot].live = false;
    slots_[slot].timeout.reset();
    free_slots_.push_back(slot);
  }

  static IoCompletion make_completion(std::uint64_t tag, int res, std::uint32_t flags, std::uint64_t now) {
    IoCompletion c;
    c.tag = tag;
    if (res < 0) c.error = -res;
    else c.bytes = std::uint32_t(res);
    c.more_coming = (flags & abi::kCqeMore) != 0;
    if (flags & abi::kCqeBuffer) c.buffer_id = std::uint16_t(flags >> abi::kCqeBufferShift);
    c.timestamp_ns = now;
    return c;
  }

  void push_buffer(BufferGroup& g, std::uint16_t id, std::span<std::byte> buffer) {
    abi::BufRing& e = g.entries[g.tail & g.mask];
    e.addr = reinterpret_cast<std::uint64_t>(buffer.data());
    e.len = std::uint32_t(buffer.size());
    e.bid = id;
    ++g.tail;
  }
  void publish(BufferGroup& g) { store_release(&g.entries[0].resv, g.tail); }

  RingConfig config_;
  UniqueFd fd_;
  Mapping sq_map_, cq_map_, sqe_map_;
  std::uint32_t* sq_head_ = nullptr;
  std::uint32_t* sq_tail_ = nullptr;
  std::uint32_t* sq_flags_ = nullptr;
  std::uint32_t* sq_array_ = nullptr;
  std::uint32_t sq_mask_ = 0, sq_entries_ = 0;
  std::uint32_t* cq_head_ = nullptr;
  std::uint32_t* cq_tail_ = nullptr;
  std::uint32_t cq_mask_ = 0, cq_entries_ = 0;
  abi::Cqe* cqes_ = nullptr;
  abi::Sqe* sqes_ = nullptr;
  std::uint32_t sqe_stride_ = 1, cqe_stride_ = 1;
  std::uint32_t local_tail_ = 0, flushed_tail_ = 0;
  bool enabled_ = true, sqpoll_ = false;
  bool buffers_registered_ = false, files_registered_ = false;
  std::vector<Pending> slots_;
  std::vector<std::uint32_t> free_slots_;
  std::deque<IoCompletion> carry_;
  std::size_t staged_ = 0, outstanding_ = 0;
  std::unordered_map<std::uint16_t, BufferGroup> groups_;
};

}  // namespace

std::unique_ptr<RingBackend> make_uring_backend(const RingConfig& config, std::uint32_t sq, std::uint32_t cq) {
  return std::make_unique<UringBackend>(config, sq, cq);
}

}  // namespace uring_engine::io::detail

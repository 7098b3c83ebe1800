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

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <deque>

#include "backend.hpp"
#include "uring_engine/common/cycles.hpp"
#include "uring_engine/common/error.hpp"

namespace uring_engine::io::detail {

int execute_blocking(const IoRequest& r) {
  ssize_t ret = 0;
  for (;;) {
    switch (r.kind) {
      case OpKind::Nop: return 0;
      case OpKind::Read:
        ret = ::pread(r.target.fd, r.buffer.data(), r.buffer.size(), off_t(r.offset));
        break;
      case OpKind::Write:
        ret = ::pwrite(r.target.fd, r.buffer.data(), r.buffer.size(), off_t(r.offset));
        break;
      case OpKind::Fsync:
        ret = r.datasync ? ::fdatasync(r.target.fd) : ::fsync(r.target.fd);
        break;
      case OpKind::Send:
        ret = ::send(r.target.fd, r.buffer.data(), r.buffer.size(), MSG_NOSIGNAL);
        break;
      case OpKind::Recv:
        ret = ::recv(r.target.fd, r.buffer.data(), r.buffer.size(), 0);
        break;
      default: return -EOPNOTSUPP;
    }
    if (ret >= 0) return int(ret);
    if (errno != EINTR) return -errno;
  }
}

namespace {

/// Executes every request with a blocking syscall at submit time.
class PosixBackend final : public RingBackend {
 public:
  explicit PosixBackend(std::uint32_t sq) : capacity_(sq) {}

  bool supports(const IoRequest& r) const override {
    if (is_nvme_command(r.kind)) return false;
    if (r.flags.multishot || r.flags.provided_buffer_ring || r.flags.zero_copy) return false;
    return true;
  }

  bool has_free_slots(std::size_t n) const override { return staged_.size() + n <= capacity_; }

  void stage(const IoRequest& r) override { staged_.push_back(r); }

  std::size_t submit() override {
    std::size_t n = staged_.size();
    if (n == 0) return 0;
    ++stats.kernel_enters;
    bool cancel_chain = false;
    for (const IoRequest& r : staged_) {
      IoCompletion c;
      c.tag = r.tag;
      if (cancel_chain) {
        c.error = ECANCELED;
      } else {
        int res = execute_blocking(r);
        if (res < 0) c.error = -res;
        else c.bytes = std::uint32_t(res);
        bool short_transfer = is_storage_transfer(r.kind) && res >= 0 && std::size_t(res) < r.buffer.size();
        if (r.flags.link_to_next && (res < 0 || short_transfer)) cancel_chain = true;
      }
      c.timestamp_ns = steady_nanos();
      if (!r.flags.link_to_next) cancel_chain = false;
      done_.push_back(c);
    }
    staged_.clear();
    return n;
  }

  std::size_t reap(std::vector<IoCompletion>& out, std::size_t min, std::size_t max,
                   std::optional<std::chrono::microseconds> timeout) override {
    if (done_.size() < min) {
      if (timeout) raise(ErrorCode::TimedOut, "posix backend has no further completions");
      raise(ErrorCode::InvalidRequest, "reap would block forever: nothing outstanding");
    }
    std::size_t n = 0;
    while (!done_.empty() && n < max) {
      out.push_back(done_.front());
      done_.pop_front();
      ++n;
    }
    stats.completions += n;
    return n;
  }

  std::uint32_t sq_capacity() const override { return capacity_; }
  std::uint32_t cq_capacity() const override { return capacity_ * 2; }
  std::size_t staged() const override { return staged_.size(); }
  std::size_t outstanding() const override { return done_.size(); }

 private:
  std::uint32_t capacity_;
  std::vector<IoRequest> staged_;
  std::deque<IoCompletion> done_;
};

}  // namespace

std::unique_ptr<RingBackend> make_posix_backend(std::uint32_t sq) { return std::make_unique<PosixBackend>(sq); }

}  // namespace uring_engine::io::detail

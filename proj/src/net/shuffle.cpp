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

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <pthread.h>
#include <sched.h>
#include <sys/epoll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "uring_engine/common/aligned_buffer.hpp"
#include "uring_engine/common/cycles.hpp"
#include "uring_engine/common/error.hpp"
#include "uring_engine/common/fd.hpp"
#include "uring_engine/io/ring.hpp"
#include "uring_engine/net/shuffle.hpp"

namespace uring_engine::net {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

// Thrown inside a worker when another worker already failed.
struct Aborted {};

// ---------------------------------------------------------------------------
// Plain blocking sockets for setup and the control channel.

struct Endpoint {
  std::string host;
  std::string port;
};

Endpoint parse_endpoint(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    raise(ErrorCode::ConfigError, "peer address must be host:port, got '" + s + "'");
  Endpoint e{s.substr(0, colon), s.substr(colon + 1)};
  if (e.host.size() > 2 && e.host.front() == '[' && e.host.back() == ']') e.host = e.host.substr(1, e.host.size() - 2);
  return e;
}

struct AddrList {
  addrinfo* head = nullptr;
  ~AddrList() {
    if (head) ::freeaddrinfo(head);
  }
};

void resolve(const Endpoint& e, bool passive, AddrList& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  int rc = ::getaddrinfo(e.host.c_str(), e.port.c_str(), &hints, &out.head);
  if (rc != 0) raise(ErrorCode::ConfigError, "cannot resolve " + e.host + ":" + e.port + ": " + gai_strerror(rc));
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void set_io_timeout(int fd, std::chrono::milliseconds t) {
  timeval tv{};
  tv.tv_sec = t.count() / 1000;
  tv.tv_usec = (t.count() % 1000) * 1000;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

UniqueFd listen_on(const Endpoint& e) {
  AddrList addrs;
  resolve(e, true, addrs);
  int last_err = 0;
  for (addrinfo* a = addrs.head; a; a = a->ai_next) {
    UniqueFd fd(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
    if (!fd) {
      last_err = errno;
      continue;
    }
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd.get(), a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd.get(), 512) == 0) return fd;
    last_err = errno;
  }
  raise_errno(ErrorCode::PeerUnreachable, "listen on " + e.host + ":" + e.port, last_err);
}

UniqueFd connect_to(const Endpoint& e, Clock::time_point deadline) {
  AddrList addrs;
  resolve(e, false, addrs);
  int last_err = 0;
  for (;;) {
    for (addrinfo* a = addrs.head; a; a = a->ai_next) {
      UniqueFd fd(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
      if (!fd) {
        last_err = errno;
        continue;
      }
      if (::connect(fd.get(), a->ai_addr, a->ai_addrlen) == 0) {
        set_nodelay(fd.get());
        return fd;
      }
      last_err = errno;
    }
    if (Clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  raise_errno(ErrorCode::PeerUnreachable, "connect to " + e.host + ":" + e.port, last_err);
}

void write_all(int fd, const void* data, std::size_t n) {
  auto* p = static_cast<const char*>(data);
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) raise_errno(ErrorCode::PeerDisconnected, "control send", w < 0 ? errno : EPIPE);
    p += w;
    n -= std::size_t(w);
  }
}

void read_all(int fd, void* data, std::size_t n) {
  auto* p = static_cast<char*>(data);
  while (n > 0) {
    ssize_t r = ::recv(fd, p, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r == 0) raise(ErrorCode::PeerDisconnected, "peer closed the control connection");
    if (r < 0) raise_errno(ErrorCode::PeerDisconnected, "control receive", errno);
    p += r;
    n -= std::size_t(r);
  }
}

// Length-prefixed (u32 little-endian) JSON messages.
void send_message(int fd, const json& msg) {
  std::string text = msg.dump();
  std::uint32_t len = std::uint32_t(text.size());
  std::byte prefix[4];
  std::memcpy(prefix, &len, 4);
  write_all(fd, prefix, 4);
  write_all(fd, text.data(), text.size());
}

json recv_message(int fd) {
  std::uint32_t len = 0;
  read_all(fd, &len, 4);
  if (len > (16u << 20)) raise(ErrorCode::PeerDisconnected, "control message too large");
  std::string text(len, '\0');
  read_all(fd, text.data(), len);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::PeerDisconnected, std::string("malformed control message: ") + e.what());
  }
}

json to_json(const PartitionChecksum& c) { return json::array({c.sum, c.count}); }
PartitionChecksum checksum_from(const json& j) { return {j.at(0).get<std::uint64_t>(), j.at(1).get<std::uint64_t>()}; }

// ---------------------------------------------------------------------------
// Per-worker shuffle state.

struct Conn {
  int fd = -1;
  std::uint32_t peer = 0;

  std::vector<AlignedBuffer> chunks;
  std::vector<std::uint32_t> free_chunks;
  std::deque<std::pair<std::uint32_t, std::size_t>> send_queue;  // chunk index, frame bytes
  int filling = -1;
  std::uint32_t fill_tuples = 0;
  std::size_t send_offset = 0;
  bool send_busy = false;
  bool eos_queued = false;

  AlignedBuffer stream;
  std::size_t filled = 0;
  bool recv_busy = false;
  bool eos_received = false;
  std::uint16_t group = 0;
};

struct WorkerResult {
  std::vector<PartitionChecksum> sent;
  PartitionChecksum received;
  std::uint64_t generated = 0;
  std::uint64_t local = 0;
  std::uint64_t chunks = 0;
  std::vector<std::uint64_t> egress, ingress;
  std::vector<std::string> notes;
  std::vector<std::vector<std::byte>> stored;  // tuples kept for the probe table
  bool ring_shared = false;
};

class Worker;

class Transport {
 public:
  virtual ~Transport() = default;
  /// Starts whatever I/O the connections need and handles completions.
  /// With `block`, waits up to a short interval for at least one.
  virtual void pump(bool block) = 0;
  virtual bool ring_shared() const { return false; }
};

class Worker {
 public:
  Worker(const ShuffleConfig& cfg, std::uint32_t index, MorselCursor& cursor, std::atomic<bool>& abort,
         const std::vector<int>& fds)
      : cfg_(cfg), index_(index), cursor_(cursor), abort_(abort) {
    tuples_per_chunk_ = cfg.chunk_bytes / cfg.tuple_width;
    payload_cap_ = std::size_t(tuples_per_chunk_) * cfg.tuple_width;
    frame_cap_ = kChunkHeaderBytes + payload_cap_;
    res_.sent.resize(cfg.nodes);
    res_.egress.assign(cfg.nodes, 0);
    res_.ingress.assign(cfg.nodes, 0);
    conn_of_.assign(cfg.nodes, -1);
    for (std::uint32_t p = 0; p < cfg.nodes; ++p) {
      if (p == cfg.node_id) continue;
      Conn c;
      c.fd = fds[p];
      c.peer = p;
      for (std::uint32_t i = 0; i <= cfg.inflight_chunks; ++i) {
        c.chunks.emplace_back(frame_cap_, 64);
        c.free_chunks.push_back(i);
      }
      c.stream = AlignedBuffer(2 * frame_cap_, 64);
      c.group = std::uint16_t(conns_.size() + 1);
      conn_of_[p] = int(conns_.size());
      conns_.push_back(std::move(c));
    }
  }

  WorkerResult run();

  // Transport callbacks ------------------------------------------------------
  std::vector<Conn>& conns() noexcept { return conns_; }
  const ShuffleConfig& config() const noexcept { return cfg_; }
  std::size_t frame_cap() const noexcept { return frame_cap_; }
  void note(std::string s) {
    if (std::find(res_.notes.begin(), res_.notes.end(), s) == res_.notes.end()) res_.notes.push_back(std::move(s));
  }
  void check_abort() const {
    if (abort_.load(std::memory_order_relaxed)) throw Aborted{};
  }

  std::span<std::byte> pending_send(Conn& c) noexcept {
    if (c.send_queue.empty()) return {};
    auto [idx, frame] = c.send_queue.front();
    return c.chunks[idx].span().subspan(c.send_offset, frame - c.send_offset);
  }
  void on_sent(Conn& c, std::size_t n) {
    c.send_offset += n;
    res_.egress[c.peer] += n;
    progress_ = Clock::now();
    auto [idx, frame] = c.send_queue.front();
    if (c.send_offset == frame) {
      c.free_chunks.push_back(idx);
      c.send_queue.pop_front();
      c.send_offset = 0;
    }
  }
  std::span<std::byte> recv_space(Conn& c) noexcept { return c.stream.span().subspan(c.filled); }
  bool wants_recv(const Conn& c) const noexcept { return !c.eos_received; }
  void on_received(Conn& c, std::size_t n) {
    if (n == 0) {
      if (c.eos_received) return;
      raise(ErrorCode::PeerDisconnected, "node " + std::to_string(c.peer) + " closed before end of stream");
    }
    c.filled += n;
    res_.ingress[c.peer] += n;
    progress_ = Clock::now();
    consume(c);
  }
  void stalled_check() const {
    if (Clock::now() - progress_ > std::chrono::milliseconds(cfg_.stall_timeout_ms))
      raise(ErrorCode::PeerDisconnected, "no progress from peers within the stall timeout");
  }

 private:
  std::byte* slot_for(Conn& c) {
    while (c.filling < 0 && c.free_chunks.empty()) pump(true);
    if (c.filling < 0) {
      c.filling = int(c.free_chunks.back());
      c.free_chunks.pop_back();
      c.fill_tuples = 0;
    }
    return c.chunks[std::size_t(c.filling)].data() + kChunkHeaderBytes + std::size_t(c.fill_tuples) * cfg_.tuple_width;
  }

  void seal(Conn& c, bool eos) {
    std::byte* base = c.chunks[std::size_t(c.filling)].data();
    ChunkHeader h;
    h.flags = eos ? kChunkFlagEndOfStream : 0;
    h.source_node = std::uint16_t(cfg_.node_id);
    h.partition = std::uint16_t(c.peer);
    h.tuple_count = c.fill_tuples;
    h.payload_len = c.fill_tuples * cfg_.tuple_width;
    h.crc = crc32c({base + kChunkHeaderBytes, h.payload_len});
    write_header({base, kChunkHeaderBytes}, h);
    c.send_queue.emplace_back(std::uint32_t(c.filling), kChunkHeaderBytes + h.payload_len);
    c.filling = -1;
    c.fill_tuples = 0;
    ++res_.chunks;
  }

  void finish(Conn& c) {
    if (c.filling >= 0 && c.fill_tuples > 0) seal(c, false);
    slot_for(c);
    seal(c, true);
    c.eos_queued = true;
  }

  bool done() const noexcept {
    for (const Conn& c : conns_)
      if (!c.eos_queued || !c.send_queue.empty() || !c.eos_received) return false;
    return true;
  }

  void consume(Conn& c) {
    std::size_t off = 0;
    while (c.filled - off >= kChunkHeaderBytes) {
      std::span<const std::byte> avail(c.stream.data() + off, c.filled - off);
      ChunkHeader h = read_header(avail);
      if (h.payload_len > payload_cap_)
        raise(ErrorCode::ConfigMismatch, "peer chunk larger than the configured chunk size");
      if (avail.size() < kChunkHeaderBytes + h.payload_len) break;
      if (c.eos_received) raise(ErrorCode::PeerDisconnected, "data after end of stream");
      DecodedChunk d = decode_chunk(avail, cfg_.tuple_width);
      if (d.header.partition != cfg_.node_id || d.header.source_node != c.peer)
        raise(ErrorCode::OwnershipViolation, "chunk addressed to another partition");
      if (d.header.flags & kChunkFlagEndOfStream) {
        c.eos_received = true;
      } else {
        for (std::size_t t = 0; t < d.header.tuple_count; ++t) {
          auto tuple = d.payload.subspan(t * cfg_.tuple_width, cfg_.tuple_width);
          Key key;
          std::memcpy(&key, tuple.data(), sizeof key);
          if (partition_of(key, cfg_.nodes) != cfg_.node_id)
            raise(ErrorCode::OwnershipViolation, "received tuple of a foreign partition");
          res_.received.add(tuple);
        }
        if (cfg_.build_probe_table) res_.stored.emplace_back(d.payload.begin(), d.payload.end());
      }
      off += d.frame_bytes;
    }
    if (off > 0) {
      std::memmove(c.stream.data(), c.stream.data() + off, c.filled - off);
      c.filled -= off;
    }
  }

  void pump(bool block) {
    check_abort();
    transport_->pump(block);
  }

  const ShuffleConfig& cfg_;
  std::uint32_t index_;
  MorselCursor& cursor_;
  std::atomic<bool>& abort_;
  std::uint32_t tuples_per_chunk_ = 0;
  std::size_t payload_cap_ = 0;
  std::size_t frame_cap_ = 0;
  std::vector<Conn> conns_;
  std::vector<int> conn_of_;
  WorkerResult res_;
  std::unique_ptr<Transport> transport_;
  Clock::time_point progress_ = Clock::now();
};

// ---------------------------------------------------------------------------

class RingTransport final : public Transport {
 public:
  explicit RingTransport(Worker& w) : w_(w) {
    const ShuffleConfig& cfg = w.config();
    std::uint32_t depth = 64;
    while (depth < 4 * w.conns().size() + 8) depth <<= 1;
    io::RingConfig rc = io::RingConfig::for_backend(io::Backend::UringDefault);
    rc.sq_depth = depth;
    rc.cq_depth = 4 * depth;
    ring_.emplace(io::Ring::create(rc));
    zero_copy_ = cfg.zero_copy_send;
    multishot_ = cfg.multishot_recv;
    if (cfg.zero_copy_recv)
      w.note("zero-copy receive unsupported on this host (needs a NIC receive queue); using copy receive");
    if (multishot_) {
      buf_size_ = std::uint32_t(std::min<std::size_t>(64 * 1024, w.frame_cap()));
      try {
        for (Conn& c : w.conns()) {
          groups_.emplace_back(std::size_t(kGroupBuffers) * buf_size_, 4096);
          ring_->register_buffer_group(c.group, groups_.back().span(), buf_size_);
        }
      } catch (const Error& e) {
        w.note(std::string("multishot receive unavailable (") + e.what() + "); using single-shot receive");
        multishot_ = false;
      }
    }
  }

  bool ring_shared() const override { return ring_->shared_across_threads(); }

  void pump(bool block) override {
    std::vector<Conn>& conns = w_.conns();
    for (std::size_t i = 0; i < conns.size(); ++i) {
      Conn& c = conns[i];
      if (!c.send_busy) {
        auto span = w_.pending_send(c);
        if (!span.empty()) {
          io::IoRequest r = io::IoRequest::send(tag(i, false), io::Target::socket(c.fd), span);
          r.flags.zero_copy = zero_copy_;
          r.flags.poll_first = w_.config().poll_first;
          ring_->enqueue(r);
          c.send_busy = true;
        }
      }
      if (!c.recv_busy && w_.wants_recv(c)) {
        io::IoRequest r = io::IoRequest::recv(tag(i, true), io::Target::socket(c.fd), {});
        if (multishot_) {
          r.flags.multishot = true;
          r.buffer_group = c.group;
        } else {
          r.buffer = w_.recv_space(c);
        }
        r.flags.poll_first = w_.config().poll_first;
        ring_->enqueue(r);
        c.recv_busy = true;
      }
    }
    ring_->submit();
    completions_.clear();
    try {
      ring_->reap_into(completions_, block ? 1 : 0, 256,
                       block ? std::optional(std::chrono::microseconds(100000)) : std::optional(std::chrono::microseconds(0)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TimedOut) throw;
    }
    if (block && completions_.empty()) w_.stalled_check();
    for (const io::IoCompletion& done : completions_) handle(done);
  }

 private:
  static constexpr std::uint32_t kGroupBuffers = 16;

  static std::uint64_t tag(std::size_t conn, bool recv) { return (std::uint64_t(conn) << 1) | (recv ? 1 : 0); }

  void handle(const io::IoCompletion& done) {
    Conn& c = w_.conns()[done.tag >> 1];
    if ((done.tag & 1) == 0) {
      c.send_busy = false;
      if (!done.ok()) {
        if (zero_copy_ && (done.error == EINVAL || done.error == EOPNOTSUPP)) {
          w_.note("zero-copy send rejected by the kernel; using copy send");
          zero_copy_ = false;
          return;  // resent by the next pump
        }
        if (done.error == EINTR || done.error == EAGAIN) return;
        raise_errno(ErrorCode::PeerDisconnected, "send to node " + std::to_string(c.peer), done.error);
      }
      w_.on_sent(c, done.bytes);
      return;
    }
    if (!done.more_coming) c.recv_busy = false;
    if (!done.ok()) {
      if (done.error == ENOBUFS || done.error == EINTR || done.error == EAGAIN) return;
      raise_errno(ErrorCode::PeerDisconnected, "receive from node " + std::to_string(c.peer), done.error);
    }
    if (done.buffer_id) {
      auto buf = ring_->group_buffer(c.group, *done.buffer_id);
      if (done.bytes > 0) std::memcpy(w_.recv_space(c).data(), buf.data(), done.bytes);
      ring_->recycle_buffer(c.group, *done.buffer_id);
    }
    w_.on_received(c, done.bytes);
  }

  Worker& w_;
  std::optional<io::Ring> ring_;
  bool zero_copy_ = false;
  bool multishot_ = false;
  std::uint32_t buf_size_ = 0;
  std::vector<AlignedBuffer> groups_;
  std::vector<io::IoCompletion> completions_;
};

class ReadinessTransport final : public Transport {
 public:
  explicit ReadinessTransport(Worker& w) : w_(w), ep_(::epoll_create1(EPOLL_CLOEXEC)) {
    if (!ep_) raise_errno(ErrorCode::BackendFailure, "epoll_create1", errno);
    const ShuffleConfig& cfg = w.config();
    if (cfg.zero_copy_send || cfg.zero_copy_recv || cfg.multishot_recv || cfg.poll_first)
      w.note("transport flags have no effect on the readiness backend");
    interest_.assign(w.conns().size(), 0);
    for (std::size_t i = 0; i < w.conns().size(); ++i) {
      int fd = w.conns()[i].fd;
      ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
      epoll_event ev{};
      ev.events = EPOLLIN;
      ev.data.u64 = i;
      if (::epoll_ctl(ep_.get(), EPOLL_CTL_ADD, fd, &ev) < 0) raise_errno(ErrorCode::BackendFailure, "epoll_ctl", errno);
      interest_[i] = EPOLLIN;
    }
  }

  void pump(bool block) override {
    if (drive() || !block) return;
    std::vector<Conn>& conns = w_.conns();
    for (std::size_t i = 0; i < conns.size(); ++i) {
      std::uint32_t want = (w_.wants_recv(conns[i]) ? std::uint32_t(EPOLLIN) : 0u) |
                           (w_.pending_send(conns[i]).empty() ? 0u : std::uint32_t(EPOLLOUT));
      if (want != interest_[i]) {
        epoll_event ev{};
        ev.events = want;
        ev.data.u64 = i;
        ::epoll_ctl(ep_.get(), EPOLL_CTL_MOD, conns[i].fd, &ev);
        interest_[i] = want;
      }
    }
    epoll_event events[16];
    int n = ::epoll_wait(ep_.get(), events, 16, 100);
    if (n < 0 && errno != EINTR) raise_errno(ErrorCode::BackendFailure, "epoll_wait", errno);
    if (n <= 0) w_.stalled_check();
    drive();
  }

 private:
  bool drive() {
    bool progress = false;
    for (Conn& c : w_.conns()) {
      for (;;) {
        auto span = w_.pending_send(c);
        if (span.empty()) break;
        ssize_t n = ::send(c.fd, span.data(), span.size(), MSG_NOSIGNAL | MSG_DONTWAIT);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
        if (n < 0) raise_errno(ErrorCode::PeerDisconnected, "send to node " + std::to_string(c.peer), errno);
        w_.on_sent(c, std::size_t(n));
        progress = true;
      }
      while (w_.wants_recv(c)) {
        auto space = w_.recv_space(c);
        ssize_t n = ::recv(c.fd, space.data(), space.size(), MSG_DONTWAIT);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
        if (n < 0) raise_errno(ErrorCode::PeerDisconnected, "receive from node " + std::to_string(c.peer), errno);
        w_.on_received(c, std::size_t(n));
        progress = true;
      }
    }
    return progress;
  }

  Worker& w_;
  UniqueFd ep_;
  std::vector<std::uint32_t> interest_;
};

WorkerResult Worker::run() {
  if (!conns_.empty()) {
    if (cfg_.backend == ShuffleBackend::Ring) transport_ = std::make_unique<RingTransport>(*this);
    else transport_ = std::make_unique<ReadinessTransport>(*this);
  }
  const std::uint32_t self = cfg_.node_id;
  const std::uint32_t width = cfg_.tuple_width;
  std::vector<std::byte> scratch(width);
  std::vector<std::byte> local_store;

  while (auto m = cursor_.next()) {
    for (std::uint64_t i = m->start; i < m->start + m->len; ++i) {
      Key key = tuple_key(cfg_.seed, self, i);
      std::uint32_t dest = partition_of(key, cfg_.nodes);
      if (dest == self) {
        generate_tuple(cfg_.seed, self, i, scratch);
        res_.sent[self].add(scratch);
        ++res_.local;
        if (cfg_.build_probe_table) local_store.insert(local_store.end(), scratch.begin(), scratch.end());
      } else {
        Conn& c = conns_[std::size_t(conn_of_[dest])];
        std::span<std::byte> slot(slot_for(c), width);
        generate_tuple(cfg_.seed, self, i, slot);
        res_.sent[dest].add(slot);
        if (++c.fill_tuples == tuples_per_chunk_) seal(c, false);
      }
    }
    res_.generated += m->len;
    if (transport_) pump(false);
    else check_abort();
  }
  for (Conn& c : conns_) finish(c);
  progress_ = Clock::now();
  while (!done()) pump(true);

  res_.received.merge(res_.sent[self]);
  if (!local_store.empty()) res_.stored.push_back(std::move(local_store));
  res_.ring_shared = transport_ && transport_->ring_shared();
  transport_.reset();
  return std::move(res_);
}

void pin_to_cpu(int cpu, std::vector<std::string>& notes, std::mutex& mu) {
  cpu_set_t set;
  CPU_ZERO(&set);
  if (cpu < 0 || cpu >= CPU_SETSIZE) {
    std::lock_guard lock(mu);
    notes.push_back("cpu " + std::to_string(cpu) + " out of range; worker left unpinned");
    return;
  }
  CPU_SET(cpu, &set);
  if (int rc = ::pthread_setaffinity_np(::pthread_self(), sizeof set, &set); rc != 0) {
    std::lock_guard lock(mu);
    notes.push_back("pinning to cpu " + std::to_string(cpu) + " failed: " + std::strerror(rc));
  }
}

// Builds the probe table from all tuples that landed here; worker w inserts
// the partitions it owns.
std::uint64_t build_probe_table(const ShuffleConfig& cfg, const std::vector<WorkerResult>& results,
                                std::uint64_t expected) {
  const std::uint32_t width = cfg.tuple_width;
  ProbeTable table(cfg.workers * 4, expected, cfg.workers);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(cfg.workers);
  for (std::uint32_t w = 0; w < cfg.workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        std::vector<TupleRef> batch;
        batch.reserve(64);
        for (const WorkerResult& r : results) {
          for (const auto& block : r.stored) {
            for (std::size_t off = 0; off + width <= block.size(); off += width) {
              Key key;
              std::memcpy(&key, block.data() + off, sizeof key);
              if (table.owner_of(table.partition_for(key)) != w) continue;
              batch.push_back({key, block.data() + off});
              if (batch.size() == 64) {
                table.insert_batch(w, batch);
                batch.clear();
              }
            }
          }
        }
        if (!batch.empty()) table.insert_batch(w, batch);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return table.size();
}

}  // namespace

ShuffleReport shuffle_run(const ShuffleConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  const std::uint32_t nodes = cfg.nodes;
  const std::uint32_t self = cfg.node_id;
  const std::string fingerprint = cfg.fingerprint();

  std::vector<std::vector<UniqueFd>> data(cfg.workers);
  for (auto& row : data) row.resize(nodes);
  UniqueFd control;                      // to node 0 (other nodes)
  std::vector<UniqueFd> control_in(nodes);  // from every other node (node 0)

  if (nodes > 1) {
    std::vector<Endpoint> eps;
    for (const auto& p : cfg.peers) eps.push_back(parse_endpoint(p));
    const auto deadline = Clock::now() + std::chrono::milliseconds(cfg.connect_timeout_ms);
    const auto io_timeout = std::chrono::milliseconds(std::max<std::uint32_t>(cfg.stall_timeout_ms, 1000));
    UniqueFd listener = listen_on(eps[self]);

    auto hello = [&](const char* kind, std::uint32_t worker) {
      return json{{"kind", kind}, {"node", self}, {"worker", worker}, {"fingerprint", fingerprint}};
    };
    if (self != 0) {
      control = connect_to(eps[0], deadline);
      set_io_timeout(control.get(), io_timeout);
      send_message(control.get(), hello("control", 0));
    }
    for (std::uint32_t peer = 0; peer < self; ++peer) {
      for (std::uint32_t w = 0; w < cfg.workers; ++w) {
        UniqueFd fd = connect_to(eps[peer], deadline);
        set_io_timeout(fd.get(), io_timeout);
        send_message(fd.get(), hello("data", w));
        data[w][peer] = std::move(fd);
      }
    }

    std::size_t expected = std::size_t(nodes - 1 - self) * cfg.workers + (self == 0 ? nodes - 1 : 0);
    std::string mismatch;
    for (std::size_t got = 0; got < expected;) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      pollfd pfd{listener.get(), POLLIN, 0};
      int rc = ::poll(&pfd, 1, int(std::max<long long>(left, 0)));
      if (rc < 0 && errno == EINTR) continue;
      if (rc <= 0) raise(ErrorCode::PeerUnreachable, "timed out waiting for peers to connect");
      UniqueFd fd(::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC));
      if (!fd) continue;
      set_nodelay(fd.get());
      set_io_timeout(fd.get(), io_timeout);
      json h = recv_message(fd.get());
      auto node = h.at("node").get<std::uint32_t>();
      auto worker = h.at("worker").get<std::uint32_t>();
      std::string kind = h.at("kind").get<std::string>();
      if (node >= nodes || node == self || worker >= cfg.workers)
        raise(ErrorCode::ConfigMismatch, "hello from an unexpected node or worker");
      if (h.at("fingerprint").get<std::string>() != fingerprint && mismatch.empty())
        mismatch = "node " + std::to_string(node) + " runs a different configuration";
      if (kind == "control" && self == 0) control_in[node] = std::move(fd);
      else if (kind == "data" && node > self) data[worker][node] = std::move(fd);
      else raise(ErrorCode::ConfigMismatch, "unexpected connection kind " + kind);
      ++got;
    }
    if (self == 0) {
      for (std::uint32_t n = 1; n < nodes; ++n)
        send_message(control_in[n].get(), json{{"ok", mismatch.empty()}, {"reason", mismatch}});
      if (!mismatch.empty()) raise(ErrorCode::ConfigMismatch, mismatch);
    } else {
      if (!mismatch.empty()) raise(ErrorCode::ConfigMismatch, mismatch);
      json reply = recv_message(control.get());
      if (!reply.at("ok").get<bool>()) raise(ErrorCode::ConfigMismatch, reply.at("reason").get<std::string>());
    }
  }

  // Shuffle phase.
  MorselCursor cursor(cfg.tuples_per_node(), cfg.morsel_tuples);
  std::atomic<bool> abort{false};
  std::vector<WorkerResult> results(cfg.workers);
  std::vector<std::exception_ptr> errors(cfg.workers);
  std::vector<std::string> pin_notes;
  std::mutex pin_mu;
  {
    std::vector<std::thread> threads;
    for (std::uint32_t w = 0; w < cfg.workers; ++w) {
      std::vector<int> fds(nodes, -1);
      for (std::uint32_t p = 0; p < nodes; ++p) fds[p] = data[w][p].get();
      threads.emplace_back([&, w, fds] {
        if (!cfg.cpus.empty()) pin_to_cpu(cfg.cpus[w % cfg.cpus.size()], pin_notes, pin_mu);
        try {
          Worker worker(cfg, w, cursor, abort, fds);
          results[w] = worker.run();
        } catch (const Aborted&) {
        } catch (...) {
          errors[w] = std::current_exception();
          abort = true;
          for (int fd : fds)
            if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ShuffleReport rep;
  rep.egress_bytes.assign(nodes, 0);
  rep.ingress_bytes.assign(nodes, 0);
  rep.sent.resize(nodes);
  rep.annotations = pin_notes;
  for (const WorkerResult& r : results) {
    for (std::uint32_t p = 0; p < nodes; ++p) {
      rep.egress_bytes[p] += r.egress[p];
      rep.ingress_bytes[p] += r.ingress[p];
      rep.sent[p].merge(r.sent[p]);
    }
    rep.received.merge(r.received);
    rep.tuples_sent += r.generated;
    rep.local_tuples += r.local;
    rep.chunks_sent += r.chunks;
    for (const auto& n : r.notes)
      if (std::find(rep.annotations.begin(), rep.annotations.end(), n) == rep.annotations.end())
        rep.annotations.push_back(n);
    if (r.ring_shared) throw std::logic_error("a worker ring was used by more than one thread");
  }
  rep.tuples_received = rep.received.count;
  if (cfg.build_probe_table) rep.probe_entries = build_probe_table(cfg, results, rep.tuples_received);

  // Cross-node verification.
  if (nodes == 1) {
    verify_checksums({rep.sent}, {rep.received});
    rep.global = {rep.received};
  } else if (self == 0) {
    std::vector<std::vector<PartitionChecksum>> sent(nodes);
    std::vector<PartitionChecksum> received(nodes);
    sent[0] = rep.sent;
    received[0] = rep.received;
    for (std::uint32_t n = 1; n < nodes; ++n) {
      json m = recv_message(control_in[n].get());
      for (const auto& c : m.at("sent")) sent[n].push_back(checksum_from(c));
      received[n] = checksum_from(m.at("received"));
    }
    std::string reason;
    try {
      verify_checksums(sent, received);
    } catch (const Error& e) {
      reason = e.what();
    }
    json global = json::array();
    for (const auto& c : received) global.push_back(to_json(c));
    for (std::uint32_t n = 1; n < nodes; ++n)
      send_message(control_in[n].get(), json{{"ok", reason.empty()}, {"reason", reason}, {"global", global}});
    if (!reason.empty()) raise(ErrorCode::ChecksumMismatch, reason);
    rep.global = received;
  } else {
    json sent = json::array();
    for (const auto& c : rep.sent) sent.push_back(to_json(c));
    send_message(control.get(), json{{"sent", sent}, {"received", to_json(rep.received)}});
    json verdict = recv_message(control.get());
    if (!verdict.at("ok").get<bool>()) raise(ErrorCode::ChecksumMismatch, verdict.at("reason").get<std::string>());
    for (const auto& c : verdict.at("global")) rep.global.push_back(checksum_from(c));
  }
  rep.verified = true;
  rep.runtime_s = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

}  // namespace uring_engine::net

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

#include <fcntl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <queue>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "uring_engine/common/aligned_buffer.hpp"
#include "uring_engine/common/error.hpp"
#include "uring_engine/io/ring.hpp"

using namespace uring_engine;
using namespace uring_engine::io;
using namespace std::chrono_literals;

namespace {

Ring sim_ring(std::uint32_t depth = 64, SimDeviceConfig sim = {}) {
  RingConfig c = RingConfig::for_backend(Backend::Simulated);
  c.sq_depth = depth;
  return Ring::create(c, sim);
}

}  // namespace

TEST(RingCreate, SimulatedHasRequestedCapacity) {
  Ring r = sim_ring(64);
  EXPECT_EQ(r.sq_capacity(), 64u);
  EXPECT_EQ(r.cq_capacity(), 128u);
  EXPECT_EQ(r.stats().submitted, 0u);
  EXPECT_EQ(r.outstanding(), 0u);
}

TEST(RingCreate, DepthRoundsUpToPowerOfTwo) {
  Ring r = sim_ring(48);
  EXPECT_EQ(r.sq_capacity(), 64u);
  EXPECT_EQ(r.config().sq_depth, 64u);
}

TEST(RingCreate, RejectsBadDepths) {
  RingConfig c = RingConfig::for_backend(Backend::Simulated);
  c.sq_depth = 0;
  EXPECT_ERROR_CODE(Ring::create(c), ErrorCode::InvalidDepth);
  c.sq_depth = 64;
  c.cq_depth = 16;
  EXPECT_ERROR_CODE(Ring::create(c), ErrorCode::InvalidDepth);
}

TEST(RingCreate, FlagInvariants) {
  RingConfig c = RingConfig::for_backend(Backend::Simulated);
  c.single_issuer = false;
  EXPECT_ERROR_CODE(Ring::create(c), ErrorCode::IncompatibleFlags);
  c.single_issuer = true;
  c.coop_taskrun = true;
  EXPECT_ERROR_CODE(Ring::create(c), ErrorCode::IncompatibleFlags);
}

TEST(RingCreate, KernelRejectsSqpollWithDeferTaskrun) {
  if (!uring_available()) GTEST_SKIP() << "io_uring unavailable";
  RingConfig c = RingConfig::for_backend(Backend::UringSqpoll);
  c.defer_taskrun = true;
  EXPECT_ERROR_CODE(Ring::create(c), ErrorCode::IncompatibleFlags);
}

TEST(RingEnqueue, TicketsIncreaseFromZero) {
  Ring r = sim_ring();
  for (std::uint64_t i = 0; i < 10; ++i) EXPECT_EQ(r.enqueue(IoRequest::nop(i)).seq, i);
}

TEST(RingEnqueue, SqFullAndAutoSubmit) {
  Ring r = sim_ring(4);
  for (int i = 0; i < 4; ++i) r.enqueue(IoRequest::nop(i));
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::nop(9)), ErrorCode::SqFull);

  RingConfig c = RingConfig::for_backend(Backend::Simulated);
  c.sq_depth = 4;
  c.auto_submit = true;
  Ring a = Ring::create(c);
  for (int i = 0; i < 9; ++i) a.enqueue(IoRequest::nop(i));
  EXPECT_EQ(a.stats().submitted, 8u);
  EXPECT_EQ(a.staged(), 1u);
}

TEST(RingEnqueue, BadBufferIndex) {
  Ring r = sim_ring();
  std::vector<AlignedBuffer> bufs;
  std::vector<std::span<std::byte>> regions;
  for (int i = 0; i < 4; ++i) {
    bufs.emplace_back(4096, 4096);
    regions.push_back(bufs.back().span());
  }
  EXPECT_EQ(r.register_buffers(regions).count, 4u);
  IoRequest req = IoRequest::read(1, Target::file(-1), 0, bufs[0].span());
  req.buffer_index = 7;
  EXPECT_ERROR_CODE(r.enqueue(req), ErrorCode::BadBufferIndex);
  req.buffer_index = 1;  // buffer not inside region 1
  EXPECT_ERROR_CODE(r.enqueue(req), ErrorCode::BadBufferIndex);
  req.buffer_index = 0;
  EXPECT_NO_THROW(r.enqueue(req));
}

TEST(RingEnqueue, MisalignedDirectIoDetectedAtEnqueue) {
  Ring r = sim_ring();
  AlignedBuffer buf(8192, 4096);
  Target t = Target::file(-1, true, 4096);
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::read(1, t, 512, buf.span().subspan(0, 4096))), ErrorCode::Misaligned);
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::read(1, t, 0, buf.span().subspan(0, 1000))), ErrorCode::Misaligned);
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::read(1, t, 0, buf.span().subspan(8, 4096))), ErrorCode::Misaligned);
  EXPECT_EQ(r.staged(), 0u);
  EXPECT_NO_THROW(r.enqueue(IoRequest::read(1, t, 4096, buf.span().subspan(0, 4096))));
}

TEST(RingEnqueue, FlagApplicability) {
  Ring r = sim_ring();
  IoRequest req = IoRequest::nop(1);
  req.flags.multishot = true;
  EXPECT_ERROR_CODE(r.enqueue(req), ErrorCode::InvalidRequest);
  req = IoRequest::nop(1);
  req.flags.zero_copy = true;
  EXPECT_ERROR_CODE(r.enqueue(req), ErrorCode::InvalidRequest);
}

TEST(RingEnqueue, SendOnSimulatedIsUnsupported) {
  Ring r = sim_ring();
  std::byte b[8];
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::send(1, Target::socket(3), b)), ErrorCode::KindUnsupportedByBackend);
}

TEST(RingEnqueue, StorageCapEnforced) {
  Ring r = sim_ring();
  AlignedBuffer buf(1 << 20, 4096);
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::read(1, Target::file(-1), 0, buf.span())), ErrorCode::InvalidRequest);
  EXPECT_NO_THROW(r.enqueue(IoRequest::read(1, Target::file(-1), 0, buf.span().subspan(0, 512 * 1024))));
}

TEST(RingSubmit, CountsStagedRequests) {
  Ring r = sim_ring();
  EXPECT_EQ(r.submit(), 0u);
  EXPECT_EQ(r.stats().submit_calls, 0u);
  for (int i = 0; i < 16; ++i) r.enqueue(IoRequest::nop(i));
  EXPECT_EQ(r.submit(), 16u);
  EXPECT_EQ(r.stats().submit_calls, 1u);
}

TEST(RingReap, ConservationOfTags) {
  Ring r = sim_ring();
  std::multiset<std::uint64_t> sent;
  for (std::uint64_t i = 100; i < 108; ++i) {
    r.enqueue(IoRequest::nop(i));
    sent.insert(i);
  }
  r.submit();
  auto got = r.reap(1, 32);
  std::multiset<std::uint64_t> tags;
  for (auto& c : got) tags.insert(c.tag);
  EXPECT_EQ(tags, sent);
}

TEST(RingReap, IdleRingTimesOut) {
  Ring r = sim_ring();
  EXPECT_ERROR_CODE(r.reap(1, 1, 10us), ErrorCode::TimedOut);
  EXPECT_TRUE(r.reap(0, 4).empty());
}

TEST(RingReap, SimulatedReadCompletesAtReadLatency) {
  Ring r = sim_ring();
  AlignedBuffer buf(4096, 4096);
  r.enqueue(IoRequest::read(5, Target::file(-1), 0, buf.span()));
  r.submit();
  auto got = r.reap(1, 1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].timestamp_ns, 70'000u);
  EXPECT_EQ(got[0].bytes, 4096u);
  EXPECT_EQ(r.virtual_clock()->now_ns(), 70'000u);
}

TEST(RingReap, MinZeroNeverBlocks) {
  Ring r = sim_ring();
  AlignedBuffer buf(4096, 4096);
  r.enqueue(IoRequest::read(5, Target::file(-1), 0, buf.span()));
  r.submit();
  EXPECT_TRUE(r.reap(0, 8).empty());
  EXPECT_EQ(r.virtual_clock()->now_ns(), 0u);
}

TEST(RingReap, TimeoutKeepsLaterCompletion) {
  Ring r = sim_ring();
  AlignedBuffer buf(4096, 4096);
  r.enqueue(IoRequest::read(5, Target::file(-1), 0, buf.span()));
  r.submit();
  EXPECT_ERROR_CODE(r.reap(1, 1, 10us), ErrorCode::TimedOut);
  EXPECT_EQ(r.virtual_clock()->now_ns(), 10'000u);
  auto got = r.reap(1, 1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].tag, 5u);
}

TEST(RingLinking, FsyncNeverCompletesBeforeLinkedWrite) {
  Ring r = sim_ring();
  AlignedBuffer buf(4096, 4096);
  IoRequest w = IoRequest::write(1, Target::file(-1), 0, buf.span());
  w.flags.link_to_next = true;
  r.enqueue(w);
  r.enqueue(IoRequest::fsync(2, Target::file(-1)));
  r.submit();
  auto got = r.reap(2, 2);
  std::map<std::uint64_t, std::uint64_t> at;
  for (auto& c : got) at[c.tag] = c.timestamp_ns;
  EXPECT_GE(at[2], at[1]);
  EXPECT_EQ(at[1], 12'000u);
}

TEST(RingLinking, FailedHeadCancelsChain) {
  Ring r = sim_ring();
  AlignedBuffer buf(4096, 4096);
  IoRequest rd = IoRequest::read(1, Target::file(-1), 0, buf.span());
  rd.flags.link_to_next = true;
  rd.flags.link_timeout = 5us;  // shorter than the 70 us read
  r.enqueue(rd);
  r.enqueue(IoRequest::nop(2));
  r.submit();
  auto got = r.reap(2, 2);
  ASSERT_EQ(got.size(), 2u);
  for (auto& c : got) EXPECT_EQ(c.error, ECANCELED);
  EXPECT_EQ(got[0].timestamp_ns, 5'000u);
}

// Independent discrete-event replay: k channels, each request occupies the
// earliest free channel from max(submit, channel free) for its latency.
TEST(RingSubmit, ExcessBeyondMaxInflightIsDelayed) {
  SimDeviceConfig sim;
  sim.max_inflight = 3;
  Ring r = sim_ring(64, sim);
  std::vector<AlignedBuffer> bufs;
  std::mt19937 rng(3);
  std::vector<std::uint64_t> lat;
  for (int i = 0; i < 10; ++i) {
    bufs.emplace_back(4096, 4096);
    bool write = rng() % 2;
    IoRequest q = write ? IoRequest::write(i, Target::file(-1), 0, bufs.back().span())
                        : IoRequest::read(i, Target::file(-1), 0, bufs.back().span());
    lat.push_back(write ? 12'000 : 70'000);
    r.enqueue(q);
  }
  r.submit();
  std::map<std::uint64_t, std::uint64_t> got;
  for (auto& c : r.reap(10, 10)) got[c.tag] = c.timestamp_ns;

  std::priority_queue<std::uint64_t, std::vector<std::uint64_t>, std::greater<>> free_at;
  for (int i = 0; i < 3; ++i) free_at.push(0);
  for (int i = 0; i < 10; ++i) {
    std::uint64_t start = free_at.top();
    free_at.pop();
    std::uint64_t done = start + lat[i];
    free_at.push(done);
    EXPECT_EQ(got[i], done) << "request " << i;
  }
}

TEST(RingRegister, BuffersAndAlignment) {
  Ring r = sim_ring();
  AlignedBuffer pool(128 * 4096, 4096);
  std::vector<std::span<std::byte>> regions;
  for (int i = 0; i < 128; ++i) regions.push_back(pool.span().subspan(i * 4096, 4096));
  EXPECT_EQ(r.register_buffers(regions).count, 128u);
  std::vector<std::span<std::byte>> odd{pool.span().subspan(1, 4096)};
  EXPECT_ERROR_CODE(r.register_buffers(odd), ErrorCode::NotAligned);
  std::vector<std::span<std::byte>> overlap{pool.span().subspan(0, 8192), pool.span().subspan(4096, 4096)};
  EXPECT_ERROR_CODE(r.register_buffers(overlap), ErrorCode::InvalidRequest);
}

TEST(RingRegister, StaleFileIndexRejected) {
  Ring r = sim_ring();
  int sv[2];
  ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv), 0);
  int fds[2] = {sv[0], sv[1]};
  FileTable t = r.register_files(fds);
  EXPECT_EQ(t.count, 2u);
  EXPECT_EQ(t.at(0).index, 0u);
  EXPECT_EQ(t.at(1).index, 1u);
  AlignedBuffer buf(4096, 4096);
  Target tgt = Target::file(-1);
  tgt.fixed = t.at(1);
  EXPECT_NO_THROW(r.enqueue(IoRequest::read(1, tgt, 0, buf.span())));
  r.register_files(fds);
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::read(2, tgt, 0, buf.span())), ErrorCode::BadFileIndex);
  ::close(sv[0]);
  ::close(sv[1]);
}

TEST(RingSim, DataMovesThroughBackingFile) {
  TempFile f;
  Ring r = sim_ring();
  AlignedBuffer out(4096, 4096), in(4096, 4096);
  std::memset(out.data(), 0x5a, 4096);
  r.enqueue(IoRequest::write(1, Target::file(f.fd()), 8192, out.span()));
  r.submit();
  ASSERT_TRUE(r.reap(1, 1)[0].ok());
  r.enqueue(IoRequest::read(2, Target::file(f.fd()), 8192, in.span()));
  r.submit();
  auto c = r.reap(1, 1);
  EXPECT_EQ(c[0].bytes, 4096u);
  EXPECT_EQ(std::memcmp(in.data(), out.data(), 4096), 0);
}

TEST(RingSim, CpuModelChargesBatchPrices) {
  SimDeviceConfig sim;
  sim.cpu.enabled = true;
  sim.cpu.clock_hz = 1e9;  // 1 cycle = 1 ns
  Ring r = sim_ring(64, sim);
  AlignedBuffer buf(4096, 4096);
  r.enqueue(IoRequest::read(1, Target::file(-1), 0, buf.span()));
  r.submit();
  EXPECT_EQ(r.virtual_clock()->now_ns(), 10'200u);
  r.reap(1, 1);
  std::uint64_t t0 = r.virtual_clock()->now_ns();
  for (int i = 0; i < 4; ++i) r.enqueue(IoRequest::read(i, Target::file(-1), 0, buf.span()));
  r.enqueue(IoRequest::write(9, Target::file(-1), 0, buf.span()));
  r.submit();
  EXPECT_EQ(r.virtual_clock()->now_ns() - t0, 4u * 5400u + 10'200u);
}

TEST(RingSim, DeterministicAcrossRuns) {
  auto trace = [] {
    SimDeviceConfig sim;
    sim.max_inflight = 5;
    Ring r = sim_ring(64, sim);
    AlignedBuffer buf(4096, 4096);
    std::mt19937 rng(11);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (int round = 0; round < 20; ++round) {
      int n = 1 + int(rng() % 8);
      for (int i = 0; i < n; ++i) {
        bool w = rng() % 3 == 0;
        r.enqueue(w ? IoRequest::write(round * 100 + i, Target::file(-1), 0, buf.span())
                    : IoRequest::read(round * 100 + i, Target::file(-1), 0, buf.span()));
      }
      r.submit();
      for (auto& c : r.reap(1, 64)) out.emplace_back(c.tag, c.timestamp_ns);
    }
    for (auto& c : r.reap(r.outstanding(), 1024)) out.emplace_back(c.tag, c.timestamp_ns);
    return out;
  };
  EXPECT_EQ(trace(), trace());
}

class RealRing : public ::testing::TestWithParam<Backend> {
 protected:
  void SetUp() override {
    if (is_uring(GetParam()) && !uring_available()) GTEST_SKIP() << "io_uring unavailable";
  }
};

TEST_P(RealRing, NopBatchConserved) {
  RingConfig c = RingConfig::for_backend(GetParam());
  c.sq_depth = 32;
  Ring r = Ring::create(c);
  for (std::uint64_t i = 0; i < 32; ++i) r.enqueue(IoRequest::nop(i));
  EXPECT_EQ(r.submit(), 32u);
  std::set<std::uint64_t> tags;
  while (tags.size() < 32)
    for (auto& c2 : r.reap(1, 32, 1s)) tags.insert(c2.tag);
  EXPECT_EQ(tags.size(), 32u);
  EXPECT_EQ(r.outstanding(), 0u);
}

TEST_P(RealRing, WriteReadRoundTrip) {
  TempFile f;
  Ring r = Ring::create(RingConfig::for_backend(GetParam()));
  AlignedBuffer out(4096, 4096), in(4096, 4096);
  for (int i = 0; i < 4096; ++i) out.data()[i] = std::byte(i * 7);
  IoRequest w = IoRequest::write(1, Target::file(f.fd()), 4096, out.span());
  w.flags.link_to_next = true;
  r.enqueue(w);
  r.enqueue(IoRequest::fsync(2, Target::file(f.fd()), true));
  r.submit();
  auto c = r.reap(2, 2, 5s);
  for (auto& x : c) EXPECT_TRUE(x.ok()) << x.tag << " err " << x.error;
  r.enqueue(IoRequest::read(3, Target::file(f.fd()), 4096, in.span()));
  r.submit();
  c = r.reap(1, 1, 5s);
  EXPECT_EQ(c[0].bytes, 4096u);
  EXPECT_EQ(std::memcmp(in.data(), out.data(), 4096), 0);
}

TEST_P(RealRing, IdleReapTimesOut) {
  Ring r = Ring::create(RingConfig::for_backend(GetParam()));
  EXPECT_ERROR_CODE(r.reap(1, 1, 10us), ErrorCode::TimedOut);
}

INSTANTIATE_TEST_SUITE_P(Backends, RealRing,
                         ::testing::Values(Backend::UringDefault, Backend::UringSqpoll, Backend::PosixSync),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(UringRing, RegisteredBufferReadAndLinkTimeout) {
  if (!uring_available()) GTEST_SKIP();
  TempFile f;
  Ring r = Ring::create(RingConfig::for_backend(Backend::UringDefault));
  AlignedBuffer region(4 * 4096, 4096);
  std::vector<std::span<std::byte>> regions{region.span()};
  r.register_buffers(regions);
  IoRequest w = IoRequest::write(1, Target::file(f.fd()), 0, region.span().subspan(0, 4096));
  w.buffer_index = 0;
  r.enqueue(w);
  r.submit();
  EXPECT_EQ(r.reap(1, 1, 5s)[0].bytes, 4096u);

  int sv[2];
  ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv), 0);
  std::byte b[16];
  IoRequest rv = IoRequest::recv(7, Target::socket(sv[0]), b);
  rv.flags.link_timeout = 1000us;
  r.enqueue(rv);
  r.submit();
  auto c = r.reap(1, 1, 2s);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].tag, 7u);
  EXPECT_EQ(c[0].error, ECANCELED);
  ::close(sv[0]);
  ::close(sv[1]);
}

TEST(UringRing, IopollRejectsFsyncAndBufferedTargets) {
  if (!uring_available()) GTEST_SKIP();
  Ring r = Ring::create(RingConfig::for_backend(Backend::UringIopoll));
  AlignedBuffer buf(4096, 4096);
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::fsync(1, Target::file(3))), ErrorCode::KindUnsupportedByBackend);
  EXPECT_ERROR_CODE(r.enqueue(IoRequest::read(1, Target::file(3), 0, buf.span())), ErrorCode::IncompatibleFlags);
}

TEST(UringRing, MultishotRecvWithProvidedBuffers) {
  if (!uring_available()) GTEST_SKIP();
  Ring r = Ring::create(RingConfig::for_backend(Backend::UringDefault));
  AlignedBuffer storage(8 * 256, 4096);
  r.register_buffer_group(3, storage.span(), 256);
  int sv[2];
  ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, sv), 0);
  IoRequest rv = IoRequest::recv(9, Target::socket(sv[0]), {});
  rv.flags.multishot = true;
  rv.flags.provided_buffer_ring = true;
  rv.buffer_group = 3;
  r.enqueue(rv);
  r.submit();
  std::string received;
  for (int i = 0; i < 3; ++i) {
    std::string msg = "hello" + std::to_string(i);
    ASSERT_EQ(::send(sv[1], msg.data(), msg.size(), 0), ssize_t(msg.size()));
    auto c = r.reap(1, 1, 2s);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_TRUE(c[0].more_coming);
    ASSERT_TRUE(c[0].buffer_id);
    auto span = r.group_buffer(3, *c[0].buffer_id);
    received.append(reinterpret_cast<const char*>(span.data()), c[0].bytes);
    r.recycle_buffer(3, *c[0].buffer_id);
  }
  EXPECT_EQ(received, "hello0hello1hello2");
  ::shutdown(sv[1], SHUT_WR);
  auto c = r.reap(1, 1, 2s);
  EXPECT_FALSE(c[0].more_coming);
  EXPECT_EQ(r.outstanding(), 0u);
  ::close(sv[0]);
  ::close(sv[1]);
}

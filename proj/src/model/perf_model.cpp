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

#include "uring_engine/model/perf_model.hpp"

#include <fcntl.h>
#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include "uring_engine/common/aligned_buffer.hpp"
#include "uring_engine/common/cycles.hpp"
#include "uring_engine/common/error.hpp"
#include "uring_engine/common/fd.hpp"
#include "uring_engine/storage/btree.hpp"
#include "uring_engine/storage/io_executor.hpp"

namespace uring_engine::model {

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

void require_nonneg(double v, const char* name) {
  if (!(v >= 0) || !std::isfinite(v)) raise(ErrorCode::ConfigError, std::string(name) + " must be a finite non-negative number");
}

}  // namespace

Prediction predict_latency_bound(double r_pf, double l_read, double l_write, bool writes_amortized) {
  require_nonneg(r_pf, "r_pf");
  require_nonneg(l_read, "L_read");
  require_nonneg(l_write, "L_write");
  if (r_pf > 1) raise(ErrorCode::ConfigError, "r_pf must be in [0,1]");
  const double per_fault = l_read + (writes_amortized ? 0.0 : l_write);
  Prediction p;
  p.formula = writes_amortized ? fmt("1 / (%g x %g us)", r_pf, l_read * 1e6)
                               : fmt("1 / (%g x (%g us + %g us))", r_pf, l_read * 1e6, l_write * 1e6);
  if (r_pf * per_fault == 0) {
    p.tps = std::numeric_limits<double>::infinity();
    p.domain_error = true;
    p.formula += " = inf (DivisionDomain)";
    return p;
  }
  p.tps = 1.0 / (r_pf * per_fault);
  p.formula += fmt(" = %.0f tx/s", p.tps);
  return p;
}

Prediction predict_cycle_bound(double clock_hz, double c_tx, double r_pf, double c_io) {
  require_nonneg(clock_hz, "clock_hz");
  require_nonneg(c_tx, "c_tx");
  require_nonneg(r_pf, "r_pf");
  require_nonneg(c_io, "c_io");
  if (r_pf > 1) raise(ErrorCode::ConfigError, "r_pf must be in [0,1]");
  const double denom = c_tx + r_pf * c_io;
  if (denom <= 0) raise(ErrorCode::ConfigError, "c_tx + r_pf x c_io must be positive");
  Prediction p;
  p.tps = clock_hz / denom;
  p.formula = fmt("%g / (%g + %g x %g) = %.0f tx/s", clock_hz, c_tx, r_pf, c_io, p.tps);
  return p;
}

double measure_cycles(const std::function<void()>& body, std::size_t samples) {
  std::vector<double> v;
  v.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::uint64_t t0 = CycleClock::now();
    body();
    const std::uint64_t t1 = CycleClock::now();
    v.push_back(double(t1 - t0));
  }
  return std::max(1.0, median(std::move(v)));
}

namespace {

struct Probe {
  io::Ring& ring;
  io::VirtualClock* vclock;
  double hz;

  std::uint64_t cpu_now() const { return vclock ? vclock->now_ns() : CycleClock::now(); }
  double cpu_cycles(std::uint64_t a, std::uint64_t b) const {
    return vclock ? double(b - a) * hz / 1e9 : double(b - a);
  }
  std::uint64_t time_ns() const { return vclock ? vclock->now_ns() : steady_nanos(); }
};

// Runs `n` requests as one submission. Returns {latency of the first
// completion in seconds, CPU cycles per request in submit + reap sections}.
std::pair<double, double> timed_batch(Probe& p, std::vector<io::IoRequest>& reqs) {
  std::vector<io::IoCompletion> out;
  const std::uint64_t t_start = p.time_ns();
  const std::uint64_t c0 = p.cpu_now();
  for (auto& r : reqs) p.ring.enqueue(r);
  p.ring.submit();
  const std::uint64_t c1 = p.cpu_now();
  const std::uint64_t t_submitted = p.time_ns();
  double reap_cycles = 0;
  std::size_t got = 0;
  std::uint64_t first_done = 0;
  while (got < reqs.size()) {
    out.clear();
    if (p.vclock) {
      p.ring.reap_into(out, 1, reqs.size() - got);
    } else {
      const std::uint64_t r0 = CycleClock::now();
      p.ring.reap_into(out, 0, reqs.size() - got);
      const std::uint64_t r1 = CycleClock::now();
      if (!out.empty()) reap_cycles += double(r1 - r0);
    }
    for (auto& c : out) {
      if (!c.ok()) raise_errno(ErrorCode::IoError, "calibration probe", c.error);
      if (got == 0) first_done = p.vclock ? c.timestamp_ns : steady_nanos();
      ++got;
    }
  }
  // Simulated latency starts once submission CPU has been charged.
  const std::uint64_t start = p.vclock ? t_submitted : t_start;
  const double latency = double(first_done - start) / 1e9;
  return {latency, (p.cpu_cycles(c0, c1) + reap_cycles) / double(reqs.size())};
}

std::function<void()> default_tx_body(const std::string& path, std::unique_ptr<void, void (*)(void*)>& keepalive) {
  struct State {
    storage::PageFile file;
    io::Ring ring;
    storage::SyncExecutor exec;
    storage::BufferPool pool;
    storage::BTree tree;
    std::mt19937_64 rng{1};
    State(storage::PageFile f)
        : file(std::move(f)),
          ring(io::Ring::create(io::RingConfig::for_backend(io::Backend::PosixSync))),
          exec(ring),
          pool(file, exec, {.frames = std::size_t(file.page_count()) + 8}),
          tree(storage::BTree::open(pool)) {}
  };
  const std::uint64_t tuples = 100000;
  auto file = storage::PageFile::create(path, 4096);
  storage::bulk_load(file, 128, tuples, [](storage::Key k, std::span<std::byte> v) { std::memcpy(v.data(), &k, 8); });
  auto* s = new State(std::move(file));
  ::unlink(path.c_str());
  keepalive = std::unique_ptr<void, void (*)(void*)>(s, [](void* p) { delete static_cast<State*>(p); });
  for (std::uint64_t k = 0; k < tuples; k += 30) s->tree.update(k, [](std::span<std::byte>) {});
  return [s, tuples] {
    s->tree.update(s->rng() % tuples, [](std::span<std::byte> v) { v[0] = std::byte(std::uint8_t(v[0]) + 1); });
  };
}

}  // namespace

CostProfile calibrate(const CalibrationConfig& config) {
  timespec res{};
  if (::clock_getres(CLOCK_MONOTONIC, &res) != 0 || res.tv_sec != 0 || res.tv_nsec > 1000)
    raise(ErrorCode::TimerUnavailable, "no monotonic timer with microsecond resolution");
  if (config.require_cycle_counter && CycleClock::source() != CycleSource::InvariantTsc)
    raise(ErrorCode::TimerUnavailable, "no invariant cycle counter");
  if (config.samples == 0 || config.batch == 0) raise(ErrorCode::ConfigError, "samples and batch must be positive");

  const std::size_t bs = config.block_size;
  const std::size_t blocks = std::max<std::size_t>(64, config.batch);
  UniqueFd fd(::open(config.probe_path.c_str(), O_RDWR | O_CREAT | O_TRUNC | O_CLOEXEC | (config.direct_io ? O_DIRECT : 0), 0644));
  if (!fd) raise_errno(ErrorCode::IoError, "open " + config.probe_path, errno);
  ::unlink(config.probe_path.c_str());
  AlignedBuffer buf(bs * blocks, 4096);
  if (::pwrite(fd.get(), buf.data(), buf.size(), 0) != ssize_t(buf.size()))
    raise_errno(ErrorCode::IoError, "prepare calibration file", errno);

  io::Ring ring = io::Ring::create(config.ring, config.sim);
  Probe p{ring, ring.virtual_clock(), 0};
  p.hz = p.vclock ? config.sim.cpu.clock_hz : CycleClock::ticks_per_second();
  const io::Target target = io::Target::file(fd.get(), config.direct_io, 4096);

  auto requests = [&](bool write, std::size_t n) {
    std::vector<io::IoRequest> v;
    for (std::size_t i = 0; i < n; ++i) {
      auto slice = buf.span().subspan(i * bs, bs);
      v.push_back(write ? io::IoRequest::write(i, target, i * bs, slice) : io::IoRequest::read(i, target, i * bs, slice));
    }
    return v;
  };

  std::vector<double> l_read, l_write, c_rs, c_rb, c_wb;
  for (std::size_t i = 0; i < config.samples; ++i) {
    auto r1 = requests(false, 1);
    auto [lr, cr] = timed_batch(p, r1);
    l_read.push_back(lr);
    c_rs.push_back(cr);
    auto w1 = requests(true, 1);
    l_write.push_back(timed_batch(p, w1).first);
    auto rb = requests(false, config.batch);
    c_rb.push_back(timed_batch(p, rb).second);
    auto wb = requests(true, config.batch);
    c_wb.push_back(timed_batch(p, wb).second);
  }

  CostProfile prof;
  prof.l_read = median(l_read);
  prof.l_write = median(l_write);
  prof.c_read_single = median(c_rs);
  prof.c_read_batch = median(c_rb);
  prof.c_write_batch = median(c_wb);
  prof.clock_hz = p.hz;
  prof.r_pf = config.r_pf;

  std::unique_ptr<void, void (*)(void*)> keepalive(nullptr, [](void*) {});
  std::function<void()> body = config.tx_body;
  if (!body) body = default_tx_body(config.probe_path + ".tree", keepalive);
  prof.c_tx = measure_cycles(body, config.samples);
  if (p.vclock) prof.c_tx = prof.c_tx / CycleClock::ticks_per_second() * p.hz;
  return prof;
}

}  // namespace uring_engine::model

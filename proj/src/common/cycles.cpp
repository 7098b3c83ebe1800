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

#include "uring_engine/common/cycles.hpp"

#include <fstream>
#include <string>
#include <thread>

namespace uring_engine {

namespace {

constexpr double kNominalHz = 3.0e9;

bool cpu_has_invariant_tsc() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("flags", 0) == 0) {
      return line.find(" constant_tsc") != std::string::npos &&
             line.find(" nonstop_tsc") != std::string::npos;
    }
  }
  return false;
}

double measure_tsc_hz() {
#if defined(__x86_64__) || defined(__i386__)
  auto t0 = std::chrono::steady_clock::now();
  std::uint64_t c0 = __rdtsc();
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  auto t1 = std::chrono::steady_clock::now();
  std::uint64_t c1 = __rdtsc();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  return double(c1 - c0) / secs;
#else
  return kNominalHz;
#endif
}

}  // namespace

std::string_view to_string(CycleSource source) noexcept {
  return source == CycleSource::InvariantTsc ? "tsc" : "ns-clock";
}

CycleSource CycleClock::source() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  static const CycleSource s = cpu_has_invariant_tsc() ? CycleSource::InvariantTsc : CycleSource::NanosecondClock;
  return s;
#else
  return CycleSource::NanosecondClock;
#endif
}

double CycleClock::ticks_per_second() noexcept {
  static const double hz = source() == CycleSource::InvariantTsc ? measure_tsc_hz() : kNominalHz;
  return hz;
}

std::uint64_t CycleClock::nanos_as_cycles() noexcept {
  return std::uint64_t(double(steady_nanos()) * (kNominalHz / 1e9));
}

void spin_cycles(std::uint64_t cycles) noexcept {
  if (cycles == 0) return;
  const std::uint64_t start = CycleClock::now();
  while (CycleClock::now() - start < cycles) {
#if defined(__x86_64__) || defined(__i386__)
    _mm_pause();
#endif
  }
}

}  // namespace uring_engine

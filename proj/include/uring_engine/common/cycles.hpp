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
#include <cstdint>
#include <string_view>

#if defined(__x86_64__) || defined(__i386__)
#include <x86intrin.h>
#endif

namespace uring_engine {

enum class CycleSource { InvariantTsc, NanosecondClock };

std::string_view to_string(CycleSource source) noexcept;

/// Reads the cycle counter, or steady-clock nanoseconds scaled by the nominal
/// frequency on hosts without an invariant TSC.
class CycleClock {
 public:
  static CycleSource source() noexcept;

  /// Counter ticks per second. Measured once against the steady clock.
  static double ticks_per_second() noexcept;

  static std::uint64_t now() noexcept {
#if defined(__x86_64__) || defined(__i386__)
    if (source() == CycleSource::InvariantTsc) return __rdtsc();
#endif
    return nanos_as_cycles();
  }

  static double to_seconds(std::uint64_t ticks) noexcept { return double(ticks) / ticks_per_second(); }

 private:
  static std::uint64_t nanos_as_cycles() noexcept;
};

/// Burns roughly `cycles` counter ticks on the calling thread.
void spin_cycles(std::uint64_t cycles) noexcept;

inline std::uint64_t steady_nanos() noexcept {
  return std::uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now().time_since_epoch())
                           .count());
}

}  // namespace uring_engine

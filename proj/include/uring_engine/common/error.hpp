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

#include <stdexcept>
#include <string>
#include <string_view>

namespace uring_engine {

enum class ErrorCode {
  // io-runtime
  IncompatibleFlags,
  UnsupportedBackend,
  InvalidDepth,
  SqFull,
  Misaligned,
  BadBufferIndex,
  BadFileIndex,
  KindUnsupportedByBackend,
  InvalidRequest,
  BackendFailure,
  TimedOut,
  NotAligned,
  TooManyRegions,
  TooManyFiles,
  // fiber-sched
  AtCapacity,
  Deadlock,
  NotInFiber,
  // bufmgr / btree
  PoolExhausted,
  IoError,
  NotFixed,
  PinnedRemain,
  InvalidPage,
  BadFormat,
  TooManyRestarts,
  // workload / bench
  ConfigError,
  OutOfSpace,
  VariantUnsupported,
  DeviceUnavailable,
  TimerUnavailable,
  PeerUnreachable,
  // model
  DivisionDomain,
  // netshuffle
  BadMagic,
  CrcMismatch,
  Truncated,
  TableFull,
  OwnershipViolation,
  PeerDisconnected,
  ChecksumMismatch,
  ConfigMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable code. All modules throw this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

/// Throws BackendFailure (or `code`) with strerror text for a negative errno result.
[[noreturn]] void raise_errno(ErrorCode code, std::string_view context, int err);

}  // namespace uring_engine

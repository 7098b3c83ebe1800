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

#include "uring_engine/common/error.hpp"

#include <cstring>

namespace uring_engine {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IncompatibleFlags: return "IncompatibleFlags";
    case ErrorCode::UnsupportedBackend: return "UnsupportedBackend";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::SqFull: return "SqFull";
    case ErrorCode::Misaligned: return "Misaligned";
    case ErrorCode::BadBufferIndex: return "BadBufferIndex";
    case ErrorCode::BadFileIndex: return "BadFileIndex";
    case ErrorCode::KindUnsupportedByBackend: return "KindUnsupportedByBackend";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::TimedOut: return "TimedOut";
    case ErrorCode::NotAligned: return "NotAligned";
    case ErrorCode::TooManyRegions: return "TooManyRegions";
    case ErrorCode::TooManyFiles: return "TooManyFiles";
    case ErrorCode::AtCapacity: return "AtCapacity";
    case ErrorCode::Deadlock: return "Deadlock";
    case ErrorCode::NotInFiber: return "NotInFiber";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotFixed: return "NotFixed";
    case ErrorCode::PinnedRemain: return "PinnedRemain";
    case ErrorCode::InvalidPage: return "InvalidPage";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::TooManyRestarts: return "TooManyRestarts";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::OutOfSpace: return "OutOfSpace";
    case ErrorCode::VariantUnsupported: return "VariantUnsupported";
    case ErrorCode::DeviceUnavailable: return "DeviceUnavailable";
    case ErrorCode::TimerUnavailable: return "TimerUnavailable";
    case ErrorCode::PeerUnreachable: return "PeerUnreachable";
    case ErrorCode::DivisionDomain: return "DivisionDomain";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CrcMismatch: return "CrcMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::TableFull: return "TableFull";
    case ErrorCode::OwnershipViolation: return "OwnershipViolation";
    case ErrorCode::PeerDisconnected: return "PeerDisconnected";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
  }
  return "Unknown";
}

void raise_errno(ErrorCode code, std::string_view context, int err) {
  if (err < 0) err = -err;
  throw Error(code, std::string(context) + ": " + std::strerror(err));
}

}  // namespace uring_engine

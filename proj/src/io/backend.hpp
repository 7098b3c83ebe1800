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
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "uring_engine/io/ring.hpp"

namespace uring_engine::io::detail {

class RingBackend {
 public:
  virtual ~RingBackend() = default;

  /// False when this backend cannot execute the request kind/flags at all.
  virtual bool supports(const IoRequest& request) const = 0;
  virtual bool has_free_slots(std::size_t n) const = 0;
  virtual void stage(const IoRequest& request) = 0;
  virtual std::size_t submit() = 0;
  virtual std::size_t reap(std::vector<IoCompletion>& out, std::size_t min, std::size_t max,
                           std::optional<std::chrono::microseconds> timeout) = 0;

  virtual void register_buffers(std::span<const std::span<std::byte>>) {}
  virtual void register_files(std::span<const int>) {}
  virtual void register_buffer_group(std::uint16_t, std::span<std::byte>, std::uint32_t) {}
  virtual void recycle_buffer(std::uint16_t, std::uint16_t, std::span<std::byte>) {}

  virtual std::uint32_t sq_capacity() const = 0;
  virtual std::uint32_t cq_capacity() const = 0;
  virtual std::size_t staged() const = 0;
  virtual std::size_t outstanding() const = 0;
  virtual int native_fd() const { return -1; }
  virtual VirtualClock* virtual_clock() { return nullptr; }
  virtual const SimDeviceConfig* sim_config() const { return nullptr; }

  RingStats stats;
};

std::unique_ptr<RingBackend> make_uring_backend(const RingConfig& config, std::uint32_t sq, std::uint32_t cq);
std::unique_ptr<RingBackend> make_posix_backend(std::uint32_t sq);
std::unique_ptr<RingBackend> make_sim_backend(const SimDeviceConfig& config, std::uint32_t sq, std::uint32_t cq);

/// Runs one request synchronously with plain syscalls; returns -errno or bytes.
int execute_blocking(const IoRequest& request);

}  // namespace uring_engine::io::detail

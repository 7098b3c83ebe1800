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

#include <cstdint>
#include <functional>
#include <string>

#include "uring_engine/io/ring.hpp"

namespace uring_engine::model {

/// Host cost inputs of the throughput predictors. Latencies in seconds,
/// CPU costs in cycles per operation.
struct CostProfile {
  double l_read = 70e-6;
  double l_write = 12e-6;
  double c_tx = 8264;
  double c_read_single = 10200;
  double c_read_batch = 5400;
  double c_write_batch = 5700;
  double clock_hz = 3.7e9;
  double r_pf = 0.7;

  /// I/O cycles per faulting transaction: one read (single or batched) plus
  /// one batched write.
  double c_io(bool batched_reads) const { return (batched_reads ? c_read_batch : c_read_single) + c_write_batch; }
};

struct Prediction {
  double tps = 0;
  bool domain_error = false;  // r_pf == 0: tps is +infinity
  std::string formula;        // the formula with inputs substituted
};

/// tps = 1 / (r_pf * (l_read + (writes_amortized ? 0 : l_write))).
/// r_pf == 0 yields an infinite, flagged prediction. Throws ConfigError for
/// negative or out-of-range inputs.
Prediction predict_latency_bound(double r_pf, double l_read, double l_write, bool writes_amortized);

/// tps = clock_hz / (c_tx + r_pf * c_io). Throws ConfigError when the
/// denominator is not positive.
Prediction predict_cycle_bound(double clock_hz, double c_tx, double r_pf, double c_io);

struct CalibrationConfig {
  std::size_t samples = 1000;
  io::RingConfig ring = io::RingConfig::for_backend(io::Backend::UringDefault);
  io::SimDeviceConfig sim;  // used when ring.backend is Simulated
  std::string probe_path = "/tmp/uring-engine-calibrate.dat";
  std::uint32_t block_size = 4096;
  std::size_t batch = 16;
  bool direct_io = false;
  /// Transaction body timed for c_tx. Defaults to an update on a fully cached tree.
  std::function<void()> tx_body;
  double r_pf = 0.7;
  /// Fail with TimerUnavailable unless an invariant cycle counter exists.
  bool require_cycle_counter = false;
};

/// Median of `samples` cycle-counter measurements of `body`, at least 1.
double measure_cycles(const std::function<void()>& body, std::size_t samples);

/// Measures a CostProfile on the configured ring: latencies from single
/// request probes, per-operation CPU cycles from timed submit/reap sections,
/// c_tx from `tx_body`. All values are medians. On a simulated ring,
/// latencies and CPU costs come from virtual time. Throws TimerUnavailable.
CostProfile calibrate(const CalibrationConfig& config);

}  // namespace uring_engine::model

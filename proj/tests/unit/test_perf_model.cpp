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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "uring_engine/model/perf_model.hpp"

using namespace uring_engine;
using namespace uring_engine::model;

namespace {
double rel(double a, double b) { return std::abs(a - b) / b; }
}  // namespace

TEST(LatencyBound, ReferenceInputs) {
  auto sync = predict_latency_bound(0.7, 70e-6, 12e-6, false);
  EXPECT_NEAR(sync.tps, 1.0 / (0.7 * 82e-6), 1e-6);
  EXPECT_LT(rel(sync.tps, 17.4e3), 0.005);
  auto amortized = predict_latency_bound(0.7, 70e-6, 12e-6, true);
  EXPECT_LT(rel(amortized.tps, 20.4e3), 0.005);
  EXPECT_FALSE(sync.domain_error);
  EXPECT_NE(sync.formula.find("0.7"), std::string::npos);
  EXPECT_NE(sync.formula.find("17422"), std::string::npos) << sync.formula;
}

TEST(LatencyBound, UnitCase) { EXPECT_DOUBLE_EQ(predict_latency_bound(1.0, 100e-6, 0, false).tps, 10000.0); }

TEST(LatencyBound, ZeroFaultRateIsFlagged) {
  auto p = predict_latency_bound(0, 70e-6, 12e-6, false);
  EXPECT_TRUE(p.domain_error);
  EXPECT_TRUE(std::isinf(p.tps));
  EXPECT_NE(p.formula.find("DivisionDomain"), std::string::npos);
}

TEST(LatencyBound, RejectsOutOfRange) {
  EXPECT_ERROR_CODE(predict_latency_bound(1.5, 70e-6, 0, false), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(predict_latency_bound(0.5, -1, 0, false), ErrorCode::ConfigError);
}

TEST(CycleBound, ReferenceInputs) {
  auto a = predict_cycle_bound(3.7e9, 8264, 0.7, 10200 + 5700);
  EXPECT_LT(rel(a.tps, 190.8e3), 0.005);
  auto b = predict_cycle_bound(3.7e9, 8264, 0.7, 5400 + 5700);
  EXPECT_LT(rel(b.tps, 230e3), 0.005);
  EXPECT_NE(a.formula.find("8264"), std::string::npos);
  CostProfile ref;
  EXPECT_DOUBLE_EQ(ref.c_io(false), 15900);
  EXPECT_DOUBLE_EQ(ref.c_io(true), 11100);
}

TEST(CycleBound, NoIoLimit) { EXPECT_DOUBLE_EQ(predict_cycle_bound(3.7e9, 8264, 0, 15900).tps, 3.7e9 / 8264); }

TEST(CycleBound, RejectsZeroDenominator) {
  EXPECT_ERROR_CODE(predict_cycle_bound(3.7e9, 0, 0, 100), ErrorCode::ConfigError);
}

TEST(Predictors, Monotonicity) {
  std::mt19937_64 rng{1};
  std::uniform_real_distribution<double> u(0.05, 0.95), lat(1e-6, 1e-3), cyc(100, 50000);
  for (int i = 0; i < 20000; ++i) {
    double r = u(rng), l = lat(rng), w = lat(rng);
    double hz = 1e9 + cyc(rng) * 1e5, ctx = cyc(rng), cio = cyc(rng);
    auto base = predict_latency_bound(r, l, w, false).tps;
    EXPECT_GT(base, predict_latency_bound(std::min(1.0, r * 1.01), l, w, false).tps);
    EXPECT_GT(base, predict_latency_bound(r, l * 1.01, w, false).tps);
    EXPECT_GT(base, predict_latency_bound(r, l, w * 1.01, false).tps);
    EXPECT_GE(predict_latency_bound(r, l, w, true).tps, base);
    auto c = predict_cycle_bound(hz, ctx, r, cio).tps;
    EXPECT_GT(c, predict_cycle_bound(hz, ctx, r * 1.01, cio).tps);
    EXPECT_GT(c, predict_cycle_bound(hz, ctx, r, cio * 1.01).tps);
    EXPECT_GT(c, predict_cycle_bound(hz, ctx * 1.01, r, cio).tps);
    EXPECT_LT(c, predict_cycle_bound(hz * 1.01, ctx, r, cio).tps);
  }
}

TEST(Calibrate, EmptyBodyIsSmallPositive) {
  double c = measure_cycles([] {}, 1000);
  EXPECT_GT(c, 0);
  EXPECT_LT(c, 10000);
}

TEST(Calibrate, SimulatedDeviceEchoesConfiguration) {
  CalibrationConfig cfg;
  cfg.ring = io::RingConfig::for_backend(io::Backend::Simulated);
  cfg.sim.cpu.enabled = true;
  cfg.samples = 1000;
  cfg.tx_body = [] {};
  auto p = calibrate(cfg);
  EXPECT_NEAR(p.l_read, 70e-6, 1e-6);
  EXPECT_NEAR(p.l_write, 12e-6, 1e-6);
  EXPECT_NEAR(p.c_read_single, 10200, 1);
  EXPECT_NEAR(p.c_read_batch, 5400, 1);
  EXPECT_NEAR(p.c_write_batch, 5700, 1);
  EXPECT_DOUBLE_EQ(p.clock_hz, 3.7e9);
  EXPECT_GT(p.c_tx, 0);
}

TEST(Calibrate, RealRingGivesPositiveCosts) {
  CalibrationConfig cfg;
  cfg.ring = io::RingConfig::for_backend(io::uring_available() ? io::Backend::UringDefault : io::Backend::PosixSync);
  cfg.samples = 1000;
  auto p = calibrate(cfg);
  EXPECT_GT(p.l_read, 0);
  EXPECT_GT(p.c_read_single, 0);
  EXPECT_GT(p.c_read_batch, 0);
  EXPECT_GT(p.c_tx, 0);
  EXPECT_GT(p.clock_hz, 1e8);
}

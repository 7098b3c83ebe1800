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

// uring-engine <ycsb|shuffle|predict|bench|doctor> <sub> [flags]
// Results go to stdout (or --output) as versioned CSV, or JSON with --json.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uring_engine/bench/bench.hpp"
#include "uring_engine/common/error.hpp"
#include "uring_engine/model/perf_model.hpp"
#include "uring_engine/net/shuffle.hpp"
#include "uring_engine/workload/ycsb.hpp"

using namespace uring_engine;
using bench::Collector;

namespace {

// Reads a flat key=value file into "--key=value" tokens. Blank lines and
// lines starting with '#' are ignored.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ConfigError, "cannot read config file " + path);
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    line = line.substr(b);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
    auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      raise(ErrorCode::ConfigError, path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    auto vb = value.find_first_not_of(' ');
    value = vb == std::string::npos ? "" : value.substr(vb);
    if (key.rfind("--", 0) != 0) key = "--" + key;
    out.push_back(key + "=" + value);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint32_t> split_sizes(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (const auto& item : split_list(s)) {
    std::size_t mult = 1;
    std::string num = item;
    char last = num.empty() ? 0 : char(std::tolower(num.back()));
    if (last == 'k') mult = 1024;
    if (last == 'm') mult = 1024 * 1024;
    if (mult != 1) num.pop_back();
    try {
      out.push_back(std::uint32_t(std::stoull(num) * mult));
    } catch (const std::exception&) {
      raise(ErrorCode::ConfigError, "bad size '" + item + "'");
    }
  }
  return out;
}

struct Output {
  bool json = false;
  std::string path;

  void write(const std::vector<bench::ResultRow>& rows) const {
    std::string text = json ? bench::to_json(rows) : bench::to_csv(rows);
    if (path.empty()) {
      std::cout << text;
      std::cout.flush();
      return;
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) raise(ErrorCode::ConfigError, "cannot write " + path);
    f << text;
  }
};

std::string hex_sum(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"I/O runtime, storage engine and network shuffle benchmarks", "uring-engine"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();
  Output output;
  std::string config_path;
  app.add_flag("--json", output.json, "Emit JSON instead of CSV");
  app.add_flag("--csv{false}", output.json, "Emit CSV (default)");
  app.add_option("--output,-o", output.path, "Write results to this file instead of stdout");
  app.add_option("--config", config_path, "Flat key=value file; its values override flags");

  Collector rows;
  std::function<void()> action;

  // ---- doctor ----
  auto* doctor = app.add_subcommand("doctor", "Report host capabilities");
  doctor->callback([&] { action = [&] { bench::doctor(rows); }; });

  // ---- ycsb ----
  workload::WorkloadConfig wc;
  std::string variants = "uring-sync";
  double sim_read_us = 70, sim_write_us = 12;
  bool sim_cpu = false;
  std::uint64_t pool_mib = 0;
  auto* ycsb = app.add_subcommand("ycsb", "B+tree key-value workload");
  ycsb->require_subcommand(1);
  auto add_ycsb_opts = [&](CLI::App* s) {
    s->add_option("--tuples", wc.tuples);
    s->add_option("--value-width", wc.value_width);
    s->add_option("--page-size", wc.page_size);
    s->add_option("--path", wc.path);
    s->add_option("--seed", wc.seed);
  };
  auto* yload = ycsb->add_subcommand("load", "Bulk-load the database file");
  add_ycsb_opts(yload);
  yload->callback([&] {
    action = [&] {
      auto db = workload::load(wc);
      std::string p = "tuples=" + std::to_string(wc.tuples);
      rows.add("ycsb-load", "bulk", p, "pages", double(db.page_count));
      rows.add("ycsb-load", "bulk", p, "height", db.height);
      rows.add("ycsb-load", "bulk", p, "file_bytes", double(db.file_bytes));
    };
  });
  auto* yrun = ycsb->add_subcommand("run", "Run transactions against a loaded database");
  add_ycsb_opts(yrun);
  yrun->add_option("--variant", variants, "Comma-separated: posix-sync,uring-sync,+batch-evict,+fibers,...");
  yrun->add_option("--ops", wc.ops);
  yrun->add_option("--duration", wc.duration_s, "Stop spawning after this many seconds");
  yrun->add_option("--update-fraction", wc.update_fraction);
  yrun->add_option("--fibers", wc.fibers);
  yrun->add_option("--pool-mib", pool_mib, "Buffer pool size in MiB");
  yrun->add_option("--pool-bytes", wc.pool_bytes);
  yrun->add_option("--compute-cycles", wc.compute_cycles_per_tx);
  yrun->add_option("--evict-batch", wc.evict_batch);
  yrun->add_option("--max-batch", wc.max_batch);
  yrun->add_option("--ring-depth", wc.ring_depth);
  yrun->add_flag("--direct", wc.direct_io);
  yrun->add_flag("--simulate", wc.simulate, "Serve page I/O from the simulated device");
  yrun->add_option("--sim-read-us", sim_read_us);
  yrun->add_option("--sim-write-us", sim_write_us);
  yrun->add_flag("--sim-cpu", sim_cpu, "Charge per-request CPU cycles in simulation");
  yrun->add_flag("--warmup,!--no-warmup", wc.warmup);
  yrun->add_option("--nvme-device", wc.nvme_device);
  yrun->callback([&] {
    action = [&] {
      if (pool_mib != 0) wc.pool_bytes = pool_mib << 20;
      wc.sim.read_latency = std::chrono::nanoseconds(std::int64_t(sim_read_us * 1e3));
      wc.sim.write_latency = std::chrono::nanoseconds(std::int64_t(sim_write_us * 1e3));
      wc.sim.cpu.enabled = sim_cpu;
      std::string p = "tuples=" + std::to_string(wc.tuples) + ";pool=" + std::to_string(wc.pool_bytes);
      for (const auto& name : split_list(variants)) {
        auto v = workload::parse_variant(name);
        if (!v) raise(ErrorCode::ConfigError, "unknown variant " + name);
        try {
          auto m = workload::run(wc, *v);
          rows.add("ycsb", name, p, "tps", m.tps);
          rows.add("ycsb", name, p, "page_fault_rate", m.page_fault_rate);
          rows.add("ycsb", name, p, "mean_batch", m.mean_batch);
          rows.add("ycsb", name, p, "reads", double(m.reads_issued));
          rows.add("ycsb", name, p, "writes", double(m.writes_issued));
          rows.add("ycsb", name, p, "restarts", double(m.restarts));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::VariantUnsupported) throw;
          rows.skip("ycsb", name, p, "unsupported:variant-unsupported");
        }
      }
    };
  });

  // ---- predict ----
  auto* predict = app.add_subcommand("predict", "Analytical throughput model");
  predict->require_subcommand(1);
  model::CostProfile prof;
  bool amortized = false, batched = false;
  double c_io = -1;
  auto* plat = predict->add_subcommand("latency", "I/O-latency-bound throughput");
  plat->add_option("--r-pf", prof.r_pf);
  plat->add_option("--l-read", prof.l_read, "Seconds");
  plat->add_option("--l-write", prof.l_write, "Seconds");
  plat->add_flag("--writes-amortized", amortized, "Evictions overlap reads");
  plat->callback([&] {
    action = [&] {
      auto p = model::predict_latency_bound(prof.r_pf, prof.l_read, prof.l_write, amortized);
      std::cerr << p.formula << "\n";
      rows.add("predict", amortized ? "latency-bound+batch-evict" : "latency-bound", "r_pf=" + std::to_string(prof.r_pf),
               "tps", p.tps);
      if (p.domain_error) rows.add("predict", "latency-bound", "r_pf=0", "domain_error", 1);
    };
  });
  auto* pcyc = predict->add_subcommand("cycles", "CPU-cycle-bound throughput");
  pcyc->add_option("--clock-hz", prof.clock_hz);
  pcyc->add_option("--c-tx", prof.c_tx);
  pcyc->add_option("--r-pf", prof.r_pf);
  pcyc->add_option("--c-io", c_io, "Cycles of I/O per faulting transaction (default from the read/write costs)");
  pcyc->add_option("--c-read-single", prof.c_read_single);
  pcyc->add_option("--c-read-batch", prof.c_read_batch);
  pcyc->add_option("--c-write-batch", prof.c_write_batch);
  pcyc->add_flag("--batched", batched, "Reads submitted in batches");
  pcyc->callback([&] {
    action = [&] {
      double io_cycles = c_io >= 0 ? c_io : prof.c_io(batched);
      auto p = model::predict_cycle_bound(prof.clock_hz, prof.c_tx, prof.r_pf, io_cycles);
      std::cerr << p.formula << "\n";
      rows.add("predict", batched ? "cycle-bound+batched" : "cycle-bound", "c_io=" + std::to_string(io_cycles), "tps",
               p.tps);
    };
  });
  model::CalibrationConfig cal;
  bool cal_sim = false;
  auto* pcal = predict->add_subcommand("calibrate", "Measure a cost profile on this host");
  pcal->add_option("--samples", cal.samples);
  pcal->add_option("--probe-path", cal.probe_path);
  pcal->add_flag("--simulate", cal_sim);
  pcal->add_flag("--direct", cal.direct_io);
  pcal->add_option("--r-pf", cal.r_pf);
  pcal->callback([&] {
    action = [&] {
      if (cal_sim) cal.ring = io::RingConfig::for_backend(io::Backend::Simulated);
      if (cal_sim) cal.sim.cpu.enabled = true;
      auto c = model::calibrate(cal);
      const char* v = cal_sim ? "simulated" : "host";
      rows.add("calibrate", v, "", "l_read_us", c.l_read * 1e6);
      rows.add("calibrate", v, "", "l_write_us", c.l_write * 1e6);
      rows.add("calibrate", v, "", "c_tx_cycles", c.c_tx, true);
      rows.add("calibrate", v, "", "c_read_single_cycles", c.c_read_single, true);
      rows.add("calibrate", v, "", "c_read_batch_cycles", c.c_read_batch, true);
      rows.add("calibrate", v, "", "c_write_batch_cycles", c.c_write_batch, true);
    };
  });

  // ---- shuffle ----
  net::ShuffleConfig sc;
  std::string peers, backend = "ring", cpus;
  auto* shuffle = app.add_subcommand("shuffle", "All-to-all tuple shuffle over TCP");
  shuffle->add_option("--nodes", sc.nodes);
  shuffle->add_option("--node-id", sc.node_id);
  shuffle->add_option("--peers", peers, "host:port of every node, in node order");
  shuffle->add_option("--workers", sc.workers);
  shuffle->add_option("--tuple-width", sc.tuple_width);
  shuffle->add_option("--chunk-bytes", sc.chunk_bytes);
  shuffle->add_option("--table-bytes", sc.table_bytes, "Input generated on this node");
  shuffle->add_option("--backend", backend, "ring | readiness");
  shuffle->add_flag("--zc-send", sc.zero_copy_send);
  shuffle->add_flag("--zc-recv", sc.zero_copy_recv);
  shuffle->add_flag("--multishot", sc.multishot_recv);
  shuffle->add_flag("--poll-first", sc.poll_first);
  shuffle->add_flag("--probe-table", sc.build_probe_table);
  shuffle->add_option("--seed", sc.seed);
  shuffle->add_option("--cpus", cpus, "Comma-separated CPU list for worker pinning");
  shuffle->add_option("--inflight", sc.inflight_chunks);
  shuffle->add_option("--connect-timeout-ms", sc.connect_timeout_ms);
  shuffle->callback([&] {
    action = [&] {
      auto b = net::parse_shuffle_backend(backend);
      if (!b) raise(ErrorCode::ConfigError, "unknown backend " + backend);
      sc.backend = *b;
      sc.peers = split_list(peers);
      for (const auto& c : split_list(cpus)) sc.cpus.push_back(std::stoi(c));
      auto rep = net::shuffle_run(sc);
      std::string v = backend;
      if (sc.zero_copy_send) v += "+zc-send";
      if (sc.zero_copy_recv) v += "+zc-recv";
      if (sc.multishot_recv) v += "+multishot";
      if (sc.poll_first) v += "+poll-first";
      std::string node = "node=" + std::to_string(sc.node_id);
      rows.add("shuffle", v, node, "runtime_s", rep.runtime_s);
      rows.add("shuffle", v, node, "tuples_sent", double(rep.tuples_sent));
      rows.add("shuffle", v, node, "tuples_received", double(rep.tuples_received));
      rows.add("shuffle", v, node, "local_tuples", double(rep.local_tuples));
      rows.add("shuffle", v, node, "verified", rep.verified ? 1 : 0);
      for (std::uint32_t p = 0; p < sc.nodes; ++p) {
        std::string peer = node + ";peer=" + std::to_string(p);
        rows.add("shuffle", v, peer, "egress_bytes", double(rep.egress_bytes[p]));
        rows.add("shuffle", v, peer, "ingress_bytes", double(rep.ingress_bytes[p]));
      }
      // Checksums are 64-bit; the value column is a double, so the sum goes in param as hex.
      for (std::uint32_t p = 0; p < rep.global.size(); ++p) {
        std::string part = "partition=" + std::to_string(p) + ";sum=" + hex_sum(rep.global[p].sum);
        rows.add("shuffle", v, part, "checksum_count", double(rep.global[p].count));
      }
      for (const auto& a : rep.annotations) rows.add("shuffle", v, a, "annotation", 0);
      if (sc.build_probe_table) rows.add("shuffle", v, node, "probe_entries", double(rep.probe_entries));
    };
  });

  // ---- bench ----
  auto* benchcmd = app.add_subcommand("bench", "Microbenchmarks");
  benchcmd->require_subcommand(1);

  bench::NopConfig nop;
  std::string nop_batches = "1,2,4,8,16,32,64";
  auto* bnop = benchcmd->add_subcommand("nop", "NOP submission cost per batch size");
  bnop->add_option("--batch-sizes", nop_batches);
  bnop->add_option("--iterations", nop.iterations);
  bnop->callback([&] {
    action = [&] {
      nop.batch_sizes = split_sizes(nop_batches);
      if (!io::uring_available()) {
        for (auto b : nop.batch_sizes) rows.skip("nop", "uring-default", std::to_string(b), "io_uring-unavailable");
        return;
      }
      bench::bench_nop(nop, rows);
    };
  });

  bench::WriteLatencyConfig wl;
  std::string wl_batches = "1,8,32,64,128";
  bool wl_buffered = false;
  auto* bwl = benchcmd->add_subcommand("write-latency", "Paced write batches, latency per batch size");
  bwl->add_option("--batch-sizes", wl_batches);
  bwl->add_option("--target-iops", wl.target_iops);
  bwl->add_option("--device", wl.device);
  bwl->add_option("--requests", wl.requests);
  bwl->add_flag("--buffered", wl_buffered, "Skip O_DIRECT");
  bwl->callback([&] {
    action = [&] {
      wl.batch_sizes = split_sizes(wl_batches);
      wl.direct_io = !wl_buffered;
      try {
        bench::bench_write_latency(wl, rows);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DeviceUnavailable && e.code() != ErrorCode::BackendFailure) throw;
        for (auto b : wl.batch_sizes) rows.skip("write-latency", wl.direct_io ? "direct" : "buffered", std::to_string(b), "device-unavailable");
      }
    };
  });

  bench::BlockSizeConfig bs;
  std::string bs_sizes = "4k,16k,64k,256k,1m", bs_modes = "default,+reg-bufs,+passthru,+iopoll", bs_rw = "read";
  auto* bbs = benchcmd->add_subcommand("blocksize", "CPU cost per byte across request sizes");
  bbs->add_option("--block-sizes", bs_sizes);
  bbs->add_option("--modes", bs_modes);
  bbs->add_option("--rw", bs_rw, "read | write");
  bbs->add_option("--device", bs.device);
  bbs->add_option("--nvme-device", bs.nvme_device);
  bbs->add_option("--bytes-per-size", bs.bytes_per_size);
  bbs->add_option("--queue-depth", bs.queue_depth);
  bbs->add_flag("--direct", bs.direct_io);
  bbs->callback([&] {
    action = [&] {
      bs.block_sizes = split_sizes(bs_sizes);
      bs.modes = split_list(bs_modes);
      if (bs_rw != "read" && bs_rw != "write") raise(ErrorCode::ConfigError, "--rw must be read or write");
      bs.write = bs_rw == "write";
      bench::bench_blocksize(bs, rows);
    };
  });

  bench::DurableConfig du;
  std::string du_variants = "write-then-fsync,linked-write-fsync,osync-write,passthru-write-flush,passthru-iopoll-write";
  auto* bdu = benchcmd->add_subcommand("durable", "Durable write latency per method");
  bdu->add_option("--variants", du_variants);
  bdu->add_option("--device", du.device);
  bdu->add_option("--nvme-device", du.nvme_device);
  bdu->add_option("--iterations", du.iterations);
  bdu->add_flag("--direct", du.direct_io);
  bdu->callback([&] {
    action = [&] {
      du.variants = split_list(du_variants);
      bench::bench_durable(du, rows);
    };
  });

  bench::PingPongConfig pp;
  std::string pp_modes;
  auto* bpp = benchcmd->add_subcommand("pingpong", "Round-trip latency over loopback");
  bpp->add_option("--transport", pp.transport, "tcp | udp");
  bpp->add_option("--modes", pp_modes);
  bpp->add_option("--msg-bytes", pp.msg_bytes);
  bpp->add_option("--exchanges", pp.exchanges);
  bpp->callback([&] {
    action = [&] {
      if (!pp_modes.empty()) pp.modes = split_list(pp_modes);
      bench::bench_pingpong(pp, rows);
    };
  });

  bench::MsgSizeConfig ms;
  std::string ms_path = "send", ms_sizes = "64,256,1k,4k,16k,64k,256k,1m", ms_variants;
  auto* bms = benchcmd->add_subcommand("msgsize", "Cycles per byte across message sizes");
  bms->add_option("--path", ms_path, "send | recv");
  bms->add_option("--variants", ms_variants);
  bms->add_option("--msg-sizes", ms_sizes);
  bms->add_option("--bytes-per-size", ms.bytes_per_size);
  bms->callback([&] {
    action = [&] {
      if (ms_path != "send" && ms_path != "recv") raise(ErrorCode::ConfigError, "--path must be send or recv");
      ms.recv_path = ms_path == "recv";
      ms.msg_sizes = split_sizes(ms_sizes);
      ms.variants = split_list(ms_variants);
      bench::bench_msgsize(ms, rows);
    };
  });

  try {
    // --config is read before parsing so its values can be appended as the
    // last (winning) occurrence of each flag.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (!config_path.empty())
      for (auto& t : config_tokens(config_path)) args.push_back(t);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (action) action();
    output.write(rows.rows());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "uring-engine: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

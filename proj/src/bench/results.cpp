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

#include <sys/utsname.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <numeric>

#include <json.hpp>

#include "uring_engine/bench/bench.hpp"
#include "uring_engine/common/cycles.hpp"
#include "uring_engine/common/error.hpp"

namespace uring_engine::bench {

std::string host_name() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string host_with_clock() {
  return host_name() + ";clock=" + std::string(to_string(CycleClock::source()));
}

void Collector::add(ResultRow row) {
  std::lock_guard lock(mu_);
  rows_.push_back(std::move(row));
}

void Collector::add(std::string_view bench, std::string_view variant, std::string_view param, std::string_view metric,
                    double value, bool cycle_metric) {
  add(ResultRow{std::string(bench), std::string(variant), std::string(param), std::string(metric), value,
                cycle_metric ? host_with_clock() : host_name(), utc_timestamp()});
}

void Collector::skip(std::string_view bench, std::string_view variant, std::string_view param,
                     std::string_view reason) {
  std::string metric = reason.find(':') == std::string_view::npos ? "skipped:" + std::string(reason)
                                                                  : std::string(reason);
  add(bench, variant, param, metric, 0);
}

std::vector<ResultRow> Collector::rows() const {
  std::lock_guard lock(mu_);
  return rows_;
}

namespace {

void put_field(std::string& out, std::string_view f) {
  if (f.find_first_of(",\"\n\r") == std::string_view::npos) {
    out += f;
    return;
  }
  out += '"';
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : "nan";
}

// Splits one record; returns false at end of input. Handles quoted fields.
bool next_record(std::string_view text, std::size_t& pos, std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string cur;
  bool quoted = false;
  while (pos < text.size()) {
    char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cur += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) raise(ErrorCode::ConfigError, "unterminated quoted CSV field");
  fields.push_back(std::move(cur));
  return true;
}

}  // namespace

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out;
  out += kCsvVersionLine;
  out += '\n';
  out += kCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    for (std::string_view f : {std::string_view(r.bench), std::string_view(r.variant), std::string_view(r.param),
                               std::string_view(r.metric)}) {
      put_field(out, f);
      out += ',';
    }
    out += format_number(r.value);
    out += ',';
    put_field(out, r.host);
    out += ',';
    put_field(out, r.timestamp);
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> parse_csv(std::string_view text) {
  std::size_t pos = 0;
  std::vector<std::string> fields;
  auto line_end = text.find('\n');
  if (text.substr(0, line_end) != kCsvVersionLine) raise(ErrorCode::ConfigError, "missing CSV version line");
  pos = line_end == std::string_view::npos ? text.size() : line_end + 1;
  line_end = text.find('\n', pos);
  std::string_view header = text.substr(pos, line_end == std::string_view::npos ? std::string_view::npos : line_end - pos);
  if (!header.empty() && header.back() == '\r') header.remove_suffix(1);
  if (header != kCsvHeader) raise(ErrorCode::ConfigError, "unexpected CSV header");
  pos = line_end == std::string_view::npos ? text.size() : line_end + 1;

  std::vector<ResultRow> rows;
  while (next_record(text, pos, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 7) raise(ErrorCode::ConfigError, "CSV row with " + std::to_string(fields.size()) + " fields");
    ResultRow r{fields[0], fields[1], fields[2], fields[3], 0, fields[5], fields[6]};
    const std::string& v = fields[4];
    if (v == "nan") {
      r.value = std::nan("");
    } else {
      auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), r.value);
      if (ec != std::errc() || end != v.data() + v.size()) raise(ErrorCode::ConfigError, "bad CSV value '" + v + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string to_json(const std::vector<ResultRow>& rows) {
  nlohmann::json j;
  j["format"] = "uring-engine-results";
  j["version"] = 1;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"bench", r.bench},
                         {"variant", r.variant},
                         {"param", r.param},
                         {"metric", r.metric},
                         {"value", r.value},
                         {"host", r.host},
                         {"timestamp", r.timestamp}});
  return j.dump(2) + "\n";
}

std::vector<ResultRow> parse_json(std::string_view text) {
  std::vector<ResultRow> rows;
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) raise(ErrorCode::ConfigError, "unsupported results version");
    for (const auto& r : j.at("rows")) {
      ResultRow row{r.at("bench"), r.at("variant"), r.at("param"), r.at("metric"), 0, r.at("host"), r.at("timestamp")};
      row.value = r.at("value").is_null() ? std::nan("") : r.at("value").get<double>();
      rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("malformed results JSON: ") + e.what());
  }
  return rows;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  double hi = *mid;
  double lo = *std::max_element(v.begin(), mid);
  return (lo + hi) / 2;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  double m = mean(v), acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / double(v.size() - 1));
}

std::optional<std::uint32_t> detect_crossover(const std::vector<std::uint32_t>& sizes,
                                              const std::vector<double>& baseline,
                                              const std::vector<double>& candidate) {
  if (sizes.size() != baseline.size() || sizes.size() != candidate.size())
    raise(ErrorCode::ConfigError, "crossover inputs differ in length");
  if (sizes.size() < 2) return std::nullopt;
  std::optional<std::uint32_t> found;
  for (std::size_t i = sizes.size(); i-- > 0;) {
    if (candidate[i] / baseline[i] < 1) found = sizes[i];
    else break;
  }
  return found;
}

}  // namespace uring_engine::bench

// Copyright 2026 The nestedfp Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "nestedfp/error.hpp"
#include "nestedfp/servesim.hpp"

namespace nestedfp::sim {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_count(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "YYYY-MM-DD HH:MM:SS[.fraction]" (or with 'T'), as milliseconds.
std::optional<double> parse_timestamp(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, consumed = 0;
  char sep = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%n", &y, &mo, &d, &sep, &h, &mi, &consumed) != 6 ||
      (sep != ' ' && sep != 'T') || consumed == 0) {
    return std::nullopt;
  }
  const auto seconds = parse_number(s.substr(static_cast<std::size_t>(consumed)));
  if (!seconds || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || *seconds >= 61.0) return std::nullopt;
  const double days = static_cast<double>(days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)));
  return ((days * 24.0 + h) * 60.0 + mi) * 60000.0 + *seconds * 1000.0;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + what);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double exponential(std::mt19937_64& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

void validate(TracePattern pattern, const TraceParams& p) {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::kInvalidParams, what); };
  if (!(std::isfinite(p.duration_s))) bad("duration must be finite");
  if (pattern != TracePattern::kReplay && !(p.duration_s > 0.0)) bad("duration must be > 0");
  if (p.prompt_tokens < 1 || p.output_tokens < 1) bad("token counts must be >= 1");
  switch (pattern) {
    case TracePattern::kPoisson:
      if (!(p.rate >= 0.0) || !std::isfinite(p.rate)) bad("rate must be >= 0");
      break;
    case TracePattern::kBurst:
      if (!(p.rate_min >= 0.0) || !(p.rate_max >= p.rate_min) || !std::isfinite(p.rate_max)) {
        bad("burst rates must satisfy 0 <= rate_min <= rate_max");
      }
      if (!(p.burst_shape > 0.0)) bad("burst shape must be > 0");
      break;
    case TracePattern::kReplay:
      if (!(p.rate_multiplier > 0.0 && p.rate_multiplier <= 1.0)) bad("replay multiplier must be in (0, 1]");
      break;
  }
}

}  // namespace

std::vector<Request> ingest_trace(const std::filesystem::path& path, const ColumnMap& columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) header = split_csv(line);
  }
  if (header.empty()) throw Error(ErrorKind::kEmptyTrace, path.string() + ": no header row");

  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) parse_error(line_no, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t arrival_col = column(columns.arrival);
  const std::size_t prompt_col = column(columns.prompt_tokens);
  const std::size_t output_col = column(columns.output_tokens);
  const std::size_t needed = std::max({arrival_col, prompt_col, output_col}) + 1;

  std::vector<Request> out;
  std::optional<bool> timestamps;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_csv(line);
    if (fields.size() < needed) parse_error(line_no, "expected at least " + std::to_string(needed) + " fields");

    Request r;
    r.id = out.size();
    const std::string& arrival = fields[arrival_col];
    std::optional<double> ms = parse_number(arrival);
    const bool is_timestamp = !ms.has_value();
    if (is_timestamp) ms = parse_timestamp(arrival);
    if (!ms) parse_error(line_no, "bad arrival '" + arrival + "'");
    if (timestamps && *timestamps != is_timestamp) parse_error(line_no, "mixed numeric and timestamp arrivals");
    timestamps = is_timestamp;
    r.arrival_ms = *ms;

    const auto prompt = parse_count(fields[prompt_col]);
    const auto output = parse_count(fields[output_col]);
    if (!prompt || *prompt < 1 || *prompt > UINT32_MAX) parse_error(line_no, "prompt_tokens must be an integer >= 1");
    if (!output || *output < 1 || *output > UINT32_MAX) parse_error(line_no, "output_tokens must be an integer >= 1");
    r.prompt_tokens = static_cast<std::uint32_t>(*prompt);
    r.output_tokens = static_cast<std::uint32_t>(*output);
    out.push_back(r);
  }
  if (out.empty()) throw Error(ErrorKind::kEmptyTrace, path.string() + ": no requests");

  if (timestamps.value_or(false)) {
    const double origin =
        std::min_element(out.begin(), out.end(), [](auto& a, auto& b) { return a.arrival_ms < b.arrival_ms; })
            ->arrival_ms;
    for (auto& r : out) r.arrival_ms -= origin;
  }
  std::stable_sort(out.begin(), out.end(), [](const Request& a, const Request& b) { return a.arrival_ms < b.arrival_ms; });
  return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<Request>& requests) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << "arrival_ms,prompt_tokens,output_tokens\n";
  char buf[96];
  for (const auto& r : requests) {
    std::snprintf(buf, sizeof buf, "%.3f,%u,%u\n", r.arrival_ms, r.prompt_tokens, r.output_tokens);
    out << buf;
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<Request> generate_trace(TracePattern pattern, const TraceParams& params, std::uint64_t seed) {
  validate(pattern, params);
  std::mt19937_64 rng(seed);
  std::vector<Request> out;
  auto emit = [&](double arrival_ms, std::uint32_t prompt, std::uint32_t output) {
    out.push_back(Request{out.size(), arrival_ms, prompt, output});
  };
  const double horizon_ms = params.duration_s * 1000.0;

  switch (pattern) {
    case TracePattern::kPoisson: {
      if (params.rate == 0.0) break;
      for (double t = exponential(rng, params.rate) * 1000.0; t < horizon_ms; t += exponential(rng, params.rate) * 1000.0) {
        emit(t, params.prompt_tokens, params.output_tokens);
      }
      break;
    }
    case TracePattern::kBurst: {
      const auto seconds = static_cast<std::size_t>(std::ceil(params.duration_s));
      std::vector<double> rates(seconds);
      for (std::size_t i = 0; i < seconds; ++i) {
        const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(seconds);
        rates[i] = params.rate_min + (params.rate_max - params.rate_min) * std::pow(q, params.burst_shape);
      }
      for (std::size_t i = seconds; i > 1; --i) std::swap(rates[i - 1], rates[rng() % i]);
      // Piecewise-constant Poisson process; memorylessness lets each second
      // restart its own arrival clock.
      for (std::size_t s = 0; s < seconds; ++s) {
        if (rates[s] == 0.0) continue;
        const double begin = static_cast<double>(s) * 1000.0;
        const double end = std::min(begin + 1000.0, horizon_ms);
        for (double t = begin + exponential(rng, rates[s]) * 1000.0; t < end; t += exponential(rng, rates[s]) * 1000.0) {
          emit(t, params.prompt_tokens, params.output_tokens);
        }
      }
      break;
    }
    case TracePattern::kReplay: {
      for (const auto& r : params.replay_source) {
        const bool keep = uniform01(rng) < params.rate_multiplier;
        if (!keep) continue;
        if (params.duration_s > 0.0 && r.arrival_ms >= horizon_ms) continue;
        emit(r.arrival_ms, r.prompt_tokens, r.output_tokens);
      }
      std::stable_sort(out.begin(), out.end(),
                       [](const Request& a, const Request& b) { return a.arrival_ms < b.arrival_ms; });
      break;
    }
  }
  return out;
}

}  // namespace nestedfp::sim

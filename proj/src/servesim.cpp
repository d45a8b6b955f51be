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

#include "nestedfp/servesim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>

#include "nestedfp/error.hpp"

namespace nestedfp::sim {
namespace {

[[noreturn]] void config_invalid(const std::string& what) { throw Error(ErrorKind::kConfigInvalid, what); }

struct Live {
  const Request* req = nullptr;
  std::uint64_t prefilled = 0;
  std::uint32_t emitted = 0;
  double first_token_ms = 0.0;
  double last_token_ms = 0.0;
  std::uint64_t in_batch = 0;  // prefill tokens scheduled this iteration

  bool prefill_done() const { return prefilled == req->prompt_tokens; }
  std::uint64_t remaining_prefill() const { return req->prompt_tokens - prefilled; }
};

struct Work {
  Live* live;
  std::uint64_t tokens;
  bool decode;
};

struct TokenSample {
  double time_ms;
  double gap_ms;
};

struct Iteration {
  double start_ms;
  double end_ms;
  Precision precision;
};

double busy_in(const Iteration& it, double lo, double hi) {
  return std::max(0.0, std::min(it.end_ms, hi) - std::max(it.start_ms, lo));
}

}  // namespace

// ---- latency model / configs ----------------------------------------------

double LatencyModel::iteration_latency(Precision p, std::uint64_t tokens) const {
  const double work = fp16_per_token_ms * static_cast<double>(tokens);
  if (p == Precision::kFp16) return fp16_base_ms + work;
  const double divisor = exception_fraction + (1.0 - exception_fraction) / fp8_speedup;
  return fp8_base_ms.value_or(fp16_base_ms) + work * divisor;
}

void LatencyModel::validate() const {
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!nonneg(fp16_base_ms) || !nonneg(fp16_per_token_ms)) config_invalid("latency terms must be finite and >= 0");
  if (fp16_base_ms == 0.0 && fp16_per_token_ms == 0.0) config_invalid("latency model yields zero-time iterations");
  if (!(std::isfinite(fp8_speedup) && fp8_speedup >= 1.0)) config_invalid("fp8 speedup must be >= 1");
  if (fp8_base_ms && !nonneg(*fp8_base_ms)) config_invalid("fp8 base latency must be >= 0");
  if (fp8_base_ms && *fp8_base_ms == 0.0 && fp16_per_token_ms == 0.0) config_invalid("fp8 iterations take zero time");
  if (!(exception_fraction >= 0.0 && exception_fraction <= 1.0)) config_invalid("exception fraction must be in [0, 1]");
  if (!(jitter_fraction >= 0.0 && jitter_fraction < 1.0)) config_invalid("jitter fraction must be in [0, 1)");
}

void PolicyConfig::validate() const {
  if (!(tpot_slo_ms >= 0.0) || !(ttft_slo_ms >= 0.0)) config_invalid("SLO values must be >= 0");
  if (hysteresis_iters < 0) config_invalid("hysteresis must be >= 0");
}

void SchedulerConfig::validate() const {
  if (max_seqs < 1) config_invalid("max_seqs must be >= 1");
  if (chunk_size < 1 || max_batched_tokens < chunk_size) config_invalid("need max_batched_tokens >= chunk_size >= 1");
}

// ---- policies --------------------------------------------------------------

ThresholdDualPolicy::ThresholdDualPolicy(const PolicyConfig& config) : config_(config) {}

bool ThresholdDualPolicy::predicts_ttft_breach(const IterationView& view) const {
  const std::uint64_t per_iter =
      view.max_batched_tokens > view.decode_tokens ? view.max_batched_tokens - view.decode_tokens : 1;
  std::uint64_t cumulative = 0;
  for (const auto& pending : view.backlog) {
    cumulative += pending.remaining_tokens;
    const auto iters = static_cast<double>((cumulative + per_iter - 1) / per_iter);
    const double predicted = view.now_ms - pending.arrival_ms + iters * view.predicted_fp16_ms;
    if (predicted > config_.ttft_slo_ms) return true;
  }
  return false;
}

Precision ThresholdDualPolicy::choose(const IterationView& view) {
  const bool stressed =
      view.predicted_fp16_ms > config_.tpot_slo_ms || (config_.ttft_guard && predicts_ttft_breach(view));
  const Precision wanted = stressed ? Precision::kFp8 : Precision::kFp16;
  if (!started_) {
    started_ = true;
    current_ = wanted;
    dwell_ = 1;
    return current_;
  }
  if (wanted != current_ && dwell_ >= config_.hysteresis_iters) {
    current_ = wanted;
    dwell_ = 0;
  }
  ++dwell_;
  return current_;
}

std::unique_ptr<PrecisionPolicy> make_policy(const PolicyConfig& config) {
  switch (config.mode) {
    case PolicyMode::kFp16Only: return std::make_unique<FixedPolicy>(Precision::kFp16);
    case PolicyMode::kFp8Only: return std::make_unique<FixedPolicy>(Precision::kFp8);
    case PolicyMode::kDual: return std::make_unique<ThresholdDualPolicy>(config);
  }
  return std::make_unique<FixedPolicy>(Precision::kFp16);
}

// ---- simulation ------------------------------------------------------------

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(samples.size()));
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(samples.size()))) - 1;
  return samples[idx];
}

SimMetrics simulate(const std::vector<Request>& requests, const LatencyModel& latency, PrecisionPolicy& policy,
                    const SchedulerConfig& scheduler, const PolicyConfig& slo, std::uint64_t seed) {
  latency.validate();
  scheduler.validate();
  slo.validate();
  for (const auto& r : requests) {
    if (r.prompt_tokens < 1 || r.output_tokens < 1) config_invalid("request " + std::to_string(r.id) + " has zero tokens");
    if (!std::isfinite(r.arrival_ms)) config_invalid("request " + std::to_string(r.id) + " has a non-finite arrival");
    if (!scheduler.chunked_prefill && r.prompt_tokens > scheduler.max_batched_tokens) {
      config_invalid("request " + std::to_string(r.id) + " prompt exceeds max_batched_tokens without chunked prefill");
    }
    if (scheduler.kv_capacity_tokens &&
        static_cast<std::uint64_t>(r.prompt_tokens) + r.output_tokens > *scheduler.kv_capacity_tokens) {
      config_invalid("request " + std::to_string(r.id) + " exceeds the KV capacity on its own");
    }
  }

  SimMetrics metrics;
  metrics.summary.requests = requests.size();
  metrics.summary.tpot_slo_ms = slo.tpot_slo_ms;
  metrics.summary.ttft_slo_ms = slo.ttft_slo_ms;
  if (requests.empty()) return metrics;

  std::vector<const Request*> order;
  order.reserve(requests.size());
  for (const auto& r : requests) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->arrival_ms < b->arrival_ms; });

  std::deque<Live> storage;  // stable addresses
  std::deque<Live*> waiting;
  std::vector<Live*> running;
  std::vector<TokenSample> samples;
  std::vector<Iteration> iterations;
  std::mt19937_64 rng(seed);
  std::size_t next = 0;
  std::uint64_t kv_reserved = 0;
  double now = 0.0;

  auto finish = [&](Live& l) {
    RequestMetrics rm;
    rm.id = l.req->id;
    rm.arrival_ms = l.req->arrival_ms;
    rm.first_token_ms = l.first_token_ms;
    rm.finish_ms = l.last_token_ms;
    rm.ttft_ms = l.first_token_ms - l.req->arrival_ms;
    rm.output_tokens = l.req->output_tokens;
    rm.tpot_ms = l.req->output_tokens > 1 ? (l.last_token_ms - l.first_token_ms) / (l.req->output_tokens - 1) : 0.0;
    metrics.per_request.push_back(rm);
    metrics.summary.tokens_emitted += l.req->output_tokens;
    kv_reserved -= static_cast<std::uint64_t>(l.req->prompt_tokens) + l.req->output_tokens;
  };

  while (next < order.size() || !waiting.empty() || !running.empty()) {
    while (next < order.size() && order[next]->arrival_ms <= now) {
      storage.push_back(Live{order[next++]});
      waiting.push_back(&storage.back());
    }
    if (waiting.empty() && running.empty()) {
      now = order[next]->arrival_ms;
      continue;
    }

    // Batch formation.
    std::vector<Work> batch;
    std::uint64_t budget = scheduler.max_batched_tokens;
    std::uint64_t decode_tokens = 0;
    for (Live* l : running) {
      if (budget == 0) break;
      if (l->prefill_done()) {
        batch.push_back({l, 1, true});
        --budget;
        ++decode_tokens;
      }
    }
    auto prefill_chunk = [&](const Live& l) -> std::uint64_t {
      const std::uint64_t remaining = l.remaining_prefill();
      if (!scheduler.chunked_prefill) return remaining <= budget ? remaining : 0;
      return std::min({remaining, scheduler.chunk_size, budget});
    };
    for (Live* l : running) {
      if (budget == 0) break;
      if (l->prefill_done()) continue;
      if (const std::uint64_t n = prefill_chunk(*l); n > 0) {
        l->in_batch = n;
        batch.push_back({l, n, false});
        budget -= n;
      }
    }
    while (!waiting.empty() && budget > 0 && running.size() < scheduler.max_seqs) {
      Live* l = waiting.front();
      const std::uint64_t reserve = static_cast<std::uint64_t>(l->req->prompt_tokens) + l->req->output_tokens;
      if (scheduler.kv_capacity_tokens && kv_reserved + reserve > *scheduler.kv_capacity_tokens) break;
      const std::uint64_t n = prefill_chunk(*l);
      if (n == 0) break;  // FCFS: head of line blocks
      waiting.pop_front();
      running.push_back(l);
      kv_reserved += reserve;
      l->in_batch = n;
      batch.push_back({l, n, false});
      budget -= n;
    }
    if (batch.empty()) {
      // Only reachable when admission is blocked with nothing running.
      if (next < order.size()) {
        now = std::max(now, order[next]->arrival_ms);
        continue;
      }
      config_invalid("scheduler cannot make progress");
    }

    IterationView view;
    view.now_ms = now;
    view.batched_tokens = scheduler.max_batched_tokens - budget;
    view.decode_tokens = decode_tokens;
    view.predicted_fp16_ms = latency.iteration_latency(Precision::kFp16, view.batched_tokens);
    view.predicted_fp8_ms = latency.iteration_latency(Precision::kFp8, view.batched_tokens);
    view.max_batched_tokens = scheduler.max_batched_tokens;
    for (Live* l : running) {
      if (l->remaining_prefill() > l->in_batch) {
        view.backlog.push_back({l->req->arrival_ms, l->remaining_prefill() - l->in_batch});
      }
    }
    for (Live* l : waiting) view.backlog.push_back({l->req->arrival_ms, l->remaining_prefill()});
    const Precision precision = policy.choose(view);

    double step = latency.iteration_latency(precision, view.batched_tokens);
    if (latency.jitter_fraction > 0.0) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      step *= 1.0 + latency.jitter_fraction * (2.0 * u - 1.0);
    }
    const double start = now;
    now += step;
    iterations.push_back({start, now, precision});
    ++metrics.summary.iterations;
    ++(precision == Precision::kFp16 ? metrics.summary.fp16_iterations : metrics.summary.fp8_iterations);
    if (metrics.precision_timeline.empty() || metrics.precision_timeline.back().precision != precision) {
      metrics.precision_timeline.push_back({start, now, precision});
    } else {
      metrics.precision_timeline.back().end_ms = now;
    }

    for (const auto& w : batch) {
      Live& l = *w.live;
      if (w.decode) {
        samples.push_back({now, now - l.last_token_ms});
        ++l.emitted;
        l.last_token_ms = now;
      } else {
        l.prefilled += w.tokens;
        l.in_batch = 0;
        if (l.prefill_done()) {
          l.emitted = 1;
          l.first_token_ms = now;
          l.last_token_ms = now;
        }
      }
    }
    std::vector<Live*> still_running;
    still_running.reserve(running.size());
    for (Live* l : running) {
      if (l->emitted == l->req->output_tokens) {
        finish(*l);
      } else {
        still_running.push_back(l);
      }
    }
    running = std::move(still_running);
  }

  SimSummary& s = metrics.summary;
  s.completed = metrics.per_request.size();
  s.duration_ms = now;
  std::sort(metrics.per_request.begin(), metrics.per_request.end(), [](auto& a, auto& b) { return a.id < b.id; });

  std::vector<double> ttfts, tpots;
  for (const auto& rm : metrics.per_request) {
    ttfts.push_back(rm.ttft_ms);
    if (rm.ttft_ms > slo.ttft_slo_ms) ++s.ttft_violations;
    if (rm.output_tokens > 1) tpots.push_back(rm.tpot_ms);
  }
  s.ttft_p50_ms = percentile(ttfts, 50);
  s.ttft_p90_ms = percentile(ttfts, 90);
  s.ttft_p99_ms = percentile(ttfts, 99);
  s.tpot_p50_ms = percentile(tpots, 50);
  s.tpot_p90_ms = percentile(tpots, 90);
  s.tpot_p99_ms = percentile(tpots, 99);

  double busy = 0.0, busy_fp16 = 0.0;
  for (const auto& it : iterations) {
    busy += it.end_ms - it.start_ms;
    if (it.precision == Precision::kFp16) busy_fp16 += it.end_ms - it.start_ms;
  }
  s.fp16_time_fraction = busy > 0.0 ? busy_fp16 / busy : 0.0;

  const auto seconds = static_cast<std::size_t>(std::ceil(s.duration_ms / 1000.0));
  std::vector<std::vector<double>> per_second(seconds);
  for (const auto& sample : samples) {
    const auto idx = std::min(static_cast<std::size_t>(sample.time_ms / 1000.0), seconds - 1);
    per_second[idx].push_back(sample.gap_ms);
  }
  std::vector<double> busy16(seconds, 0.0), busy_all(seconds, 0.0);
  for (const auto& it : iterations) {
    const auto first = static_cast<std::size_t>(it.start_ms / 1000.0);
    for (std::size_t sec = first; sec < seconds && static_cast<double>(sec) * 1000.0 < it.end_ms; ++sec) {
      const double b = busy_in(it, static_cast<double>(sec) * 1000.0, static_cast<double>(sec + 1) * 1000.0);
      busy_all[sec] += b;
      if (it.precision == Precision::kFp16) busy16[sec] += b;
    }
  }
  metrics.timeline.resize(seconds);
  for (std::size_t sec = 0; sec < seconds; ++sec) {
    SecondBucket& b = metrics.timeline[sec];
    b.second = sec;
    b.samples = per_second[sec].size();
    b.p90_tpot_ms = percentile(per_second[sec], 90);
    b.fp16_fraction = busy_all[sec] > 0.0 ? busy16[sec] / busy_all[sec] : 1.0;
    b.violation = b.p90_tpot_ms > slo.tpot_slo_ms;
    if (b.violation) ++s.slo_violation_seconds;
  }
  return metrics;
}

SimMetrics simulate(const std::vector<Request>& requests, const LatencyModel& latency, const PolicyConfig& policy,
                    const SchedulerConfig& scheduler, std::uint64_t seed) {
  policy.validate();
  auto p = make_policy(policy);
  return simulate(requests, latency, *p, scheduler, policy, seed);
}

// ---- export ----------------------------------------------------------------

namespace {

// JSON has no infinities; an unbounded SLO is written as the string "inf".
nlohmann::ordered_json slo_to_json(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

double slo_from_json(const nlohmann::json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

nlohmann::ordered_json to_json(const SimSummary& s) {
  return {
      {"requests", s.requests},
      {"completed", s.completed},
      {"tokens_emitted", s.tokens_emitted},
      {"iterations", s.iterations},
      {"fp16_iterations", s.fp16_iterations},
      {"fp8_iterations", s.fp8_iterations},
      {"duration_ms", s.duration_ms},
      {"ttft_p50_ms", s.ttft_p50_ms},
      {"ttft_p90_ms", s.ttft_p90_ms},
      {"ttft_p99_ms", s.ttft_p99_ms},
      {"tpot_p50_ms", s.tpot_p50_ms},
      {"tpot_p90_ms", s.tpot_p90_ms},
      {"tpot_p99_ms", s.tpot_p99_ms},
      {"slo_violation_seconds", s.slo_violation_seconds},
      {"ttft_violations", s.ttft_violations},
      {"fp16_time_fraction", s.fp16_time_fraction},
      {"tpot_slo_ms", slo_to_json(s.tpot_slo_ms)},
      {"ttft_slo_ms", slo_to_json(s.ttft_slo_ms)},
  };
}

}  // namespace

void export_metrics(const SimMetrics& metrics, const std::filesystem::path& path, ExportFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  if (format == ExportFormat::kJson) {
    out << to_json(metrics.summary).dump(2) << '\n';
  } else {
    out << "second,p90_tpot_ms,precision_fraction_fp16,violation_flag\n";
    char buf[128];
    for (const auto& b : metrics.timeline) {
      std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%d\n", static_cast<unsigned long long>(b.second), b.p90_tpot_ms,
                    b.fp16_fraction, b.violation ? 1 : 0);
      out << buf;
    }
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

SimSummary read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    SimSummary s;
    s.requests = j.at("requests").get<std::uint64_t>();
    s.completed = j.at("completed").get<std::uint64_t>();
    s.tokens_emitted = j.at("tokens_emitted").get<std::uint64_t>();
    s.iterations = j.at("iterations").get<std::uint64_t>();
    s.fp16_iterations = j.at("fp16_iterations").get<std::uint64_t>();
    s.fp8_iterations = j.at("fp8_iterations").get<std::uint64_t>();
    s.duration_ms = j.at("duration_ms").get<double>();
    s.ttft_p50_ms = j.at("ttft_p50_ms").get<double>();
    s.ttft_p90_ms = j.at("ttft_p90_ms").get<double>();
    s.ttft_p99_ms = j.at("ttft_p99_ms").get<double>();
    s.tpot_p50_ms = j.at("tpot_p50_ms").get<double>();
    s.tpot_p90_ms = j.at("tpot_p90_ms").get<double>();
    s.tpot_p99_ms = j.at("tpot_p99_ms").get<double>();
    s.slo_violation_seconds = j.at("slo_violation_seconds").get<std::uint64_t>();
    s.ttft_violations = j.at("ttft_violations").get<std::uint64_t>();
    s.fp16_time_fraction = j.at("fp16_time_fraction").get<double>();
    s.tpot_slo_ms = slo_from_json(j.at("tpot_slo_ms"));
    s.ttft_slo_ms = slo_from_json(j.at("ttft_slo_ms"));
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::kParse, path.string() + ": " + ex.what());
  }
}

}  // namespace nestedfp::sim

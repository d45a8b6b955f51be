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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nestedfp::sim {

struct Request {
  std::uint64_t id = 0;
  double arrival_ms = 0.0;
  std::uint32_t prompt_tokens = 1;
  std::uint32_t output_tokens = 1;

  friend bool operator==(const Request&, const Request&) = default;
};

// ---- traces ---------------------------------------------------------------

/// Header names to read for each canonical column.
struct ColumnMap {
  std::string arrival = "arrival_ms";
  std::string prompt_tokens = "prompt_tokens";
  std::string output_tokens = "output_tokens";
};

/// Reads a CSV trace with a header row. Arrival cells are either numbers
/// (milliseconds) or timestamps "YYYY-MM-DD HH:MM:SS[.fff]", which are
/// rebased to the earliest one. Result is stably sorted by arrival; ids are
/// the 0-based data row order. Throws kParse (with the file line number) or
/// kEmptyTrace.
std::vector<Request> ingest_trace(const std::filesystem::path& path, const ColumnMap& columns = {});

/// Writes the canonical three-column CSV.
void write_trace(const std::filesystem::path& path, const std::vector<Request>& requests);

enum class TracePattern { kPoisson, kBurst, kReplay };

struct TraceParams {
  double duration_s = 60.0;
  double rate = 5.0;       // poisson
  double rate_min = 1.0;   // burst
  double rate_max = 11.0;  // burst
  // Per-second burst rates are rate_min + (rate_max - rate_min) * q^shape over
  // evenly spaced quantiles q, shuffled. 1.5 gives a mean near 5 req/s for
  // the 1-11 req/s range.
  double burst_shape = 1.5;
  std::uint32_t prompt_tokens = 256;
  std::uint32_t output_tokens = 512;
  // replay: requests are kept with probability rate_multiplier, then
  // truncated to duration_s when duration_s > 0.
  std::vector<Request> replay_source;
  double rate_multiplier = 0.2;
};

/// Deterministic for a fixed seed. A zero rate yields an empty trace.
/// Throws kInvalidParams.
std::vector<Request> generate_trace(TracePattern pattern, const TraceParams& params, std::uint64_t seed);

// ---- model and policy -----------------------------------------------------

enum class Precision { kFp16, kFp8 };

/// latency = base + per_token * tokens * d, with d = 1 in FP16 and
/// exception_fraction + (1 - exception_fraction) / fp8_speedup in FP8.
/// jitter_fraction > 0 scales each executed iteration by a seeded factor in
/// [1 - j, 1 + j]; policy predictions never see the jitter.
struct LatencyModel {
  double fp16_base_ms = 10.0;
  double fp16_per_token_ms = 0.1;
  double fp8_speedup = 1.5;
  std::optional<double> fp8_base_ms;
  double exception_fraction = 0.0;
  double jitter_fraction = 0.0;

  double iteration_latency(Precision p, std::uint64_t tokens) const;
  void validate() const;
};

enum class PolicyMode { kFp16Only, kFp8Only, kDual };

struct PolicyConfig {
  PolicyMode mode = PolicyMode::kDual;
  double tpot_slo_ms = 33.3;
  double ttft_slo_ms = 200.0;
  int hysteresis_iters = 0;
  // Also switch to FP8 when the prefill backlog predicts a TTFT breach.
  bool ttft_guard = false;

  void validate() const;
};

struct SchedulerConfig {
  std::uint64_t max_batched_tokens = 2048;
  std::uint64_t max_seqs = 256;
  bool chunked_prefill = true;
  std::uint64_t chunk_size = 512;
  // Reserved prompt + output tokens across running requests; unset = no cap.
  std::optional<std::uint64_t> kv_capacity_tokens;

  void validate() const;
};

struct PendingPrefill {
  double arrival_ms = 0.0;
  std::uint64_t remaining_tokens = 0;
};

/// What a policy sees when the batch for one iteration has been formed.
struct IterationView {
  double now_ms = 0.0;
  std::uint64_t batched_tokens = 0;
  std::uint64_t decode_tokens = 0;
  double predicted_fp16_ms = 0.0;
  double predicted_fp8_ms = 0.0;
  // Requests still without a first token, FCFS order, after this batch.
  std::vector<PendingPrefill> backlog;
  std::uint64_t max_batched_tokens = 0;
};

class PrecisionPolicy {
 public:
  virtual ~PrecisionPolicy() = default;
  virtual Precision choose(const IterationView& view) = 0;
};

/// FP8 when the predicted FP16 iteration exceeds the TPOT SLO (or, with
/// ttft_guard, the backlog predicts a TTFT breach); switches are held for at
/// least hysteresis_iters iterations.
class ThresholdDualPolicy final : public PrecisionPolicy {
 public:
  explicit ThresholdDualPolicy(const PolicyConfig& config);
  Precision choose(const IterationView& view) override;

  bool predicts_ttft_breach(const IterationView& view) const;

 private:
  PolicyConfig config_;
  Precision current_ = Precision::kFp16;
  int dwell_ = 0;
  bool started_ = false;
};

class FixedPolicy final : public PrecisionPolicy {
 public:
  explicit FixedPolicy(Precision p) : precision_(p) {}
  Precision choose(const IterationView&) override { return precision_; }

 private:
  Precision precision_;
};

std::unique_ptr<PrecisionPolicy> make_policy(const PolicyConfig& config);

// ---- metrics --------------------------------------------------------------

struct RequestMetrics {
  std::uint64_t id = 0;
  double arrival_ms = 0.0;
  double first_token_ms = 0.0;
  double finish_ms = 0.0;
  double ttft_ms = 0.0;
  double tpot_ms = 0.0;  // 0 for single-token outputs
  std::uint32_t output_tokens = 0;
};

struct SecondBucket {
  std::uint64_t second = 0;
  double p90_tpot_ms = 0.0;  // 0 when no decode token landed in this second
  double fp16_fraction = 1.0;  // share of busy time in FP16; idle seconds report 1
  bool violation = false;
  std::uint64_t samples = 0;
};

struct PrecisionSpan {
  double start_ms = 0.0;
  double end_ms = 0.0;
  Precision precision = Precision::kFp16;
};

/// Scalar view of a run; this is what the JSON export carries.
struct SimSummary {
  std::uint64_t requests = 0;
  std::uint64_t completed = 0;
  std::uint64_t tokens_emitted = 0;
  std::uint64_t iterations = 0;
  std::uint64_t fp16_iterations = 0;
  std::uint64_t fp8_iterations = 0;
  double duration_ms = 0.0;
  double ttft_p50_ms = 0.0;
  double ttft_p90_ms = 0.0;
  double ttft_p99_ms = 0.0;
  double tpot_p50_ms = 0.0;
  double tpot_p90_ms = 0.0;
  double tpot_p99_ms = 0.0;
  std::uint64_t slo_violation_seconds = 0;
  std::uint64_t ttft_violations = 0;
  double fp16_time_fraction = 0.0;
  double tpot_slo_ms = 0.0;
  double ttft_slo_ms = 0.0;

  friend bool operator==(const SimSummary&, const SimSummary&) = default;
};

struct SimMetrics {
  SimSummary summary;
  std::vector<RequestMetrics> per_request;
  std::vector<SecondBucket> timeline;
  std::vector<PrecisionSpan> precision_timeline;
};

/// Nearest-rank percentile (p in [0, 100]) of unsorted samples; 0 if empty.
double percentile(std::vector<double> samples, double p);

/// Continuous-batching loop with per-iteration precision. Each iteration:
/// one decode token per running request, then prefill chunks (running
/// requests first, then FCFS admission) up to the token and sequence
/// budgets; the policy picks the precision; the clock advances by the
/// iteration latency and tokens are emitted at its end. Throws
/// kConfigInvalid.
SimMetrics simulate(const std::vector<Request>& requests, const LatencyModel& latency, PrecisionPolicy& policy,
                    const SchedulerConfig& scheduler, const PolicyConfig& slo, std::uint64_t seed);

SimMetrics simulate(const std::vector<Request>& requests, const LatencyModel& latency, const PolicyConfig& policy,
                    const SchedulerConfig& scheduler, std::uint64_t seed);

enum class ExportFormat { kJson, kCsv };

/// kJson writes the summary, kCsv the per-second timeline
/// (second,p90_tpot_ms,precision_fraction_fp16,violation_flag).
void export_metrics(const SimMetrics& metrics, const std::filesystem::path& path, ExportFormat format);

SimSummary read_summary(const std::filesystem::path& path);

}  // namespace nestedfp::sim

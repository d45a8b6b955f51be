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

#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "nestedfp/error.hpp"
#include "nestedfp/fixtures.hpp"
#include "nestedfp/fpcodec.hpp"
#include "nestedfp/quantgemm.hpp"
#include "nestedfp/servesim.hpp"
#include "nestedfp/tensorstore.hpp"

namespace nestedfp::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a command ran but its check failed (exit 1).
struct CheckFailed : std::runtime_error {
  CheckFailed(std::string kind, const std::string& what) : std::runtime_error(what), kind(std::move(kind)) {}
  std::string kind;
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

std::string hex16(std::uint16_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%04X", v);
  return buf;
}

std::pair<double, double> parse_pair(const std::string& text, const char* flag) {
  double a = 0, b = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf%c", &a, &b, &tail) != 2) {
    throw UsageError(std::string(flag) + " expects two comma-separated numbers");
  }
  return {a, b};
}

GemmClass parse_class_flag(const std::string& s) {
  const auto c = parse_gemm_class(s);
  if (!c) throw UsageError("unknown gemm class '" + s + "'");
  return *c;
}

bool has_nfpt_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string(magic, 4) == "NFPT";
}

std::string format_value(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

bool has_other(const ApplicabilityReport& r) { return r.at(GemmClass::kOther).total > 0; }

std::string census_table(const ApplicabilityReport& r) {
  std::vector<GemmClass> cols = {GemmClass::kGemm1, GemmClass::kGemm2, GemmClass::kGemm3, GemmClass::kGemm4};
  if (has_other(r)) cols.push_back(GemmClass::kOther);
  std::ostringstream os;
  char buf[64];
  for (GemmClass c : cols) {
    std::snprintf(buf, sizeof buf, "%-10s", std::string(to_string(c)).c_str());
    os << buf;
  }
  os << "Total\n";
  for (GemmClass c : cols) {
    const auto& cc = r.at(c);
    std::snprintf(buf, sizeof buf, "%-10s",
                  (std::to_string(cc.applicable) + "/" + std::to_string(cc.total)).c_str());
    os << buf;
  }
  os << format_ratio(r.applicable, r.total) << "\n";
  os << "exception layers: " << r.exception_layers() << "\n";
  os << "weight range: min " << format_value(r.min_value) << " max " << format_value(r.max_value) << "\n";
  return os.str();
}

nlohmann::ordered_json census_json(const ApplicabilityReport& r) {
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  for (GemmClass c : kAllGemmClasses) {
    if (c == GemmClass::kOther && !has_other(r)) continue;
    classes[std::string(to_string(c))] = {{"applicable", r.at(c).applicable}, {"total", r.at(c).total}};
  }
  nlohmann::ordered_json total = {{"applicable", r.applicable}, {"total", r.total}};
  if (const auto f = r.fraction()) {
    total["fraction"] = *f;
  } else {
    total["fraction"] = nullptr;
  }
  total["display"] = format_ratio(r.applicable, r.total);
  nlohmann::ordered_json j = {{"classes", classes}, {"total", total}, {"exception_layers", r.exception_layers()}};
  j["min_value"] = r.min_value ? nlohmann::ordered_json(*r.min_value) : nlohmann::ordered_json(nullptr);
  j["max_value"] = r.max_value ? nlohmann::ordered_json(*r.max_value) : nlohmann::ordered_json(nullptr);
  return j;
}

// ---- convert ---------------------------------------------------------------

struct ConvertArgs {
  std::string in, out, shape, gemm_class = "OTHER", name;
  bool raw = false;
};

int cmd_convert(const ConvertArgs& a, std::ostream& out) {
  std::vector<TensorF16> tensors;
  if (a.raw) {
    if (a.shape.empty()) throw UsageError("--raw requires --shape N,K");
    const auto [n, k] = parse_pair(a.shape, "--shape");
    if (n < 1 || k < 1 || n != std::floor(n) || k != std::floor(k)) throw UsageError("--shape must be positive integers");
    tensors.push_back(import_raw(a.in, static_cast<std::int64_t>(n), static_cast<std::int64_t>(k),
                                 parse_class_flag(a.gemm_class), a.name));
  } else if (has_nfpt_magic(a.in)) {
    for (const auto& layer : load(a.in).layers) tensors.push_back(to_fp16(layer));
  } else {
    tensors = load_source_manifest(a.in);
  }
  const ModelContainer model = convert_model(tensors);
  save(model, a.out);

  const ApplicabilityReport r = census(model);
  std::uint64_t exceptions = 0;
  for (const auto& l : model.layers) exceptions += l.is_nested() ? 0 : 1;
  out << "converted " << model.layers.size() << " layers: " << model.layers.size() - exceptions << " nested, "
      << exceptions << (exceptions == 1 ? " exception layer" : " exception layers") << "\n";
  out << census_table(r);
  out << "wrote " << a.out << "\n";
  return 0;
}

// ---- verify ----------------------------------------------------------------

struct VerifyArgs {
  bool exhaustive = false;
  std::string model;
  std::string inject_fault;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  if (!a.exhaustive && a.model.empty()) throw UsageError("verify needs --exhaustive and/or --model");
  std::vector<std::string> failures;
  if (a.exhaustive) {
    VerifyOptions opts;
    if (a.inject_fault == "tie") {
      opts.decomposer = decompose_ties_away;
    } else if (!a.inject_fault.empty()) {
      throw UsageError("unknown fault '" + a.inject_fault + "'");
    }
    const VerificationReport r = verify_exhaustive(opts);
    out << "applicable=" << r.applicable << " failures=" << r.failures() << "\n";
    out << "roundtrip=" << r.failures_roundtrip << " oracle=" << r.failures_oracle
        << " branchy=" << r.failures_branchy << " sign_borrow=" << r.sign_borrows << "\n";
    if (r.failures() > 0) failures.push_back("codec failure at pattern " + hex16(r.first_failure));
  }
  if (!a.model.empty()) {
    const ModelCheck check = verify_model(load(a.model));
    out << "layers=" << check.layers_checked << " mismatches=" << check.mismatched_layers.size() << "\n";
    if (!check.mismatched_layers.empty()) failures.push_back("layer '" + check.mismatched_layers.front() + "' differs from its digest");
  }
  if (!failures.empty()) throw CheckFailed("verification-failed", failures.front());
  return 0;
}

// ---- report ----------------------------------------------------------------

int cmd_report(const std::string& in, const std::string& format, std::ostream& out) {
  const ApplicabilityReport r = census(load(in));
  if (format == "json") {
    out << census_json(r).dump(2) << "\n";
  } else {
    out << census_table(r);
  }
  return 0;
}

// ---- gemm ------------------------------------------------------------------

struct GemmArgs {
  long long m = 0, n = 0, k = 0;
  std::string mode = "fp16";
  std::uint64_t seed = 0;
  std::string weights_range = "-1.75,1.75";
  std::string act_range = "-1,1";
  bool report_error = false;
};

int cmd_gemm(const GemmArgs& a, std::ostream& out) {
  if (a.m < 1 || a.n < 1 || a.k < 1) throw UsageError("--m, --n and --k must be >= 1");
  const auto [wlo, whi] = parse_pair(a.weights_range, "--weights-range");
  const auto [alo, ahi] = parse_pair(a.act_range, "--act-range");
  if (!(wlo <= whi) || !(alo <= ahi)) throw UsageError("ranges must satisfy lo <= hi");

  std::mt19937_64 rng(a.seed);
  const ActivationF16 act = uniform_fp16_matrix(a.m, a.k, alo, ahi, rng);
  const TensorF16 weights{"w", GemmClass::kOther, uniform_fp16_matrix(a.n, a.k, wlo, whi, rng)};

  const GemmResult<> ref = gemm_fp16(act, weights);
  GemmResult<> res;
  if (a.mode == "fp16") {
    res = ref;
  } else if (a.mode == "fp8") {
    res = gemm_fp8_baseline(act, weights);
  } else {
    const Layer layer = convert_layer(weights);
    if (!layer.is_nested()) {
      throw Error(ErrorKind::kExceptionLayer, std::to_string(layer.entry.stats.out_of_range_count) +
                                                  " weights fall outside the nested range");
    }
    const auto& nested = std::get<NestedTensor>(layer.payload);
    res = a.mode == "nfp16" ? gemm_nestedfp16(act, nested) : gemm_nestedfp8(act, nested);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "mode=%s m=%lld n=%lld k=%lld seed=%llu checksum=0x%08X\n", a.mode.c_str(), a.m, a.n,
                a.k, static_cast<unsigned long long>(a.seed), output_checksum(res.out));
  out << buf;
  if (a.report_error) {
    const ErrorMetrics e = error_metrics(ref, res);
    std::snprintf(buf, sizeof buf, "max_rel=%.6g frob_rel=%.6g mse=%.6g\n", e.max_rel, e.frob_rel, e.mse);
    out << buf;
  }
  return 0;
}

// ---- traces and simulation -------------------------------------------------

sim::ColumnMap column_map(const std::vector<std::string>& cols) {
  sim::ColumnMap map;
  for (const auto& spec : cols) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--col expects canonical=header, got '" + spec + "'");
    const std::string key = spec.substr(0, eq), value = spec.substr(eq + 1);
    if (key == "arrival_ms") {
      map.arrival = value;
    } else if (key == "prompt_tokens") {
      map.prompt_tokens = value;
    } else if (key == "output_tokens") {
      map.output_tokens = value;
    } else {
      throw UsageError("unknown canonical column '" + key + "'");
    }
  }
  return map;
}

struct TraceGenArgs {
  std::string pattern = "burst", out, source;
  double duration = 60.0, rate_min = 1.0, rate_max = 11.0, rate = 5.0, scale = 0.2;
  unsigned prompt_tokens = 256, output_tokens = 512;
  std::uint64_t seed = 0;
  std::vector<std::string> cols;
};

int cmd_trace_gen(const TraceGenArgs& a, std::ostream& out) {
  sim::TraceParams p;
  p.duration_s = a.duration;
  p.rate = a.rate;
  p.rate_min = a.rate_min;
  p.rate_max = a.rate_max;
  p.prompt_tokens = a.prompt_tokens;
  p.output_tokens = a.output_tokens;
  p.rate_multiplier = a.scale;
  sim::TracePattern pattern;
  if (a.pattern == "burst") {
    pattern = sim::TracePattern::kBurst;
  } else if (a.pattern == "poisson") {
    pattern = sim::TracePattern::kPoisson;
  } else {
    pattern = sim::TracePattern::kReplay;
    if (a.source.empty()) throw UsageError("--pattern replay requires --source");
    p.replay_source = sim::ingest_trace(a.source, column_map(a.cols));
  }
  std::vector<sim::Request> reqs;
  try {
    reqs = sim::generate_trace(pattern, p, a.seed);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidParams) throw UsageError(e.what());
    throw;
  }
  sim::write_trace(a.out, reqs);
  char buf[128];
  const double span = p.duration_s > 0 ? p.duration_s : 0.0;
  std::snprintf(buf, sizeof buf, "requests=%zu mean_rate=%.3f req/s\n", reqs.size(),
                span > 0 ? static_cast<double>(reqs.size()) / span : 0.0);
  out << buf << "wrote " << a.out << "\n";
  return 0;
}

struct SimulateArgs {
  std::string trace, policy = "dual", out, timeline;
  double slo_tpot = 33.3, slo_ttft = 200.0;
  sim::LatencyModel latency;
  sim::SchedulerConfig scheduler;
  int hysteresis = 0;
  bool ttft_guard = false, no_chunked_prefill = false;
  std::uint64_t seed = 0;
  std::vector<std::string> cols;
};

int cmd_simulate(SimulateArgs a, std::ostream& out, std::ostream& err) {
  sim::PolicyConfig policy;
  policy.mode = a.policy == "fp16" ? sim::PolicyMode::kFp16Only
                : a.policy == "fp8" ? sim::PolicyMode::kFp8Only
                                    : sim::PolicyMode::kDual;
  policy.tpot_slo_ms = a.slo_tpot;
  policy.ttft_slo_ms = a.slo_ttft;
  policy.hysteresis_iters = a.hysteresis;
  policy.ttft_guard = a.ttft_guard;
  a.scheduler.chunked_prefill = !a.no_chunked_prefill;

  std::vector<sim::Request> requests;
  try {
    requests = sim::ingest_trace(a.trace, column_map(a.cols));
  } catch (const Error& e) {
    // A trace with no requests simulates to zero metrics.
    if (e.kind() != ErrorKind::kEmptyTrace) throw;
    err << "warning: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
  }
  sim::SimMetrics m;
  try {
    m = sim::simulate(requests, a.latency, policy, a.scheduler, a.seed);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfigInvalid) throw UsageError(e.what());
    throw;
  }
  const auto& s = m.summary;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "policy=%s requests=%llu completed=%llu tokens=%llu duration_s=%.3f\n"
                "tpot_p50=%.3f tpot_p90=%.3f tpot_p99=%.3f ttft_p90=%.3f\n",
                a.policy.c_str(), static_cast<unsigned long long>(s.requests),
                static_cast<unsigned long long>(s.completed), static_cast<unsigned long long>(s.tokens_emitted),
                s.duration_ms / 1000.0, s.tpot_p50_ms, s.tpot_p90_ms, s.tpot_p99_ms, s.ttft_p90_ms);
  out << buf;
  std::snprintf(buf, sizeof buf, "slo_violation_seconds=%llu fp16_time_fraction=%.4f\n",
                static_cast<unsigned long long>(s.slo_violation_seconds), s.fp16_time_fraction);
  out << buf;
  if (!a.out.empty()) sim::export_metrics(m, a.out, sim::ExportFormat::kJson);
  if (!a.timeline.empty()) sim::export_metrics(m, a.timeline, sim::ExportFormat::kCsv);
  return 0;
}

// ---- fixture ---------------------------------------------------------------

int cmd_fixture(const std::string& preset, const std::string& dir, bool list, const SyntheticOptions& opts,
                std::ostream& out) {
  if (list) {
    for (const auto& row : census_rows()) out << row.preset << "\t" << row.model << "\n";
    return 0;
  }
  if (preset.empty() || dir.empty()) throw UsageError("fixture needs --preset and --out (or --list)");
  const CensusRow* row = find_census_row(preset);
  if (!row) throw UsageError("unknown preset '" + preset + "'");
  const auto tensors = synthesize_model(*row, opts);
  write_source_manifest(dir, tensors);
  out << "wrote " << tensors.size() << " layers for " << row->model << " to " << dir << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"nestedfp: dual-precision FP16/E4M3 weight format tools"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert FP16 layers into a nested container");
  c->add_option("--in", convert.in, "Source manifest (.json), NFPT container, or raw FP16 file")->required();
  c->add_option("--out", convert.out, "Output NFPT container")->required();
  c->add_flag("--raw", convert.raw, "Treat --in as a headerless little-endian FP16 file");
  c->add_option("--shape", convert.shape, "Raw tensor shape N,K");
  c->add_option("--class", convert.gemm_class, "Raw tensor GEMM class")
      ->check(CLI::IsMember({"GEMM1", "GEMM2", "GEMM3", "GEMM4", "OTHER"}));
  c->add_option("--name", convert.name, "Raw tensor layer name");

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Exhaustive codec check and/or container round-trip check");
  v->add_flag("--exhaustive", verify.exhaustive, "Check all 65,536 FP16 patterns");
  v->add_option("--model", verify.model, "Re-reconstruct every layer of a container against its digest");
  v->add_option("--inject-fault", verify.inject_fault)->group("");

  std::string report_in, report_format = "table";
  auto* r = app.add_subcommand("report", "Per-GEMM-class applicability census");
  r->add_option("--in", report_in, "NFPT container")->required();
  r->add_option("--format", report_format, "table or json")->check(CLI::IsMember({"table", "json"}));

  GemmArgs gemm;
  auto* g = app.add_subcommand("gemm", "Run one GEMM path on seeded matrices");
  g->add_option("--m", gemm.m, "Tokens")->required();
  g->add_option("--n", gemm.n, "Output channels")->required();
  g->add_option("--k", gemm.k, "Reduction size")->required();
  g->add_option("--mode", gemm.mode, "fp16, nfp16, nfp8 or fp8")
      ->check(CLI::IsMember({"fp16", "nfp16", "nfp8", "fp8"}));
  g->add_option("--seed", gemm.seed);
  g->add_option("--weights-range", gemm.weights_range, "lo,hi");
  g->add_option("--act-range", gemm.act_range, "lo,hi");
  g->add_flag("--report-error", gemm.report_error, "Print error metrics against the FP16 path");

  TraceGenArgs tg;
  auto* t = app.add_subcommand("trace-gen", "Generate a request trace CSV");
  t->add_option("--pattern", tg.pattern)->check(CLI::IsMember({"burst", "poisson", "replay"}));
  t->add_option("--duration", tg.duration, "Seconds");
  t->add_option("--rate-min", tg.rate_min);
  t->add_option("--rate-max", tg.rate_max);
  t->add_option("--rate", tg.rate, "Poisson rate (req/s)");
  t->add_option("--scale", tg.scale, "Replay keep fraction");
  t->add_option("--source", tg.source, "Replay source trace");
  t->add_option("--col", tg.cols, "Replay source column mapping canonical=header");
  t->add_option("--prompt-tokens", tg.prompt_tokens);
  t->add_option("--output-tokens", tg.output_tokens);
  t->add_option("--seed", tg.seed);
  t->add_option("--out", tg.out)->required();

  SimulateArgs sa;
  auto* s = app.add_subcommand("simulate", "Trace-driven dual-precision serving simulation");
  s->add_option("--trace", sa.trace)->required();
  s->add_option("--policy", sa.policy)->check(CLI::IsMember({"fp16", "fp8", "dual"}));
  s->add_option("--slo-tpot", sa.slo_tpot, "ms");
  s->add_option("--slo-ttft", sa.slo_ttft, "ms");
  s->add_option("--fp8-speedup", sa.latency.fp8_speedup);
  s->add_option("--base-ms", sa.latency.fp16_base_ms);
  s->add_option("--per-token-ms", sa.latency.fp16_per_token_ms);
  s->add_option("--exception-fraction", sa.latency.exception_fraction);
  s->add_option("--jitter", sa.latency.jitter_fraction);
  s->add_option("--max-batched-tokens", sa.scheduler.max_batched_tokens);
  s->add_option("--max-seqs", sa.scheduler.max_seqs);
  s->add_option("--chunk-size", sa.scheduler.chunk_size);
  s->add_flag("--no-chunked-prefill", sa.no_chunked_prefill);
  s->add_option("--hysteresis", sa.hysteresis);
  s->add_flag("--ttft-guard", sa.ttft_guard);
  s->add_option("--col", sa.cols, "Column mapping canonical=header");
  s->add_option("--seed", sa.seed);
  s->add_option("--out", sa.out, "Summary JSON");
  s->add_option("--timeline", sa.timeline, "Per-second CSV");

  std::string fx_preset, fx_out;
  bool fx_list = false;
  SyntheticOptions fx_opts;
  auto* f = app.add_subcommand("fixture", "Write a synthetic layer-census fixture");
  f->add_option("--preset", fx_preset);
  f->add_option("--out", fx_out, "Directory");
  f->add_flag("--list", fx_list);
  f->add_option("--rows", fx_opts.rows)->check(CLI::PositiveNumber);
  f->add_option("--cols", fx_opts.cols)->check(CLI::PositiveNumber);
  f->add_option("--seed", fx_opts.seed);

  std::vector<std::string> argv_store = {"nestedfp"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (c->parsed()) return cmd_convert(convert, out);
    if (v->parsed()) return cmd_verify(verify, out);
    if (r->parsed()) return cmd_report(report_in, report_format, out);
    if (g->parsed()) return cmd_gemm(gemm, out);
    if (t->parsed()) return cmd_trace_gen(tg, out);
    if (s->parsed()) return cmd_simulate(sa, out, err);
    if (f->parsed()) return cmd_fixture(fx_preset, fx_out, fx_list, fx_opts, out);
  } catch (const UsageError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const CheckFailed& e) {
    err << "error: " << e.kind << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 2;
}

}  // namespace nestedfp::cli

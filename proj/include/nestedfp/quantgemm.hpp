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

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "nestedfp/e4m3.hpp"
#include "nestedfp/error.hpp"
#include "nestedfp/fp16.hpp"
#include "nestedfp/fpcodec.hpp"
#include "nestedfp/tensor.hpp"
#include "nestedfp/tensorstore.hpp"

namespace nestedfp {

/// M tokens x K features.
using ActivationF16 = Fp16Matrix;

enum class ScaleMode { kPerTensor, kPerToken };

struct QuantizedActivation {
  ByteMatrix codes;
  ScaleMode mode = ScaleMode::kPerTensor;
  Eigen::VectorXd scales;  // 1 entry (per tensor) or M entries (per token)

  double scale(Eigen::Index row) const { return mode == ScaleMode::kPerTensor ? scales(0) : scales(row); }
};

struct WeightScales {
  enum class Mode { kGlobal2Pow8, kPerChannel };
  Mode mode = Mode::kGlobal2Pow8;
  Eigen::VectorXd values;  // dequant multipliers: {2^-8} or absmax(row)/448
};

struct QuantizedWeights {
  ByteMatrix codes;
  WeightScales scales;
};

/// Output of every engine. The accumulator snapshot holds the wide sums
/// before the final FP16 rounding (scales applied) when requested.
template <typename Acc = double>
struct GemmResult {
  Fp16Matrix out;
  DenseMatrix<Acc> accumulator;
};

struct GemmOptions {
  bool keep_accumulator = false;
};

namespace detail {

inline void check_reduction_dim(Eigen::Index a_cols, Eigen::Index w_cols) {
  if (a_cols != w_cols) {
    throw Error(ErrorKind::kShapeMismatch, "activation K=" + std::to_string(a_cols) +
                                               " does not match weight K=" + std::to_string(w_cols));
  }
}

template <typename Acc>
DenseMatrix<Acc> decode_fp16(const Fp16Matrix& m) {
  return m.unaryExpr([](std::uint16_t b) { return static_cast<Acc>(decode(Fp16Bits(b))); });
}

template <typename Acc>
DenseMatrix<Acc> decode_codes(const ByteMatrix& m) {
  return m.unaryExpr([](std::uint8_t c) { return static_cast<Acc>(e4m3::value(c)); });
}

// One accumulator per output, k strictly ascending. Eigen's product kernels
// reorder the reduction, so the loop is written out.
template <typename Acc>
DenseMatrix<Acc> accumulate(const DenseMatrix<Acc>& lhs, const DenseMatrix<Acc>& rhs) {
  const Eigen::Index m_dim = lhs.rows(), n_dim = rhs.rows(), k_dim = lhs.cols();
  DenseMatrix<Acc> acc(m_dim, n_dim);
  for (Eigen::Index m = 0; m < m_dim; ++m) {
    for (Eigen::Index n = 0; n < n_dim; ++n) {
      Acc sum = Acc(0);
      for (Eigen::Index k = 0; k < k_dim; ++k) sum += lhs(m, k) * rhs(n, k);
      acc(m, n) = sum;
    }
  }
  return acc;
}

template <typename Acc>
GemmResult<Acc> finish(DenseMatrix<Acc> acc, const GemmOptions& options) {
  GemmResult<Acc> r;
  r.out = acc.unaryExpr([](Acc v) { return fp16_from_double(static_cast<double>(v)).bits; });
  if (options.keep_accumulator) r.accumulator = std::move(acc);
  return r;
}

inline double absmax_or_nan(const Fp16Matrix& m, Eigen::Index row_begin, Eigen::Index row_count) {
  double best = 0.0;
  for (Eigen::Index i = row_begin; i < row_begin + row_count; ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      const double v = decode(Fp16Bits(m(i, k)));
      if (!std::isfinite(v)) return std::nan("");
      best = std::max(best, std::fabs(v));
    }
  }
  return best;
}

inline double scale_for(double absmax) { return absmax == 0.0 ? 1.0 : absmax / e4m3::kMaxFinite; }

}  // namespace detail

/// absmax/448 scaling (per tensor or per row) and nearest-even E4M3 codes of
/// value/scale. An all-zero group gets scale 1. Throws kNonFiniteInput.
inline QuantizedActivation quantize_activation(const ActivationF16& a, ScaleMode mode) {
  QuantizedActivation q;
  q.mode = mode;
  q.codes.resize(a.rows(), a.cols());
  const Eigen::Index groups = mode == ScaleMode::kPerTensor ? 1 : a.rows();
  q.scales.resize(groups);
  for (Eigen::Index g = 0; g < groups; ++g) {
    const Eigen::Index begin = mode == ScaleMode::kPerTensor ? 0 : g;
    const Eigen::Index count = mode == ScaleMode::kPerTensor ? a.rows() : 1;
    const double absmax = detail::absmax_or_nan(a, begin, count);
    if (std::isnan(absmax)) throw Error(ErrorKind::kNonFiniteInput, "activation contains Inf or NaN");
    const double s = detail::scale_for(absmax);
    q.scales(g) = s;
    for (Eigen::Index i = begin; i < begin + count; ++i) {
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        q.codes(i, k) = e4m3::encode_rne(decode(Fp16Bits(a(i, k))) / s);
      }
    }
  }
  return q;
}

inline DenseMatrix<double> dequantize(const QuantizedActivation& q) {
  DenseMatrix<double> out(q.codes.rows(), q.codes.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index k = 0; k < out.cols(); ++k) out(i, k) = e4m3::value(q.codes(i, k)) * q.scale(i);
  return out;
}

/// Per-output-channel absmax quantization used by the conventional FP8 path.
inline QuantizedWeights quantize_weights_per_channel(const Fp16Matrix& w) {
  QuantizedWeights q;
  q.scales.mode = WeightScales::Mode::kPerChannel;
  q.scales.values.resize(w.rows());
  q.codes.resize(w.rows(), w.cols());
  for (Eigen::Index n = 0; n < w.rows(); ++n) {
    const double absmax = detail::absmax_or_nan(w, n, 1);
    if (std::isnan(absmax)) throw Error(ErrorKind::kNonFiniteInput, "weight contains Inf or NaN");
    const double s = detail::scale_for(absmax);
    q.scales.values(n) = s;
    for (Eigen::Index k = 0; k < w.cols(); ++k) q.codes(n, k) = e4m3::encode_rne(decode(Fp16Bits(w(n, k))) / s);
  }
  return q;
}

/// Scaling of the nested upper plane: one global 2^-8 multiplier.
inline WeightScales nested_weight_scales() {
  WeightScales s;
  s.mode = WeightScales::Mode::kGlobal2Pow8;
  s.values = Eigen::VectorXd::Constant(1, kUpperDequantScale);
  return s;
}

template <typename Acc = double>
GemmResult<Acc> gemm_fp16(const ActivationF16& a, const Fp16Matrix& w, const GemmOptions& options = {}) {
  detail::check_reduction_dim(a.cols(), w.cols());
  return detail::finish<Acc>(detail::accumulate<Acc>(detail::decode_fp16<Acc>(a), detail::decode_fp16<Acc>(w)),
                             options);
}

template <typename Acc = double>
GemmResult<Acc> gemm_fp16(const ActivationF16& a, const TensorF16& w, const GemmOptions& options = {}) {
  return gemm_fp16<Acc>(a, w.data, options);
}

/// FP16 GEMM over the two planes; each weight is rebuilt with reconstruct()
/// as it is loaded.
template <typename Acc = double>
GemmResult<Acc> gemm_nestedfp16(const ActivationF16& a, const NestedTensor& w, const GemmOptions& options = {}) {
  detail::check_reduction_dim(a.cols(), w.cols());
  DenseMatrix<Acc> rhs(w.rows(), w.cols());
  for (Eigen::Index n = 0; n < w.rows(); ++n)
    for (Eigen::Index k = 0; k < w.cols(); ++k)
      rhs(n, k) = static_cast<Acc>(decode(reconstruct({UpperCode{w.upper(n, k)}, LowerByte{w.lower(n, k)}})));
  return detail::finish<Acc>(detail::accumulate<Acc>(detail::decode_fp16<Acc>(a), rhs), options);
}

/// FP8 GEMM reading only the upper plane: per-tensor activation scale and
/// the global 2^-8 weight scale applied after accumulation.
template <typename Acc = double>
GemmResult<Acc> gemm_nestedfp8(const ActivationF16& a, const NestedTensor& w, const GemmOptions& options = {}) {
  detail::check_reduction_dim(a.cols(), w.cols());
  const QuantizedActivation aq = quantize_activation(a, ScaleMode::kPerTensor);
  DenseMatrix<Acc> acc = detail::accumulate<Acc>(detail::decode_codes<Acc>(aq.codes), detail::decode_codes<Acc>(w.upper));
  const Acc factor = static_cast<Acc>(aq.scales(0) * kUpperDequantScale);
  acc *= factor;
  return detail::finish<Acc>(std::move(acc), options);
}

/// Dispatch on a stored layer; exception layers have no FP8 form.
template <typename Acc = double>
GemmResult<Acc> gemm_nestedfp8(const ActivationF16& a, const Layer& w, const GemmOptions& options = {}) {
  if (const auto* nested = std::get_if<NestedTensor>(&w.payload)) return gemm_nestedfp8<Acc>(a, *nested, options);
  throw Error(ErrorKind::kExceptionLayer, "layer '" + w.entry.name + "' is stored as FP16 and must run the FP16 path");
}

/// Conventional FP8 GEMM: per-token activation and per-channel weight absmax.
template <typename Acc = double>
GemmResult<Acc> gemm_fp8_baseline(const ActivationF16& a, const Fp16Matrix& w, const GemmOptions& options = {}) {
  detail::check_reduction_dim(a.cols(), w.cols());
  const QuantizedActivation aq = quantize_activation(a, ScaleMode::kPerToken);
  const QuantizedWeights wq = quantize_weights_per_channel(w);
  DenseMatrix<Acc> acc = detail::accumulate<Acc>(detail::decode_codes<Acc>(aq.codes), detail::decode_codes<Acc>(wq.codes));
  for (Eigen::Index m = 0; m < acc.rows(); ++m)
    for (Eigen::Index n = 0; n < acc.cols(); ++n)
      acc(m, n) *= static_cast<Acc>(aq.scales(m) * wq.scales.values(n));
  return detail::finish<Acc>(std::move(acc), options);
}

template <typename Acc = double>
GemmResult<Acc> gemm_fp8_baseline(const ActivationF16& a, const TensorF16& w, const GemmOptions& options = {}) {
  return gemm_fp8_baseline<Acc>(a, w.data, options);
}

struct ErrorMetrics {
  double max_rel = 0.0;
  double frob_rel = 0.0;
  double mse = 0.0;
};

/// Relative errors of test against ref over decoded FP16 outputs. Elements
/// (and a whole matrix) with a zero reference contribute absolute error.
ErrorMetrics error_metrics(const Fp16Matrix& ref, const Fp16Matrix& test);

template <typename Acc>
ErrorMetrics error_metrics(const GemmResult<Acc>& ref, const GemmResult<Acc>& test) {
  return error_metrics(ref.out, test.out);
}

/// Seeded matrix of FP16 values drawn uniformly from [lo, hi] then rounded.
Fp16Matrix uniform_fp16_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi, std::mt19937_64& rng);

/// CRC-32 of the little-endian output bytes.
std::uint32_t output_checksum(const Fp16Matrix& out);

}  // namespace nestedfp

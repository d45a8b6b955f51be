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

#include "nestedfp/quantgemm.hpp"

#include <vector>

#include "checksum.hpp"

namespace nestedfp {

ErrorMetrics error_metrics(const Fp16Matrix& ref, const Fp16Matrix& test) {
  if (ref.rows() != test.rows() || ref.cols() != test.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "error_metrics: outputs differ in shape");
  }
  ErrorMetrics m;
  if (ref.size() == 0) return m;
  const Eigen::ArrayXXd r = detail::decode_fp16<double>(ref).array();
  const Eigen::ArrayXXd t = detail::decode_fp16<double>(test).array();
  const Eigen::ArrayXXd diff = (t - r).abs();
  const Eigen::ArrayXXd rel = (r == 0.0).select(diff, diff / r.abs());
  m.max_rel = rel.maxCoeff();
  const double ref_norm = std::sqrt(r.square().sum());
  const double diff_norm = std::sqrt(diff.square().sum());
  m.frob_rel = ref_norm == 0.0 ? diff_norm : diff_norm / ref_norm;
  m.mse = diff.square().mean();
  return m;
}

Fp16Matrix uniform_fp16_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi, std::mt19937_64& rng) {
  Fp16Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m.data()[i] = fp16_from_double(lo + (hi - lo) * u).bits;
  }
  return m;
}

std::uint32_t output_checksum(const Fp16Matrix& out) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(out.size()) * 2);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    bytes.push_back(static_cast<std::uint8_t>(out.data()[i] & 0xFF));
    bytes.push_back(static_cast<std::uint8_t>(out.data()[i] >> 8));
  }
  return internal::crc32_of(bytes);
}

}  // namespace nestedfp

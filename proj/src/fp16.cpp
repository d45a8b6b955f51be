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

#include "nestedfp/fp16.hpp"

#include <cmath>
#include <limits>

namespace nestedfp {

double decode(Fp16Bits x) {
  const int e = static_cast<int>(x.exponent());
  const int m = static_cast<int>(x.mantissa());
  double magnitude;
  if (e == 0x1F) {
    magnitude = m == 0 ? std::numeric_limits<double>::infinity()
                       : std::numeric_limits<double>::quiet_NaN();
  } else if (e == 0) {
    magnitude = std::ldexp(static_cast<double>(m), -24);
  } else {
    magnitude = std::ldexp(static_cast<double>(1024 + m), e - 25);
  }
  return x.sign() ? -magnitude : magnitude;
}

Fp16Bits fp16_from_double(double v) {
  if (std::isnan(v)) return Fp16Bits(0x7E00);
  const std::uint16_t sign = std::signbit(v) ? 0x8000 : 0x0000;
  const double a = std::fabs(v);
  // 65520 is the midpoint between 65504 (odd mantissa) and 2^16.
  if (a >= 65520.0) return Fp16Bits(static_cast<std::uint16_t>(sign | 0x7C00));
  if (a == 0.0) return Fp16Bits(sign);

  int e2 = 0;
  std::frexp(a, &e2);
  int unbiased = e2 - 1;
  if (unbiased < -14) {
    // Subnormal grid, quantum 2^-24. A result of 1024 is the smallest normal
    // and already has the right bit pattern.
    const auto n = static_cast<std::uint16_t>(std::nearbyint(std::ldexp(a, 24)));
    return Fp16Bits(static_cast<std::uint16_t>(sign | n));
  }
  auto n = static_cast<std::uint32_t>(std::nearbyint(std::ldexp(a, 10 - unbiased)));
  if (n == 2048) {
    n = 1024;
    ++unbiased;
  }
  const std::uint32_t field = static_cast<std::uint32_t>(unbiased + 15);
  if (field >= 31) return Fp16Bits(static_cast<std::uint16_t>(sign | 0x7C00));
  return Fp16Bits(static_cast<std::uint16_t>(sign | (field << 10) | (n - 1024)));
}

}  // namespace nestedfp

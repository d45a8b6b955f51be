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

#include "nestedfp/e4m3.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nestedfp/error.hpp"

namespace nestedfp::e4m3 {

double value(std::uint8_t code) {
  if (is_nan(code)) return std::numeric_limits<double>::quiet_NaN();
  const int e = (code >> 3) & 0xF;
  const int m = code & 0x7;
  const double magnitude = e == 0 ? std::ldexp(static_cast<double>(m), -9)
                                  : std::ldexp(static_cast<double>(8 + m), e - 10);
  return (code & 0x80) ? -magnitude : magnitude;
}

std::uint8_t encode_rne(double v) {
  const double a = std::fabs(v);
  if (!(a <= 464.0)) {
    throw Error(ErrorKind::kOutOfRange,
                "value " + std::to_string(v) + " exceeds the E4M3 range");
  }
  const std::uint8_t sign = std::signbit(v) ? 0x80 : 0x00;
  if (a >= kMaxFinite) return static_cast<std::uint8_t>(sign | 0x7E);
  if (a == 0.0) return sign;

  int e2 = 0;
  std::frexp(a, &e2);
  int unbiased = e2 - 1;
  if (unbiased < -6) {
    const auto n = static_cast<unsigned>(std::nearbyint(std::ldexp(a, 9)));
    return static_cast<std::uint8_t>(sign | n);
  }
  auto n = static_cast<unsigned>(std::nearbyint(std::ldexp(a, 3 - unbiased)));
  if (n == 16) {
    n = 8;
    ++unbiased;
  }
  const auto field = static_cast<unsigned>(unbiased + 7);
  return static_cast<std::uint8_t>(sign | (field << 3) | (n - 8));
}

}  // namespace nestedfp::e4m3

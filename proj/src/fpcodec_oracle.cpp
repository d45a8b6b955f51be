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

#include <cmath>
#include <limits>
#include <string>

#include "nestedfp/error.hpp"
#include "nestedfp/fpcodec.hpp"

namespace nestedfp {
namespace {

struct Grid {
  double magnitude[0x7F];  // codes 0x00..0x7E
};

// Built from the format definition, not from any encoder in this library.
Grid make_grid() {
  Grid g{};
  for (int code = 0; code < 0x7F; ++code) {
    const int exponent = code >> 3;
    const int mantissa = code & 7;
    g.magnitude[code] = exponent == 0
                            ? (mantissa / 8.0) * std::pow(2.0, -6)
                            : (1.0 + mantissa / 8.0) * std::pow(2.0, exponent - 7);
  }
  return g;
}

}  // namespace

UpperCode oracle_e4m3_rne(double v) {
  static const Grid grid = make_grid();
  const double target = std::fabs(v) * 256.0;
  // 464 is the midpoint between 448 and the NaN slot; it ties to 448.
  if (!(target <= 464.0)) {
    throw Error(ErrorKind::kOutOfRange,
                "oracle input " + std::to_string(v) + " is outside the scaled E4M3 range");
  }
  int best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (int code = 0; code < 0x7F; ++code) {
    const double d = std::fabs(grid.magnitude[code] - target);
    if (d < best_distance || (d == best_distance && (code & 1) == 0)) {
      best = code;
      best_distance = d;
    }
  }
  return UpperCode{static_cast<std::uint8_t>((std::signbit(v) ? 0x80 : 0x00) | best)};
}

}  // namespace nestedfp

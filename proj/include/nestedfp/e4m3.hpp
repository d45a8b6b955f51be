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

namespace nestedfp::e4m3 {

// OCP E4M3: 1 sign, 4 exponent (bias 7), 3 mantissa. No infinities, a single
// NaN code per sign (S.1111.111).
inline constexpr double kMaxFinite = 448.0;
inline constexpr std::uint8_t kNanMagnitude = 0x7F;

constexpr bool is_nan(std::uint8_t code) {
  return (code & 0x7Fu) == kNanMagnitude;
}

/// Real value of a non-NaN code. NaN codes return a quiet NaN.
double value(std::uint8_t code);

/// Nearest code under round-to-nearest-even. Magnitudes in (448, 464] round
/// to 448 (the would-be next step is the NaN slot, which has an odd
/// mantissa). Larger magnitudes, infinities and NaN throw kOutOfRange.
std::uint8_t encode_rne(double v);

}  // namespace nestedfp::e4m3

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

namespace nestedfp {

/// A 16-bit pattern interpreted as IEEE binary16 (1 sign, 5 exponent with
/// bias 15, 10 mantissa bits). No arithmetic is defined on it; values are
/// obtained through decode().
struct Fp16Bits {
  std::uint16_t bits = 0;

  constexpr Fp16Bits() = default;
  constexpr explicit Fp16Bits(std::uint16_t b) : bits(b) {}

  constexpr unsigned sign() const { return bits >> 15; }
  constexpr unsigned exponent() const { return (bits >> 10) & 0x1Fu; }
  constexpr unsigned mantissa() const { return bits & 0x3FFu; }

  constexpr bool is_finite() const { return exponent() != 0x1F; }
  constexpr bool is_nan() const { return exponent() == 0x1F && mantissa() != 0; }

  constexpr Fp16Bits negated() const {
    return Fp16Bits(static_cast<std::uint16_t>(bits ^ 0x8000u));
  }

  friend constexpr bool operator==(Fp16Bits, Fp16Bits) = default;
};

/// Exact value of the pattern. Total over all 65,536 patterns: E=31 yields
/// +-infinity or a quiet NaN.
double decode(Fp16Bits x);

/// Round-to-nearest-even conversion from double. Overflow produces infinity,
/// NaN maps to the canonical quiet NaN 0x7E00.
Fp16Bits fp16_from_double(double v);

}  // namespace nestedfp

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
#include <functional>

#include "nestedfp/fp16.hpp"

namespace nestedfp {

/// Upper byte of a nested pair: sign | 4-bit exponent | 3-bit mantissa, i.e.
/// a valid E4M3 code for value * 2^8.
struct UpperCode {
  std::uint8_t byte = 0;
  friend constexpr bool operator==(UpperCode, UpperCode) = default;
};

/// Lower byte of a nested pair: the original FP16 mantissa bits M3..M10,
/// with M3 in the most significant position.
struct LowerByte {
  std::uint8_t byte = 0;
  friend constexpr bool operator==(LowerByte, LowerByte) = default;
};

struct NestedPair {
  UpperCode upper;
  LowerByte lower;
  friend constexpr bool operator==(NestedPair, NestedPair) = default;
};

/// Multiplier that dequantizes an upper code back to the weight domain.
inline constexpr double kUpperDequantScale = 1.0 / 256.0;

/// True iff the FP16 exponent MSB is clear and the rounded 7-bit magnitude
/// code is a finite E4M3 value (<= 0x7E). Covers |x| <= 1.8125 with the
/// tie at 1.8125 rounding down to 1.75.
bool is_applicable(Fp16Bits x);

/// Split x into (upper, lower). The upper byte is S|E2..E5|M1..M3 rounded to
/// nearest-even on the 7-bit tail M4..M10 (midpoint 64). Throws
/// kNotApplicable when !is_applicable(x).
NestedPair decompose(Fp16Bits x);

/// Branch-free recombination: subtract the lower MSB from the upper byte,
/// keep E2..E5|M1..M2, restore E1 = 0 and splice the lower byte underneath.
/// Total over byte pairs; only pairs from decompose() have a defined result.
Fp16Bits reconstruct(NestedPair p);

/// Case-analysis reference for reconstruct(). Used for differential testing.
Fp16Bits reconstruct_branchy(NestedPair p);

/// E4M3 value of the upper code divided by 256. Throws kNanCode.
double decode_upper(UpperCode u);

/// Value-search oracle: scans every finite E4M3 code and returns the one
/// nearest to v * 256, ties to the even mantissa. Shares no code with
/// decompose(). Throws kOutOfRange when v * 256 rounds past 448.
UpperCode oracle_e4m3_rne(double v);

struct VerificationReport {
  std::uint64_t visited = 0;
  std::uint64_t applicable = 0;
  std::uint64_t failures_roundtrip = 0;  // reconstruct(decompose(x)) != x
  std::uint64_t failures_oracle = 0;     // upper != oracle_e4m3_rne(decode(x))
  std::uint64_t failures_branchy = 0;    // reconstruct != reconstruct_branchy
  std::uint64_t sign_borrows = 0;        // upper - m3 borrowed into bit 7
  std::uint16_t first_failure = 0;       // valid when failures() > 0

  std::uint64_t failures() const {
    return failures_roundtrip + failures_oracle + failures_branchy +
           sign_borrows;
  }
};

struct VerifyOptions {
  // Inclusive pattern range; the default covers all 65,536 patterns.
  std::uint16_t first = 0x0000;
  std::uint16_t last = 0xFFFF;
  // Alternative decomposer, for mutation testing of the harness itself.
  std::function<NestedPair(Fp16Bits)> decomposer;
};

VerificationReport verify_exhaustive(const VerifyOptions& options = {});

/// decompose() with a broken tie rule (ties always round up). Exists so the
/// verification harness can demonstrate that it catches a wrong codec.
NestedPair decompose_ties_away(Fp16Bits x);

}  // namespace nestedfp

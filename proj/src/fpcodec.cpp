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

#include "nestedfp/fpcodec.hpp"

#include <cstdio>
#include <string>

#include "nestedfp/e4m3.hpp"
#include "nestedfp/error.hpp"

namespace nestedfp {
namespace {

constexpr std::uint8_t kTieRemainder = 64;

// Head byte before rounding: S | E2..E5 | M1..M3. Assumes E1 == 0.
constexpr std::uint8_t head_byte(std::uint16_t bits) {
  return static_cast<std::uint8_t>(((bits >> 8) & 0x80u) | ((bits >> 7) & 0x7Fu));
}

constexpr bool rounds_up(std::uint16_t bits) {
  const unsigned remainder = bits & 0x7Fu;
  const unsigned m3 = (bits >> 7) & 1u;
  return remainder > kTieRemainder || (remainder == kTieRemainder && m3 == 1);
}

[[noreturn]] void throw_not_applicable(Fp16Bits x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "0x%04X is not representable as nested E4M3",
                static_cast<unsigned>(x.bits));
  throw Error(ErrorKind::kNotApplicable, buf);
}

}  // namespace

bool is_applicable(Fp16Bits x) {
  if (x.exponent() >= 16) return false;
  const unsigned magnitude = (x.bits >> 7) & 0x7Fu;
  const unsigned rounded = magnitude + (rounds_up(x.bits) ? 1u : 0u);
  return rounded <= 0x7Eu;
}

NestedPair decompose(Fp16Bits x) {
  if (!is_applicable(x)) throw_not_applicable(x);
  std::uint8_t upper = head_byte(x.bits);
  if (rounds_up(x.bits)) ++upper;
  return {UpperCode{upper}, LowerByte{static_cast<std::uint8_t>(x.bits & 0xFFu)}};
}

NestedPair decompose_ties_away(Fp16Bits x) {
  if (!is_applicable(x)) throw_not_applicable(x);
  std::uint8_t upper = head_byte(x.bits);
  if ((x.bits & 0x7Fu) >= kTieRemainder) ++upper;
  return {UpperCode{upper}, LowerByte{static_cast<std::uint8_t>(x.bits & 0xFFu)}};
}

Fp16Bits reconstruct(NestedPair p) {
  const std::uint8_t upper = p.upper.byte;
  const std::uint8_t lower = p.lower.byte;
  const auto m3 = static_cast<std::uint8_t>(lower >> 7);
  const auto corrected = static_cast<std::uint8_t>(upper - m3);
  const unsigned bits = ((upper & 0x80u) << 8) | ((corrected & 0x7Eu) << 7) | lower;
  return Fp16Bits(static_cast<std::uint16_t>(bits));
}

Fp16Bits reconstruct_branchy(NestedPair p) {
  const unsigned upper_lsb = p.upper.byte & 1u;
  const unsigned lower_msb = p.lower.byte >> 7;
  unsigned w1 = p.upper.byte;
  if (upper_lsb == lower_msb) {
    // Checksum matches: no rounding happened.
  } else if (upper_lsb == 1 && lower_msb == 0) {
    // Rounded up from M3 = 0; E2..E5|M1..M2 are intact.
  } else {
    // Rounded up from M3 = 1; the carry may have reached M1..M2 or E2..E5.
    w1 -= 1;
  }
  const unsigned sign = (p.upper.byte >> 7) & 1u;
  const unsigned exponent_low4 = (w1 >> 3) & 0xFu;  // E2..E5
  const unsigned mantissa_hi2 = (w1 >> 1) & 0x3u;   // M1..M2
  const unsigned bits = (sign << 15) | (exponent_low4 << 10) | (mantissa_hi2 << 8) |
                        p.lower.byte;
  return Fp16Bits(static_cast<std::uint16_t>(bits));
}

double decode_upper(UpperCode u) {
  if (e4m3::is_nan(u.byte)) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "upper code 0x%02X is the E4M3 NaN",
                  static_cast<unsigned>(u.byte));
    throw Error(ErrorKind::kNanCode, buf);
  }
  return e4m3::value(u.byte) * kUpperDequantScale;
}

VerificationReport verify_exhaustive(const VerifyOptions& options) {
  const auto& split = options.decomposer ? options.decomposer
                                         : std::function<NestedPair(Fp16Bits)>(decompose);
  VerificationReport report;
  bool failed = false;
  for (std::uint32_t raw = options.first; raw <= options.last; ++raw) {
    const Fp16Bits x(static_cast<std::uint16_t>(raw));
    ++report.visited;
    if (!is_applicable(x)) continue;
    ++report.applicable;

    const NestedPair p = split(x);
    const Fp16Bits fast = reconstruct(p);
    bool bad = false;
    if (fast != x) {
      ++report.failures_roundtrip;
      bad = true;
    }
    if (p.upper != oracle_e4m3_rne(decode(x))) {
      ++report.failures_oracle;
      bad = true;
    }
    if (fast != reconstruct_branchy(p)) {
      ++report.failures_branchy;
      bad = true;
    }
    if ((p.upper.byte & 0x7Fu) < (p.lower.byte >> 7)) {
      ++report.sign_borrows;
      bad = true;
    }
    if (bad && !failed) {
      report.first_failure = x.bits;
      failed = true;
    }
  }
  return report;
}

}  // namespace nestedfp

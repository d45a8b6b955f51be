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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nestedfp/e4m3.hpp"
#include "nestedfp/error.hpp"
#include "nestedfp/fpcodec.hpp"
#include "oracles.hpp"

namespace nestedfp {
namespace {

TEST(Fp16, DecodeIsTotalAndMatchesFormula) {
  for (std::uint32_t raw = 0; raw <= 0xFFFF; ++raw) {
    const auto b = static_cast<std::uint16_t>(raw);
    const double got = decode(Fp16Bits(b));
    const double want = testing::ref_decode16(b);
    if (std::isnan(want)) {
      ASSERT_TRUE(std::isnan(got)) << std::hex << raw;
    } else {
      ASSERT_EQ(got, want) << std::hex << raw;
      ASSERT_EQ(std::signbit(got), std::signbit(want));
    }
  }
}

TEST(Fp16, FromDoubleRoundTripsEveryFinitePattern) {
  for (std::uint32_t raw = 0; raw <= 0xFFFF; ++raw) {
    const Fp16Bits x(static_cast<std::uint16_t>(raw));
    if (x.is_nan()) continue;
    ASSERT_EQ(fp16_from_double(decode(x)), x) << std::hex << raw;
  }
  EXPECT_EQ(fp16_from_double(NAN).bits, 0x7E00);
}

TEST(Fp16, FromDoubleTiesToEvenAtEveryMidpoint) {
  // Midpoints between neighbours go to the even pattern; a nudge either way
  // picks the nearer one.
  for (std::uint32_t b = 0; b < 0x7BFF; ++b) {
    const double lo = decode(Fp16Bits(static_cast<std::uint16_t>(b)));
    const double hi = decode(Fp16Bits(static_cast<std::uint16_t>(b + 1)));
    const double mid = (lo + hi) / 2;
    const std::uint16_t even = (b & 1) ? static_cast<std::uint16_t>(b + 1) : static_cast<std::uint16_t>(b);
    ASSERT_EQ(fp16_from_double(mid).bits, even) << std::hex << b;
    ASSERT_EQ(fp16_from_double(-mid).bits, even | 0x8000) << std::hex << b;
    ASSERT_EQ(fp16_from_double(std::nextafter(mid, 0.0)).bits, b);
    ASSERT_EQ(fp16_from_double(std::nextafter(mid, 1e9)).bits, b + 1);
  }
}

TEST(Fp16, Overflow) {
  EXPECT_EQ(fp16_from_double(65504.0).bits, 0x7BFF);
  EXPECT_EQ(fp16_from_double(65519.99).bits, 0x7BFF);
  EXPECT_EQ(fp16_from_double(65520.0).bits, 0x7C00);
  EXPECT_EQ(fp16_from_double(-1e300).bits, 0xFC00);
  EXPECT_EQ(fp16_from_double(std::ldexp(1.0, -26)).bits, 0x0000);  // below half the min subnormal
  EXPECT_EQ(fp16_from_double(std::ldexp(1.5, -25)).bits, 0x0001);
}

TEST(Fp16, FromDoubleMatchesSearchOracleOnRandomValues) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> exponent(-30.0, 17.0);
  for (int i = 0; i < 200000; ++i) {
    const double v = std::exp2(exponent(rng)) * ((rng() & 1) ? -1.0 : 1.0);
    ASSERT_EQ(fp16_from_double(v).bits, testing::ref_round_fp16(v)) << v;
  }
}

TEST(E4m3, ValueDecodesDefinition) {
  const auto mags = testing::e4m3_magnitudes();
  for (int code = 0; code < 0x7F; ++code) {
    EXPECT_EQ(e4m3::value(static_cast<std::uint8_t>(code)), mags[code]);
    EXPECT_EQ(e4m3::value(static_cast<std::uint8_t>(code | 0x80)), -mags[code]);
  }
  EXPECT_EQ(e4m3::value(0x7E), 448.0);
  EXPECT_TRUE(std::isnan(e4m3::value(0x7F)));
  EXPECT_TRUE(std::isnan(e4m3::value(0xFF)));
}

TEST(E4m3, EncodeMatchesValueSearchOracle) {
  // encode_rne(v) must agree with oracle_e4m3_rne(v / 256) everywhere in
  // range, including midpoints and the 448..464 saturation band.
  std::vector<double> probes;
  const auto mags = testing::e4m3_magnitudes();
  for (std::size_t i = 0; i + 1 < mags.size(); ++i) {
    const double mid = (mags[i] + mags[i + 1]) / 2;
    probes.insert(probes.end(), {mags[i], mid, std::nextafter(mid, 0.0), std::nextafter(mid, 1e9)});
  }
  probes.insert(probes.end(), {448.0, 460.0, 464.0, std::nextafter(464.0, 0.0)});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 464.0);
  for (int i = 0; i < 20000; ++i) probes.push_back(u(rng));
  for (double v : probes) {
    for (double s : {1.0, -1.0}) {
      ASSERT_EQ(e4m3::encode_rne(s * v), oracle_e4m3_rne(s * v / 256.0).byte) << s * v;
    }
  }
}

TEST(E4m3, EncodeRejectsOutOfRange) {
  try {
    e4m3::encode_rne(464.0001);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfRange);
  }
  EXPECT_THROW(e4m3::encode_rne(INFINITY), Error);
  EXPECT_THROW(e4m3::encode_rne(NAN), Error);
}

}  // namespace
}  // namespace nestedfp

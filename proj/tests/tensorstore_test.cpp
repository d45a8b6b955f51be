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

#include "nestedfp/tensorstore.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nestedfp/error.hpp"
#include "nestedfp/fixtures.hpp"
#include "nestedfp/fpcodec.hpp"
#include "test_util.hpp"

namespace nestedfp {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

TensorF16 tensor(std::string name, GemmClass c, Eigen::Index rows, Eigen::Index cols,
                 std::initializer_list<std::uint16_t> bits) {
  TensorF16 t{std::move(name), c, Fp16Matrix(rows, cols)};
  auto it = bits.begin();
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) t.data(i, j) = *it++;
  return t;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIo;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(ConvertLayer, AllApplicableBecomesNested) {
  // {1.0, -0.5, 0.0, 1.75}
  const auto t = tensor("w", GemmClass::kGemm1, 2, 2, {0x3C00, 0xB800, 0x0000, 0x3F00});
  const Layer l = convert_layer(t);
  ASSERT_TRUE(l.is_nested());
  EXPECT_EQ(l.entry.storage, Storage::kNested);
  EXPECT_EQ(l.entry.stats.out_of_range_count, 0u);
  const auto& n = std::get<NestedTensor>(l.payload);
  EXPECT_EQ(n.upper(0, 0), 0x78);
  EXPECT_EQ(n.upper(0, 1), 0xF0);
  EXPECT_EQ(n.upper(1, 0), 0x00);
  EXPECT_EQ(n.upper(1, 1), 0x7E);
  EXPECT_EQ(reconstruct_tensor(n).data, t.data);
  EXPECT_EQ(l.entry.stats.min_value, -0.5);
  EXPECT_EQ(l.entry.stats.max_value, 1.75);
}

TEST(ConvertLayer, OutOfRangeKeepsFp16) {
  const auto t = tensor("w", GemmClass::kGemm2, 2, 2, {0x3C00, 0x4000, 0x0000, 0x3F00});
  const Layer l = convert_layer(t);
  ASSERT_FALSE(l.is_nested());
  EXPECT_EQ(l.entry.storage, Storage::kFp16Exception);
  EXPECT_EQ(l.entry.stats.out_of_range_count, 1u);
  EXPECT_EQ(std::get<TensorF16>(l.payload), t);
}

TEST(ConvertLayer, MinimalZero) {
  const Layer l = convert_layer(tensor("z", GemmClass::kGemm3, 1, 1, {0x0000}));
  ASSERT_TRUE(l.is_nested());
  const auto& n = std::get<NestedTensor>(l.payload);
  EXPECT_EQ(n.upper(0, 0), 0x00);
  EXPECT_EQ(n.lower(0, 0), 0x00);
}

TEST(ConvertLayer, NanAndInfAreExceptions) {
  const Layer l = convert_layer(tensor("n", GemmClass::kGemm1, 1, 3, {0x7E00, 0x3C00, 0xFC00}));
  EXPECT_FALSE(l.is_nested());
  EXPECT_EQ(l.entry.stats.out_of_range_count, 2u);
  EXPECT_EQ(l.entry.stats.max_value, 1.0);
}

TEST(ConvertLayer, SoundnessAndMemoryNeutrality) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    TensorF16 t{"l", GemmClass::kGemm4, uniform_fp16(3 + i % 4, 7 + i, -1.8, 1.8, rng)};
    const Layer l = convert_layer(t);
    if (l.is_nested()) {
      const auto& n = std::get<NestedTensor>(l.payload);
      EXPECT_EQ(reconstruct_tensor(n).data, t.data);
      EXPECT_EQ(n.upper.size() + n.lower.size(), 2 * t.data.size());
    } else {
      EXPECT_EQ(std::get<TensorF16>(l.payload).data, t.data);
    }
    EXPECT_EQ(to_fp16(l).data, t.data);
    EXPECT_EQ(l.entry.source_digest, fp16_digest(t.data));
  }
}

TEST(Census, PlantedRowsMatchExactly) {
  for (const auto& row : census_rows()) {
    const auto model = convert_model(synthesize_model(row));
    const auto r = census(model);
    std::uint64_t a = 0, t = 0;
    for (int c = 0; c < 4; ++c) {
      EXPECT_EQ(r.per_class[c].applicable, row.classes[c].applicable) << row.preset << " class " << c;
      EXPECT_EQ(r.per_class[c].total, row.classes[c].total) << row.preset << " class " << c;
      a += row.classes[c].applicable;
      t += row.classes[c].total;
    }
    EXPECT_EQ(r.applicable, a);
    EXPECT_EQ(r.total, t);
    EXPECT_EQ(r.exception_layers(), t - a);
  }
}

TEST(Census, PublishedTotals) {
  const auto llama = census(convert_model(synthesize_model(*find_census_row("llama3.1-8b"))));
  EXPECT_EQ(format_ratio(llama.applicable, llama.total), "224/224 (100.0%)");
  const auto phi = census(convert_model(synthesize_model(*find_census_row("phi4-14b"))));
  EXPECT_EQ(format_ratio(phi.applicable, phi.total), "146/160 (91.2%)");
  EXPECT_EQ(phi.exception_layers(), 14u);
}

TEST(Census, EmptyModel) {
  const auto r = census(ModelContainer{});
  EXPECT_EQ(r.total, 0u);
  EXPECT_FALSE(r.fraction().has_value());
  EXPECT_FALSE(r.min_value.has_value());
  EXPECT_EQ(format_ratio(0, 0), "0/0 (n/a)");
}

TEST(Census, OtherExcludedFromTotals) {
  std::vector<TensorF16> ts = {tensor("a", GemmClass::kGemm1, 1, 1, {0x3C00}),
                               tensor("b", GemmClass::kOther, 1, 1, {0x4400})};
  const auto r = census(convert_model(ts));
  EXPECT_EQ(r.total, 1u);
  EXPECT_EQ(r.applicable, 1u);
  EXPECT_EQ(r.at(GemmClass::kOther).total, 1u);
  EXPECT_EQ(r.at(GemmClass::kOther).applicable, 0u);
  EXPECT_EQ(*r.max_value, 4.0);
}

TEST(Census, SyntheticSeedsAndShapesDoNotChangeCounts) {
  const auto* row = find_census_row("phi4-14b");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticOptions o;
    o.rows = 2;
    o.cols = 5 + static_cast<std::int64_t>(seed);
    o.seed = seed;
    const auto r = census(convert_model(synthesize_model(*row, o)));
    EXPECT_EQ(r.applicable, 146u);
    EXPECT_EQ(r.total, 160u);
  }
}

TEST(VerifyModel, UntouchedAndTampered) {
  auto model = convert_model(synthesize_model(*find_census_row("phi4-14b"), {2, 8, 3}));
  auto check = verify_model(model);
  EXPECT_EQ(check.layers_checked, 160u);
  EXPECT_TRUE(check.mismatched_layers.empty());
  for (auto& l : model.layers) {
    if (auto* n = std::get_if<NestedTensor>(&l.payload)) {
      n->lower(0, 0) ^= 1;
      break;
    }
  }
  check = verify_model(model);
  ASSERT_EQ(check.mismatched_layers.size(), 1u);
}

ModelContainer random_container(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_layers(0, 6), dim(1, 9), cls(0, 4);
  std::vector<TensorF16> ts;
  const int n = n_layers(rng);
  for (int i = 0; i < n; ++i) {
    const double hi = (rng() % 3 == 0) ? 4.0 : 1.7;
    TensorF16 t{"layers." + std::to_string(i) + ".w", static_cast<GemmClass>(cls(rng)),
                uniform_fp16(dim(rng), dim(rng), -hi, hi, rng)};
    if (rng() % 5 == 0) t.data(0, 0) = 0x7E00;  // NaN
    ts.push_back(std::move(t));
  }
  return convert_model(ts);
}

TEST(Container, RandomizedRoundTrips) {
  std::mt19937_64 rng(2026);
  TempDir dir;
  for (int i = 0; i < 20; ++i) {
    const auto model = random_container(rng);
    const auto path = dir.path() / ("m" + std::to_string(i) + ".nfpt");
    save(model, path);
    const auto loaded = load(path);
    EXPECT_EQ(loaded, model) << i;
    EXPECT_EQ(serialize(loaded), testing::read_bytes(path)) << i;
  }
}

TEST(Container, HeaderLayout) {
  const auto bytes = serialize(convert_model({tensor("a", GemmClass::kGemm1, 1, 3, {1, 2, 3})}));
  ASSERT_GE(bytes.size(), 10u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "NFPT");
  EXPECT_EQ(bytes[4] | (bytes[5] << 8), 1);
  const std::size_t manifest_len = bytes[6] | (bytes[7] << 8) | (bytes[8] << 16) | (std::size_t(bytes[9]) << 24);
  const std::size_t blob_start = (10 + manifest_len + 7) / 8 * 8;
  ASSERT_EQ(bytes.size(), blob_start + 6);  // upper (3) + lower (3)
  EXPECT_EQ(bytes[blob_start], 0x00);       // upper of a tiny subnormal
  EXPECT_EQ(bytes[blob_start + 3], 0x01);   // lower holds the mantissa tail
}

class CorruptFile : public ::testing::Test {
 protected:
  void SetUp() override {
    std::vector<TensorF16> ts = {tensor("first", GemmClass::kGemm1, 2, 2, {0x3C00, 0, 0, 0}),
                                 tensor("last", GemmClass::kGemm2, 2, 3, {0x4400, 1, 2, 3, 4, 5})};
    bytes_ = serialize(convert_model(ts));
  }
  ErrorKind load_kind(const std::vector<std::uint8_t>& b) {
    return kind_of([&] { deserialize(b); });
  }
  std::vector<std::uint8_t> bytes_;
};

TEST_F(CorruptFile, WrongMagic) {
  auto b = bytes_;
  b[0] = 'X';
  EXPECT_EQ(load_kind(b), ErrorKind::kMalformedHeader);
  EXPECT_EQ(load_kind({}), ErrorKind::kMalformedHeader);
  EXPECT_EQ(load_kind({'N', 'F', 'P', 'T', 1}), ErrorKind::kMalformedHeader);
}

TEST_F(CorruptFile, WrongVersion) {
  auto b = bytes_;
  b[4] = 2;
  EXPECT_EQ(load_kind(b), ErrorKind::kVersionMismatch);
}

TEST_F(CorruptFile, ManifestOverrunAndGarbage) {
  auto b = bytes_;
  b[9] = 0x7F;
  EXPECT_EQ(load_kind(b), ErrorKind::kMalformedHeader);
  b = bytes_;
  b[10] = '{';
  EXPECT_EQ(load_kind(b), ErrorKind::kMalformedHeader);
}

TEST_F(CorruptFile, TruncatedFinalBlobNamesLayer) {
  auto b = bytes_;
  b.resize(b.size() - 1);
  EXPECT_EQ(load_kind(b), ErrorKind::kTruncatedBlob);
  EXPECT_NE(message_of([&] { deserialize(b); }).find("last"), std::string::npos);
}

TEST_F(CorruptFile, FlippedPayloadByteNamesLayer) {
  auto b = bytes_;
  b.back() ^= 0x40;
  EXPECT_EQ(load_kind(b), ErrorKind::kChecksumMismatch);
  EXPECT_NE(message_of([&] { deserialize(b); }).find("last"), std::string::npos);
}

TEST_F(CorruptFile, OnDisk) {
  TempDir dir;
  const auto p = dir.path() / "bad.nfpt";
  auto b = bytes_;
  b.resize(b.size() - 2);
  testing::write_bytes(p, b);
  EXPECT_EQ(kind_of([&] { load(p); }), ErrorKind::kTruncatedBlob);
  EXPECT_EQ(kind_of([&] { load(dir.path() / "missing.nfpt"); }), ErrorKind::kIo);
}

TEST(ImportRaw, Examples) {
  TempDir dir;
  const auto p8 = dir.path() / "eight.bin";
  testing::write_bytes(p8, {0x00, 0x3C, 0x00, 0x3C, 0x00, 0x3C, 0x00, 0x3C});
  const auto t = import_raw(p8, 2, 2, GemmClass::kGemm3, "ones");
  EXPECT_EQ(t.data.size(), 4);
  EXPECT_EQ(t.gemm_class, GemmClass::kGemm3);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(decode(Fp16Bits(t.data(i))), 1.0);

  const auto p7 = dir.path() / "seven.bin";
  testing::write_bytes(p7, {1, 2, 3, 4, 5, 6, 7});
  EXPECT_EQ(kind_of([&] { import_raw(p7, 2, 2, GemmClass::kGemm1); }), ErrorKind::kSizeMismatch);
}

TEST(ImportRaw, LittleEndianRowMajor) {
  TempDir dir;
  const auto p = dir.path() / "x.bin";
  testing::write_bytes(p, {0x01, 0x02, 0x03, 0x04, 0x05, 0x06});
  const auto t = import_raw(p, 1, 3, GemmClass::kGemm1);
  EXPECT_EQ(t.data(0, 0), 0x0201);
  EXPECT_EQ(t.data(0, 2), 0x0605);
}

TEST(SourceManifest, RoundTrip) {
  TempDir dir;
  const auto ts = synthesize_model(*find_census_row("llama3.1-8b"), {2, 4, 9});
  write_source_manifest(dir.path(), ts);
  EXPECT_EQ(load_source_manifest(dir.path() / "source.json"), ts);
}

}  // namespace
}  // namespace nestedfp

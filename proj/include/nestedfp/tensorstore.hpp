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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nestedfp/tensor.hpp"

namespace nestedfp {

inline constexpr std::uint16_t kContainerVersion = 1;

struct TensorF16 {
  std::string name;
  GemmClass gemm_class = GemmClass::kOther;
  Fp16Matrix data;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }

  friend bool operator==(const TensorF16& a, const TensorF16& b) {
    return a.name == b.name && a.gemm_class == b.gemm_class && a.data.rows() == b.data.rows() &&
           a.data.cols() == b.data.cols() && a.data == b.data;
  }
};

/// Dual-plane storage. Both planes share the source shape; upper holds E4M3
/// codes of value * 2^8, lower holds mantissa bits M3..M10.
struct NestedTensor {
  std::string name;
  GemmClass gemm_class = GemmClass::kOther;
  ByteMatrix upper;
  ByteMatrix lower;

  Eigen::Index rows() const { return upper.rows(); }
  Eigen::Index cols() const { return upper.cols(); }

  friend bool operator==(const NestedTensor& a, const NestedTensor& b) {
    return a.name == b.name && a.gemm_class == b.gemm_class && a.upper.rows() == b.upper.rows() &&
           a.upper.cols() == b.upper.cols() && a.upper == b.upper && a.lower == b.lower;
  }
};

enum class Storage { kNested, kFp16Exception };

std::string_view to_string(Storage s);

struct LayerStats {
  double min_value = 0.0;  // NaN elements are ignored
  double max_value = 0.0;
  std::uint64_t out_of_range_count = 0;

  friend bool operator==(const LayerStats& a, const LayerStats& b);
};

struct LayerEntry {
  std::string name;
  GemmClass gemm_class = GemmClass::kOther;
  Storage storage = Storage::kFp16Exception;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  LayerStats stats;
  // CRC-32 of the source FP16 payload (little-endian, row-major).
  std::uint32_t source_digest = 0;

  friend bool operator==(const LayerEntry&, const LayerEntry&) = default;
};

struct Layer {
  LayerEntry entry;
  std::variant<NestedTensor, TensorF16> payload;

  bool is_nested() const { return std::holds_alternative<NestedTensor>(payload); }
  friend bool operator==(const Layer&, const Layer&) = default;
};

struct ModelContainer {
  std::uint16_t version = kContainerVersion;
  std::vector<Layer> layers;

  friend bool operator==(const ModelContainer&, const ModelContainer&) = default;
};

LayerStats compute_stats(const TensorF16& t);

/// Offline conversion of one layer. All-or-nothing: a single non-applicable
/// element keeps the whole layer in FP16.
Layer convert_layer(const TensorF16& t);

ModelContainer convert_model(const std::vector<TensorF16>& tensors);

TensorF16 reconstruct_tensor(const NestedTensor& t);

/// FP16 view of any layer (reconstructed for nested layers).
TensorF16 to_fp16(const Layer& layer);

std::uint32_t fp16_digest(const Fp16Matrix& data);

// ---- census -------------------------------------------------------------

struct ClassCount {
  std::uint64_t applicable = 0;
  std::uint64_t total = 0;
};

struct ApplicabilityReport {
  std::array<ClassCount, 5> per_class{};  // indexed by GemmClass
  // GEMM1..GEMM4 only; OTHER layers are reported separately.
  std::uint64_t applicable = 0;
  std::uint64_t total = 0;
  std::optional<double> min_value;
  std::optional<double> max_value;

  const ClassCount& at(GemmClass c) const { return per_class[static_cast<std::size_t>(c)]; }
  std::optional<double> fraction() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(applicable) / static_cast<double>(total);
  }
  std::uint64_t exception_layers() const;
};

ApplicabilityReport census(const ModelContainer& model);

/// "X/Y (P%)" with one decimal, or "0/0 (n/a)".
std::string format_ratio(std::uint64_t applicable, std::uint64_t total);

struct ModelCheck {
  std::uint64_t layers_checked = 0;
  std::vector<std::string> mismatched_layers;
};

/// Reconstructs every nested layer and compares against its stored digest.
ModelCheck verify_model(const ModelContainer& model);

// ---- container I/O ------------------------------------------------------

std::vector<std::uint8_t> serialize(const ModelContainer& model);
ModelContainer deserialize(const std::vector<std::uint8_t>& bytes);

void save(const ModelContainer& model, const std::filesystem::path& path);
ModelContainer load(const std::filesystem::path& path);

/// Reads a headerless little-endian FP16 file of shape rows x cols.
TensorF16 import_raw(const std::filesystem::path& path, std::int64_t rows, std::int64_t cols,
                     GemmClass gemm_class, std::string name = {});

/// JSON list of raw layers: {"layers": [{"name", "gemm_class", "shape": [N, K],
/// "file"}]}. Relative file paths resolve against the manifest directory.
std::vector<TensorF16> load_source_manifest(const std::filesystem::path& path);
void write_source_manifest(const std::filesystem::path& dir, const std::vector<TensorF16>& tensors);

}  // namespace nestedfp

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
#include <span>
#include <string_view>
#include <vector>

#include "nestedfp/tensorstore.hpp"

namespace nestedfp {

/// Per-class layer counts for one reference model row: applicable of total
/// for GEMM1 (QKV), GEMM2 (output), GEMM3 (gate/up), GEMM4 (down).
struct CensusRow {
  std::string_view model;
  std::string_view preset;
  std::array<ClassCount, 4> classes;
};

std::span<const CensusRow> census_rows();
const CensusRow* find_census_row(std::string_view preset);

struct SyntheticOptions {
  std::int64_t rows = 4;
  std::int64_t cols = 16;
  std::uint64_t seed = 0;
};

/// Synthetic model whose layers reproduce a row exactly: total - applicable
/// layers per class carry one planted out-of-range weight, the rest stay in
/// [-1.75, 1.75].
std::vector<TensorF16> synthesize_model(const CensusRow& row, const SyntheticOptions& options = {});

}  // namespace nestedfp

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

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace nestedfp {

/// Row-major FP16 bit patterns. Rows are output channels for weights and
/// tokens for activations; columns are the reduction dimension K.
using Fp16Matrix = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ByteMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class GemmClass { kGemm1, kGemm2, kGemm3, kGemm4, kOther };

inline constexpr GemmClass kAllGemmClasses[] = {GemmClass::kGemm1, GemmClass::kGemm2,
                                                GemmClass::kGemm3, GemmClass::kGemm4,
                                                GemmClass::kOther};

std::string_view to_string(GemmClass c);
std::optional<GemmClass> parse_gemm_class(std::string_view s);

}  // namespace nestedfp

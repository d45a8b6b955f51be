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

#include "nestedfp/tensor.hpp"

namespace nestedfp {

std::string_view to_string(GemmClass c) {
  switch (c) {
    case GemmClass::kGemm1: return "GEMM1";
    case GemmClass::kGemm2: return "GEMM2";
    case GemmClass::kGemm3: return "GEMM3";
    case GemmClass::kGemm4: return "GEMM4";
    case GemmClass::kOther: return "OTHER";
  }
  return "OTHER";
}

std::optional<GemmClass> parse_gemm_class(std::string_view s) {
  for (GemmClass c : kAllGemmClasses) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

}  // namespace nestedfp

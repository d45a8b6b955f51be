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

#include "nestedfp/fixtures.hpp"

#include <string>

#include "nestedfp/fp16.hpp"

namespace nestedfp {
namespace {

constexpr CensusRow kRows[] = {
    {"CodeLlama 7B", "codellama-7b", {{{96, 96}, {32, 32}, {64, 64}, {31, 32}}}},
    {"CodeLlama 13B", "codellama-13b", {{{120, 120}, {40, 40}, {80, 80}, {37, 40}}}},
    {"Gemma 3 4B", "gemma3-4b", {{{207, 264}, {64, 88}, {123, 176}, {34, 34}}}},
    {"Gemma 3 12B", "gemma3-12b", {{{249, 306}, {78, 102}, {151, 204}, {48, 48}}}},
    {"Gemma 3 27B", "gemma3-27b", {{{291, 348}, {92, 116}, {179, 232}, {62, 62}}}},
    {"Llama 3.1 8B", "llama3.1-8b", {{{96, 96}, {32, 32}, {64, 64}, {32, 32}}}},
    {"Llama 3.1 70B", "llama3.1-70b", {{{224, 240}, {80, 80}, {141, 160}, {78, 80}}}},
    {"Mistral Nemo 12B", "mistral-nemo-12b", {{{120, 120}, {40, 40}, {80, 80}, {40, 40}}}},
    {"Mistral Small 24B", "mistral-small-24b", {{{120, 120}, {40, 40}, {80, 80}, {40, 40}}}},
    {"Phi-3.5 Mini", "phi3.5-mini", {{{26, 32}, {31, 32}, {31, 32}, {24, 32}}}},
    {"Phi-4 14B", "phi4-14b", {{{40, 40}, {38, 40}, {40, 40}, {28, 40}}}},
    {"Qwen 3 8B", "qwen3-8b", {{{108, 108}, {35, 36}, {72, 72}, {34, 36}}}},
    {"Qwen 3 14B", "qwen3-14b", {{{120, 120}, {40, 40}, {80, 80}, {38, 40}}}},
    {"Qwen 3 32B", "qwen3-32b", {{{192, 192}, {63, 64}, {127, 128}, {56, 64}}}},
};

double uniform(std::uint64_t& state, double lo, double hi) {
  // splitmix64
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return lo + (hi - lo) * static_cast<double>(z >> 11) * 0x1.0p-53;
}

}  // namespace

std::span<const CensusRow> census_rows() { return kRows; }

const CensusRow* find_census_row(std::string_view preset) {
  for (const auto& row : kRows) {
    if (row.preset == preset) return &row;
  }
  return nullptr;
}

std::vector<TensorF16> synthesize_model(const CensusRow& row, const SyntheticOptions& options) {
  std::vector<TensorF16> out;
  std::uint64_t state = options.seed;
  for (std::size_t c = 0; c < row.classes.size(); ++c) {
    const auto cls = static_cast<GemmClass>(c);
    const std::uint64_t total = row.classes[c].total;
    const std::uint64_t planted = total - row.classes[c].applicable;
    for (std::uint64_t i = 0; i < total; ++i) {
      TensorF16 t{std::string(to_string(cls)) + "." + std::to_string(i), cls,
                  Fp16Matrix(options.rows, options.cols)};
      for (Eigen::Index j = 0; j < t.data.size(); ++j) {
        t.data.data()[j] = fp16_from_double(uniform(state, -1.75, 1.75)).bits;
      }
      // Spread the planted layers evenly over the class.
      const bool exception = planted != 0 && (i * planted) / total != ((i + 1) * planted) / total;
      if (exception) {
        const auto pos = static_cast<Eigen::Index>(uniform(state, 0.0, static_cast<double>(t.data.size())));
        const double sign = uniform(state, -1.0, 1.0) < 0 ? -1.0 : 1.0;
        t.data.data()[std::min(pos, t.data.size() - 1)] = fp16_from_double(sign * uniform(state, 2.0, 3.0)).bits;
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace nestedfp

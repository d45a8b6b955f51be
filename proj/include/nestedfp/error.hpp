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

#include <stdexcept>
#include <string>
#include <string_view>

namespace nestedfp {

enum class ErrorKind {
  kNotApplicable,
  kNanCode,
  kOutOfRange,
  kShapeMismatch,
  kNonFiniteInput,
  kExceptionLayer,
  kMalformedHeader,
  kVersionMismatch,
  kTruncatedBlob,
  kChecksumMismatch,
  kSizeMismatch,
  kIo,
  kParse,
  kEmptyTrace,
  kInvalidParams,
  kConfigInvalid,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the library surfaces as an Error. The kind is stable and
// machine-readable; the message carries the human context (row, layer, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nestedfp

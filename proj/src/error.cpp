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

#include "nestedfp/error.hpp"

namespace nestedfp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotApplicable: return "not-applicable";
    case ErrorKind::kNanCode: return "nan-code";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kShapeMismatch: return "shape-mismatch";
    case ErrorKind::kNonFiniteInput: return "non-finite-input";
    case ErrorKind::kExceptionLayer: return "exception-layer";
    case ErrorKind::kMalformedHeader: return "malformed-header";
    case ErrorKind::kVersionMismatch: return "version-mismatch";
    case ErrorKind::kTruncatedBlob: return "truncated-blob";
    case ErrorKind::kChecksumMismatch: return "checksum-mismatch";
    case ErrorKind::kSizeMismatch: return "size-mismatch";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kEmptyTrace: return "empty-trace";
    case ErrorKind::kInvalidParams: return "invalid-params";
    case ErrorKind::kConfigInvalid: return "config-invalid";
  }
  return "unknown";
}

}  // namespace nestedfp

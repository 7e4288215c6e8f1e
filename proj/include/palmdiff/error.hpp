// Copyright 2026 The palmdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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

namespace palmdiff {

enum class ErrorCode {
  kInvalidGraph,
  kInvalidPath,
  kCapExceeded,
  kSynthesisFailed,
  kCountTooLarge,
  kMalformedPalm,
  kUnknownEdge,
  kShapeMismatch,
  kNonFiniteGradient,
  kNonFiniteLoss,
  kEmptyDataset,
  kEmptySamples,
  kUndefinedMetric,
  kInsufficientSamples,
  kEmptyConditional,
  kFingerprintMismatch,
  kInvalidArgument,
  kFormat,
  kIo,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; `code()` identifies the
// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidGraph: return "invalid-graph";
    case ErrorCode::kInvalidPath: return "invalid-path";
    case ErrorCode::kCapExceeded: return "cap-exceeded";
    case ErrorCode::kSynthesisFailed: return "synthesis-failed";
    case ErrorCode::kCountTooLarge: return "count-too-large";
    case ErrorCode::kMalformedPalm: return "malformed-palm";
    case ErrorCode::kUnknownEdge: return "unknown-edge";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kNonFiniteGradient: return "non-finite-gradient";
    case ErrorCode::kNonFiniteLoss: return "non-finite-loss";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kEmptySamples: return "empty-samples";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kInsufficientSamples: return "insufficient-samples";
    case ErrorCode::kEmptyConditional: return "empty-conditional";
    case ErrorCode::kFingerprintMismatch: return "fingerprint-mismatch";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace palmdiff

/*
 * Copyright 2026 The mmuq Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmuq {

enum class ErrorCode {
  kMissingFile,
  kFormatError,
  kInvariantViolation,
  kIoError,
  kEncodingError,
  kTooFewFrames,
  kInvalidPlan,
  kBackendError,
  kAuthError,
  kTransportError,
  kProtocolError,
  kUnsupportedModality,
  kEmptyCaption,
  kUnparseableVerdict,
  kCaptionError,
  kJudgeError,
  kMixedModalitySets,
  kDegenerateLabels,
  kDegenerateFit,
  kConfigError,
  kUnknownSubcommand,
};

constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kEncodingError: return "EncodingError";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kInvalidPlan: return "InvalidPlan";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kAuthError: return "AuthError";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kUnsupportedModality: return "UnsupportedModality";
    case ErrorCode::kEmptyCaption: return "EmptyCaption";
    case ErrorCode::kUnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::kCaptionError: return "CaptionError";
    case ErrorCode::kJudgeError: return "JudgeError";
    case ErrorCode::kMixedModalitySets: return "MixedModalitySets";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kDegenerateFit: return "DegenerateFit";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kUnknownSubcommand: return "UnknownSubcommand";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code-name prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace mmuq

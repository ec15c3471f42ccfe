// Copyright 2026 The AdSent Harness Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

namespace adsent {

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kDuplicateId,
  kEmptyText,
  kEmptyCorpus,
  kUnknownLabel,
  kMissingTimestamp,
  kEmptyClass,
  kTransport,
  kHttpStatus,
  kRetryExhausted,
  kMalformedResponse,
  kEmptyGeneration,
  kTruncatedGeneration,
  kRefusalSuspected,
  kUnparseable,
  kPrecondition,
  kNotFound,
  kIo,
  kCancelled,
  kInternal,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kEmptyText: return "empty_text";
    case ErrorCode::kEmptyCorpus: return "empty_corpus";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kMissingTimestamp: return "missing_timestamp";
    case ErrorCode::kEmptyClass: return "empty_class";
    case ErrorCode::kTransport: return "transport_error";
    case ErrorCode::kHttpStatus: return "http_error";
    case ErrorCode::kRetryExhausted: return "retry_exhausted";
    case ErrorCode::kMalformedResponse: return "malformed_response";
    case ErrorCode::kEmptyGeneration: return "empty_generation";
    case ErrorCode::kTruncatedGeneration: return "truncated_generation";
    case ErrorCode::kRefusalSuspected: return "refusal_suspected";
    case ErrorCode::kUnparseable: return "unparseable";
    case ErrorCode::kPrecondition: return "precondition_violation";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kCancelled: return "cancelled";
    case ErrorCode::kInternal: return "internal_error";
  }
  return "unknown";
}

/// Every failure raised by the harness carries a machine-readable code so
/// batch runners can record it in failure manifests.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::kPrecondition, message);
}

}  // namespace adsent

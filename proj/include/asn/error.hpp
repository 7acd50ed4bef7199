// Copyright 2026 The ASN Authors.
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

namespace asn {

enum class ErrorKind {
  kDegeneratePatch,
  kDegenerateTriplet,
  kUnrecoverablePixel,
  kZeroWeight,
  kInsufficientSupport,
  kZeroMean,
  kNoOverlap,
  kDomain,
  kConfiguration,
  kRange,
  kNonFinite,
  kParse,
  kValidation,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDegeneratePatch: return "degenerate patch";
    case ErrorKind::kDegenerateTriplet: return "degenerate triplet";
    case ErrorKind::kUnrecoverablePixel: return "unrecoverable pixel";
    case ErrorKind::kZeroWeight: return "zero weight";
    case ErrorKind::kInsufficientSupport: return "insufficient support";
    case ErrorKind::kZeroMean: return "zero mean";
    case ErrorKind::kNoOverlap: return "no overlap";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kConfiguration: return "configuration error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "unknown error";
}

/// Every failure in the library is reported as an `asn::Error` carrying a
/// machine-checkable kind plus a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace asn

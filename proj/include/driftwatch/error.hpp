/*
 * Copyright 2026 The driftwatch Authors.
 *
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

namespace driftwatch {

enum class Errc {
  EmptyPeriod,
  InsufficientData,
  InvalidRank,
  InvalidDimension,
  DegenerateDistribution,
  InsufficientStratifiedSample,
  UnknownCandidate,
  ConfigError,
  EmptyEvaluation,
  PreconditionViolation,
  ParseError,
  IoError,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::EmptyPeriod: return "EmptyPeriod";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::InvalidRank: return "InvalidRank";
    case Errc::InvalidDimension: return "InvalidDimension";
    case Errc::DegenerateDistribution: return "DegenerateDistribution";
    case Errc::InsufficientStratifiedSample: return "InsufficientStratifiedSample";
    case Errc::UnknownCandidate: return "UnknownCandidate";
    case Errc::ConfigError: return "ConfigError";
    case Errc::EmptyEvaluation: return "EmptyEvaluation";
    case Errc::PreconditionViolation: return "PreconditionViolation";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Domain error carrying a machine-readable code. Every failure raised by the
/// library is one of these; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace driftwatch

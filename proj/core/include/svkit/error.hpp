// Copyright (c) 2026 The svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVKIT_ERROR_HPP_
#define SVKIT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace svkit {

// Stable error codes. The CLI maps each code to one of three exit classes
// (1 usage, 2 format, 3 numeric) and prints "ERROR <Code>: <detail>", so
// code names are part of the external contract and must not be renamed.
enum class ErrorCode {
  // usage / configuration
  UsageError,
  ConfigError,
  UnknownPreset,
  // file and format
  IoError,
  UnsupportedFormat,
  CorruptArchive,
  DimensionMismatch,
  NonFinite,
  DuplicateId,
  BadLabel,
  MissingLabel,
  UnknownId,
  UnlabeledTrial,
  DegenerateTrialSet,
  // numeric
  ZeroVector,
  InsufficientClasses,
  BadRank,
  SingularScatter,
  SingularCovariance,
  DomainError,
  EmptyBatch,
  TrainingDiverged,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError: return "Usage";
    case ErrorCode::ConfigError: return "Config";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::IoError: return "Io";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptArchive: return "CorruptArchive";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::UnlabeledTrial: return "UnlabeledTrial";
    case ErrorCode::DegenerateTrialSet: return "DegenerateTrialSet";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InsufficientClasses: return "InsufficientClasses";
    case ErrorCode::BadRank: return "BadRank";
    case ErrorCode::SingularScatter: return "SingularScatter";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::TrainingDiverged: return "TrainingDiverged";
  }
  return "Unknown";
}

// Exit classes: 1 usage, 2 format, 3 numeric.
inline int exit_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError:
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownPreset:
      return 1;
    case ErrorCode::IoError:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::CorruptArchive:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFinite:
    case ErrorCode::DuplicateId:
    case ErrorCode::BadLabel:
    case ErrorCode::MissingLabel:
    case ErrorCode::UnknownId:
    case ErrorCode::UnlabeledTrial:
    case ErrorCode::DegenerateTrialSet:
      return 2;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code), detail_(detail) {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace svkit

#endif  // SVKIT_ERROR_HPP_

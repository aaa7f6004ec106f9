// Copyright 2026 The grape-dp Authors
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
#ifndef GRAPE_ERROR_H_
#define GRAPE_ERROR_H_

#include <stdexcept>
#include <string>

namespace grape {

enum class ErrorCode {
  kInvalidArgument,
  kNumericFailure,
  kCalibration,
  kConfiguration,
  kFormat,
};

const char* ErrorCodeName(ErrorCode code);

// Base of every error thrown by the library. The code identifies the
// failure category; the message names the offending field or value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& message)
      : Error(ErrorCode::kInvalidArgument, message) {}
};

class NumericFailureError : public Error {
 public:
  explicit NumericFailureError(const std::string& message)
      : Error(ErrorCode::kNumericFailure, message) {}
};

class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& message)
      : Error(ErrorCode::kCalibration, message) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& message)
      : Error(ErrorCode::kConfiguration, message) {}
};

// Malformed input file. `offset` is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t offset)
      : Error(ErrorCode::kFormat,
              message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace grape

#endif  // GRAPE_ERROR_H_

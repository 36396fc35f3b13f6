// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ccanet {

enum class ErrorCode {
  // configuration
  ConfigError,
  InvalidArgument,
  // data
  IoError,
  MagicMismatch,
  UnsupportedVersion,
  TruncatedFile,
  TrailingBytes,
  NonFiniteValue,
  ShapeMismatch,
  EmptyShot,
  DegenerateSpec,
  ManifestInvalid,
  EmptyClass,
  TooFewShots,
  EmptyAuxiliary,
  DegenerateSplit,
  NoPositives,
  NoPositiveWindows,
  ListTooShort,
  // numeric
  LogNonPositive,
  NotScalarLoss,
  DegenerateDenominator,
  NonFiniteLoss,
  GradCheckFailed,
};

enum class ErrorCategory { config, data, numeric };

const char* to_string(ErrorCode code) noexcept;
ErrorCategory category_of(ErrorCode code) noexcept;

// Process exit code used by the command-line tool for an error category.
int exit_code_for(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace ccanet

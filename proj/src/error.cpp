// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/error.hpp"

namespace ccanet {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyShot: return "EmptyShot";
    case ErrorCode::DegenerateSpec: return "DegenerateSpec";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::TooFewShots: return "TooFewShots";
    case ErrorCode::EmptyAuxiliary: return "EmptyAuxiliary";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::NoPositiveWindows: return "NoPositiveWindows";
    case ErrorCode::ListTooShort: return "ListTooShort";
    case ErrorCode::LogNonPositive: return "LogNonPositive";
    case ErrorCode::NotScalarLoss: return "NotScalarLoss";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::GradCheckFailed: return "GradCheckFailed";
  }
  return "UnknownError";
}

ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
      return ErrorCategory::config;
    case ErrorCode::LogNonPositive:
    case ErrorCode::NotScalarLoss:
    case ErrorCode::DegenerateDenominator:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::GradCheckFailed:
      return ErrorCategory::numeric;
    default:
      return ErrorCategory::data;
  }
}

int exit_code_for(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::config: return 1;
    case ErrorCategory::data: return 2;
    case ErrorCategory::numeric: return 3;
  }
  return 1;
}

}  // namespace ccanet

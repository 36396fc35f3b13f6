// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccanet/tape.hpp"

namespace ccanet {

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t kinks = 0;  // entries excluded, see finite_diff_check_terms
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t entries = 0;
  std::size_t kinks = 0;
  bool passed = true;
};

// Builds the scalar loss on a fresh tape, reading the current parameter
// values. Must be deterministic.
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

double relative_error(double analytic, double numeric);

// Compares backward() against central differences (f(p+h) - f(p-h)) / 2h
// for every entry of every parameter.
GradCheckReport finite_diff_check(const LossBuilder& loss, std::span<Parameter<double>* const> params,
                                  double h = 1e-5, double tolerance = 1e-4);

// Same check for a loss that is a sum of terms. The analytic side is
// backward() on the sum; the numeric side differences each term separately
// and adds the results, which keeps a small term's contribution from being
// rounded away next to a large one.
//
// An entry whose one-sided differences disagree by more than a smooth
// function allows (a ReLU or hinge switching inside [p-h, p+h]) is counted
// as a kink and left out of max_rel_error. The check fails if more than
// kMaxKinkFraction of all entries are kinks.
inline constexpr double kMaxKinkFraction = 0.01;

using TermsBuilder = std::function<std::vector<Var<double>>(Tape<double>&)>;

GradCheckReport finite_diff_check_terms(const TermsBuilder& terms, std::span<Parameter<double>* const> params,
                                        double h = 1e-5, double tolerance = 1e-4);

}  // namespace ccanet

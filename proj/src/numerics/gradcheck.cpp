// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccanet/ops.hpp"

namespace ccanet {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport finite_diff_check(const LossBuilder& loss, std::span<Parameter<double>* const> params,
                                  double h, double tolerance) {
  return finite_diff_check_terms([&](Tape<double>& tape) { return std::vector<Var<double>>{loss(tape)}; }, params,
                                 h, tolerance);
}

GradCheckReport finite_diff_check_terms(const TermsBuilder& terms, std::span<Parameter<double>* const> params,
                                        double h, double tolerance) {
  for (Parameter<double>* p : params) p->zero_grad();
  {
    Tape<double> tape;
    std::vector<Var<double>> parts = terms(tape);
    if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "gradient check of an empty sum");
    Var<double> total = parts.front();
    for (std::size_t t = 1; t < parts.size(); ++t) total = ops::add(total, parts[t]);
    tape.backward(total);
  }

  auto evaluate = [&] {
    Tape<double> tape;
    std::vector<double> values;
    for (const Var<double>& v : terms(tape)) values.push_back(v.value()(0, 0));
    return values;
  };

  const std::vector<double> base = evaluate();
  double magnitude = 0.0;
  for (double v : base) magnitude += std::abs(v);
  // Roundoff in a one-sided difference is about eps * |f| / h.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, magnitude) / h;

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter<double>* p : params) {
    ParamGradError err;
    err.name = p->name;
    bool recorded = false;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const std::vector<double> up = evaluate();
      p->value[i] = saved - h;
      const std::vector<double> down = evaluate();
      p->value[i] = saved;
      double numeric = 0.0;
      double forward = 0.0;
      double backward = 0.0;
      for (std::size_t t = 0; t < up.size(); ++t) {
        numeric += (up[t] - down[t]) / (2.0 * h);
        forward += (up[t] - base[t]) / h;
        backward += (base[t] - down[t]) / h;
      }
      ++report.entries;
      if (std::abs(forward - backward) > std::max(1e-2 * std::max(std::abs(forward), std::abs(backward)), noise)) {
        ++err.kinks;
        continue;
      }
      const double analytic = p->grad[i];
      const double rel = relative_error(analytic, numeric);
      if (rel > err.max_rel_error || !recorded) {
        recorded = true;
        err.max_rel_error = std::max(err.max_rel_error, rel);
        err.worst_index = i;
        err.analytic = analytic;
        err.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
    report.kinks += err.kinks;
    report.params.push_back(err);
  }
  report.passed = report.max_rel_error <= tolerance &&
                  static_cast<double>(report.kinks) <= kMaxKinkFraction * static_cast<double>(report.entries);
  for (Parameter<double>* p : params) p->zero_grad();
  return report;
}

}  // namespace ccanet

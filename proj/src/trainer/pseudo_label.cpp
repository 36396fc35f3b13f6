// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ccanet {

PseudoLabels pseudo_label(const FeatureMatrix& movie, const FeatureMatrix& trailer, double pos_frac,
                          double neg_frac) {
  if (!(pos_frac > 0.0 && pos_frac < 1.0) || !(neg_frac > 0.0 && neg_frac < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "pseudo-label fractions must lie in (0, 1)");
  }
  if (movie.cols() != trailer.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "movie width " + std::to_string(movie.cols()) + " vs trailer width " +
                                              std::to_string(trailer.cols()));
  }
  const std::size_t n = movie.rows(), dim = movie.cols();
  auto norm = [dim](std::span<const float> r) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += static_cast<double>(r[k]) * r[k];
    return std::sqrt(s);
  };
  std::vector<double> trailer_norm(trailer.rows());
  for (std::size_t t = 0; t < trailer.rows(); ++t) trailer_norm[t] = norm(trailer.row(t));

  PseudoLabels out;
  out.similarity.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = movie.row(i);
    const double nx = norm(x);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trailer.rows(); ++t) {
      const auto y = trailer.row(t);
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += static_cast<double>(x[k]) * y[k];
      const double denom = nx * trailer_norm[t];
      best = std::max(best, denom > 0.0 ? dot / denom : 0.0);
    }
    out.similarity[i] = best;
  }

  const auto count = [n](double frac) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
  };
  const std::size_t n_pos = count(pos_frac), n_neg = count(neg_frac);
  if (n_pos + n_neg > n) {
    throw Error(ErrorCode::DegenerateSplit, "movie with " + std::to_string(n) + " shots cannot hold " +
                                                std::to_string(n_pos) + " positives and " + std::to_string(n_neg) +
                                                " negatives");
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return out.similarity[a] > out.similarity[b]; });
  out.pos.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_pos));
  out.neg.assign(order.end() - static_cast<std::ptrdiff_t>(n_neg), order.end());
  std::sort(out.pos.begin(), out.pos.end());
  std::sort(out.neg.begin(), out.neg.end());
  return out;
}

}  // namespace ccanet

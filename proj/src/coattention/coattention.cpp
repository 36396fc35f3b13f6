// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/coattention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "ccanet/ops.hpp"

namespace ccanet {

template <typename T>
Var<T> build_memory(Var<T> w_shared, const Matrix<T>& trailer) {
  if (trailer.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "trailer has no shots");
  return ops::linear(w_shared.tape->constant(trailer), w_shared);
}

template <typename T>
Var<T> co_attention_scores(Var<T> w_shared, const Matrix<T>& movie, Var<T> memory, Similarity similarity) {
  Var<T> queries = ops::linear(w_shared.tape->constant(movie), w_shared);
  if (queries.cols() != memory.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "queries " + queries.value().shape_string() + " vs memory " +
                                              memory.value().shape_string());
  }
  if (similarity == Similarity::cosine) {
    queries = ops::normalize_rows(queries);
    memory = ops::normalize_rows(memory);
  }
  return ops::row_max(ops::matmul_nt(queries, memory));
}

PairWeight pair_weights(double att_i, double att_j, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
  const double diff = att_i - att_j;
  return PairWeight{lambda * std::expm1(std::abs(diff)), (diff > 0.0) - (diff < 0.0)};
}

template <typename T>
Var<T> coattention_rank_loss(Var<T> scores, std::span<const SoftLabelPair> pairs) {
  Tape<T>& tape = *scores.tape;
  if (pairs.empty()) return tape.constant(Matrix<T>(1, 1));
  std::vector<std::uint32_t> first, second;
  Matrix<T> sigma(pairs.size(), 1), weight(pairs.size(), 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    first.push_back(pairs[p].i);
    second.push_back(pairs[p].j);
    sigma[p] = static_cast<T>(pairs[p].sigma);
    weight[p] = static_cast<T>(pairs[p].weight);
  }
  const Var<T> diff = ops::sub(ops::gather_rows(scores, std::span<const std::uint32_t>(first)),
                               ops::gather_rows(scores, std::span<const std::uint32_t>(second)));
  const Var<T> margin = ops::add_scalar(ops::scale(ops::mul_const(diff, sigma), T{-1}), T{1});
  return ops::sum(ops::mul_const(ops::relu(margin), weight));
}

std::vector<SoftLabelPair> sample_pairs(std::span<const double> att, std::size_t n_pairs, double lambda,
                                        Rng& rng) {
  const std::size_t n = att.size();
  if (n < 2) throw Error(ErrorCode::TooFewShots, "pair sampling needs >= 2 shots, got " + std::to_string(n));
  std::vector<SoftLabelPair> out;
  out.reserve(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const auto i = static_cast<std::uint32_t>(rng.below(n));
    auto j = static_cast<std::uint32_t>(rng.below(n - 1));
    if (j >= i) ++j;
    const PairWeight pw = pair_weights(att[i], att[j], lambda);
    out.push_back(SoftLabelPair{i, j, pw.weight, pw.sigma});
  }
  return out;
}

std::vector<RankPair> sample_supervised_pairs(std::span<const std::uint32_t> pos,
                                              std::span<const std::uint32_t> neg,
                                              std::size_t negatives_per_positive, Rng& rng) {
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorCode::EmptyClass, std::to_string(pos.size()) + " positives, " +
                                           std::to_string(neg.size()) + " negatives");
  }
  const std::unordered_set<std::uint32_t> pos_set(pos.begin(), pos.end());
  for (const auto j : neg) {
    if (pos_set.contains(j)) {
      throw Error(ErrorCode::InvalidArgument, "shot " + std::to_string(j) + " is both positive and negative");
    }
  }
  const std::size_t k = std::min(negatives_per_positive, neg.size());
  std::vector<std::uint32_t> pool(neg.begin(), neg.end());
  std::vector<RankPair> out;
  out.reserve(pos.size() * k);
  for (const auto i : pos) {
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t r = s + static_cast<std::size_t>(rng.below(pool.size() - s));
      std::swap(pool[s], pool[r]);
      out.push_back(RankPair{i, pool[s]});
    }
  }
  return out;
}

template <typename T>
Var<T> supervised_rank_loss(Var<T> scores, std::span<const RankPair> pairs) {
  Tape<T>& tape = *scores.tape;
  if (pairs.empty()) return tape.constant(Matrix<T>(1, 1));
  std::vector<std::uint32_t> first, second;
  for (const RankPair& p : pairs) {
    first.push_back(p.pos);
    second.push_back(p.neg);
  }
  const Var<T> diff = ops::sub(ops::gather_rows(scores, std::span<const std::uint32_t>(first)),
                               ops::gather_rows(scores, std::span<const std::uint32_t>(second)));
  return ops::sum(ops::relu(ops::add_scalar(ops::scale(diff, T{-1}), T{1})));
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

#define CCANET_INSTANTIATE_COATT(T)                                                           \
  template Var<T> build_memory(Var<T>, const Matrix<T>&);                                     \
  template Var<T> co_attention_scores(Var<T>, const Matrix<T>&, Var<T>, Similarity);          \
  template Var<T> coattention_rank_loss(Var<T>, std::span<const SoftLabelPair>);              \
  template Var<T> supervised_rank_loss(Var<T>, std::span<const RankPair>);

CCANET_INSTANTIATE_COATT(float)
CCANET_INSTANTIATE_COATT(double)

}  // namespace ccanet

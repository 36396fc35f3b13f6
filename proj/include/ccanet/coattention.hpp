// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccanet/rng.hpp"
#include "ccanet/tape.hpp"

namespace ccanet {

enum class Similarity { inner_product, cosine };

// One projection shared by the trailer memory and the movie queries.
template <typename T>
struct CoAttentionParams {
  Parameter<T> w_shared;  // d x d_in
};

// M = trailer * W^T, one memory row per trailer shot.
template <typename T>
Var<T> build_memory(Var<T> w_shared, const Matrix<T>& trailer);

// Att_i = max_tau <q_i, m_tau> with q_i = W x_i; returns n x 1. Only the
// argmax memory row receives gradient (ties: lowest trailer index). With
// Similarity::cosine both sides are L2-normalised first.
template <typename T>
Var<T> co_attention_scores(Var<T> w_shared, const Matrix<T>& movie, Var<T> memory,
                           Similarity similarity = Similarity::inner_product);

struct PairWeight {
  double weight = 0.0;
  int sigma = 0;
};

// w = lambda * (exp(|att_i - att_j|) - 1), sigma = sgn(att_i - att_j).
// Both are plain numbers: the ranking loss treats them as constants.
PairWeight pair_weights(double att_i, double att_j, double lambda);

struct SoftLabelPair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double weight = 0.0;
  int sigma = 0;
};

// sum_pairs w * max(0, 1 - sigma * (S_i - S_j)) over scores (n x 1).
template <typename T>
Var<T> coattention_rank_loss(Var<T> scores, std::span<const SoftLabelPair> pairs);

// n_pairs ordered pairs (i != j) drawn uniformly from att.size() shots.
// Throws TooFewShots for fewer than two shots.
std::vector<SoftLabelPair> sample_pairs(std::span<const double> att, std::size_t n_pairs, double lambda,
                                        Rng& rng);

struct RankPair {
  std::uint32_t pos = 0;
  std::uint32_t neg = 0;
};

// Pairs every positive with min(k, |neg|) negatives drawn without
// replacement. Throws EmptyClass if either side is empty and InvalidArgument
// if they intersect.
std::vector<RankPair> sample_supervised_pairs(std::span<const std::uint32_t> pos,
                                              std::span<const std::uint32_t> neg,
                                              std::size_t negatives_per_positive, Rng& rng);

// sum_pairs max(0, 1 - S_pos + S_neg).
template <typename T>
Var<T> supervised_rank_loss(Var<T> scores, std::span<const RankPair> pairs);

// Min-max rescaling to [0, 1] for reporting; constant input maps to zeros.
std::vector<double> minmax_normalize(std::span<const double> values);

}  // namespace ccanet

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccanet/tape.hpp"

namespace ccanet {

template <typename T>
struct ContrastiveAttentionParams {
  Parameter<T> w_q;  // d x d_in
  Parameter<T> w_k;  // d x d_in
  Parameter<T> w_v;  // d x d_in
  Parameter<T> w_o;  // d x d, applied after the ReLU
};

template <typename T>
struct ContrastiveVars {
  Var<T> w_q, w_k, w_v, w_o;
};

template <typename T>
ContrastiveVars<T> bind(Tape<T>& tape, ContrastiveAttentionParams<T>& params) {
  return {tape.parameter(params.w_q), tape.parameter(params.w_k), tape.parameter(params.w_v),
          tape.parameter(params.w_o)};
}

// theta = 1 / (1 + exp(-gamma (att - eps))) with eps = epsilon_ratio * max_att.
// `literal_assignment` swaps the roles: slope epsilon_ratio * max_att,
// threshold gamma.
struct ConfidenceParams {
  double gamma = 100.0;
  double epsilon_ratio = 0.65;
  bool literal_assignment = false;

  double slope(double max_att) const { return literal_assignment ? epsilon_ratio * max_att : gamma; }
  double threshold(double max_att) const { return literal_assignment ? gamma : epsilon_ratio * max_att; }
};

double confidence_weight(double att, double max_att, const ConfidenceParams& cfg);

// Differentiable theta for an n x 1 column of attention scores; max_att is a
// constant.
template <typename T>
Var<T> confidence_weights(Var<T> att, double max_att, const ConfidenceParams& cfg);

// Rows of one batch: movie m owns rows [offsets[m], offsets[m + 1]) in
// temporal order.
struct BatchLayout {
  std::vector<std::uint32_t> offsets{0};

  std::size_t movies() const { return offsets.size() - 1; }
  std::size_t rows() const { return offsets.back(); }
  std::uint32_t movie_of(std::uint32_t row) const;
  void add_movie(std::uint32_t shots) { offsets.push_back(offsets.back() + shots); }
};

struct AuxiliarySet {
  std::uint32_t target = 0;
  std::vector<std::uint32_t> pos;  // key candidates from other movies
  std::vector<std::uint32_t> neg;  // non-key neighbours in the target's movie

  std::size_t size() const { return pos.size() + neg.size(); }
  bool empty() const { return pos.empty() && neg.empty(); }
};

// pos = every row of another movie flagged as key; neg = up to `window`
// unflagged rows on each side of the target within its own movie. Throws
// EmptyAuxiliary when both come out empty.
AuxiliarySet build_auxiliary_set(const BatchLayout& layout, std::span<const std::uint8_t> is_key,
                                 std::uint32_t target, std::uint32_t window);

// Single-movie variant for scoring: pos = the movie's other flagged shots
// (when `with_positives`), neg = unflagged neighbours within `window`.
// Returns an empty set instead of throwing.
AuxiliarySet build_inference_auxiliary_set(std::span<const std::uint8_t> is_key, std::uint32_t target,
                                           std::uint32_t window, bool with_positives);

// A = softmax(o_i K^T / sqrt(d)) for one target x_i (1 x d_in) against the
// auxiliary features (N x d_in).
template <typename T>
Var<T> attention_weights(const ContrastiveVars<T>& params, const Matrix<T>& x_i, const Matrix<T>& aux);

// f_i = concat[x_i, W_o ReLU(A V)], width d_in + d.
template <typename T>
Var<T> augment_feature(const ContrastiveVars<T>& params, const Matrix<T>& x_i, const Matrix<T>& aux);

// Fused batch form of A·V: row i is softmax(scale * O_i K_S^T) V_S over the
// members S of sets[i] (positives first); rows with an empty set are zero.
template <typename T>
Var<T> attention_context(Var<T> queries, Var<T> keys, Var<T> values, std::span<const AuxiliarySet> sets,
                         T scale);

template <typename T>
struct AugmentedBatch {
  Var<T> features;  // N x (d_in + d)
  Var<T> queries;   // N x d, reused by the contrastive loss
  Var<T> keys;      // N x d
};

// sets[i] belongs to row i of x.
template <typename T>
AugmentedBatch<T> augment_batch(const ContrastiveVars<T>& params, Var<T> x, std::span<const AuxiliarySet> sets);

struct ContrastiveStats {
  std::size_t terms = 0;
  std::size_t skipped_no_positive = 0;
  std::size_t skipped_degenerate = 0;
};

// L_C = -sum_i theta_i log( P_i / (P_i + N_i) ),
//   P_i = sum_{j in pos} theta_j exp(o_i.k_j),
//   N_i = sum_{j in neg} (1 - theta_j) exp(o_i.k_j),
// evaluated in log space with the largest positive and negative logits
// subtracted from their own sums. Targets with no positive mass are skipped
// and counted; so are targets with no mass on either side or non-finite
// logits (skipped_degenerate). Terms are summed in ascending target order.
template <typename T>
Var<T> contrastive_loss(Var<T> queries, Var<T> keys, Var<T> theta, std::span<const AuxiliarySet> sets,
                        ContrastiveStats* stats = nullptr);

}  // namespace ccanet

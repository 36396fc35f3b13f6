// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccanet/kernels.hpp"
#include "ccanet/ops.hpp"

namespace ccanet {
namespace {

template <typename T>
void th_grad_add(Matrix<T>& g, std::uint32_t row, double v) {
  g(row, 0) += static_cast<T>(v);
}

}  // namespace

double confidence_weight(double att, double max_att, const ConfidenceParams& cfg) {
  const double z = std::clamp(-cfg.slope(max_att) * (att - cfg.threshold(max_att)), -500.0, 500.0);
  return 1.0 / (1.0 + std::exp(z));
}

template <typename T>
Var<T> confidence_weights(Var<T> att, double max_att, const ConfidenceParams& cfg) {
  const double slope = cfg.slope(max_att);
  const double eps = cfg.threshold(max_att);
  // slope * att - slope * eps, then the clamped sigmoid
  return ops::sigmoid(ops::add_scalar(ops::scale(att, static_cast<T>(slope)), static_cast<T>(-slope * eps)));
}

std::uint32_t BatchLayout::movie_of(std::uint32_t row) const {
  const auto it = std::upper_bound(offsets.begin(), offsets.end(), row);
  if (it == offsets.begin() || it == offsets.end()) {
    throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(row) + " outside the batch");
  }
  return static_cast<std::uint32_t>(it - offsets.begin() - 1);
}

AuxiliarySet build_auxiliary_set(const BatchLayout& layout, std::span<const std::uint8_t> is_key,
                                 std::uint32_t target, std::uint32_t window) {
  if (is_key.size() != layout.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "key flags for " + std::to_string(is_key.size()) +
                                              " rows, batch has " + std::to_string(layout.rows()));
  }
  const std::uint32_t movie = layout.movie_of(target);
  const std::uint32_t begin = layout.offsets[movie];
  const std::uint32_t end = layout.offsets[movie + 1];

  AuxiliarySet set;
  set.target = target;
  for (std::uint32_t r = 0; r < layout.rows(); ++r) {
    if ((r < begin || r >= end) && is_key[r]) set.pos.push_back(r);
  }
  const std::uint32_t lo = target - std::min(window, target - begin);
  const std::uint32_t hi = std::min(end, target + window + 1);
  for (std::uint32_t r = lo; r < hi; ++r) {
    if (r != target && !is_key[r]) set.neg.push_back(r);
  }
  if (set.empty()) {
    throw Error(ErrorCode::EmptyAuxiliary, "target row " + std::to_string(target) + " has no auxiliary shots");
  }
  return set;
}

AuxiliarySet build_inference_auxiliary_set(std::span<const std::uint8_t> is_key, std::uint32_t target,
                                           std::uint32_t window, bool with_positives) {
  const auto n = static_cast<std::uint32_t>(is_key.size());
  AuxiliarySet set;
  set.target = target;
  if (with_positives) {
    for (std::uint32_t r = 0; r < n; ++r) {
      if (r != target && is_key[r]) set.pos.push_back(r);
    }
  }
  const std::uint32_t lo = target - std::min(window, target);
  const std::uint32_t hi = std::min(n, target + window + 1);
  for (std::uint32_t r = lo; r < hi; ++r) {
    if (r != target && !is_key[r]) set.neg.push_back(r);
  }
  return set;
}

template <typename T>
Var<T> attention_weights(const ContrastiveVars<T>& params, const Matrix<T>& x_i, const Matrix<T>& aux) {
  if (aux.rows() == 0) throw Error(ErrorCode::EmptyAuxiliary, "attention over an empty auxiliary set");
  if (x_i.rows() != 1) throw Error(ErrorCode::ShapeMismatch, "target must be 1 x d_in, got " + x_i.shape_string());
  Tape<T>& tape = *params.w_q.tape;
  const Var<T> query = ops::linear(tape.constant(x_i), params.w_q);
  const Var<T> keys = ops::linear(tape.constant(aux), params.w_k);
  const T inv_sqrt_d = T{1} / std::sqrt(static_cast<T>(query.cols()));
  return ops::softmax_rows(ops::scale(ops::matmul_nt(query, keys), inv_sqrt_d));
}

template <typename T>
Var<T> augment_feature(const ContrastiveVars<T>& params, const Matrix<T>& x_i, const Matrix<T>& aux) {
  Tape<T>& tape = *params.w_q.tape;
  const Var<T> attn = attention_weights(params, x_i, aux);
  const Var<T> values = ops::linear(tape.constant(aux), params.w_v);
  const Var<T> context = ops::linear(ops::relu(ops::matmul(attn, values)), params.w_o);
  return ops::concat_cols(tape.constant(x_i), context);
}

template <typename T>
Var<T> attention_context(Var<T> queries, Var<T> keys, Var<T> values, std::span<const AuxiliarySet> sets,
                         T scale) {
  const Matrix<T>& q = queries.value();
  const Matrix<T>& k = keys.value();
  const Matrix<T>& v = values.value();
  if (q.cols() != k.cols() || k.rows() != v.rows() || sets.size() != q.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "attention_context: queries " + q.shape_string() + ", keys " +
                                              k.shape_string() + ", values " + v.shape_string() + ", " +
                                              std::to_string(sets.size()) + " sets");
  }
  const std::size_t dk = q.cols(), dv = v.cols();
  const auto& kt = kernels::active<T>();

  auto members = [](const AuxiliarySet& s) {
    std::vector<std::uint32_t> m(s.pos);
    m.insert(m.end(), s.neg.begin(), s.neg.end());
    return m;
  };

  Matrix<T> out(q.rows(), dv);
  std::vector<std::vector<T>> weights(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto idx = members(sets[i]);
    if (idx.empty()) continue;
    std::vector<T>& a = weights[i];
    a.resize(idx.size());
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      a[j] = scale * kt.dot(q.row(i).data(), k.row(idx[j]).data(), dk);
      mx = std::max(mx, a[j]);
    }
    T z{0};
    for (auto& x : a) {
      x = std::exp(x - mx);
      z += x;
    }
    for (auto& x : a) x /= z;
    for (std::size_t j = 0; j < idx.size(); ++j) kt.axpy(a[j], v.row(idx[j]).data(), out.row(i).data(), dv);
  }

  Tape<T>& tape = *queries.tape;
  std::vector<AuxiliarySet> kept(sets.begin(), sets.end());
  const bool req = queries.requires_grad() || keys.requires_grad() || values.requires_grad();
  return tape.record(
      std::move(out), req,
      [queries, keys, values, kept = std::move(kept), weights = std::move(weights), scale, members](
          Tape<T>& t, const Matrix<T>& g) {
        const auto& kt = kernels::active<T>();
        const Matrix<T>& q = t.value(queries);
        const Matrix<T>& k = t.value(keys);
        const Matrix<T>& v = t.value(values);
        const std::size_t dk = q.cols(), dv = v.cols();
        Matrix<T>* gq = t.requires_grad(queries) ? &t.grad_of(queries) : nullptr;
        Matrix<T>* gk = t.requires_grad(keys) ? &t.grad_of(keys) : nullptr;
        Matrix<T>* gv = t.requires_grad(values) ? &t.grad_of(values) : nullptr;
        std::vector<T> dz;
        for (std::size_t i = 0; i < kept.size(); ++i) {
          const auto idx = members(kept[i]);
          if (idx.empty()) continue;
          const std::vector<T>& a = weights[i];
          const T* gi = g.row(i).data();
          dz.assign(idx.size(), T{0});
          T inner{0};
          for (std::size_t j = 0; j < idx.size(); ++j) {
            dz[j] = kt.dot(gi, v.row(idx[j]).data(), dv);
            inner += a[j] * dz[j];
          }
          for (std::size_t j = 0; j < idx.size(); ++j) {
            const T dlogit = a[j] * (dz[j] - inner) * scale;
            if (gq) kt.axpy(dlogit, k.row(idx[j]).data(), gq->row(i).data(), dk);
            if (gk) kt.axpy(dlogit, q.row(i).data(), gk->row(idx[j]).data(), dk);
            if (gv) kt.axpy(a[j], gi, gv->row(idx[j]).data(), dv);
          }
        }
      });
}

template <typename T>
AugmentedBatch<T> augment_batch(const ContrastiveVars<T>& params, Var<T> x, std::span<const AuxiliarySet> sets) {
  const Var<T> queries = ops::linear(x, params.w_q);
  const Var<T> keys = ops::linear(x, params.w_k);
  const Var<T> values = ops::linear(x, params.w_v);
  const T inv_sqrt_d = T{1} / std::sqrt(static_cast<T>(queries.cols()));
  const Var<T> ctx = attention_context(queries, keys, values, sets, inv_sqrt_d);
  const Var<T> projected = ops::linear(ops::relu(ctx), params.w_o);
  return {ops::concat_cols(x, projected), queries, keys};
}

template <typename T>
Var<T> contrastive_loss(Var<T> queries, Var<T> keys, Var<T> theta, std::span<const AuxiliarySet> sets,
                        ContrastiveStats* stats) {
  const Matrix<T>& q = queries.value();
  const Matrix<T>& k = keys.value();
  const Matrix<T>& th = theta.value();
  if (q.cols() != k.cols() || th.rows() != k.rows() || th.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "contrastive_loss: queries " + q.shape_string() + ", keys " +
                                              k.shape_string() + ", theta " + th.shape_string());
  }

  // Per-target quantities in double; the backward pass recomputes them.
  // P and N are kept as (max, shifted sum) so that neither underflows when
  // the logits of the two sides are far apart.
  struct Term {
    double pos_max, pos_sum, neg_max, neg_sum;
    std::vector<double> logits;  // pos then neg

    double log_pos() const { return pos_max + std::log(pos_sum); }
    double log_neg() const { return neg_sum == 0.0 ? -std::numeric_limits<double>::infinity() : neg_max + std::log(neg_sum); }
    // log((P + N) / P) and P / (P + N)
    double penalty() const {
      const double z = log_neg() - log_pos();
      return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    double ratio() const { return 1.0 / (1.0 + std::exp(log_neg() - log_pos())); }
  };

  auto evaluate = [](const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& th, const AuxiliarySet& s) {
    const auto& kt = kernels::active<T>();
    constexpr double lowest = -std::numeric_limits<double>::infinity();
    Term term{lowest, 0.0, lowest, 0.0, {}};
    for (const auto j : s.pos) term.logits.push_back(kt.dot(q.row(s.target).data(), k.row(j).data(), q.cols()));
    for (const auto j : s.neg) term.logits.push_back(kt.dot(q.row(s.target).data(), k.row(j).data(), q.cols()));
    const std::size_t np = s.pos.size();
    for (std::size_t j = 0; j < np; ++j) term.pos_max = std::max(term.pos_max, term.logits[j]);
    for (std::size_t j = np; j < term.logits.size(); ++j) term.neg_max = std::max(term.neg_max, term.logits[j]);
    for (std::size_t j = 0; j < np; ++j)
      term.pos_sum += static_cast<double>(th[s.pos[j]]) * std::exp(term.logits[j] - term.pos_max);
    for (std::size_t j = 0; j < s.neg.size(); ++j)
      term.neg_sum += (1.0 - static_cast<double>(th[s.neg[j]])) * std::exp(term.logits[np + j] - term.neg_max);
    return term;
  };

  ContrastiveStats local;
  std::vector<const AuxiliarySet*> active;
  double loss = 0.0;
  for (const AuxiliarySet& s : sets) {
    if (s.target >= q.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "auxiliary target " + std::to_string(s.target) + " out of range");
    }
    if (s.empty() || s.neg.empty()) {
      // ratio is exactly 1: the term vanishes along with its gradient
      if (!s.empty()) ++local.terms;
      continue;
    }
    if (s.pos.empty()) {
      ++local.skipped_no_positive;
      continue;
    }
    const Term term = evaluate(q, k, th, s);
    if (!std::isfinite(term.pos_max) || !std::isfinite(term.neg_max)) {
      ++local.skipped_degenerate;
      continue;
    }
    if (term.pos_sum == 0.0 && term.neg_sum == 0.0) {
      ++local.skipped_degenerate;
      continue;
    }
    if (term.pos_sum == 0.0) {
      ++local.skipped_no_positive;
      continue;
    }
    loss += static_cast<double>(th[s.target]) * term.penalty();
    active.push_back(&s);
    ++local.terms;
  }
  if (stats) *stats = local;

  std::vector<AuxiliarySet> kept;
  kept.reserve(active.size());
  for (const AuxiliarySet* s : active) kept.push_back(*s);
  const bool req = queries.requires_grad() || keys.requires_grad() || theta.requires_grad();
  return queries.tape->record(
      Matrix<T>(1, 1, static_cast<T>(loss)), req,
      [queries, keys, theta, kept = std::move(kept), evaluate](Tape<T>& t, const Matrix<T>& g) {
        const auto& kt = kernels::active<T>();
        const Matrix<T>& q = t.value(queries);
        const Matrix<T>& k = t.value(keys);
        const Matrix<T>& th = t.value(theta);
        const std::size_t d = q.cols();
        Matrix<T>* gq = t.requires_grad(queries) ? &t.grad_of(queries) : nullptr;
        Matrix<T>* gk = t.requires_grad(keys) ? &t.grad_of(keys) : nullptr;
        Matrix<T>* gth = t.requires_grad(theta) ? &t.grad_of(theta) : nullptr;
        const double g0 = static_cast<double>(g(0, 0));
        for (const AuxiliarySet& s : kept) {
          const Term term = evaluate(q, k, th, s);
          const double r = term.ratio();
          const double ti = static_cast<double>(th[s.target]);
          if (gth) th_grad_add(*gth, s.target, g0 * term.penalty());
          const std::size_t np = s.pos.size();
          for (std::size_t j = 0; j < s.size(); ++j) {
            const bool is_pos = j < np;
            const std::uint32_t row = is_pos ? s.pos[j] : s.neg[j - np];
            const double tj = static_cast<double>(th[row]);
            double dlogit, dtheta;
            if (is_pos) {
              // e^{l_j} / P
              const double e = std::exp(term.logits[j] - term.pos_max) / term.pos_sum;
              dtheta = ti * e * (r - 1.0);
              dlogit = tj * dtheta;
            } else {
              // e^{l_j} / N
              const double e = term.neg_sum == 0.0 ? 0.0 : std::exp(term.logits[j] - term.neg_max) / term.neg_sum;
              dtheta = -ti * e * (1.0 - r);
              dlogit = ti * (1.0 - tj) * e * (1.0 - r);
            }
            const T dl = static_cast<T>(g0 * dlogit);
            if (gq) kt.axpy(dl, k.row(row).data(), gq->row(s.target).data(), d);
            if (gk) kt.axpy(dl, q.row(s.target).data(), gk->row(row).data(), d);
            if (gth) th_grad_add(*gth, row, g0 * dtheta);
          }
        }
      });
}

#define CCANET_INSTANTIATE_CONTRASTIVE(T)                                                                   \
  template Var<T> confidence_weights(Var<T>, double, const ConfidenceParams&);                              \
  template Var<T> attention_weights(const ContrastiveVars<T>&, const Matrix<T>&, const Matrix<T>&);         \
  template Var<T> augment_feature(const ContrastiveVars<T>&, const Matrix<T>&, const Matrix<T>&);           \
  template Var<T> attention_context(Var<T>, Var<T>, Var<T>, std::span<const AuxiliarySet>, T);              \
  template AugmentedBatch<T> augment_batch(const ContrastiveVars<T>&, Var<T>, std::span<const AuxiliarySet>); \
  template Var<T> contrastive_loss(Var<T>, Var<T>, Var<T>, std::span<const AuxiliarySet>, ContrastiveStats*);

CCANET_INSTANTIATE_CONTRASTIVE(float)
CCANET_INSTANTIATE_CONTRASTIVE(double)

}  // namespace ccanet

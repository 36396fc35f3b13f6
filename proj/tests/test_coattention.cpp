// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "ccanet/coattention.hpp"
#include "ccanet/gradcheck.hpp"
#include "ccanet/ops.hpp"
#include "doctest.h"

using namespace ccanet;

namespace {

Matrix<double> random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix<double> m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-1.0, 1.0);
  return m;
}

double brute_force_att(const Matrix<double>& w, const Matrix<double>& x, std::size_t i, const Matrix<double>& t) {
  const std::size_t d = w.rows();
  std::vector<double> q(d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t k = 0; k < x.cols(); ++k) q[a] += w(a, k) * x(i, k);
  }
  double best = -INFINITY;
  for (std::size_t tau = 0; tau < t.rows(); ++tau) {
    double s = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      double m = 0.0;
      for (std::size_t k = 0; k < t.cols(); ++k) m += w(a, k) * t(tau, k);
      s += q[a] * m;
    }
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

TEST_CASE("pair weights closed form") {
  const PairWeight p = pair_weights(2.0, 1.0, 1.5);
  CHECK(p.weight == doctest::Approx(1.5 * (std::exp(1.0) - 1.0)).epsilon(1e-12));
  CHECK(p.sigma == 1);
  const PairWeight q = pair_weights(1.0, 2.0, 1.5);
  CHECK(q.weight == p.weight);
  CHECK(q.sigma == -1);
  const PairWeight z = pair_weights(0.3, 0.3, 1.5);
  CHECK(z.weight == 0.0);
  CHECK(z.sigma == 0);
}

TEST_CASE("pair weights are symmetric, nonnegative and grow with the gap") {
  Rng rng(2);
  for (int t = 0; t < 1000; ++t) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5), lam = rng.uniform(0.1, 3.0);
    const PairWeight ab = pair_weights(a, b, lam), ba = pair_weights(b, a, lam);
    CHECK(ab.weight >= 0.0);
    CHECK(ab.weight == ba.weight);
    CHECK(ab.sigma == -ba.sigma);
    const PairWeight wider = pair_weights(a + (a >= b ? 0.5 : -0.5), b, lam);
    CHECK(wider.weight > ab.weight);
  }
}

TEST_CASE("co-attention score worked example") {
  // W = I, one trailer shot (1, 1), movie shot (1, 1): <x, t> = 2.
  Tape<double> tape;
  const Var<double> w = tape.constant(Matrix<double>::identity(2));
  const Matrix<double> movie(2, 2, std::vector<double>{1, 1, 1, -1});
  const Matrix<double> trailer(1, 2, std::vector<double>{1, 1});
  const Var<double> att = co_attention_scores(w, movie, build_memory(w, trailer));
  CHECK(att.value()(0, 0) == doctest::Approx(2.0));
  CHECK(att.value()(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("co-attention scores match brute force") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d_in = 1 + rng.below(6), d = 1 + rng.below(5), n = 1 + rng.below(8), m = 1 + rng.below(5);
    const Matrix<double> wm = random_matrix(rng, d, d_in);
    const Matrix<double> x = random_matrix(rng, n, d_in);
    const Matrix<double> t = random_matrix(rng, m, d_in);
    Tape<double> tape;
    const Var<double> w = tape.constant(wm);
    const Var<double> att = co_attention_scores(w, x, build_memory(w, t));
    for (std::size_t i = 0; i < n; ++i) CHECK(att.value()(i, 0) == doctest::Approx(brute_force_att(wm, x, i, t)).epsilon(1e-12));

    // Reordering trailer shots does not change the max.
    Matrix<double> rev(m, d_in);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < d_in; ++c) rev(r, c) = t(m - 1 - r, c);
    }
    const Var<double> att2 = co_attention_scores(w, x, build_memory(w, rev));
    for (std::size_t i = 0; i < n; ++i) CHECK(att2.value()(i, 0) == doctest::Approx(att.value()(i, 0)).epsilon(1e-12));
  }
}

TEST_CASE("co-attention gradient with respect to the shared projection") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    // Both widths >= 2: with either equal to one the cosine score is a constant +-1.
    const std::size_t d_in = 2 + rng.below(4), d = 2 + rng.below(3);
    Parameter<double> w("w", random_matrix(rng, d, d_in));
    const Matrix<double> x = random_matrix(rng, 1 + rng.below(6), d_in);
    const Matrix<double> t = random_matrix(rng, 1 + rng.below(4), d_in);
    Parameter<double>* params[] = {&w};
    for (const Similarity sim : {Similarity::inner_product, Similarity::cosine}) {
      const auto report = finite_diff_check(
          [&](Tape<double>& tape) {
            const Var<double> wv = tape.parameter(w);
            return ops::sum(co_attention_scores(wv, x, build_memory(wv, t), sim));
          },
          params);
      CHECK(report.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("cosine co-attention is scale invariant and bounded") {
  Rng rng(6);
  const Matrix<double> wm = random_matrix(rng, 3, 4);
  const Matrix<double> x = random_matrix(rng, 5, 4);
  const Matrix<double> t = random_matrix(rng, 3, 4);
  Matrix<double> x3 = x;
  for (std::size_t i = 0; i < x3.size(); ++i) x3[i] *= 3.0;
  Tape<double> tape;
  const Var<double> w = tape.constant(wm);
  const auto& a = co_attention_scores(w, x, build_memory(w, t), Similarity::cosine).value();
  const auto& b = co_attention_scores(w, x3, build_memory(w, t), Similarity::cosine).value();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(std::abs(a[i]) <= 1.0 + 1e-12);
  }
}

TEST_CASE("pair sampling is uniform over ordered pairs") {
  const std::size_t n = 5;
  const std::vector<double> att = {0.1, 0.4, 0.2, 0.9, 0.5};
  Rng rng(7);
  const std::size_t draws = 40000;
  const auto pairs = sample_pairs(att, draws, 1.5, rng);
  REQUIRE(pairs.size() == draws);
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> counts;
  for (const auto& p : pairs) {
    CHECK(p.i != p.j);
    const PairWeight w = pair_weights(att[p.i], att[p.j], 1.5);
    CHECK(p.weight == w.weight);
    CHECK(p.sigma == w.sigma);
    ++counts[{p.i, p.j}];
  }
  CHECK(counts.size() == n * (n - 1));
  const double expected = static_cast<double>(draws) / (n * (n - 1));
  double chi2 = 0.0;
  for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 19 degrees of freedom; the 99.9th percentile is 43.8.
  CHECK(chi2 < 43.8);

  Rng one(1);
  CHECK_THROWS_AS(sample_pairs(std::vector<double>{1.0}, 3, 1.5, one), Error);
}

TEST_CASE("soft-label ranking loss matches brute force") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    std::vector<double> att(n);
    for (auto& a : att) a = rng.uniform(-2, 2);
    const auto pairs = sample_pairs(att, 3 * n, 1.5, rng);
    const Matrix<double> s = random_matrix(rng, n, 1);
    double expected = 0.0;
    for (const auto& p : pairs) expected += p.weight * std::max(0.0, 1.0 - p.sigma * (s[p.i] - s[p.j]));
    Tape<double> tape;
    const Var<double> loss = coattention_rank_loss(tape.constant(s), std::span<const SoftLabelPair>(pairs));
    CHECK(loss.value()(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("supervised pair sampling and loss") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint32_t n = 4 + static_cast<std::uint32_t>(rng.below(30));
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    rng.shuffle(order.begin(), order.end());
    const std::size_t n_pos = 1 + rng.below(n / 2);
    std::vector<std::uint32_t> pos(order.begin(), order.begin() + n_pos), neg(order.begin() + n_pos, order.end());
    const std::size_t k = 1 + rng.below(25);
    const auto pairs = sample_supervised_pairs(pos, neg, k, rng);
    CHECK(pairs.size() == pos.size() * std::min(k, neg.size()));
    std::map<std::uint32_t, std::vector<std::uint32_t>> per_pos;
    for (const auto& p : pairs) {
      CHECK(std::find(pos.begin(), pos.end(), p.pos) != pos.end());
      CHECK(std::find(neg.begin(), neg.end(), p.neg) != neg.end());
      per_pos[p.pos].push_back(p.neg);
    }
    for (auto& [p, negs] : per_pos) {
      std::sort(negs.begin(), negs.end());
      CHECK(std::adjacent_find(negs.begin(), negs.end()) == negs.end());
    }

    const Matrix<double> s = random_matrix(rng, n, 1);
    double expected = 0.0;
    for (const auto& p : pairs) expected += std::max(0.0, 1.0 - s[p.pos] + s[p.neg]);
    Tape<double> tape;
    const auto loss = supervised_rank_loss(tape.constant(s), std::span<const RankPair>(pairs));
    CHECK(loss.value()(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
  Rng r(1);
  const std::vector<std::uint32_t> a = {0, 1}, b = {1, 2}, none;
  CHECK_THROWS_AS(sample_supervised_pairs(a, b, 3, r), Error);
  CHECK_THROWS_AS(sample_supervised_pairs(none, b, 3, r), Error);
}

TEST_CASE("ranking losses are convex in the scores") {
  Rng rng(10);
  const std::size_t n = 8;
  std::vector<double> att(n);
  for (auto& a : att) a = rng.uniform(-1, 1);
  const auto pairs = sample_pairs(att, 30, 1.5, rng);
  const auto value = [&](const Matrix<double>& s) {
    Tape<double> tape;
    return coattention_rank_loss(tape.constant(s), std::span<const SoftLabelPair>(pairs)).value()(0, 0);
  };
  for (int t = 0; t < 200; ++t) {
    const Matrix<double> a = random_matrix(rng, n, 1), b = random_matrix(rng, n, 1);
    const double mix = rng.uniform();
    Matrix<double> m(n, 1);
    for (std::size_t i = 0; i < n; ++i) m[i] = mix * a[i] + (1 - mix) * b[i];
    CHECK(value(m) <= mix * value(a) + (1 - mix) * value(b) + 1e-12);
  }
}

TEST_CASE("ranking loss is invariant to relabelling shots") {
  Rng rng(11);
  const std::size_t n = 9;
  std::vector<double> att(n);
  for (auto& a : att) a = rng.uniform(-1, 1);
  const Matrix<double> s = random_matrix(rng, n, 1);
  const auto pairs = sample_pairs(att, 40, 1.5, rng);
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  rng.shuffle(perm.begin(), perm.end());
  Matrix<double> sp(n, 1);
  for (std::size_t i = 0; i < n; ++i) sp[perm[i]] = s[i];
  auto moved = pairs;
  for (auto& p : moved) {
    p.i = perm[p.i];
    p.j = perm[p.j];
  }
  Tape<double> tape;
  const double a = coattention_rank_loss(tape.constant(s), std::span<const SoftLabelPair>(pairs)).value()(0, 0);
  const double b = coattention_rank_loss(tape.constant(sp), std::span<const SoftLabelPair>(moved)).value()(0, 0);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("ranking loss gradients") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    std::vector<double> att(n);
    for (auto& a : att) a = rng.uniform(-1, 1);
    const auto soft = sample_pairs(att, 2 * n, 1.5, rng);
    Parameter<double> s("s", random_matrix(rng, n, 1));
    Parameter<double>* params[] = {&s};
    const auto r1 = finite_diff_check(
        [&](Tape<double>& t) { return coattention_rank_loss(t.parameter(s), std::span<const SoftLabelPair>(soft)); },
        params);
    CHECK(r1.max_rel_error <= 1e-4);
    const std::vector<std::uint32_t> pos = {0}, neg = {1, 2};
    const auto hard = sample_supervised_pairs(pos, neg, 20, rng);
    const auto r2 = finite_diff_check(
        [&](Tape<double>& t) { return supervised_rank_loss(t.parameter(s), std::span<const RankPair>(hard)); },
        params);
    CHECK(r2.max_rel_error <= 1e-4);
  }
}

TEST_CASE("minmax normalisation") {
  const std::vector<double> v = {2.0, 4.0, 3.0};
  CHECK(minmax_normalize(v) == std::vector<double>{0.0, 1.0, 0.5});
  CHECK(minmax_normalize(std::vector<double>{5.0, 5.0}) == std::vector<double>{0.0, 0.0});
}

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "ccanet/checkpoint.hpp"
#include "ccanet/trainer.hpp"
#include "doctest.h"

using namespace ccanet;

namespace {

TrainConfig small_config(Mode mode, std::uint64_t seed = 3) {
  TrainConfig c;
  c.mode = mode;
  c.d = 8;
  c.hidden = 8;
  c.batch_shots = 16;
  c.seed = seed;
  return c;
}

Dataset small_dataset(std::uint64_t seed, double noise = 0.5, std::uint32_t movies = 4) {
  SyntheticSpec spec;
  spec.n_movies = movies;
  spec.shots_per_movie = 20;
  spec.key_rate = 0.15;
  spec.feature_dim = 6;
  spec.noise_sigma = noise;
  spec.seed = seed;
  const auto syn = generate_synthetic(spec);
  Dataset data;
  for (std::size_t i = 0; i < syn.movies.size(); ++i) data.push_back(Example{syn.movies[i], syn.trailers[i], "synthetic"});
  return data;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return (aa == 0 || bb == 0) ? 0.0 : ab / std::sqrt(aa * bb);
}

constexpr Mode kAllModes[] = {Mode::sup, Mode::sup_ca, Mode::pl, Mode::pl_ca, Mode::coa, Mode::coa_aug, Mode::ccanet};

}  // namespace

TEST_CASE("pseudo labels match an exhaustive cosine table") {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<float> mv(20 * 4), tv(3 * 4);
    for (auto& v : mv) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : tv) v = static_cast<float>(rng.uniform(-1, 1));
    const FeatureMatrix movie(20, 4, mv), trailer(3, 4, tv);
    std::vector<double> sim(20);
    for (std::size_t i = 0; i < 20; ++i) {
      sim[i] = -INFINITY;
      for (std::size_t t = 0; t < 3; ++t) sim[i] = std::max(sim[i], cosine(movie.row(i), trailer.row(t)));
    }
    std::vector<std::uint32_t> order(20);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sim[a] > sim[b]; });
    // 5% of 20 rounds to 1 positive, 50% to 10 negatives.
    const PseudoLabels pl = pseudo_label(movie, trailer, 0.05, 0.5);
    CHECK(pl.pos == std::vector<std::uint32_t>{order[0]});
    std::vector<std::uint32_t> neg(order.end() - 10, order.end());
    std::vector<std::uint32_t> got = pl.neg;
    std::sort(neg.begin(), neg.end());
    std::sort(got.begin(), got.end());
    CHECK(got == neg);
    for (std::size_t i = 0; i < 20; ++i) CHECK(pl.similarity[i] == doctest::Approx(sim[i]).epsilon(1e-9));
  }
}

TEST_CASE("pseudo labels on identical and orthogonal shots") {
  const FeatureMatrix movie(3, 2, std::vector<float>{0, 1, 2, 0, 1, 1});
  const FeatureMatrix trailer(1, 2, std::vector<float>{4, 0});
  const PseudoLabels pl = pseudo_label(movie, trailer, 0.3, 0.3);
  CHECK(pl.similarity[1] == doctest::Approx(1.0));
  CHECK(pl.similarity[0] == doctest::Approx(0.0));
  CHECK(pl.pos == std::vector<std::uint32_t>{1});
  CHECK(pl.neg == std::vector<std::uint32_t>{0});
  CHECK_THROWS_AS(pseudo_label(movie, trailer, 0.7, 0.7), Error);
}

TEST_CASE("batches cover every movie exactly once") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint32_t> shots(1 + rng.below(30));
    for (auto& s : shots) s = 1 + static_cast<std::uint32_t>(rng.below(50));
    const auto batch_shots = static_cast<std::uint32_t>(1 + rng.below(200));
    const auto batches = make_batches(shots, batch_shots, 7, trial);
    std::vector<std::uint32_t> seen;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::uint64_t rows = 0;
      for (const auto m : batches[b]) rows += shots[m];
      if (b + 1 < batches.size()) CHECK(rows >= batch_shots);
      // Removing the last movie would leave the batch short.
      CHECK(rows - shots[batches[b].back()] < batch_shots);
      seen.insert(seen.end(), batches[b].begin(), batches[b].end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::uint32_t> all(shots.size());
    std::iota(all.begin(), all.end(), 0u);
    CHECK(seen == all);
    CHECK(make_batches(shots, batch_shots, 7, trial) == batches);
  }
  const std::vector<std::uint32_t> ten(10, 5);
  CHECK(make_batches(ten, 5, 7, 0) != make_batches(ten, 5, 7, 1));
  CHECK_THROWS_AS(make_batches(std::vector<std::uint32_t>{}, 10, 1, 0), Error);
}

TEST_CASE("parameters per mode") {
  for (const Mode m : kAllModes) {
    const TrainConfig c = small_config(m);
    Model<float> model = init_model<float>(c, 6);
    std::set<std::string> names;
    for (auto* p : model.parameters()) names.insert(p->name);
    CHECK(names.count("head/w1") == 1);
    CHECK(names.count("head/w2") == 1);
    CHECK(names.count("coa/w_shared") == (uses_coattention(m) ? 1u : 0u));
    CHECK(names.count("ca/w_q") == (uses_augmentation(m) ? 1u : 0u));
    CHECK(model.feature_width() == (uses_augmentation(m) ? 6u + 8u : 6u));
    std::set<std::string> trainable;
    for (auto* p : model.trainable(c)) trainable.insert(p->name);
    CHECK(trainable.count("coa/w_shared") == (m == Mode::ccanet ? 1u : 0u));
  }
  TrainConfig gated = small_config(Mode::coa);
  gated.train_coattention_proj = true;
  Model<float> model = init_model<float>(gated, 6);
  bool found = false;
  for (auto* p : model.trainable(gated)) found |= p->name == "coa/w_shared";
  CHECK(found);
}

TEST_CASE("initialisation is a pure function of the seed") {
  const TrainConfig c = small_config(Mode::ccanet, 11);
  Model<float> a = init_model<float>(c, 6), b = init_model<float>(c, 6);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  Model<float> other = init_model<float>(small_config(Mode::ccanet, 12), 6);
  CHECK_FALSE(other.head_w1.value == a.head_w1.value);
  // Streams are per parameter: head weights do not depend on the mode.
  Model<float> sup = init_model<float>(small_config(Mode::sup, 11), 6);
  CHECK(sup.head_w2.value == a.head_w2.value);
}

TEST_CASE("lr = 0 leaves every parameter unchanged") {
  const Dataset data = small_dataset(1);
  for (const Mode m : kAllModes) {
    TrainConfig c = small_config(m);
    c.lr = 0.0;
    Trainer<float> t(c, data);
    std::vector<Matrix<float>> before;
    for (auto* p : t.model().parameters()) before.push_back(p->value);
    t.run(3);
    const auto after = t.model().parameters();
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i]->value == before[i]);
  }
}

TEST_CASE("training is deterministic and resumes bit for bit") {
  const Dataset data = small_dataset(2);
  for (const Mode m : kAllModes) {
    INFO("mode " << to_string(m));
    TrainConfig c = small_config(m);
    Trainer<float> a(c, data), b(c, data);
    const auto la = a.run(4), lb = b.run(4);
    for (std::size_t e = 0; e < 4; ++e) CHECK(la[e].total == lb[e].total);
    CHECK(encode_checkpoint(a.to_checkpoint()) == encode_checkpoint(b.to_checkpoint()));

    Trainer<float> first(c, data);
    first.run(2);
    const std::string saved = encode_checkpoint(first.to_checkpoint());
    Trainer<float> resumed(c, data);
    resumed.restore(decode_checkpoint(saved));
    CHECK(resumed.epoch() == 2);
    const auto tail = resumed.run(2);
    CHECK(tail.back().epoch == 4);
    CHECK(tail.back().total == la.back().total);
    CHECK(encode_checkpoint(resumed.to_checkpoint()) == encode_checkpoint(a.to_checkpoint()));
  }
}

TEST_CASE("resume rejects a different configuration") {
  const Dataset data = small_dataset(2);
  TrainConfig c = small_config(Mode::coa);
  Trainer<float> a(c, data);
  a.run(1);
  const CheckpointData cp = a.to_checkpoint();
  TrainConfig more_epochs = c;
  more_epochs.epochs = 80;
  Trainer<float> ok(more_epochs, data);
  CHECK_NOTHROW(ok.restore(cp));
  TrainConfig other = c;
  other.lambda = 2.0;
  Trainer<float> bad(other, data);
  CHECK_THROWS_AS(bad.restore(cp), Error);
}

TEST_CASE("modes only touch the inputs they are allowed to use") {
  Dataset weak = small_dataset(3);
  for (auto& ex : weak) ex.movie.ground_truth.reset();
  for (const Mode m : {Mode::pl, Mode::pl_ca, Mode::coa, Mode::coa_aug, Mode::ccanet}) {
    Trainer<float> t(small_config(m), weak);
    CHECK_NOTHROW(t.run(1));
  }
  for (const Mode m : {Mode::sup, Mode::sup_ca}) CHECK_THROWS_AS(Trainer<float>(small_config(m), weak), Error);

  Dataset no_trailers = small_dataset(3);
  for (auto& ex : no_trailers) ex.trailer.reset();
  for (const Mode m : {Mode::sup, Mode::sup_ca}) {
    Trainer<float> t(small_config(m), no_trailers);
    CHECK_NOTHROW(t.run(1));
  }
  for (const Mode m : {Mode::pl, Mode::coa, Mode::ccanet}) {
    CHECK_THROWS_AS(Trainer<float>(small_config(m), no_trailers), Error);
  }
  CHECK(training_needs(Mode::coa).ground_truth == false);
  CHECK(training_needs(Mode::sup).trailers == false);
}

TEST_CASE("coa without the projection flag keeps the shared projection fixed") {
  const Dataset data = small_dataset(4);
  Trainer<float> t(small_config(Mode::coa), data);
  const Matrix<float> before = t.model().coattention.w_shared.value;
  t.run(2);
  CHECK(t.model().coattention.w_shared.value == before);
  // W_shared only learns through theta, whose sigmoid is flat away from the
  // threshold; the toy batch keeps scores close enough for a gradient.
  TrainConfig full = small_config(Mode::ccanet);
  full.d = 0;
  const Dataset toy = toy_dataset(0);
  Trainer<float> cc(full, toy);
  const Matrix<float> w0 = cc.model().coattention.w_shared.value;
  cc.run(2);
  CHECK_FALSE(cc.model().coattention.w_shared.value == w0);
}

TEST_CASE("epoch log counters and JSON") {
  const Dataset data = small_dataset(5);
  Trainer<float> t(small_config(Mode::ccanet), data);
  const EpochLog log = t.run_epoch();
  CHECK(log.epoch == 1);
  CHECK(std::isfinite(log.total));
  CHECK(log.total == doctest::Approx(log.l_rank + log.l_c).epsilon(1e-5));
  CHECK(log.contrastive_terms + log.skipped_no_positive + log.skipped_degenerate == 80);
  const std::string json = log.to_json();
  for (const char* key : {"l_rank", "l_c", "total", "wall_ms", "empty_auxiliary", "skipped_no_positive"}) {
    CHECK(json.find(key) != std::string::npos);
  }
}

TEST_CASE("supervised ranking fits separable data") {
  const Dataset data = small_dataset(6, 0.0);
  TrainConfig c = small_config(Mode::sup);
  c.lr = 0.01;
  Trainer<float> t(c, data);
  const auto logs = t.run(50);
  CHECK(logs.back().l_rank < 1e-3);
  for (const Example& ex : data) {
    const auto s = score_movie(t.model(), c, ex.movie, nullptr);
    const auto labels = ex.movie.labels();
    double lowest_key = INFINITY, highest_other = -INFINITY;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (labels[i]) lowest_key = std::min(lowest_key, s[i]);
      else highest_other = std::max(highest_other, s[i]);
    }
    CHECK(lowest_key > highest_other);
  }
}

TEST_CASE("scoring is deterministic and precision independent") {
  const Dataset data = small_dataset(7);
  for (const Mode m : kAllModes) {
    const TrainConfig c = small_config(m);
    Trainer<float> t(c, data);
    t.run(2);
    const Example& ex = data.front();
    const TrailerRecord* trailer = uses_trailers(m) ? &*ex.trailer : nullptr;
    const auto a = score_movie(t.model(), c, ex.movie, trailer);
    const auto b = score_movie(t.model(), c, ex.movie, trailer);
    CHECK(a == b);
    Model<double> wide = t.model().cast<double>();
    const auto w = score_movie(wide, c, ex.movie, trailer);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(w[i] == doctest::Approx(a[i]).epsilon(1e-4).scale(1.0));

    const LoadedModel loaded = load_model(t.to_checkpoint());
    CHECK(loaded.epoch == 2);
    CHECK(config_hash(loaded.config) == config_hash(c));
    const auto l = score_movie(const_cast<Model<double>&>(loaded.model), c, ex.movie, trailer);
    CHECK(l == w);

    const auto [pre, post] = shot_embeddings(t.model(), c, ex.movie, trailer);
    CHECK(pre.rows() == ex.movie.shots.rows());
    CHECK(post.cols() == t.model().feature_width());
  }
}

TEST_CASE("objective gradients on the toy batch") {
  const Dataset toy = toy_dataset(0);
  CHECK(toy.size() == 4);
  CHECK(toy[0].movie.shots.rows() == 8);
  CHECK(toy[0].movie.shots.cols() == 16);
  for (const Mode m : kAllModes) {
    TrainConfig c;
    c.mode = m;
    c.d = 0;
    c.hidden = 16;
    const GradCheckReport r = check_objective_gradients(c, toy, 1e-5, 1e-4);
    INFO("mode " << to_string(m) << " max rel err " << r.max_rel_error);
    CHECK(r.passed);
  }
  TrainConfig gated;
  gated.mode = Mode::coa;
  gated.d = 0;
  gated.hidden = 16;
  gated.train_coattention_proj = true;
  CHECK(check_objective_gradients(gated, toy, 1e-5, 1e-4).passed);
}

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run everything
//   acceptance 1 3 7      run only the listed criteria
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccanet/checkpoint.hpp"
#include "ccanet/coattention.hpp"
#include "ccanet/config.hpp"
#include "ccanet/contrastive.hpp"
#include "ccanet/datamodel.hpp"
#include "ccanet/evaluation.hpp"
#include "ccanet/gradcheck.hpp"
#include "ccanet/ops.hpp"
#include "ccanet/rng.hpp"
#include "ccanet/trainer.hpp"
#include "metric_oracles.hpp"

namespace fs = std::filesystem;
using namespace ccanet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = true;
  std::string detail;
};

void note(Outcome& o, bool ok, const std::string& what) {
  if (!ok) o.passed = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += what + (ok ? "" : " [failed]");
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Matrix<double> random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix<double> m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-scale, scale);
  return m;
}

// ---- 1: gradients -------------------------------------------------------------

constexpr double kStep = 1e-5;
constexpr double kGradTol = 1e-4;

Outcome gradients() {
  Outcome out;
  const auto t0 = Clock::now();
  Rng rng(2026);
  constexpr std::size_t kMovies = 4, kShots = 8, kRows = kMovies * kShots, kIn = 16, kD = 16;

  {
    // Supervised hinge loss on scores, 20 negatives per positive.
    Parameter<double> s("scores", random_matrix(rng, kRows, 1));
    std::vector<std::uint32_t> pos, neg;
    for (std::uint32_t r = 0; r < kRows; ++r) (r % 4 == 0 ? pos : neg).push_back(r);
    const auto pairs = sample_supervised_pairs(pos, neg, 20, rng);
    Parameter<double>* ps[] = {&s};
    const auto rep = finite_diff_check([&](Tape<double>& t) { return supervised_rank_loss(t.parameter(s), pairs); },
                                       ps, kStep, kGradTol);
    note(out, rep.passed, fmt("hinge %.1e", rep.max_rel_error));
  }
  {
    // Soft-label hinge loss with exponential pair weights.
    Parameter<double> s("scores", random_matrix(rng, kRows, 1));
    std::vector<double> att(kRows);
    for (auto& a : att) a = rng.uniform(-1.0, 1.0);
    Rng pair_rng(7);
    const auto pairs = sample_pairs(att, 4 * kRows, 1.5, pair_rng);
    Parameter<double>* ps[] = {&s};
    const auto rep = finite_diff_check(
        [&](Tape<double>& t) { return coattention_rank_loss(t.parameter(s), pairs); }, ps, kStep, kGradTol);
    note(out, rep.passed, fmt("soft-label %.1e", rep.max_rel_error));
  }

  ContrastiveAttentionParams<double> ca;
  ca.w_q = Parameter<double>("w_q", random_matrix(rng, kD, kIn, 0.3));
  ca.w_k = Parameter<double>("w_k", random_matrix(rng, kD, kIn, 0.3));
  ca.w_v = Parameter<double>("w_v", random_matrix(rng, kD, kIn, 0.3));
  ca.w_o = Parameter<double>("w_o", random_matrix(rng, kD, kD, 0.3));
  Parameter<double>* all_ca[] = {&ca.w_q, &ca.w_k, &ca.w_v, &ca.w_o};
  const Matrix<double> x_i = random_matrix(rng, 1, kIn), aux = random_matrix(rng, 9, kIn);
  {
    const Matrix<double> w = random_matrix(rng, 1, aux.rows());
    const auto rep = finite_diff_check(
        [&](Tape<double>& t) { return ops::sum(ops::mul_const(attention_weights(bind(t, ca), x_i, aux), w)); },
        std::span<Parameter<double>* const>(all_ca, 2), kStep, kGradTol);
    note(out, rep.passed, fmt("attention %.1e", rep.max_rel_error));
  }
  {
    const Matrix<double> w = random_matrix(rng, 1, kIn + kD);
    const auto rep = finite_diff_check(
        [&](Tape<double>& t) { return ops::sum(ops::mul_const(augment_feature(bind(t, ca), x_i, aux), w)); },
        all_ca, kStep, kGradTol);
    note(out, rep.passed, fmt("augmentation %.1e", rep.max_rel_error));
  }
  {
    BatchLayout layout;
    for (std::size_t m = 0; m < kMovies; ++m) layout.add_movie(kShots);
    std::vector<std::uint8_t> is_key(kRows);
    for (std::size_t r = 0; r < kRows; ++r) is_key[r] = r % 5 == 0;
    std::vector<AuxiliarySet> sets;
    for (std::uint32_t r = 0; r < kRows; ++r) sets.push_back(build_auxiliary_set(layout, is_key, r, 10));
    Parameter<double> q("q", random_matrix(rng, kRows, kD)), k("k", random_matrix(rng, kRows, kD));
    Parameter<double> th("theta", random_matrix(rng, kRows, 1));
    for (std::size_t i = 0; i < kRows; ++i) th.value[i] = 0.5 + 0.4 * th.value[i];
    Parameter<double>* ps[] = {&q, &k, &th};
    const auto rep = finite_diff_check(
        [&](Tape<double>& t) {
          return contrastive_loss(t.parameter(q), t.parameter(k), t.parameter(th), std::span<const AuxiliarySet>(sets));
        },
        ps, kStep, kGradTol);
    note(out, rep.passed, fmt("contrastive %.1e", rep.max_rel_error));
  }
  {
    // Attention scores around the threshold, where the sigmoid is not flat.
    const double max_att = 2.0;
    const ConfidenceParams cfg;
    Parameter<double> att("att", Matrix<double>(kRows, 1));
    for (std::size_t i = 0; i < kRows; ++i) att.value[i] = cfg.threshold(max_att) + rng.uniform(-0.03, 0.03);
    const Matrix<double> w = random_matrix(rng, kRows, 1);
    Parameter<double>* ps[] = {&att};
    const auto rep = finite_diff_check(
        [&](Tape<double>& t) { return ops::sum(ops::mul_const(confidence_weights(t.parameter(att), max_att, cfg), w)); },
        ps, kStep, kGradTol);
    note(out, rep.passed, fmt("confidence %.1e", rep.max_rel_error));
  }
  {
    TrainConfig config;
    config.d = 0;
    config.hidden = 16;
    const auto rep = check_objective_gradients(config, toy_dataset(0), kStep, kGradTol);
    note(out, rep.passed,
         fmt("full objective %.1e", rep.max_rel_error) + " (" + std::to_string(rep.kinks) + "/" +
             std::to_string(rep.entries) + " kinks)");
  }
  const double secs = seconds_since(t0);
  note(out, secs < 60.0, fmt("%.1f s", secs));
  return out;
}

// ---- 2: metric oracles ----------------------------------------------------------

Outcome metrics() {
  Outcome out;
  const auto t0 = Clock::now();
  Rng rng(42);
  double worst = 0.0;
  std::vector<RankedList> videos;
  double top5_expected = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const oracle::Instance in = oracle::random_instance(rng);
    worst = std::max(worst, std::abs(average_precision(in.scores, in.labels) - oracle::oracle_ap(in.scores, in.labels)));
    for (const std::size_t n : {std::size_t{2}, std::size_t{5}, std::size_t{10}, in.scores.size()}) {
      const double expected = oracle::oracle_rank_at(in.scores, in.labels, n, false);
      if (std::isnan(expected)) continue;
      worst = std::max(worst, std::abs(rank_at_n(in.scores, in.labels, n) - expected));
    }
    top5_expected += oracle::oracle_topk(in.scores, in.labels, 5, TopkDenominator::all_positives);
    videos.push_back({in.scores, in.labels});
  }
  worst = std::max(worst, std::abs(top5_map(videos) - top5_expected / 10000.0));
  note(out, worst <= 1e-12, fmt("max deviation %.1e", worst));
  const double secs = seconds_since(t0);
  note(out, secs < 60.0, fmt("%.1f s", secs));
  return out;
}

// ---- 3: closed forms --------------------------------------------------------------

Outcome closed_forms() {
  Outcome out;
  const PairWeight pw = pair_weights(2.0, 1.0, 1.5);
  note(out, std::abs(pw.weight - 1.5 * (std::exp(1.0) - 1.0)) <= 1e-9 && pw.sigma == 1,
       fmt("pair weight %.12f", pw.weight));

  const ConfidenceParams cfg;
  const double max_att = 3.7;
  const double theta = confidence_weight(cfg.threshold(max_att), max_att, cfg);
  note(out, std::abs(theta - 0.5) <= 1e-9, fmt("theta at threshold %.12f", theta));

  const double theta_i = 0.37;
  Tape<double> tape;
  const Matrix<double> q(3, 2, std::vector<double>{1, 0, 0, 0, 0, 0});
  const Matrix<double> k(3, 2, std::vector<double>{0, 0, 0.7, 0.3, 0.7, 0.3});
  const Matrix<double> th(3, 1, std::vector<double>{theta_i, 1.0, 0.0});
  const std::vector<AuxiliarySet> sets = {{0, {1}, {2}}};
  const double lc =
      contrastive_loss(tape.constant(q), tape.constant(k), tape.constant(th), std::span<const AuxiliarySet>(sets))
          .value()[0];
  note(out, std::abs(lc - theta_i * std::log(2.0)) <= 1e-9, fmt("equal-logit loss %.12f", lc));
  return out;
}

// ---- shared synthetic runs ----------------------------------------------------------------

struct Split {
  Dataset train, test;
};

// Same split as `ccanet gen-synthetic`: the last quarter of the movies is the
// test set.
Split synthetic_split(const SyntheticSpec& spec) {
  const SyntheticDataset syn = generate_synthetic(spec);
  Split s;
  const std::size_t n = syn.movies.size();
  const auto n_test = static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    (i < n - n_test ? s.train : s.test).push_back(Example{syn.movies[i], syn.trailers[i], "synthetic"});
  }
  return s;
}

SyntheticSpec end_to_end_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_movies = 20;
  spec.shots_per_movie = 200;
  spec.key_rate = 0.06;
  spec.feature_dim = 64;
  spec.noise_sigma = 0.5;
  spec.trailer_fraction_of_keys = 0.5;
  spec.seed = seed;
  return spec;
}

MetricSpec end_to_end_metrics() {
  MetricSpec m;
  m.names = {"rank@10", "rank@global"};
  return m;
}

struct RunResult {
  EvalReport report;
  EpochLog last;
  double seconds = 0.0;
};

RunResult train_and_evaluate(const TrainConfig& config, const Split& split) {
  const auto t0 = Clock::now();
  Trainer<float> trainer(config, split.train);
  const auto logs = trainer.run(config.epochs);
  RunResult r;
  r.last = logs.back();
  r.report = evaluate(trainer.model(), config, split.test, end_to_end_metrics());
  r.seconds = seconds_since(t0);
  return r;
}

class SyntheticRuns {
 public:
  const RunResult& get(Mode mode, std::uint64_t seed) {
    const auto key = std::make_pair(std::string(to_string(mode)), seed);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (splits_.count(seed) == 0) splits_.emplace(seed, synthetic_split(end_to_end_spec(seed)));
    TrainConfig config;
    config.mode = mode;
    config.seed = seed;
    RunResult r = train_and_evaluate(config, splits_.at(seed));
    std::printf("  %-8s seed %llu: rank@10 %.3f rank@global %.3f (final loss %.3g, %.0f s)\n", key.first.c_str(),
                static_cast<unsigned long long>(seed), r.report.overall.at("rank@10"),
                r.report.overall.at("rank@global"), r.last.total, r.seconds);
    std::fflush(stdout);
    return cache_.emplace(key, std::move(r)).first->second;
  }
  const Split& split(std::uint64_t seed) {
    if (splits_.count(seed) == 0) splits_.emplace(seed, synthetic_split(end_to_end_spec(seed)));
    return splits_.at(seed);
  }

 private:
  std::map<std::pair<std::string, std::uint64_t>, RunResult> cache_;
  std::map<std::uint64_t, Split> splits_;
};

// ---- 4: end-to-end separation --------------------------------------------------------------

Outcome separation(SyntheticRuns& runs) {
  Outcome out;
  const auto t0 = Clock::now();
  double r10 = 0.0, rg = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const RunResult& r = runs.get(Mode::ccanet, seed);
    r10 += r.report.overall.at("rank@10") / 3.0;
    rg += r.report.overall.at("rank@global") / 3.0;
  }
  const double secs = seconds_since(t0);
  note(out, r10 >= 0.85, fmt("mean rank@10 %.3f (>= 0.85)", r10));
  note(out, rg >= 0.50, fmt("mean rank@global %.3f (>= 0.50)", rg));

  // Random scoring on the same test movies, 100 trials.
  Rng rng(99);
  double null_sum = 0.0;
  std::size_t null_count = 0;
  for (int trial = 0; trial < 100; ++trial) {
    for (const Example& ex : runs.split(1).test) {
      const auto labels = ex.movie.labels();
      std::vector<double> s(labels.size());
      for (auto& v : s) v = rng.uniform();
      null_sum += rank_at_n(s, labels, labels.size());
      ++null_count;
    }
  }
  const double null_mean = null_sum / static_cast<double>(null_count);
  note(out, std::abs(null_mean - 0.06) <= 0.02, fmt("random rank@global %.4f (0.06 +- 0.02)", null_mean));
  note(out, secs < 600.0, fmt("%.0f s", secs));
  return out;
}

// ---- 5: ablation trend --------------------------------------------------------------------

Outcome ablation(SyntheticRuns& runs) {
  Outcome out;
  std::map<Mode, double> mean;
  for (const Mode m : {Mode::coa, Mode::coa_aug, Mode::ccanet}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) mean[m] += runs.get(m, seed).report.overall.at("rank@global") / 5.0;
  }
  note(out, mean[Mode::ccanet] >= mean[Mode::coa_aug] - 0.01,
       fmt("ccanet %.3f vs coa_aug %.3f", mean[Mode::ccanet], mean[Mode::coa_aug]));
  note(out, mean[Mode::coa_aug] >= mean[Mode::coa] - 0.01,
       fmt("coa_aug %.3f vs coa %.3f", mean[Mode::coa_aug], mean[Mode::coa]));
  return out;
}

// ---- 6: weak supervision and determinism ------------------------------------------------------

Outcome isolation() {
  Outcome out;
  SyntheticSpec spec = end_to_end_spec(11);
  spec.n_movies = 8;
  spec.shots_per_movie = 100;
  const Split split = synthetic_split(spec);

  const fs::path dir = fs::temp_directory_path() / "ccanet_acceptance_isolation";
  fs::remove_all(dir);
  const DatasetManifest manifest = write_dataset_files(dir, split.train);
  std::size_t deleted = 0;
  for (const ManifestPair& p : manifest.pairs) {
    if (p.ground_truth) deleted += fs::remove(manifest.resolve(*p.ground_truth));
  }
  TrainConfig config;
  config.mode = Mode::coa;
  config.epochs = 10;
  config.precision = Precision::f32;
  const DatasetNeeds needs = training_needs(config.mode);
  const bool valid = validate_manifest(manifest, needs).ok();
  note(out, deleted == manifest.pairs.size() && valid, std::to_string(deleted) + " label files deleted");
  const Dataset weak = load_dataset(manifest, needs);
  bool none = true;
  for (const Example& ex : weak) none = none && !ex.movie.ground_truth;
  note(out, none, "no labels loaded");

  std::string bytes[2], reports[2];
  for (int run = 0; run < 2; ++run) {
    Trainer<float> trainer(config, weak);
    trainer.run(config.epochs);
    bytes[run] = encode_checkpoint(trainer.to_checkpoint());
    reports[run] = evaluate(trainer.model(), config, split.test, end_to_end_metrics(), 1).to_json();
  }
  note(out, true, "coa trained " + std::to_string(config.epochs) + " epochs");
  note(out, bytes[0] == bytes[1], "checkpoints bit-identical (" + std::to_string(bytes[0].size()) + " bytes)");
  note(out, reports[0] == reports[1], "reports identical");
  fs::remove_all(dir);
  return out;
}

// ---- 7: hinge sanity ------------------------------------------------------------------------------

Outcome hinge_sanity() {
  Outcome out;
  SyntheticSpec spec = end_to_end_spec(5);
  spec.noise_sigma = 0.0;
  const Split split = synthetic_split(spec);
  TrainConfig config;
  config.mode = Mode::sup;
  const RunResult r = train_and_evaluate(config, split);
  note(out, r.last.total < 1e-3, fmt("epoch %.0f loss %.3g", r.last.epoch, r.last.total));
  const double rg = r.report.overall.at("rank@global");
  note(out, rg == 1.0, fmt("test rank@global %.6f", rg));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto want = [&](int c) { return selected.empty() || selected.count(c) > 0; };

  SyntheticRuns runs;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"metric oracle equivalence", metrics},
      {"closed-form spot checks", closed_forms},
      {"synthetic end-to-end separation", [&] { return separation(runs); }},
      {"ablation trend", [&] { return ablation(runs); }},
      {"mode isolation and determinism", isolation},
      {"hinge-loss sanity", hinge_sanity},
  };
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c) + 1;
    if (!want(id)) continue;
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("threw ") + e.what();
    }
    failures += !o.passed;
    std::printf("criterion %d %s  %s: %s\n", id, o.passed ? "PASS" : "FAIL", criteria[c].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

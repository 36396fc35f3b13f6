// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ccanet/binary_io.hpp"
#include "ccanet/ops.hpp"
#include "ccanet/rng.hpp"
#include "json.hpp"

namespace ccanet {
namespace {

template <typename T>
Matrix<T> stack_movies(std::span<const TrainingExample> data, const BatchPlan& plan) {
  const std::size_t cols = data[plan.movies.front().example].example->movie.shots.cols();
  Matrix<T> x(plan.layout.rows(), cols);
  for (const MoviePlan& mp : plan.movies) {
    const Matrix<float>& src = data[mp.example].example->movie.shots.matrix();
    for (std::size_t i = 0; i < src.size(); ++i) x[mp.offset * cols + i] = static_cast<T>(src[i]);
  }
  return x;
}

std::vector<std::uint8_t> label_flags(std::size_t n, std::span<const std::uint32_t> indices) {
  std::vector<std::uint8_t> flags(n, 0);
  for (const auto i : indices) flags.at(i) = 1;
  return flags;
}

// Rank loss where each pair is additionally gated by the theta of its
// higher-attention shot, giving the shared projection a gradient path.
template <typename T>
Var<T> gated_rank_loss(Var<T> scores, Var<T> theta, std::span<const SoftLabelPair> pairs) {
  Tape<T>& tape = *scores.tape;
  std::vector<std::uint32_t> first, second, upper;
  std::vector<T> sigma, weight;
  for (const SoftLabelPair& p : pairs) {
    if (p.sigma == 0) continue;
    first.push_back(p.i);
    second.push_back(p.j);
    upper.push_back(p.sigma > 0 ? p.i : p.j);
    sigma.push_back(static_cast<T>(p.sigma));
    weight.push_back(static_cast<T>(p.weight));
  }
  if (first.empty()) return tape.constant(Matrix<T>(1, 1));
  const std::size_t n = first.size();
  const Var<T> diff = ops::sub(ops::gather_rows(scores, std::span<const std::uint32_t>(first)),
                               ops::gather_rows(scores, std::span<const std::uint32_t>(second)));
  const Var<T> hinge = ops::relu(ops::add_scalar(ops::scale(ops::mul_const(diff, Matrix<T>(n, 1, sigma)), T{-1}), T{1}));
  const Var<T> gate = ops::gather_rows(theta, std::span<const std::uint32_t>(upper));
  return ops::sum(ops::mul_const(ops::mul(hinge, gate), Matrix<T>(n, 1, weight)));
}

template <typename T>
std::vector<AuxiliarySet> inference_sets(const Model<T>& model, const TrainConfig& config, const MovieRecord& movie,
                                         const TrailerRecord* trailer) {
  const std::size_t n = movie.shots.rows();
  std::vector<std::uint8_t> is_key(n, 0);
  bool with_positives = false;
  if (trailer != nullptr && uses_coattention(config.mode)) {
    auto& m = const_cast<Model<T>&>(model);
    const auto att = attention_scores(m, config, movie.shots.as<T>(), trailer->shots.as<T>());
    const double max_att = *std::max_element(att.begin(), att.end());
    const ConfidenceParams conf = config.confidence();
    for (std::size_t i = 0; i < n; ++i) is_key[i] = confidence_weight(att[i], max_att, conf) >= 0.5;
    with_positives = true;
  } else if (trailer != nullptr && uses_pseudo_labels(config.mode)) {
    const PseudoLabels pl = pseudo_label(movie.shots, trailer->shots, config.pl_pos_frac, config.pl_neg_frac);
    is_key = label_flags(n, pl.pos);
    with_positives = true;
  }
  std::vector<AuxiliarySet> sets;
  sets.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    sets.push_back(build_inference_auxiliary_set(is_key, i, config.window, with_positives));
  }
  return sets;
}

template <typename T>
void check_width(const Model<T>& model, const MovieRecord& movie, const TrailerRecord* trailer) {
  if (movie.shots.cols() != model.d_in) {
    throw Error(ErrorCode::ShapeMismatch, "movie '" + movie.movie_id + "' has width " +
                                              std::to_string(movie.shots.cols()) + ", model expects " +
                                              std::to_string(model.d_in));
  }
  if (trailer != nullptr && trailer->shots.cols() != model.d_in) {
    throw Error(ErrorCode::ShapeMismatch, "trailer '" + trailer->trailer_id + "' has width " +
                                              std::to_string(trailer->shots.cols()) + ", model expects " +
                                              std::to_string(model.d_in));
  }
}

}  // namespace

DatasetNeeds training_needs(Mode mode) { return {uses_trailers(mode), uses_ground_truth(mode)}; }

DatasetNeeds scoring_needs(Mode mode) {
  return {uses_trailers(mode) && uses_augmentation(mode), true};
}

std::vector<std::vector<std::uint32_t>> make_batches(std::span<const std::uint32_t> shots_per_movie,
                                                     std::uint32_t batch_shots, std::uint64_t seed,
                                                     std::uint64_t epoch) {
  if (shots_per_movie.empty()) throw Error(ErrorCode::InvalidArgument, "cannot batch an empty dataset");
  std::vector<std::uint32_t> order(shots_per_movie.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng rng = make_stream(seed, "batches", {epoch});
  rng.shuffle(order.begin(), order.end());

  std::vector<std::vector<std::uint32_t>> batches;
  std::vector<std::uint32_t> current;
  std::uint64_t rows = 0;
  for (const auto m : order) {
    current.push_back(m);
    rows += shots_per_movie[m];
    if (rows >= batch_shots) {
      batches.push_back(std::move(current));
      current.clear();
      rows = 0;
    }
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

template <typename T>
std::vector<double> attention_scores(Model<T>& model, const TrainConfig& config, const Matrix<T>& movie,
                                     const Matrix<T>& trailer) {
  if (model.coattention.w_shared.value.empty()) {
    throw Error(ErrorCode::InvalidArgument, "mode " + std::string(to_string(config.mode)) + " has no co-attention");
  }
  Tape<T> tape;
  const Var<T> w = tape.constant(model.coattention.w_shared.value);
  const Var<T> att = co_attention_scores(w, movie, build_memory(w, trailer), config.similarity);
  std::vector<double> out(att.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(att.value()[i]);
  return out;
}

template <typename T>
BatchPlan make_plan(Model<T>& model, const TrainConfig& config, std::span<const TrainingExample> data,
                    std::span<const std::uint32_t> batch, std::uint64_t epoch, std::uint64_t batch_index) {
  BatchPlan plan;
  for (const auto e : batch) {
    MoviePlan mp;
    mp.example = e;
    mp.offset = plan.layout.offsets.back();
    mp.shots = static_cast<std::uint32_t>(data[e].example->movie.shots.rows());
    plan.layout.add_movie(mp.shots);
    plan.movies.push_back(std::move(mp));
  }
  const std::size_t rows = plan.layout.rows();
  plan.is_key.assign(rows, 0);
  const bool label_theta = uses_contrastive_loss(config.mode) && !uses_coattention(config.mode);
  if (label_theta) plan.label_theta.assign(rows, 0.0);

  const ConfidenceParams conf = config.confidence();
  for (MoviePlan& mp : plan.movies) {
    const Example& ex = *data[mp.example].example;
    Rng rng = make_stream(config.seed, "pairs", {epoch, batch_index, mp.example});
    if (uses_coattention(config.mode)) {
      mp.att = attention_scores(model, config, ex.movie.shots.as<T>(), ex.trailer->shots.as<T>());
      mp.max_att = *std::max_element(mp.att.begin(), mp.att.end());
      for (std::uint32_t i = 0; i < mp.shots; ++i) {
        plan.is_key[mp.offset + i] = confidence_weight(mp.att[i], mp.max_att, conf) >= 0.5;
      }
      mp.soft_pairs = sample_pairs(mp.att, static_cast<std::size_t>(config.pairs_per_shot) * mp.shots,
                                   config.lambda, rng);
      for (auto& p : mp.soft_pairs) {
        p.i += mp.offset;
        p.j += mp.offset;
      }
      continue;
    }
    std::vector<std::uint32_t> pos, neg;
    if (uses_pseudo_labels(config.mode)) {
      pos = data[mp.example].pseudo->pos;
      neg = data[mp.example].pseudo->neg;
    } else {
      const auto labels = ex.movie.labels();
      for (std::uint32_t i = 0; i < mp.shots; ++i) (labels[i] ? pos : neg).push_back(i);
    }
    mp.rank_pairs = sample_supervised_pairs(pos, neg, config.negatives_per_positive, rng);
    for (auto& p : mp.rank_pairs) {
      p.pos += mp.offset;
      p.neg += mp.offset;
    }
    for (const auto i : pos) {
      plan.is_key[mp.offset + i] = 1;
      if (label_theta) plan.label_theta[mp.offset + i] = 1.0;
    }
  }

  if (uses_augmentation(config.mode)) {
    plan.sets.reserve(rows);
    for (std::uint32_t r = 0; r < rows; ++r) {
      try {
        plan.sets.push_back(build_auxiliary_set(plan.layout, plan.is_key, r, config.window));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyAuxiliary) throw;
        AuxiliarySet empty;
        empty.target = r;
        plan.sets.push_back(std::move(empty));
        ++plan.empty_sets;
      }
    }
  }
  return plan;
}

template <typename T>
LossParts<T> build_loss(Tape<T>& tape, Model<T>& model, const TrainConfig& config,
                        std::span<const TrainingExample> data, const BatchPlan& plan) {
  const Var<T> x = tape.constant(stack_movies<T>(data, plan));
  const bool coa = uses_coattention(config.mode);
  const bool gated = coa && config.train_coattention_proj && config.mode != Mode::ccanet;

  std::optional<Var<T>> theta;
  if (coa && (uses_contrastive_loss(config.mode) || gated)) {
    const Var<T> w = tape.parameter(model.coattention.w_shared);
    std::vector<Var<T>> blocks;
    const ConfidenceParams conf = config.confidence();
    for (const MoviePlan& mp : plan.movies) {
      const Example& ex = *data[mp.example].example;
      const Var<T> att =
          co_attention_scores(w, ex.movie.shots.as<T>(), build_memory(w, ex.trailer->shots.as<T>()), config.similarity);
      blocks.push_back(confidence_weights(att, mp.max_att, conf));
    }
    theta = ops::concat_rows(std::span<const Var<T>>(blocks));
  } else if (!plan.label_theta.empty()) {
    Matrix<T> t(plan.label_theta.size(), 1);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(plan.label_theta[i]);
    theta = tape.constant(std::move(t));
  }

  Var<T> features = x;
  std::optional<AugmentedBatch<T>> aug;
  if (model.augmented) {
    const ContrastiveVars<T> vars = bind(tape, model.contrastive);
    aug = augment_batch(vars, x, std::span<const AuxiliarySet>(plan.sets));
    features = aug->features;
  }
  const Var<T> scores = score_features(tape, model, features);

  LossParts<T> parts;
  if (coa) {
    std::vector<SoftLabelPair> pairs;
    for (const MoviePlan& mp : plan.movies) pairs.insert(pairs.end(), mp.soft_pairs.begin(), mp.soft_pairs.end());
    parts.rank = gated ? gated_rank_loss(scores, *theta, pairs) : coattention_rank_loss(scores, std::span<const SoftLabelPair>(pairs));
  } else {
    std::vector<RankPair> pairs;
    for (const MoviePlan& mp : plan.movies) pairs.insert(pairs.end(), mp.rank_pairs.begin(), mp.rank_pairs.end());
    parts.rank = supervised_rank_loss(scores, std::span<const RankPair>(pairs));
  }
  if (uses_contrastive_loss(config.mode)) {
    parts.contrastive = contrastive_loss(aug->queries, aug->keys, *theta, std::span<const AuxiliarySet>(plan.sets),
                                         &parts.stats);
  } else {
    parts.contrastive = tape.constant(Matrix<T>(1, 1));
  }
  parts.total = ops::add(parts.rank, parts.contrastive);
  return parts;
}

std::string EpochLog::to_json() const {
  return nlohmann::json{{"epoch", epoch},         {"l_rank", l_rank},
                        {"l_c", l_c},             {"total", total},
                        {"wall_ms", wall_ms},     {"contrastive_terms", contrastive_terms},
                        {"skipped_no_positive", skipped_no_positive},
                        {"skipped_degenerate", skipped_degenerate},
                        {"empty_auxiliary", empty_auxiliary}}
      .dump();
}

template <typename T>
Trainer<T>::Trainer(TrainConfig config, const Dataset& data) : config_(std::move(config)) {
  config_.validate();
  if (data.empty()) throw Error(ErrorCode::ManifestInvalid, "training set is empty");
  const std::uint32_t d_in = static_cast<std::uint32_t>(data.front().movie.shots.cols());
  for (const Example& ex : data) {
    const std::string& id = ex.movie.movie_id;
    if (ex.movie.shots.cols() != d_in) {
      throw Error(ErrorCode::ShapeMismatch, "movie '" + id + "' has width " + std::to_string(ex.movie.shots.cols()) +
                                                ", expected " + std::to_string(d_in));
    }
    if (uses_trailers(config_.mode)) {
      if (!ex.trailer) throw Error(ErrorCode::ManifestInvalid, "movie '" + id + "' has no trailer");
      if (ex.trailer->shots.cols() != d_in) {
        throw Error(ErrorCode::ShapeMismatch, "trailer of '" + id + "' has width " +
                                                  std::to_string(ex.trailer->shots.cols()));
      }
    }
    if (uses_ground_truth(config_.mode) && !ex.movie.ground_truth) {
      throw Error(ErrorCode::ManifestInvalid, "movie '" + id + "' has no ground truth");
    }
    TrainingExample te{&ex, std::nullopt};
    if (uses_pseudo_labels(config_.mode)) {
      te.pseudo = pseudo_label(ex.movie.shots, ex.trailer->shots, config_.pl_pos_frac, config_.pl_neg_frac);
    }
    examples_.push_back(std::move(te));
    shot_counts_.push_back(static_cast<std::uint32_t>(ex.movie.shots.rows()));
  }
  model_ = init_model<T>(config_, d_in);
  trainable_ = model_.trainable(config_);
  AdamConfig ac{config_.lr, config_.beta1, config_.beta2, config_.adam_eps, config_.weight_decay,
                config_.grad_clip_norm};
  adam_ = make_adam_state<T>(ac, std::span<Parameter<T>* const>(trainable_));
}

template <typename T>
void Trainer<T>::restore(const CheckpointData& checkpoint) {
  const LoadedModel loaded = load_model(checkpoint);
  if (config_hash(loaded.config) != config_hash(config_)) {
    // Only the epoch budget may differ between the original run and a resume.
    TrainConfig a = loaded.config, b = config_;
    a.epochs = b.epochs = 0;
    if (config_hash(a) != config_hash(b)) {
      throw Error(ErrorCode::ConfigError, "checkpoint was written with a different configuration");
    }
  }
  if (loaded.model.d_in != model_.d_in) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint feature width " + std::to_string(loaded.model.d_in) +
                                              " differs from data width " + std::to_string(model_.d_in));
  }
  for (Parameter<T>* p : model_.parameters()) {
    for (const auto& e : checkpoint.params) {
      if (e.name == p->name) p->value = e.value.cast<T>();
    }
    p->zero_grad();
  }
  for (std::size_t i = 0; i < trainable_.size(); ++i) {
    bool have_m = false, have_v = false;
    for (const auto& e : checkpoint.optimizer) {
      if (e.name == "m/" + trainable_[i]->name) {
        adam_.first_moment[i] = e.value.cast<T>();
        have_m = true;
      } else if (e.name == "v/" + trainable_[i]->name) {
        adam_.second_moment[i] = e.value.cast<T>();
        have_v = true;
      }
    }
    if (!have_m || !have_v) {
      throw Error(ErrorCode::ManifestInvalid, "checkpoint lacks optimizer state for '" + trainable_[i]->name + "'");
    }
  }
  adam_.step = checkpoint.adam_step;
  epoch_ = loaded.epoch;
}

template <typename T>
EpochLog Trainer<T>::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  EpochLog log;
  log.epoch = epoch_ + 1;
  const auto batches = make_batches(shot_counts_, config_.batch_shots, config_.seed, epoch_);
  const std::span<const TrainingExample> data(examples_);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    for (Parameter<T>* p : model_.parameters()) p->zero_grad();
    const BatchPlan plan = make_plan(model_, config_, data, batches[b], epoch_, b);
    Tape<T> tape;
    const LossParts<T> parts = build_loss(tape, model_, config_, data, plan);
    const double l_rank = static_cast<double>(parts.rank.value()(0, 0));
    const double l_c = static_cast<double>(parts.contrastive.value()(0, 0));
    const double total = static_cast<double>(parts.total.value()(0, 0));
    if (!std::isfinite(total) || !std::isfinite(l_rank) || !std::isfinite(l_c)) {
      nlohmann::json dump = {{"epoch", epoch_ + 1}, {"batch", b},    {"l_rank", l_rank},
                             {"l_c", l_c},          {"total", total}, {"movies", nlohmann::json::array()}};
      for (const MoviePlan& mp : plan.movies) {
        dump["movies"].push_back(
            {{"movie_id", examples_[mp.example].example->movie.movie_id}, {"shots", mp.shots}, {"max_att", mp.max_att}});
      }
      for (Parameter<T>* p : model_.parameters()) {
        double sq = 0.0;
        for (const T v : p->value.values()) sq += static_cast<double>(v) * v;
        dump["param_norms"][p->name] = std::sqrt(sq);
      }
      std::string where;
      if (!dump_path_.empty()) {
        binio::write_file(dump_path_, dump.dump(2));
        where = "; diagnostics in " + dump_path_.string();
      }
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch_ + 1) + " batch " + std::to_string(b) +
                                                ": l_rank=" + std::to_string(l_rank) + " l_c=" + std::to_string(l_c) +
                                                where);
    }
    tape.backward(parts.total);
    adam_step(adam_, std::span<Parameter<T>* const>(trainable_));
    log.l_rank += l_rank;
    log.l_c += l_c;
    log.total += total;
    log.contrastive_terms += parts.stats.terms;
    log.skipped_no_positive += parts.stats.skipped_no_positive;
    log.skipped_degenerate += parts.stats.skipped_degenerate;
    log.empty_auxiliary += plan.empty_sets;
  }
  ++epoch_;
  log.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return log;
}

template <typename T>
std::vector<EpochLog> Trainer<T>::run(std::uint32_t epochs, const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  for (std::uint32_t e = 0; e < epochs; ++e) {
    logs.push_back(run_epoch());
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

template <typename T>
CheckpointData Trainer<T>::to_checkpoint() const {
  return model_checkpoint(model_, config_, epoch_, &adam_);
}

template <typename T>
std::vector<double> score_movie(Model<T>& model, const TrainConfig& config, const MovieRecord& movie,
                                const TrailerRecord* trailer) {
  check_width(model, movie, trailer);
  Tape<T> tape;
  const Var<T> x = tape.constant(movie.shots.as<T>());
  Var<T> features = x;
  if (model.augmented) {
    const auto sets = inference_sets(model, config, movie, trailer);
    features = augment_batch(bind(tape, model.contrastive), x, std::span<const AuxiliarySet>(sets)).features;
  }
  const Var<T> scores = score_features(tape, model, features);
  std::vector<double> out(scores.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(scores.value()[i]);
  return out;
}

template <typename T>
std::pair<Matrix<float>, Matrix<float>> shot_embeddings(Model<T>& model, const TrainConfig& config,
                                                         const MovieRecord& movie, const TrailerRecord* trailer) {
  check_width(model, movie, trailer);
  if (!model.augmented) return {movie.shots.matrix(), movie.shots.matrix()};
  Tape<T> tape;
  const Var<T> x = tape.constant(movie.shots.as<T>());
  const auto sets = inference_sets(model, config, movie, trailer);
  const Var<T> f = augment_batch(bind(tape, model.contrastive), x, std::span<const AuxiliarySet>(sets)).features;
  return {movie.shots.matrix(), f.value().template cast<float>()};
}

#define CCANET_INSTANTIATE_TRAINER(T)                                                                             \
  template class Trainer<T>;                                                                                      \
  template BatchPlan make_plan(Model<T>&, const TrainConfig&, std::span<const TrainingExample>,                   \
                               std::span<const std::uint32_t>, std::uint64_t, std::uint64_t);                     \
  template LossParts<T> build_loss(Tape<T>&, Model<T>&, const TrainConfig&, std::span<const TrainingExample>,     \
                                   const BatchPlan&);                                                             \
  template std::vector<double> attention_scores(Model<T>&, const TrainConfig&, const Matrix<T>&, const Matrix<T>&); \
  template std::vector<double> score_movie(Model<T>&, const TrainConfig&, const MovieRecord&, const TrailerRecord*); \
  template std::pair<Matrix<float>, Matrix<float>> shot_embeddings(Model<T>&, const TrainConfig&,                 \
                                                                   const MovieRecord&, const TrailerRecord*);

CCANET_INSTANTIATE_TRAINER(float)
CCANET_INSTANTIATE_TRAINER(double)

}  // namespace ccanet

namespace ccanet {

Dataset toy_dataset(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_movies = 4;
  spec.shots_per_movie = 8;
  spec.key_rate = 0.25;
  spec.feature_dim = 16;
  spec.noise_sigma = 0.5;
  spec.trailer_fraction_of_keys = 0.5;
  spec.seed = seed;
  SyntheticDataset syn = generate_synthetic(spec);
  const auto shrink = [](FeatureMatrix& f) {
    Matrix<float> m = f.matrix();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] *= kToyFeatureScale;
    f = FeatureMatrix(std::move(m));
  };
  Dataset data;
  for (std::size_t i = 0; i < syn.movies.size(); ++i) {
    shrink(syn.movies[i].shots);
    shrink(syn.trailers[i].shots);
    data.push_back(Example{std::move(syn.movies[i]), std::move(syn.trailers[i]), "default"});
  }
  return data;
}

GradCheckReport check_objective_gradients(const TrainConfig& config, const Dataset& data, double h,
                                          double tolerance) {
  TrainConfig cfg = config;
  cfg.precision = Precision::f64;
  Trainer<double> trainer(cfg, data);
  Model<double>& model = trainer.model();
  std::vector<TrainingExample> examples;
  std::vector<std::uint32_t> batch;
  for (std::size_t i = 0; i < data.size(); ++i) {
    TrainingExample te{&data[i], std::nullopt};
    if (uses_pseudo_labels(cfg.mode)) {
      te.pseudo = pseudo_label(data[i].movie.shots, data[i].trailer->shots, cfg.pl_pos_frac, cfg.pl_neg_frac);
    }
    examples.push_back(std::move(te));
    batch.push_back(static_cast<std::uint32_t>(i));
  }
  const std::span<const TrainingExample> span(examples);
  const BatchPlan plan = make_plan(model, cfg, span, batch, 0, 0);
  auto params = model.trainable(cfg);
  const TermsBuilder terms = [&](Tape<double>& tape) {
    const LossParts<double> parts = build_loss(tape, model, cfg, span, plan);
    return std::vector<Var<double>>{parts.rank, parts.contrastive};
  };
  return finite_diff_check_terms(terms, std::span<Parameter<double>* const>(params), h, tolerance);
}

}  // namespace ccanet

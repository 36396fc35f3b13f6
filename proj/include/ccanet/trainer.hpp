// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ccanet/adam.hpp"
#include "ccanet/checkpoint.hpp"
#include "ccanet/coattention.hpp"
#include "ccanet/config.hpp"
#include "ccanet/contrastive.hpp"
#include "ccanet/datamodel.hpp"
#include "ccanet/gradcheck.hpp"

namespace ccanet {

// ---- Model --------------------------------------------------------------

template <typename T>
struct Model {
  std::uint32_t d_in = 0;
  std::uint32_t d = 0;
  std::uint32_t hidden = 0;
  bool augmented = false;

  CoAttentionParams<T> coattention;
  ContrastiveAttentionParams<T> contrastive;
  // S(f) = w2 relu(w1 f). Bias-free: every loss is pairwise.
  Parameter<T> head_w1, head_w2;

  std::uint32_t feature_width() const { return augmented ? d_in + d : d_in; }

  // Every parameter, in checkpoint order.
  std::vector<Parameter<T>*> parameters();
  // The subset the optimizer updates for `config`.
  std::vector<Parameter<T>*> trainable(const TrainConfig& config);

  template <typename U>
  Model<U> cast() const;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)). Each
// parameter draws from its own stream "init/<name>".
template <typename T>
Model<T> init_model(const TrainConfig& config, std::uint32_t d_in);

// Two-layer scorer, n x width -> n x 1.
template <typename T>
Var<T> score_features(Tape<T>& tape, Model<T>& model, Var<T> features);

// ---- Pseudo labels ----------------------------------------------------------

struct PseudoLabels {
  std::vector<std::uint32_t> pos;
  std::vector<std::uint32_t> neg;
  std::vector<double> similarity;  // max cosine per movie shot
};

// Max cosine similarity of every movie shot to the trailer shots; the top
// pos_frac become positives and the bottom neg_frac negatives (ties by
// ascending shot index). Throws DegenerateSplit when the two overlap.
PseudoLabels pseudo_label(const FeatureMatrix& movie, const FeatureMatrix& trailer, double pos_frac,
                          double neg_frac);

// ---- Batching ---------------------------------------------------------------

// Movies are shuffled with stream ("batches", epoch) and packed whole until a
// batch reaches batch_shots rows.
std::vector<std::vector<std::uint32_t>> make_batches(std::span<const std::uint32_t> shots_per_movie,
                                                     std::uint32_t batch_shots, std::uint64_t seed,
                                                     std::uint64_t epoch);

// ---- Batch plan and loss ----------------------------------------------------------

// Everything decided before the differentiable pass: attention scores, the
// auxiliary membership derived from them, sampled pairs. Gradient checks keep
// a plan fixed while perturbing parameters.
struct MoviePlan {
  std::uint32_t example = 0;
  std::uint32_t offset = 0;
  std::uint32_t shots = 0;
  double max_att = 0.0;
  std::vector<double> att;
  std::vector<SoftLabelPair> soft_pairs;  // batch-global rows
  std::vector<RankPair> rank_pairs;       // batch-global rows
};

struct BatchPlan {
  BatchLayout layout;
  std::vector<MoviePlan> movies;
  std::vector<std::uint8_t> is_key;
  std::vector<double> label_theta;  // +CA modes only
  std::vector<AuxiliarySet> sets;
  std::size_t empty_sets = 0;
};

template <typename T>
struct LossParts {
  Var<T> rank;
  Var<T> contrastive;
  Var<T> total;
  ContrastiveStats stats;
};

struct TrainingExample {
  const Example* example = nullptr;
  std::optional<PseudoLabels> pseudo;
};

template <typename T>
BatchPlan make_plan(Model<T>& model, const TrainConfig& config, std::span<const TrainingExample> data,
                    std::span<const std::uint32_t> batch, std::uint64_t epoch, std::uint64_t batch_index);

template <typename T>
LossParts<T> build_loss(Tape<T>& tape, Model<T>& model, const TrainConfig& config,
                        std::span<const TrainingExample> data, const BatchPlan& plan);

// ---- Training -------------------------------------------------------------------

struct EpochLog {
  std::uint32_t epoch = 0;
  double l_rank = 0.0;
  double l_c = 0.0;
  double total = 0.0;
  double wall_ms = 0.0;
  std::size_t contrastive_terms = 0;
  std::size_t skipped_no_positive = 0;
  std::size_t skipped_degenerate = 0;
  std::size_t empty_auxiliary = 0;

  std::string to_json() const;
};

template <typename T>
class Trainer {
 public:
  // Validates the dataset against the mode's needs and precomputes pseudo
  // labels. `data` must outlive the trainer.
  Trainer(TrainConfig config, const Dataset& data);

  // Continues from a checkpoint written by to_checkpoint().
  void restore(const CheckpointData& checkpoint);

  EpochLog run_epoch();
  std::vector<EpochLog> run(std::uint32_t epochs, const std::function<void(const EpochLog&)>& on_epoch = {});

  CheckpointData to_checkpoint() const;

  const TrainConfig& config() const { return config_; }
  Model<T>& model() { return model_; }
  const Model<T>& model() const { return model_; }
  std::uint32_t epoch() const { return epoch_; }
  // Where a NonFiniteLoss diagnostic is written (none when empty).
  void set_dump_path(std::filesystem::path path) { dump_path_ = std::move(path); }

 private:
  TrainConfig config_;
  std::vector<TrainingExample> examples_;
  std::vector<std::uint32_t> shot_counts_;
  Model<T> model_;
  std::vector<Parameter<T>*> trainable_;
  AdamState<T> adam_;
  std::uint32_t epoch_ = 0;
  std::filesystem::path dump_path_;
};

// ---- Checkpoints and scoring ------------------------------------------------------

struct LoadedModel {
  TrainConfig config;
  Model<double> model;
  std::uint32_t epoch = 0;
};

template <typename T>
CheckpointData model_checkpoint(const Model<T>& model, const TrainConfig& config, std::uint32_t epoch,
                                const AdamState<T>* adam);
LoadedModel load_model(const CheckpointData& checkpoint);

// Deterministic per-shot scores. Augmented modes build each shot's auxiliary
// set from its own movie: key candidates come from the mode's label source
// against `trailer` when one is given, otherwise only the neighbours are used.
template <typename T>
std::vector<double> score_movie(Model<T>& model, const TrainConfig& config, const MovieRecord& movie,
                                const TrailerRecord* trailer);

// Inputs and augmented outputs of every shot (the latter equals the input in
// modes without augmentation).
template <typename T>
std::pair<Matrix<float>, Matrix<float>> shot_embeddings(Model<T>& model, const TrainConfig& config,
                                                         const MovieRecord& movie, const TrailerRecord* trailer);

// Attention scores of every movie shot against its trailer memory.
template <typename T>
std::vector<double> attention_scores(Model<T>& model, const TrainConfig& config, const Matrix<T>& movie,
                                     const Matrix<T>& trailer);

// ---- Gradient check -----------------------------------------------------------

// Small synthetic batch used by grad-check: 4 movies of 8 shots, width 16,
// features scaled by kToyFeatureScale so co-attention scores stay O(1).
inline constexpr float kToyFeatureScale = 0.5f;
Dataset toy_dataset(std::uint64_t seed);

// Freezes the batch plan at the initial parameters of `config` and compares
// backward() on the mode's full objective against central differences, in
// 64-bit, for every trainable parameter.
GradCheckReport check_objective_gradients(const TrainConfig& config, const Dataset& data, double h = 1e-5,
                                          double tolerance = 1e-4);

DatasetNeeds training_needs(Mode mode);
DatasetNeeds scoring_needs(Mode mode);

}  // namespace ccanet

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ccanet/coattention.hpp"
#include "ccanet/contrastive.hpp"

namespace ccanet {

// sup / pl: hinge loss on annotated or pseudo-labelled pairs.
// *_ca: the same plus contrastive augmentation, with label-derived theta.
// coa: co-attention soft labels only. coa_aug: coa plus augmentation but
// without the contrastive term. ccanet: everything.
enum class Mode { sup, sup_ca, pl, pl_ca, coa, coa_aug, ccanet };

enum class Precision { f32, f64 };

enum class TopkDenominator { all_positives, min_p_k, retrieved };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);

bool uses_trailers(Mode mode);
bool uses_ground_truth(Mode mode);
bool uses_coattention(Mode mode);
bool uses_augmentation(Mode mode);
bool uses_contrastive_loss(Mode mode);
bool uses_pseudo_labels(Mode mode);

struct TrainConfig {
  Mode mode = Mode::ccanet;
  double lambda = 1.5;
  double gamma = 100.0;
  double epsilon_ratio = 0.65;
  bool literal_assignment = false;
  std::uint32_t window = 10;
  std::uint32_t d = 512;  // 0 selects the input feature width
  std::uint32_t hidden = 256;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip_norm = 0.0;
  std::uint32_t epochs = 50;
  std::uint32_t batch_shots = 2048;
  std::uint32_t negatives_per_positive = 20;
  std::uint32_t pairs_per_shot = 4;
  double pl_pos_frac = 0.05;
  double pl_neg_frac = 0.50;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  Similarity similarity = Similarity::inner_product;
  bool train_coattention_proj = false;

  // Throws ConfigError naming the offending field.
  void validate() const;
  std::uint32_t projection_width(std::uint32_t d_in) const { return d == 0 ? d_in : d; }
  ConfidenceParams confidence() const { return {gamma, epsilon_ratio, literal_assignment}; }
};

// Flat JSON object; unknown keys and wrong value types are ConfigErrors.
std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(std::string_view text, const std::string& source = "<config>");
TrainConfig load_config(const std::string& path);

// Applies "key=value" on top of `config`. The value is parsed as JSON when
// possible and as a bare string otherwise.
void apply_override(TrainConfig& config, std::string_view assignment);

// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

std::string library_version();

// {"config_hash", "seed", "version"} block embedded in every artifact.
std::string provenance_json(const TrainConfig& config);

}  // namespace ccanet

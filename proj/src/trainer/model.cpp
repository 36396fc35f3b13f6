// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/trainer.hpp"

#include <cmath>

#include "ccanet/ops.hpp"
#include "ccanet/rng.hpp"
#include "json.hpp"

namespace ccanet {
namespace {

template <typename T>
Parameter<T> glorot(std::uint64_t seed, const std::string& name, std::size_t rows, std::size_t cols) {
  Rng rng = make_stream(seed, "init/" + name);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<T> m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<T>(rng.uniform(-bound, bound));
  return Parameter<T>(name, std::move(m));
}

template <typename T, typename U>
Parameter<U> cast_param(const Parameter<T>& p) {
  return Parameter<U>(p.name, p.value.template cast<U>());
}

}  // namespace

template <typename T>
std::vector<Parameter<T>*> Model<T>::parameters() {
  std::vector<Parameter<T>*> out;
  if (!coattention.w_shared.value.empty()) out.push_back(&coattention.w_shared);
  if (augmented) {
    for (auto* p : {&contrastive.w_q, &contrastive.w_k, &contrastive.w_v, &contrastive.w_o}) out.push_back(p);
  }
  for (auto* p : {&head_w1, &head_w2}) out.push_back(p);
  return out;
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::trainable(const TrainConfig& config) {
  std::vector<Parameter<T>*> out;
  const bool learn_shared = config.mode == Mode::ccanet || (config.train_coattention_proj && uses_coattention(config.mode));
  if (learn_shared && !coattention.w_shared.value.empty()) out.push_back(&coattention.w_shared);
  if (augmented) {
    for (auto* p : {&contrastive.w_q, &contrastive.w_k, &contrastive.w_v, &contrastive.w_o}) out.push_back(p);
  }
  for (auto* p : {&head_w1, &head_w2}) out.push_back(p);
  return out;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> m;
  m.d_in = d_in;
  m.d = d;
  m.hidden = hidden;
  m.augmented = augmented;
  m.coattention.w_shared = cast_param<T, U>(coattention.w_shared);
  m.contrastive.w_q = cast_param<T, U>(contrastive.w_q);
  m.contrastive.w_k = cast_param<T, U>(contrastive.w_k);
  m.contrastive.w_v = cast_param<T, U>(contrastive.w_v);
  m.contrastive.w_o = cast_param<T, U>(contrastive.w_o);
  m.head_w1 = cast_param<T, U>(head_w1);
  m.head_w2 = cast_param<T, U>(head_w2);
  return m;
}

template <typename T>
Model<T> init_model(const TrainConfig& config, std::uint32_t d_in) {
  if (d_in == 0) throw Error(ErrorCode::ShapeMismatch, "feature width must be >= 1");
  Model<T> m;
  m.d_in = d_in;
  m.d = config.projection_width(d_in);
  m.hidden = config.hidden;
  m.augmented = uses_augmentation(config.mode);
  const std::uint64_t seed = config.seed;
  if (uses_coattention(config.mode)) m.coattention.w_shared = glorot<T>(seed, "coa/w_shared", m.d, d_in);
  if (m.augmented) {
    m.contrastive.w_q = glorot<T>(seed, "ca/w_q", m.d, d_in);
    m.contrastive.w_k = glorot<T>(seed, "ca/w_k", m.d, d_in);
    m.contrastive.w_v = glorot<T>(seed, "ca/w_v", m.d, d_in);
    m.contrastive.w_o = glorot<T>(seed, "ca/w_o", m.d, m.d);
  }
  m.head_w1 = glorot<T>(seed, "head/w1", m.hidden, m.feature_width());
  m.head_w2 = glorot<T>(seed, "head/w2", 1, m.hidden);
  return m;
}

template <typename T>
Var<T> score_features(Tape<T>& tape, Model<T>& model, Var<T> features) {
  if (features.cols() != model.feature_width()) {
    throw Error(ErrorCode::ShapeMismatch, "scorer expects width " + std::to_string(model.feature_width()) +
                                              ", got " + std::to_string(features.cols()));
  }
  const Var<T> hidden = ops::relu(ops::linear(features, tape.parameter(model.head_w1)));
  return ops::linear(hidden, tape.parameter(model.head_w2));
}

template <typename T>
CheckpointData model_checkpoint(const Model<T>& model, const TrainConfig& config, std::uint32_t epoch,
                                const AdamState<T>* adam) {
  CheckpointData data;
  auto& mutable_model = const_cast<Model<T>&>(model);
  const auto params = mutable_model.parameters();
  for (const Parameter<T>* p : params) data.params.push_back({p->name, p->value.template cast<float>()});
  if (adam != nullptr) {
    const auto trainable = mutable_model.trainable(config);
    for (std::size_t i = 0; i < trainable.size() && i < adam->first_moment.size(); ++i) {
      data.optimizer.push_back({"m/" + trainable[i]->name, adam->first_moment[i].template cast<float>()});
      data.optimizer.push_back({"v/" + trainable[i]->name, adam->second_moment[i].template cast<float>()});
    }
    data.adam_step = adam->step;
  }
  nlohmann::json meta = {
      {"config", nlohmann::json::parse(config_to_json(config))},
      {"epoch", epoch},
      {"d_in", model.d_in},
      {"provenance", nlohmann::json::parse(provenance_json(config))},
  };
  data.metadata_json = meta.dump();
  return data;
}

LoadedModel load_model(const CheckpointData& checkpoint) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(checkpoint.metadata_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, std::string("checkpoint metadata: ") + e.what());
  }
  if (!meta.contains("config") || !meta.contains("d_in") || !meta.contains("epoch")) {
    throw Error(ErrorCode::ManifestInvalid, "checkpoint metadata lacks config, d_in or epoch");
  }
  LoadedModel out;
  out.config = config_from_json(meta["config"].dump(), "checkpoint metadata");
  out.epoch = meta["epoch"].get<std::uint32_t>();
  out.model = init_model<double>(out.config, meta["d_in"].get<std::uint32_t>());
  for (Parameter<double>* p : out.model.parameters()) {
    const CheckpointEntry* found = nullptr;
    for (const auto& e : checkpoint.params) {
      if (e.name == p->name) found = &e;
    }
    if (found == nullptr) throw Error(ErrorCode::ManifestInvalid, "checkpoint lacks parameter '" + p->name + "'");
    if (found->value.rows() != p->value.rows() || found->value.cols() != p->value.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint parameter '" + p->name + "' is " +
                                                found->value.shape_string() + ", expected " +
                                                p->value.shape_string());
    }
    p->value = found->value.cast<double>();
    p->zero_grad();
  }
  return out;
}

#define CCANET_INSTANTIATE_MODEL(T)                                                                    \
  template struct Model<T>;                                                                            \
  template Model<T> init_model(const TrainConfig&, std::uint32_t);                                     \
  template Var<T> score_features(Tape<T>&, Model<T>&, Var<T>);                                         \
  template CheckpointData model_checkpoint(const Model<T>&, const TrainConfig&, std::uint32_t,          \
                                           const AdamState<T>*);

CCANET_INSTANTIATE_MODEL(float)
CCANET_INSTANTIATE_MODEL(double)
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace ccanet

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/adam.hpp"

#include <cmath>

namespace ccanet {

template <typename T>
AdamState<T> make_adam_state(const AdamConfig& config, std::span<Parameter<T>* const> params) {
  AdamState<T> state;
  state.config = config;
  for (const Parameter<T>* p : params) {
    state.first_moment.emplace_back(p->value.rows(), p->value.cols());
    state.second_moment.emplace_back(p->value.rows(), p->value.cols());
  }
  return state;
}

template <typename T>
void adam_step(AdamState<T>& state, std::span<Parameter<T>* const> params) {
  const AdamConfig& cfg = state.config;
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam state tracks " +
                                              std::to_string(state.first_moment.size()) +
                                              " parameters, got " + std::to_string(params.size()));
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  double clip = 1.0;
  if (cfg.grad_clip_norm > 0.0) {
    double sq = 0.0;
    for (const Parameter<T>* p : params)
      for (const T g : p->grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip_norm) clip = cfg.grad_clip_norm / norm;
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    Matrix<T>& m = state.first_moment[k];
    Matrix<T>& v = state.second_moment[k];
    require_same_shape(m, p.value, "adam first moment");
    require_same_shape(p.grad, p.value, "adam gradient");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = static_cast<double>(p.grad[i]) * clip;
      if (cfg.weight_decay > 0.0) g += cfg.weight_decay * static_cast<double>(p.value[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) -
                                  cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
    p.zero_grad();
  }
}

template AdamState<float> make_adam_state(const AdamConfig&, std::span<Parameter<float>* const>);
template AdamState<double> make_adam_state(const AdamConfig&, std::span<Parameter<double>* const>);
template void adam_step(AdamState<float>&, std::span<Parameter<float>* const>);
template void adam_step(AdamState<double>&, std::span<Parameter<double>* const>);

}  // namespace ccanet

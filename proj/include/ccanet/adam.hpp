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

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Both off by default.
  double weight_decay = 0.0;
  double grad_clip_norm = 0.0;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix<T>> first_moment;
  std::vector<Matrix<T>> second_moment;
};

template <typename T>
AdamState<T> make_adam_state(const AdamConfig& config, std::span<Parameter<T>* const> params);

// One bias-corrected Adam update over all parameters, then zeroes their grads.
// The moment buffers must line up with `params` (same order and shapes).
template <typename T>
void adam_step(AdamState<T>& state, std::span<Parameter<T>* const> params);

}  // namespace ccanet

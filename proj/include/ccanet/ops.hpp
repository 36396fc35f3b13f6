// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "ccanet/tape.hpp"

// Differentiable primitives. Each records its forward value and a backward
// rule on the tape of its first argument. Binary ops require both operands to
// live on the same tape.
namespace ccanet::ops {

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
// Elementwise product.
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> add_scalar(Var<T> a, T offset);
// Elementwise product with a constant matrix of the same shape.
template <typename T> Var<T> mul_const(Var<T> a, const Matrix<T>& c);

// a[m x k] * b[k x n]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
// a[m x k] * b[n x k]^T
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);
// y = x W^T (+ b as a row broadcast). W is d_out x d_in, b is 1 x d_out.
template <typename T> Var<T> linear(Var<T> x, Var<T> weight, std::optional<Var<T>> bias = {});

template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> exp(Var<T> a);
// Throws LogNonPositive on any entry <= 0.
template <typename T> Var<T> log(Var<T> a);
template <typename T> Var<T> abs(Var<T> a);

// Row-wise softmax with max subtraction.
template <typename T> Var<T> softmax_rows(Var<T> a);
template <typename T> Var<T> concat_cols(Var<T> a, Var<T> b);
// Stacks blocks with equal column counts top to bottom.
template <typename T> Var<T> concat_rows(std::span<const Var<T>> blocks);
// Mean over rows: n x k -> 1 x k.
template <typename T> Var<T> row_mean(Var<T> a);
// Sum of all entries: -> 1 x 1.
template <typename T> Var<T> sum(Var<T> a);
// Per-row maximum: n x k -> n x 1. The gradient goes to the argmax only,
// with ties resolved to the lowest column index.
template <typename T> Var<T> row_max(Var<T> a);
// Row selection with repetition allowed; backward scatter-adds.
template <typename T> Var<T> gather_rows(Var<T> a, std::span<const std::uint32_t> rows);
// Divides every row by its L2 norm (rows with zero norm are left at zero).
template <typename T> Var<T> normalize_rows(Var<T> a);

}  // namespace ccanet::ops

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "ccanet/matrix.hpp"

namespace ccanet {

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() {
    if (!grad.same_shape(value)) grad = Matrix<T>(value.rows(), value.cols());
    grad.fill(T{0});
  }
};

template <typename T>
class Tape;

// Handle to a node recorded on a tape. Cheap to copy; only valid while the
// tape is alive.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Matrix<T>& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
};

// Reverse-mode tape over matrix-valued nodes. Nodes are appended in
// evaluation order, so reverse index order is a valid topological order for
// the backward sweep.
template <typename T>
class Tape {
 public:
  // Receives the gradient of the node's output and adds into its inputs'
  // gradients through Tape::grad_of.
  using BackwardFn = std::function<void(Tape&, const Matrix<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> value);
  Var<T> parameter(Parameter<T>& param);
  Var<T> record(Matrix<T> value, bool requires_grad, BackwardFn backward);

  const Matrix<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<T> v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient buffer of a node, allocated (zeroed) on first access.
  Matrix<T>& grad_of(Var<T> v);
  // Gradient after backward(); an empty matrix if nothing flowed into v.
  const Matrix<T>& grad(Var<T> v) const { return nodes_.at(v.id).grad; }

  // Seeds d(loss)/d(loss) = 1, sweeps nodes in reverse order and adds each
  // parameter leaf's gradient into Parameter::grad. Throws NotScalarLoss for
  // non-1x1 losses.
  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

template <typename T>
const Matrix<T>& Var<T>::value() const {
  return tape->value(*this);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape->requires_grad(*this);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ccanet

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/tape.hpp"

namespace ccanet {

template <typename T>
Var<T> Tape<T>::constant(Matrix<T> value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::parameter(Parameter<T>& param) {
  nodes_.push_back(Node{param.value, {}, true, &param, {}});
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::record(Matrix<T> value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr,
                        requires_grad ? std::move(backward) : BackwardFn{}});
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Matrix<T>& Tape<T>::grad_of(Var<T> v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix<T>(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  Node& root = nodes_.at(loss.id);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw Error(ErrorCode::NotScalarLoss, "loss has shape " + root.value.shape_string());
  }
  for (Node& n : nodes_) n.grad = Matrix<T>();
  if (!root.requires_grad) return;
  grad_of(loss)(0, 0) = T{1};

  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      // Deque storage keeps n.grad stable while inputs' buffers are allocated.
      n.backward(*this, n.grad);
    } else if (n.param != nullptr) {
      Matrix<T>& pg = n.param->grad;
      if (!pg.same_shape(n.grad)) pg = Matrix<T>(n.grad.rows(), n.grad.cols());
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace ccanet

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ccanet/kernels.hpp"

namespace ccanet::ops {
namespace {

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape != b.tape) {
    throw Error(ErrorCode::InvalidArgument, std::string(op) + ": operands on different tapes");
  }
  return *a.tape;
}

template <typename T>
void add_into(Matrix<T>& dst, const Matrix<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Elementwise unary op: out = f(x), dx += g * df(x, out).
template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, F f, DF df) {
  const Matrix<T>& x = a.value();
  Matrix<T> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const bool req = a.requires_grad();
  Matrix<T> out_copy = req ? out : Matrix<T>();
  return a.tape->record(std::move(out), req,
                        [a, out_copy = std::move(out_copy), df](Tape<T>& t, const Matrix<T>& g) {
                          const Matrix<T>& x = t.value(a);
                          Matrix<T>& gx = t.grad_of(a);
                          for (std::size_t i = 0; i < g.size(); ++i)
                            gx[i] += g[i] * df(x[i], out_copy[i]);
                        });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Matrix<T> out = a.value();
  add_into(out, b.value());
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [a, b](Tape<T>& t, const Matrix<T>& g) {
                       if (t.requires_grad(a)) add_into(t.grad_of(a), g);
                       if (t.requires_grad(b)) add_into(t.grad_of(b), g);
                     });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Matrix<T> out = a.value();
  const Matrix<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [a, b](Tape<T>& t, const Matrix<T>& g) {
                       if (t.requires_grad(a)) add_into(t.grad_of(a), g);
                       if (t.requires_grad(b)) {
                         Matrix<T>& gb = t.grad_of(b);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Matrix<T> out = a.value();
  const Matrix<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [a, b](Tape<T>& t, const Matrix<T>& g) {
                       const Matrix<T>& av = t.value(a);
                       const Matrix<T>& bv = t.value(b);
                       if (t.requires_grad(a)) {
                         Matrix<T>& ga = t.grad_of(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                       }
                       if (t.requires_grad(b)) {
                         Matrix<T>& gb = t.grad_of(b);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary(
      a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T offset) {
  return unary(
      a, [offset](T x) { return x + offset; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> mul_const(Var<T> a, const Matrix<T>& c) {
  require_same_shape(a.value(), c, "mul_const");
  Matrix<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  return a.tape->record(std::move(out), a.requires_grad(), [a, c](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T>& ga = t.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c[i];
  });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "matmul");
  const Matrix<T>& av = a.value();
  const Matrix<T>& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + av.shape_string() + " * " + bv.shape_string());
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Matrix<T> out(m, n);
  kernels::active<T>().gemm_nn(av.data(), bv.data(), out.data(), m, n, k, false);
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [a, b, m, n, k](Tape<T>& t, const Matrix<T>& g) {
                       const auto& kt = kernels::active<T>();
                       // dA = G B^T, dB = A^T G
                       if (t.requires_grad(a))
                         kt.gemm_nt(g.data(), t.value(b).data(), t.grad_of(a).data(), m, k, n, true);
                       if (t.requires_grad(b))
                         kt.gemm_tn(t.value(a).data(), g.data(), t.grad_of(b).data(), k, n, m, true);
                     });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "matmul_nt");
  const Matrix<T>& av = a.value();
  const Matrix<T>& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw Error(ErrorCode::ShapeMismatch,
                "matmul_nt: " + av.shape_string() + " * (" + bv.shape_string() + ")^T");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Matrix<T> out(m, n);
  kernels::active<T>().gemm_nt(av.data(), bv.data(), out.data(), m, n, k, false);
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [a, b, m, n, k](Tape<T>& t, const Matrix<T>& g) {
                       const auto& kt = kernels::active<T>();
                       // dA = G B, dB = G^T A
                       if (t.requires_grad(a))
                         kt.gemm_nn(g.data(), t.value(b).data(), t.grad_of(a).data(), m, k, n, true);
                       if (t.requires_grad(b))
                         kt.gemm_tn(g.data(), t.value(a).data(), t.grad_of(b).data(), n, k, m, true);
                     });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, std::optional<Var<T>> bias) {
  if (x.value().cols() != weight.value().cols()) {
    throw Error(ErrorCode::ShapeMismatch, "linear: input " + x.value().shape_string() +
                                              " vs weight " + weight.value().shape_string());
  }
  Var<T> y = matmul_nt(x, weight);
  if (!bias) return y;
  const Matrix<T>& bv = bias->value();
  if (bv.rows() != 1 || bv.cols() != weight.value().rows()) {
    throw Error(ErrorCode::ShapeMismatch, "linear: bias " + bv.shape_string() + " for weight " +
                                              weight.value().shape_string());
  }
  Tape<T>& tape = same_tape(x, *bias, "linear");
  Matrix<T> out = y.value();
  const std::size_t n = out.rows(), d = out.cols();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) += bv[c];
  const Var<T> b = *bias;
  return tape.record(std::move(out), y.requires_grad() || b.requires_grad(),
                     [y, b, n, d](Tape<T>& t, const Matrix<T>& g) {
                       if (t.requires_grad(y)) add_into(t.grad_of(y), g);
                       if (t.requires_grad(b)) {
                         Matrix<T>& gb = t.grad_of(b);
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < d; ++c) gb[c] += g(r, c);
                       }
                     });
}

template <typename T>
Var<T> relu(Var<T> a) {
  return unary(
      a, [](T x) { return x > T{0} ? x : T{0}; }, [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary(
      a,
      [](T x) {
        x = std::clamp(x, T{-500}, T{500});
        if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
        const T e = std::exp(x);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> a) {
  const Matrix<T>& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > T{0})) {
      throw Error(ErrorCode::LogNonPositive,
                  "log of " + std::to_string(static_cast<double>(x[i])) + " at entry " +
                      std::to_string(i));
    }
  }
  return unary(
      a, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
Var<T> abs(Var<T> a) {
  return unary(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Var<T> softmax_rows(Var<T> a) {
  const Matrix<T>& x = a.value();
  Matrix<T> out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    auto yr = out.row(r);
    const T mx = *std::max_element(xr.begin(), xr.end());
    T z{0};
    for (std::size_t c = 0; c < xr.size(); ++c) {
      yr[c] = std::exp(xr[c] - mx);
      z += yr[c];
    }
    for (auto& v : yr) v /= z;
  }
  const bool req = a.requires_grad();
  Matrix<T> y = req ? out : Matrix<T>();
  return a.tape->record(std::move(out), req, [a, y = std::move(y)](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T>& gx = t.grad_of(a);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row(r);
      const auto gr = g.row(r);
      T inner{0};
      for (std::size_t c = 0; c < yr.size(); ++c) inner += yr[c] * gr[c];
      auto gxr = gx.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) gxr[c] += yr[c] * (gr[c] - inner);
    }
  });
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "concat_cols");
  const Matrix<T>& av = a.value();
  const Matrix<T>& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw Error(ErrorCode::ShapeMismatch,
                "concat_cols: " + av.shape_string() + " | " + bv.shape_string());
  }
  const std::size_t n = av.rows(), ca = av.cols(), cb = bv.cols();
  Matrix<T> out(n, ca + cb);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + static_cast<long>(ca));
  }
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [a, b, n, ca, cb](Tape<T>& t, const Matrix<T>& g) {
                       if (t.requires_grad(a)) {
                         Matrix<T>& ga = t.grad_of(a);
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
                       }
                       if (t.requires_grad(b)) {
                         Matrix<T>& gb = t.grad_of(b);
                         for (std::size_t r = 0; r < n; ++r)
                           for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
                       }
                     });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_rows of zero blocks");
  Tape<T>& tape = *blocks.front().tape;
  const std::size_t k = blocks.front().value().cols();
  std::size_t n = 0;
  bool req = false;
  for (const Var<T>& b : blocks) {
    same_tape(blocks.front(), b, "concat_rows");
    if (b.value().cols() != k) {
      throw Error(ErrorCode::ShapeMismatch, "concat_rows: " + b.value().shape_string() + " under " +
                                                blocks.front().value().shape_string());
    }
    n += b.value().rows();
    req = req || b.requires_grad();
  }
  Matrix<T> out(n, k);
  std::size_t at = 0;
  for (const Var<T>& b : blocks) {
    const auto v = b.value().values();
    std::copy(v.begin(), v.end(), out.data() + at * k);
    at += b.value().rows();
  }
  std::vector<Var<T>> parts(blocks.begin(), blocks.end());
  return tape.record(std::move(out), req, [parts = std::move(parts), k](Tape<T>& t, const Matrix<T>& g) {
    std::size_t at = 0;
    for (const Var<T>& b : parts) {
      const std::size_t rows = t.value(b).rows();
      if (t.requires_grad(b)) {
        Matrix<T>& gb = t.grad_of(b);
        for (std::size_t i = 0; i < rows * k; ++i) gb[i] += g[at * k + i];
      }
      at += rows;
    }
  });
}

template <typename T>
Var<T> row_mean(Var<T> a) {
  const Matrix<T>& x = a.value();
  const std::size_t n = x.rows(), k = x.cols();
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "row_mean of an empty matrix");
  Matrix<T> out(1, k);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) out(0, c) += x(r, c);
  const T inv = T{1} / static_cast<T>(n);
  for (auto& v : out.values()) v *= inv;
  return a.tape->record(std::move(out), a.requires_grad(), [a, n, k, inv](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T>& gx = t.grad_of(a);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) gx(r, c) += g(0, c) * inv;
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  const Matrix<T>& x = a.value();
  T acc{0};
  for (const T v : x.values()) acc += v;
  return a.tape->record(Matrix<T>(1, 1, acc), a.requires_grad(), [a](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T>& gx = t.grad_of(a);
    for (auto& v : gx.values()) v += g(0, 0);
  });
}

template <typename T>
Var<T> row_max(Var<T> a) {
  const Matrix<T>& x = a.value();
  if (x.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "row_max over zero columns");
  const std::size_t n = x.rows();
  Matrix<T> out(n, 1);
  std::vector<std::uint32_t> arg(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto xr = x.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < xr.size(); ++c) {
      if (xr[c] > xr[best]) best = c;
    }
    arg[r] = static_cast<std::uint32_t>(best);
    out(r, 0) = xr[best];
  }
  return a.tape->record(std::move(out), a.requires_grad(),
                        [a, arg = std::move(arg)](Tape<T>& t, const Matrix<T>& g) {
                          Matrix<T>& gx = t.grad_of(a);
                          for (std::size_t r = 0; r < arg.size(); ++r) gx(r, arg[r]) += g(r, 0);
                        });
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::span<const std::uint32_t> rows) {
  const Matrix<T>& x = a.value();
  const std::size_t k = x.cols();
  Matrix<T> out(rows.size(), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "gather_rows: index " + std::to_string(rows[i]) +
                                                " out of range for " + x.shape_string());
    }
    std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return a.tape->record(std::move(out), a.requires_grad(),
                        [a, idx = std::move(idx), k](Tape<T>& t, const Matrix<T>& g) {
                          Matrix<T>& gx = t.grad_of(a);
                          for (std::size_t i = 0; i < idx.size(); ++i)
                            for (std::size_t c = 0; c < k; ++c) gx(idx[i], c) += g(i, c);
                        });
}

template <typename T>
Var<T> normalize_rows(Var<T> a) {
  const Matrix<T>& x = a.value();
  const std::size_t n = x.rows(), k = x.cols();
  Matrix<T> out(n, k);
  std::vector<T> norms(n);
  const auto& kt = kernels::active<T>();
  for (std::size_t r = 0; r < n; ++r) {
    norms[r] = std::sqrt(kt.dot(x.row(r).data(), x.row(r).data(), k));
    if (norms[r] > T{0})
      for (std::size_t c = 0; c < k; ++c) out(r, c) = x(r, c) / norms[r];
  }
  const bool req = a.requires_grad();
  Matrix<T> y = req ? out : Matrix<T>();
  return a.tape->record(std::move(out), req,
                        [a, y = std::move(y), norms = std::move(norms), k](Tape<T>& t, const Matrix<T>& g) {
                          Matrix<T>& gx = t.grad_of(a);
                          for (std::size_t r = 0; r < norms.size(); ++r) {
                            if (!(norms[r] > T{0})) continue;
                            T inner{0};
                            for (std::size_t c = 0; c < k; ++c) inner += y(r, c) * g(r, c);
                            for (std::size_t c = 0; c < k; ++c)
                              gx(r, c) += (g(r, c) - y(r, c) * inner) / norms[r];
                          }
                        });
}

#define CCANET_INSTANTIATE_OPS(T)                                                   \
  template Var<T> add(Var<T>, Var<T>);                                              \
  template Var<T> sub(Var<T>, Var<T>);                                              \
  template Var<T> mul(Var<T>, Var<T>);                                              \
  template Var<T> scale(Var<T>, T);                                                 \
  template Var<T> add_scalar(Var<T>, T);                                            \
  template Var<T> mul_const(Var<T>, const Matrix<T>&);                              \
  template Var<T> matmul(Var<T>, Var<T>);                                           \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                        \
  template Var<T> linear(Var<T>, Var<T>, std::optional<Var<T>>);                    \
  template Var<T> relu(Var<T>);                                                     \
  template Var<T> sigmoid(Var<T>);                                                  \
  template Var<T> exp(Var<T>);                                                      \
  template Var<T> log(Var<T>);                                                      \
  template Var<T> abs(Var<T>);                                                      \
  template Var<T> softmax_rows(Var<T>);                                             \
  template Var<T> concat_cols(Var<T>, Var<T>);                                      \
  template Var<T> concat_rows(std::span<const Var<T>>);                             \
  template Var<T> row_mean(Var<T>);                                                 \
  template Var<T> sum(Var<T>);                                                      \
  template Var<T> row_max(Var<T>);                                                  \
  template Var<T> gather_rows(Var<T>, std::span<const std::uint32_t>);              \
  template Var<T> normalize_rows(Var<T>);

CCANET_INSTANTIATE_OPS(float)
CCANET_INSTANTIATE_OPS(double)

}  // namespace ccanet::ops

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstddef>
#include <string_view>

// Dense inner-loop kernels. Every routine has a portable scalar reference and,
// on x86-64, an AVX2/FMA variant; the variant is chosen once at startup from
// CPUID (override with CCANET_ISA=scalar|avx2) and can be forced in tests.
namespace ccanet::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

template <typename T>
struct KernelTable {
  // sum_i x[i] * y[i]
  T (*dot)(const T* x, const T* y, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // c[m x n] (+)= a[m x k] * b[n x k]^T
  void (*gemm_nt)(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k,
                  bool accumulate);
  // c[m x n] (+)= a[m x k] * b[k x n]
  void (*gemm_nn)(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k,
                  bool accumulate);
  // c[m x n] (+)= a[k x m]^T * b[k x n]
  void (*gemm_tn)(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k,
                  bool accumulate);
};

bool isa_available(Isa isa);

// Kernel table of the given ISA; throws if that ISA is not available here.
template <typename T>
const KernelTable<T>& table(Isa isa);

Isa active_isa();
// Changes the process-wide selection. Not thread-safe; meant for tests and tools.
void set_active_isa(Isa isa);

template <typename T>
const KernelTable<T>& active() {
  return table<T>(active_isa());
}

// Scalar reference entry points, also used directly by the dispatch layer.
namespace scalar {
template <typename T>
const KernelTable<T>& table();
}

#if defined(CCANET_HAS_AVX2)
namespace avx2 {
template <typename T>
const KernelTable<T>& table();
}
#endif

}  // namespace ccanet::kernels

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "ccanet/error.hpp"
#include "ccanet/kernels.hpp"

namespace ccanet::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CCANET_HAS_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  const bool avx2_ok = cpu_has_avx2();
  if (const char* env = std::getenv("CCANET_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && avx2_ok) return Isa::avx2;
  }
  return avx2_ok ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& selection() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  if (isa == Isa::scalar) return true;
  return cpu_has_avx2();
}

template <typename T>
const KernelTable<T>& table(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return scalar::table<T>();
    case Isa::avx2:
#if defined(CCANET_HAS_AVX2)
      if (cpu_has_avx2()) return avx2::table<T>();
#endif
      break;
  }
  throw Error(ErrorCode::InvalidArgument,
              "kernel ISA '" + std::string(to_string(isa)) + "' is not available on this CPU");
}

template const KernelTable<float>& table<float>(Isa);
template const KernelTable<double>& table<double>(Isa);

Isa active_isa() { return selection().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw Error(ErrorCode::InvalidArgument,
                "kernel ISA '" + std::string(to_string(isa)) + "' is not available on this CPU");
  }
  selection().store(isa, std::memory_order_relaxed);
}

}  // namespace ccanet::kernels

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <utility>

namespace ccanet {

// Counter-based generator: the k-th output of a stream with key s is
// splitmix64(s + (k + 1) * 0x9E3779B97F4A7C15). The state is just (key, counter),
// so a stream can be reproduced from its key on any platform.
class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t key = 0, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be > 0. Lemire-style rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (the cosine branch only, so one draw
  // consumes exactly two uniforms).
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

// Derives an independent stream key from a root seed and a label path, e.g.
// derive_stream(seed, "pairs", {epoch, batch, movie}).
std::uint64_t derive_stream(std::uint64_t seed, std::string_view label,
                            std::initializer_list<std::uint64_t> path = {});

inline Rng make_stream(std::uint64_t seed, std::string_view label,
                       std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_stream(seed, label, path));
}

}  // namespace ccanet

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ccanet/datamodel.hpp"
#include "ccanet/rng.hpp"

namespace ccanet {
namespace {

std::vector<double> unit_vector(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

void append_noisy(std::vector<float>& out, std::span<const double> center, double sigma, Rng& rng) {
  for (const double c : center) out.push_back(static_cast<float>(c + sigma * rng.normal()));
}

// First k entries of a seeded partial Fisher-Yates shuffle of [0, n).
std::vector<std::uint32_t> sample_without_replacement(Rng& rng, std::uint32_t n, std::uint32_t k) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::uint32_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

std::uint32_t planted_key_count(const SyntheticSpec& spec) {
  return static_cast<std::uint32_t>(std::lround(spec.key_rate * spec.shots_per_movie));
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (!(spec.key_rate > 0.0 && spec.key_rate < 1.0) || !(spec.noise_sigma >= 0.0) ||
      !(spec.trailer_fraction_of_keys > 0.0 && spec.trailer_fraction_of_keys <= 1.0) ||
      spec.n_movies == 0 || spec.feature_dim == 0 || spec.distractor_centroids < 2) {
    throw Error(ErrorCode::DegenerateSpec, "synthetic spec violates its invariants");
  }
  const std::uint32_t n_keys = planted_key_count(spec);
  if (n_keys == 0) {
    throw Error(ErrorCode::DegenerateSpec, "round(key_rate * shots_per_movie) = 0");
  }
  if (n_keys >= spec.shots_per_movie) {
    throw Error(ErrorCode::DegenerateSpec, "every shot would be a key shot");
  }

  Rng rng = make_stream(spec.seed, "synthetic");
  const std::size_t d = spec.feature_dim;
  const std::vector<double> key_centroid = unit_vector(rng, d);
  std::vector<std::vector<double>> distractors;
  for (std::uint32_t c = 0; c < spec.distractor_centroids; ++c) distractors.push_back(unit_vector(rng, d));

  const auto n_trailer = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::lround(spec.trailer_fraction_of_keys * n_keys)));

  SyntheticDataset out;
  for (std::uint32_t m = 0; m < spec.n_movies; ++m) {
    std::vector<std::uint32_t> keys = sample_without_replacement(rng, spec.shots_per_movie, n_keys);
    std::sort(keys.begin(), keys.end());
    std::vector<std::uint8_t> is_key(spec.shots_per_movie, 0);
    for (const auto k : keys) is_key[k] = 1;

    std::vector<float> shots;
    shots.reserve(static_cast<std::size_t>(spec.shots_per_movie) * d);
    for (std::uint32_t s = 0; s < spec.shots_per_movie; ++s) {
      if (is_key[s]) {
        append_noisy(shots, key_centroid, spec.noise_sigma, rng);
      } else {
        const auto c = rng.below(distractors.size());
        append_noisy(shots, distractors[c], spec.noise_sigma, rng);
      }
    }

    const std::vector<std::uint32_t> picked = sample_without_replacement(rng, n_keys, n_trailer);
    std::vector<float> trailer;
    trailer.reserve(static_cast<std::size_t>(n_trailer) * d);
    for (const auto p : picked) {
      const std::size_t row = keys[p];
      std::vector<double> base(shots.begin() + static_cast<long>(row * d),
                               shots.begin() + static_cast<long>((row + 1) * d));
      append_noisy(trailer, base, spec.noise_sigma, rng);
    }

    char id[32];
    std::snprintf(id, sizeof id, "synthetic_%03u", m);
    MovieRecord movie;
    movie.movie_id = id;
    movie.shots = FeatureMatrix(spec.shots_per_movie, d, std::move(shots));
    movie.ground_truth = keys;
    out.movies.push_back(std::move(movie));
    out.trailers.push_back(TrailerRecord{std::string(id) + "_trailer", FeatureMatrix(n_trailer, d, std::move(trailer))});
  }
  return out;
}

}  // namespace ccanet

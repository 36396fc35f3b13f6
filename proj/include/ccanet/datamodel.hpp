// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccanet/matrix.hpp"

namespace ccanet {

// Per-shot feature vectors, one row per shot in temporal order. Always
// non-empty and finite; the constructor enforces both.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(Matrix<float> m);
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : FeatureMatrix(Matrix<float>(rows, cols, std::move(data))) {}

  std::size_t rows() const { return m_.rows(); }
  std::size_t cols() const { return m_.cols(); }
  std::span<const float> row(std::size_t r) const { return m_.row(r); }
  const Matrix<float>& matrix() const { return m_; }

  template <typename T>
  Matrix<T> as() const {
    return m_.template cast<T>();
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  Matrix<float> m_;
};

struct ShotSpan {
  std::uint32_t shot_index = 0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;  // exclusive

  std::int64_t length() const { return end_frame - start_frame; }
  friend bool operator==(const ShotSpan&, const ShotSpan&) = default;
};

struct MovieRecord {
  std::string movie_id;
  FeatureMatrix shots;
  std::optional<std::vector<ShotSpan>> spans;
  std::optional<std::vector<std::uint32_t>> ground_truth;

  // Throws ManifestInvalid when ground-truth indices or span counts disagree
  // with the feature rows.
  void validate() const;
  // 0/1 label per shot; requires ground_truth.
  std::vector<std::uint8_t> labels() const;
};

struct TrailerRecord {
  std::string trailer_id;
  FeatureMatrix shots;
};

// ---- Feature files -------------------------------------------------------
// "CCAF", u32 version=1, u32 rows, u32 cols, rows*cols f32; all little-endian,
// nothing after the payload.

inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::string encode_feature_file(const FeatureMatrix& m);
FeatureMatrix decode_feature_file(std::string_view bytes, const std::string& source = "<memory>");
FeatureMatrix load_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m);

// ---- Small JSON side files ------------------------------------------------

std::vector<std::uint32_t> load_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const std::vector<std::uint32_t>& indices);
std::vector<ShotSpan> load_spans(const std::filesystem::path& path);
void write_spans(const std::filesystem::path& path, const std::vector<ShotSpan>& spans);

// Checks start < end, ascending start and no overlap.
void validate_spans(const std::vector<ShotSpan>& spans, const std::string& what);

// ---- Snippet aggregation ----------------------------------------------------

enum class EmptyShotPolicy { drop, zero_fill, error };

struct AggregationResult {
  FeatureMatrix shots;                    // one row per kept shot
  std::vector<std::uint32_t> kept;        // shot_index of every output row
  std::vector<std::uint32_t> empty;       // shots that received no snippet
};

// A snippet belongs to a shot iff strictly more than 70% of its frames lie in
// the shot (checked as covered*10 > length*7 on integer frame counts). Each
// shot's feature is the mean of its snippets.
AggregationResult aggregate_snippets_to_shots(const FeatureMatrix& snippets,
                                              const std::vector<ShotSpan>& snippet_spans,
                                              const std::vector<ShotSpan>& shot_spans,
                                              EmptyShotPolicy policy = EmptyShotPolicy::drop);

// ---- Synthetic data ---------------------------------------------------------

struct SyntheticSpec {
  std::uint32_t n_movies = 20;
  std::uint32_t shots_per_movie = 200;
  double key_rate = 0.06;
  std::uint32_t feature_dim = 512;
  double noise_sigma = 0.5;
  double trailer_fraction_of_keys = 0.5;
  std::uint64_t seed = 0;
  std::uint32_t distractor_centroids = 3;
};

struct SyntheticDataset {
  std::vector<MovieRecord> movies;
  std::vector<TrailerRecord> trailers;
};

// Shots are drawn around one shared "key" centroid (the planted positives)
// or one of the distractor centroids, all unit vectors, plus N(0, sigma^2 I)
// noise. Each trailer holds a random subset of its movie's key shots with
// fresh noise added. Output depends only on `spec`.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

std::uint32_t planted_key_count(const SyntheticSpec& spec);

// ---- Manifest and dataset ----------------------------------------------------

struct ManifestPair {
  std::string movie_id;
  std::filesystem::path movie;
  std::filesystem::path trailer;
  std::optional<std::filesystem::path> ground_truth;
  std::optional<std::filesystem::path> spans;
  std::string domain = "default";
};

struct DatasetManifest {
  std::uint32_t feature_dim = 0;
  std::vector<ManifestPair> pairs;
  // Relative paths in `pairs` resolve against this directory.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct Violation {
  std::string file;
  std::optional<std::size_t> row;
  std::string kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

struct DatasetNeeds {
  bool trailers = true;
  bool ground_truth = true;
};

ValidationReport validate_manifest(const DatasetManifest& manifest, DatasetNeeds needs = {});

struct Example {
  MovieRecord movie;
  std::optional<TrailerRecord> trailer;
  std::string domain = "default";
};

using Dataset = std::vector<Example>;

// Loads only what `needs` asks for: with trailers=false no trailer file is
// opened, with ground_truth=false no label file is opened.
Dataset load_dataset(const DatasetManifest& manifest, DatasetNeeds needs = {});

// Writes features, trailers and labels under `dir` and returns the manifest
// (relative paths, base_dir = dir). Does not write the manifest file itself.
DatasetManifest write_dataset_files(const std::filesystem::path& dir, const Dataset& data,
                                    std::string_view subdir = "features");

}  // namespace ccanet

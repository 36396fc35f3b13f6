// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "json.hpp"

#include "ccanet/binary_io.hpp"
#include "ccanet/datamodel.hpp"

namespace fs = std::filesystem;

namespace ccanet {

fs::path DatasetManifest::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest load_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(binio::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    m.feature_dim = j.at("feature_dim").get<std::uint32_t>();
    const auto& pairs = j.at("pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      ManifestPair mp;
      mp.movie_id = p.at("movie_id").get<std::string>();
      mp.movie = p.at("movie").get<std::string>();
      mp.trailer = p.at("trailer").get<std::string>();
      if (p.contains("ground_truth") && !p["ground_truth"].is_null())
        mp.ground_truth = p["ground_truth"].get<std::string>();
      if (p.contains("spans") && !p["spans"].is_null()) mp.spans = p["spans"].get<std::string>();
      if (p.contains("domain")) mp.domain = p["domain"].get<std::string>();
      m.pairs.push_back(std::move(mp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : manifest.pairs) {
    nlohmann::json e = {{"movie_id", p.movie_id},
                        {"movie", p.movie.generic_string()},
                        {"trailer", p.trailer.generic_string()},
                        {"ground_truth", p.ground_truth ? nlohmann::json(p.ground_truth->generic_string())
                                                        : nlohmann::json(nullptr)},
                        {"domain", p.domain}};
    if (p.spans) e["spans"] = p.spans->generic_string();
    pairs.push_back(std::move(e));
  }
  const nlohmann::json j = {{"feature_dim", manifest.feature_dim}, {"pairs", std::move(pairs)}};
  binio::write_file(path, j.dump(2) + "\n");
}

ValidationReport validate_manifest(const DatasetManifest& manifest, DatasetNeeds needs) {
  ValidationReport report;
  auto add = [&](const fs::path& file, std::optional<std::size_t> row, std::string kind, std::string msg) {
    report.violations.push_back(Violation{file.string(), row, std::move(kind), std::move(msg)});
  };

  // Feature files are read whole; a violation names its row where one applies.
  auto check_features = [&](const fs::path& file) -> std::optional<FeatureMatrix> {
    if (!fs::exists(file)) {
      add(file, std::nullopt, "missing", "file does not exist");
      return std::nullopt;
    }
    try {
      FeatureMatrix m = load_feature_file(file);
      if (m.cols() != manifest.feature_dim) {
        add(file, std::nullopt, "dimension",
            std::to_string(m.cols()) + " columns, manifest feature_dim is " + std::to_string(manifest.feature_dim));
      }
      return m;
    } catch (const Error& e) {
      std::optional<std::size_t> row;
      const std::string what = e.what();
      if (const auto pos = what.find("(row "); pos != std::string::npos)
        row = std::stoul(what.substr(pos + 5));
      add(file, row, to_string(e.code()), what);
      return std::nullopt;
    }
  };

  if (manifest.pairs.empty()) add(manifest.base_dir, std::nullopt, "empty", "manifest lists no pairs");

  for (const auto& p : manifest.pairs) {
    const fs::path movie_path = manifest.resolve(p.movie);
    const auto movie = check_features(movie_path);
    if (needs.trailers) {
      const fs::path trailer_path = manifest.resolve(p.trailer);
      const auto trailer = check_features(trailer_path);
      if (movie && trailer && movie->cols() != trailer->cols()) {
        add(trailer_path, std::nullopt, "dimension",
            "trailer has " + std::to_string(trailer->cols()) + " columns, movie has " +
                std::to_string(movie->cols()));
      }
    }
    if (needs.ground_truth && p.ground_truth) {
      const fs::path gt_path = manifest.resolve(*p.ground_truth);
      if (!fs::exists(gt_path)) {
        add(gt_path, std::nullopt, "missing", "file does not exist");
      } else {
        try {
          const auto gt = load_ground_truth(gt_path);
          for (std::size_t i = 0; i < gt.size(); ++i) {
            if (movie && gt[i] >= movie->rows()) {
              add(gt_path, i, "out_of_bounds",
                  "index " + std::to_string(gt[i]) + " >= " + std::to_string(movie->rows()) + " shots");
            }
          }
        } catch (const Error& e) {
          add(gt_path, std::nullopt, to_string(e.code()), e.what());
        }
      }
    }
    if (p.spans) {
      const fs::path spans_path = manifest.resolve(*p.spans);
      try {
        const auto spans = load_spans(spans_path);
        if (movie && spans.size() != movie->rows()) {
          add(spans_path, std::nullopt, "span_count",
              std::to_string(spans.size()) + " spans for " + std::to_string(movie->rows()) + " shots");
        }
      } catch (const Error& e) {
        add(spans_path, std::nullopt, to_string(e.code()), e.what());
      }
    }
  }
  return report;
}

Dataset load_dataset(const DatasetManifest& manifest, DatasetNeeds needs) {
  Dataset out;
  for (const auto& p : manifest.pairs) {
    Example ex;
    ex.domain = p.domain;
    ex.movie.movie_id = p.movie_id;
    ex.movie.shots = load_feature_file(manifest.resolve(p.movie));
    if (ex.movie.shots.cols() != manifest.feature_dim) {
      throw Error(ErrorCode::ShapeMismatch, p.movie_id + ": movie has " + std::to_string(ex.movie.shots.cols()) +
                                                " columns, manifest says " + std::to_string(manifest.feature_dim));
    }
    if (needs.ground_truth && p.ground_truth) ex.movie.ground_truth = load_ground_truth(manifest.resolve(*p.ground_truth));
    if (p.spans) ex.movie.spans = load_spans(manifest.resolve(*p.spans));
    ex.movie.validate();
    if (needs.trailers) {
      TrailerRecord t{p.movie_id + "_trailer", load_feature_file(manifest.resolve(p.trailer))};
      if (t.shots.cols() != ex.movie.shots.cols()) {
        throw Error(ErrorCode::ShapeMismatch, p.movie_id + ": trailer/movie feature width differ");
      }
      ex.trailer = std::move(t);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

DatasetManifest write_dataset_files(const fs::path& dir, const Dataset& data, std::string_view subdir) {
  DatasetManifest m;
  m.base_dir = dir;
  if (data.empty()) throw Error(ErrorCode::ManifestInvalid, "cannot write an empty dataset");
  m.feature_dim = static_cast<std::uint32_t>(data.front().movie.shots.cols());
  const fs::path sub(subdir);
  for (const auto& ex : data) {
    ManifestPair p;
    p.movie_id = ex.movie.movie_id;
    p.domain = ex.domain;
    p.movie = sub / (ex.movie.movie_id + ".movie.ccaf");
    write_feature_file(dir / p.movie, ex.movie.shots);
    p.trailer = sub / (ex.movie.movie_id + ".trailer.ccaf");
    if (ex.trailer) write_feature_file(dir / p.trailer, ex.trailer->shots);
    if (ex.movie.ground_truth) {
      p.ground_truth = sub / (ex.movie.movie_id + ".gt.json");
      write_ground_truth(dir / *p.ground_truth, *ex.movie.ground_truth);
    }
    if (ex.movie.spans) {
      p.spans = sub / (ex.movie.movie_id + ".spans.json");
      write_spans(dir / *p.spans, *ex.movie.spans);
    }
    m.pairs.push_back(std::move(p));
  }
  return m;
}

}  // namespace ccanet

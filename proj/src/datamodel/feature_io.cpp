// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <fstream>

#include "json.hpp"

#include "ccanet/binary_io.hpp"
#include "ccanet/datamodel.hpp"

namespace ccanet {
namespace {

constexpr std::string_view kMagic = "CCAF";
constexpr std::size_t kHeaderBytes = 16;

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = binio::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
  }
}

}  // namespace

FeatureMatrix::FeatureMatrix(Matrix<float> m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.cols() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "feature matrix must be non-empty, got " + m_.shape_string());
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (!std::isfinite(m_[i])) {
      throw Error(ErrorCode::NonFiniteValue, "value at row " + std::to_string(i / m_.cols()) +
                                                 ", col " + std::to_string(i % m_.cols()));
    }
  }
}

void MovieRecord::validate() const {
  if (ground_truth) {
    for (const auto idx : *ground_truth) {
      if (idx >= shots.rows()) {
        throw Error(ErrorCode::ManifestInvalid, movie_id + ": ground-truth index " +
                                                    std::to_string(idx) + " >= " +
                                                    std::to_string(shots.rows()) + " shots");
      }
    }
  }
  if (spans && spans->size() != shots.rows()) {
    throw Error(ErrorCode::ManifestInvalid, movie_id + ": " + std::to_string(spans->size()) +
                                                " spans for " + std::to_string(shots.rows()) +
                                                " shots");
  }
}

std::vector<std::uint8_t> MovieRecord::labels() const {
  if (!ground_truth) throw Error(ErrorCode::ManifestInvalid, movie_id + ": no ground truth loaded");
  std::vector<std::uint8_t> out(shots.rows(), 0);
  for (const auto idx : *ground_truth) out.at(idx) = 1;
  return out;
}

std::string encode_feature_file(const FeatureMatrix& m) {
  binio::Writer w;
  w.bytes(kMagic);
  w.u32(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (const float v : m.matrix().values()) w.f32(v);
  return w.buffer();
}

FeatureMatrix decode_feature_file(std::string_view bytes, const std::string& source) {
  if (bytes.size() < 4 && kMagic.substr(0, bytes.size()) == bytes) {
    throw Error(ErrorCode::TruncatedFile, source + ": " + std::to_string(bytes.size()) + " bytes, header needs 16");
  }
  if (bytes.size() < 4 || bytes.substr(0, 4) != kMagic) {
    throw Error(ErrorCode::MagicMismatch, source + ": expected \"CCAF\" at offset 0");
  }
  binio::Reader r(bytes, source);
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kFeatureFileVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                source + ": feature file version " + std::to_string(version) + " at offset 4");
  }
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::ShapeMismatch,
                source + ": header declares " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  const std::size_t expected = kHeaderBytes + 4 * n;
  if (bytes.size() < expected) {
    throw Error(ErrorCode::TruncatedFile,
                source + ": payload ends at offset " + std::to_string(bytes.size()) + ", expected " +
                    std::to_string(expected) + " bytes for " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = r.f32();
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::NonFiniteValue,
                  source + ": non-finite value at offset " + std::to_string(kHeaderBytes + 4 * i) +
                      " (row " + std::to_string(i / cols) + ", col " + std::to_string(i % cols) + ")");
    }
  }
  r.expect_end();
  return FeatureMatrix(rows, cols, std::move(data));
}

FeatureMatrix load_feature_file(const std::filesystem::path& path) {
  return decode_feature_file(binio::read_file(path), path.string());
}

void write_feature_file(const std::filesystem::path& path, const FeatureMatrix& m) {
  binio::write_file(path, encode_feature_file(m));
}

std::vector<std::uint32_t> load_ground_truth(const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (!j.is_array()) throw Error(ErrorCode::ManifestInvalid, path.string() + ": expected a JSON array");
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<std::int64_t>() < 0) {
      throw Error(ErrorCode::ManifestInvalid,
                  path.string() + ": entry " + std::to_string(i) + " is not a non-negative integer");
    }
    out.push_back(j[i].get<std::uint32_t>());
  }
  return out;
}

void write_ground_truth(const std::filesystem::path& path, const std::vector<std::uint32_t>& indices) {
  binio::write_file(path, nlohmann::json(indices).dump() + "\n");
}

void validate_spans(const std::vector<ShotSpan>& spans, const std::string& what) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].start_frame >= spans[i].end_frame) {
      throw Error(ErrorCode::ManifestInvalid, what + ": span " + std::to_string(i) + " has start >= end");
    }
    if (i > 0 && spans[i].start_frame < spans[i - 1].end_frame) {
      throw Error(ErrorCode::ManifestInvalid,
                  what + ": span " + std::to_string(i) + " overlaps or precedes span " + std::to_string(i - 1));
    }
  }
}

std::vector<ShotSpan> load_spans(const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (!j.is_array()) throw Error(ErrorCode::ManifestInvalid, path.string() + ": expected a JSON array");
  std::vector<ShotSpan> out;
  try {
    for (const auto& e : j) {
      out.push_back(ShotSpan{e.at("shot_index").get<std::uint32_t>(), e.at("start_frame").get<std::int64_t>(),
                             e.at("end_frame").get<std::int64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, path.string() + ": " + e.what());
  }
  validate_spans(out, path.string());
  return out;
}

void write_spans(const std::filesystem::path& path, const std::vector<ShotSpan>& spans) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : spans) {
    j.push_back({{"shot_index", s.shot_index}, {"start_frame", s.start_frame}, {"end_frame", s.end_frame}});
  }
  binio::write_file(path, j.dump(2) + "\n");
}

}  // namespace ccanet

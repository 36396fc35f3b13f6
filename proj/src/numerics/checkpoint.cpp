// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/checkpoint.hpp"

#include "ccanet/binary_io.hpp"

namespace ccanet {
namespace {

constexpr std::string_view kMagic = "CCKP";

void put_entry(binio::Writer& w, const CheckpointEntry& e) {
  w.str(e.name);
  w.u32(static_cast<std::uint32_t>(e.value.rows()));
  w.u32(static_cast<std::uint32_t>(e.value.cols()));
  for (const float v : e.value.values()) w.f32(v);
}

CheckpointEntry get_entry(binio::Reader& r) {
  CheckpointEntry e;
  e.name = r.str();
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  if (r.remaining() / 4 < n) {
    throw Error(ErrorCode::TruncatedFile, r.source() + ": entry '" + e.name + "' needs " +
                                              std::to_string(n) + " values at offset " +
                                              std::to_string(r.offset()));
  }
  std::vector<float> data(n);
  for (auto& v : data) v = r.f32();
  e.value = Matrix<float>(rows, cols, std::move(data));
  return e;
}

}  // namespace

std::string encode_checkpoint(const CheckpointData& data) {
  binio::Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(data.params.size()));
  for (const auto& e : data.params) put_entry(w, e);
  w.u32(static_cast<std::uint32_t>(data.optimizer.size()));
  for (const auto& e : data.optimizer) put_entry(w, e);
  w.u64(data.adam_step);
  w.str(data.metadata_json);
  return w.buffer();
}

CheckpointData decode_checkpoint(std::string_view bytes, const std::string& source) {
  binio::Reader r(bytes, source);
  if (bytes.size() < 4 || r.bytes(4) != kMagic) {
    throw Error(ErrorCode::MagicMismatch, source + ": expected \"CCKP\" at offset 0");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                source + ": checkpoint version " + std::to_string(version) + " at offset 4");
  }
  CheckpointData out;
  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) out.params.push_back(get_entry(r));
  const std::uint32_t n_opt = r.u32();
  for (std::uint32_t i = 0; i < n_opt; ++i) out.optimizer.push_back(get_entry(r));
  out.adam_step = r.u64();
  out.metadata_json = r.str();
  r.expect_end();
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  binio::write_file(path, encode_checkpoint(data));
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binio::read_file(path), path.string());
}

}  // namespace ccanet

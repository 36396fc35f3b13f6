// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ccanet/matrix.hpp"

namespace ccanet {

struct CheckpointEntry {
  std::string name;
  Matrix<float> value;
};

// On-disk layout (little-endian):
//   "CCKP" u32 version=1
//   u32 count, count x entry            -- parameters
//   u32 count, count x entry            -- Adam moments, named "m/<p>" and "v/<p>"
//   u64 adam step
//   u32 length, bytes                   -- JSON metadata (config, epoch, provenance)
// entry := u32 name_len, name, u32 rows, u32 cols, rows*cols f32
struct CheckpointData {
  std::vector<CheckpointEntry> params;
  std::vector<CheckpointEntry> optimizer;
  std::uint64_t adam_step = 0;
  std::string metadata_json;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace ccanet

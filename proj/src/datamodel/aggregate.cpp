// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <algorithm>

#include "ccanet/datamodel.hpp"

namespace ccanet {

AggregationResult aggregate_snippets_to_shots(const FeatureMatrix& snippets,
                                              const std::vector<ShotSpan>& snippet_spans,
                                              const std::vector<ShotSpan>& shot_spans,
                                              EmptyShotPolicy policy) {
  if (snippet_spans.size() != snippets.rows()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(snippet_spans.size()) + " snippet spans for " +
                                              std::to_string(snippets.rows()) + " snippet rows");
  }
  for (std::size_t i = 0; i < snippet_spans.size(); ++i) {
    if (snippet_spans[i].length() < 1) {
      throw Error(ErrorCode::ManifestInvalid, "snippet " + std::to_string(i) + " covers no frames");
    }
  }
  validate_spans(shot_spans, "shot spans");

  const std::size_t d = snippets.cols();
  std::vector<std::vector<std::uint32_t>> members(shot_spans.size());
  for (std::size_t s = 0; s < snippet_spans.size(); ++s) {
    const ShotSpan& sn = snippet_spans[s];
    for (std::size_t k = 0; k < shot_spans.size(); ++k) {
      const ShotSpan& sh = shot_spans[k];
      const std::int64_t covered =
          std::max<std::int64_t>(0, std::min(sn.end_frame, sh.end_frame) - std::max(sn.start_frame, sh.start_frame));
      // Strictly more than 70%, in exact integer arithmetic.
      if (covered * 10 > sn.length() * 7) {
        members[k].push_back(static_cast<std::uint32_t>(s));
        break;  // at most one shot can hold > 70% of a snippet
      }
    }
  }

  AggregationResult result;
  std::vector<float> out;
  for (std::size_t k = 0; k < shot_spans.size(); ++k) {
    if (members[k].empty()) {
      result.empty.push_back(shot_spans[k].shot_index);
      if (policy == EmptyShotPolicy::error) {
        throw Error(ErrorCode::EmptyShot,
                    "shot " + std::to_string(shot_spans[k].shot_index) + " received no snippet");
      }
      if (policy == EmptyShotPolicy::drop) continue;
      out.insert(out.end(), d, 0.0f);
      result.kept.push_back(shot_spans[k].shot_index);
      continue;
    }
    std::vector<double> acc(d, 0.0);
    for (const auto s : members[k]) {
      const auto r = snippets.row(s);
      for (std::size_t c = 0; c < d; ++c) acc[c] += r[c];
    }
    const double inv = 1.0 / static_cast<double>(members[k].size());
    for (std::size_t c = 0; c < d; ++c) out.push_back(static_cast<float>(acc[c] * inv));
    result.kept.push_back(shot_spans[k].shot_index);
  }
  if (result.kept.empty()) {
    throw Error(ErrorCode::EmptyShot, "no shot received any snippet");
  }
  result.shots = FeatureMatrix(result.kept.size(), d, std::move(out));
  return result;
}

}  // namespace ccanet

// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/evaluation.hpp"

#include <algorithm>
#include <numeric>

namespace ccanet {
namespace {

void check_lengths(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(scores.size()) + " scores vs " +
                                              std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

std::vector<std::uint32_t> ranked_order(std::span<const double> scores) {
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  return order;
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_lengths(scores, labels);
  const auto order = ranked_order(scores);
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw Error(ErrorCode::NoPositives, "ranked list of " + std::to_string(scores.size()) + " items has no positive");
  return sum / static_cast<double>(hits);
}

double rank_at_n(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t n,
                 WindowMode mode) {
  check_lengths(scores, labels);
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "Rank@N needs N >= 2, got " + std::to_string(n));
  const std::size_t len = scores.size();
  double sum = 0.0;
  std::size_t windows = 0;
  auto window = [&](std::size_t begin, std::size_t end) {
    if (std::none_of(labels.begin() + begin, labels.begin() + end, [](std::uint8_t l) { return l != 0; })) return;
    sum += average_precision(scores.subspan(begin, end - begin), labels.subspan(begin, end - begin));
    ++windows;
  };
  if (mode == WindowMode::disjoint || n >= len) {
    for (std::size_t begin = 0; begin < len; begin += n) window(begin, std::min(len, begin + n));
  } else {
    for (std::size_t begin = 0; begin + n <= len; ++begin) window(begin, begin + n);
  }
  if (windows == 0) throw Error(ErrorCode::NoPositiveWindows, "no window of " + std::to_string(n) + " shots holds a positive");
  return sum / static_cast<double>(windows);
}

double topk_average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t k,
                              TopkDenominator denominator) {
  check_lengths(scores, labels);
  if (scores.size() < k) {
    throw Error(ErrorCode::ListTooShort, "top-" + std::to_string(k) + " AP on a list of " + std::to_string(scores.size()));
  }
  const std::size_t total = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; }));
  if (total == 0) throw Error(ErrorCode::NoPositives, "top-k AP on a list without positives");
  const auto order = ranked_order(scores);
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    if (labels[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  switch (denominator) {
    case TopkDenominator::all_positives:
      return sum / static_cast<double>(total);
    case TopkDenominator::min_p_k:
      return sum / static_cast<double>(std::min(total, k));
    case TopkDenominator::retrieved:
      return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
  }
  return 0.0;
}

double top5_map(std::span<const RankedList> videos, TopkDenominator denominator) {
  if (videos.empty()) throw Error(ErrorCode::InvalidArgument, "top-5 mAP over zero videos");
  double sum = 0.0;
  for (const RankedList& v : videos) sum += topk_average_precision(v.scores, v.labels, 5, denominator);
  return sum / static_cast<double>(videos.size());
}

std::vector<std::uint8_t> tvsum_ground_truth(const std::vector<std::vector<double>>& frame_scores) {
  std::vector<double> shot(frame_scores.size());
  for (std::size_t s = 0; s < shot.size(); ++s) {
    if (frame_scores[s].empty()) throw Error(ErrorCode::EmptyShot, "shot " + std::to_string(s) + " has no frame scores");
    shot[s] = std::accumulate(frame_scores[s].begin(), frame_scores[s].end(), 0.0) /
              static_cast<double>(frame_scores[s].size());
  }
  const auto order = ranked_order(shot);
  std::vector<std::uint8_t> labels(shot.size(), 0);
  for (std::size_t r = 0; r < shot.size() / 2; ++r) labels[order[r]] = 1;
  return labels;
}

std::string_view to_string(TopkDenominator d) {
  switch (d) {
    case TopkDenominator::all_positives: return "all_positives";
    case TopkDenominator::min_p_k: return "min_p_k";
    case TopkDenominator::retrieved: return "retrieved";
  }
  return "unknown";
}

TopkDenominator parse_topk_denominator(std::string_view name) {
  if (name == "all_positives") return TopkDenominator::all_positives;
  if (name == "min_p_k") return TopkDenominator::min_p_k;
  if (name == "retrieved") return TopkDenominator::retrieved;
  throw Error(ErrorCode::ConfigError, "unknown top-k denominator '" + std::string(name) + "'");
}

}  // namespace ccanet

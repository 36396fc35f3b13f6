// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ccanet/config.hpp"
#include "ccanet/datamodel.hpp"
#include "ccanet/trainer.hpp"

namespace ccanet {

// ---- Metrics ------------------------------------------------------------------

// Indices sorted by descending score, ties by ascending index.
std::vector<std::uint32_t> ranked_order(std::span<const double> scores);

// (1/P) sum over positive ranks k of precision@k. Throws NoPositives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

enum class WindowMode { disjoint, sliding };

// Mean AP over windows of n consecutive shots in temporal order. Disjoint
// windows keep a short last window; windows without a positive are skipped.
// Throws InvalidArgument for n < 2 and NoPositiveWindows when nothing is left.
double rank_at_n(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t n,
                 WindowMode mode = WindowMode::disjoint);

// AP over the first k ranked items. The denominator is the total positive
// count P, min(P, k) or the number of positives retrieved in the top k
// (a video with none retrieved scores 0). Throws ListTooShort when the list
// has fewer than k items and NoPositives when P = 0.
double topk_average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels, std::size_t k,
                              TopkDenominator denominator = TopkDenominator::all_positives);

struct RankedList {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

double top5_map(std::span<const RankedList> videos, TopkDenominator denominator = TopkDenominator::all_positives);

// Shot score = mean of its frame scores; the top floor(n/2) shots are
// positive, ties by ascending index.
std::vector<std::uint8_t> tvsum_ground_truth(const std::vector<std::vector<double>>& frame_scores);

std::string_view to_string(TopkDenominator d);
TopkDenominator parse_topk_denominator(std::string_view name);

// ---- Reports --------------------------------------------------------------------

struct MetricSpec {
  // recognised names: "rank@<N>", "rank@global", "top5"
  std::vector<std::string> names{"rank@10", "rank@20", "rank@global"};
  WindowMode window = WindowMode::disjoint;
  TopkDenominator topk = TopkDenominator::all_positives;
};

struct MovieResult {
  std::string movie_id;
  std::string domain;
  std::map<std::string, double> metrics;
};

struct EvalReport {
  std::string mode;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::string> metric_names;
  std::string window_mode = "disjoint";
  std::string topk_denominator = "all_positives";
  std::size_t splits = 1;
  std::vector<MovieResult> movies;
  std::map<std::string, std::map<std::string, double>> domains;  // domain -> metric -> mean
  std::map<std::string, double> overall;

  std::string to_json() const;
  // One row per (movie, metric).
  std::string to_csv() const;
};

EvalReport report_from_json(std::string_view text, const std::string& source = "<report>");
EvalReport load_report(const std::string& path);

MovieResult evaluate_scores(const std::string& movie_id, const std::string& domain, std::span<const double> scores,
                            std::span<const std::uint8_t> labels, const MetricSpec& spec);

// Fills per-domain and overall means from report.movies (ordered reduction).
void aggregate(EvalReport& report);

// Scores every movie of `data` with the model and computes the metrics.
// workers > 1 scores movies concurrently; results do not depend on it.
EvalReport evaluate(Model<double>& model, const TrainConfig& config, const Dataset& data, const MetricSpec& spec,
                    unsigned workers = 1);
EvalReport evaluate(Model<float>& model, const TrainConfig& config, const Dataset& data, const MetricSpec& spec,
                    unsigned workers = 1);

// Averages reports of independent splits metric by metric (movies are
// concatenated, aggregates are means of the split aggregates).
EvalReport average_splits(std::span<const EvalReport> reports);

// Modes x (domain, metric) table; one row per report mode in the order
// given, averaging reports that share a mode.
struct ReportTable {
  std::vector<std::string> rows;
  std::vector<std::pair<std::string, std::string>> columns;  // (domain, metric)
  std::vector<std::vector<double>> values;                   // NaN where missing

  std::string to_markdown() const;
  std::string to_json() const;
};

ReportTable make_table(std::span<const EvalReport> reports);

}  // namespace ccanet

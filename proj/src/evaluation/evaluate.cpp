// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <sstream>
#include <thread>

#include "ccanet/binary_io.hpp"
#include "ccanet/evaluation.hpp"
#include "json.hpp"

namespace ccanet {
namespace {

using nlohmann::json;

double metric_value(const std::string& name, std::span<const double> scores, std::span<const std::uint8_t> labels,
                    const MetricSpec& spec) {
  if (name == "rank@global") return average_precision(scores, labels);
  if (name == "top5") return topk_average_precision(scores, labels, 5, spec.topk);
  if (name.rfind("rank@", 0) == 0) {
    std::size_t n = 0;
    try {
      std::size_t used = 0;
      n = std::stoul(name.substr(5), &used);
      if (used != name.size() - 5) throw std::invalid_argument(name);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "unknown metric '" + name + "'");
    }
    return rank_at_n(scores, labels, n, spec.window);
  }
  throw Error(ErrorCode::ConfigError, "unknown metric '" + name + "'");
}

template <typename T>
EvalReport evaluate_impl(Model<T>& model, const TrainConfig& config, const Dataset& data, const MetricSpec& spec,
                         unsigned workers) {
  EvalReport report;
  report.mode = std::string(to_string(config.mode));
  report.config_hash = config_hash(config);
  report.seed = config.seed;
  report.version = library_version();
  report.metric_names = spec.names;
  report.window_mode = spec.window == WindowMode::disjoint ? "disjoint" : "sliding";
  report.topk_denominator = std::string(to_string(spec.topk));

  for (const Example& ex : data) {
    if (!ex.movie.ground_truth) {
      throw Error(ErrorCode::ManifestInvalid, "movie '" + ex.movie.movie_id + "' has no ground truth to evaluate against");
    }
  }
  const bool with_trailer = scoring_needs(config.mode).trailers;
  std::vector<std::vector<double>> scores(data.size());
  auto score_one = [&](std::size_t i, Model<T>& m) {
    const Example& ex = data[i];
    scores[i] = score_movie(m, config, ex.movie, with_trailer && ex.trailer ? &*ex.trailer : nullptr);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(data.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < data.size(); ++i) score_one(i, model);
  } else {
    // Each worker scores a strided slice with its own copy of the parameters.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          Model<T> local = model.template cast<T>();
          for (std::size_t i = w; i < data.size(); i += workers) score_one(i, local);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto labels = data[i].movie.labels();
    report.movies.push_back(evaluate_scores(data[i].movie.movie_id, data[i].domain, scores[i], labels, spec));
  }
  aggregate(report);
  return report;
}

json to_json_obj(const EvalReport& r) {
  json movies = json::array();
  for (const MovieResult& m : r.movies) {
    movies.push_back({{"movie_id", m.movie_id}, {"domain", m.domain}, {"metrics", m.metrics}});
  }
  return json{{"mode", r.mode},
              {"metrics", r.metric_names},
              {"conventions",
               {{"rank_windows", r.window_mode},
                {"empty_windows", "skipped"},
                {"partial_last_window", "evaluated"},
                {"topk_denominator", r.topk_denominator},
                {"ties", "ascending_index"}}},
              {"splits", r.splits},
              {"movies", std::move(movies)},
              {"domains", r.domains},
              {"overall", r.overall},
              {"provenance", {{"config_hash", r.config_hash}, {"seed", r.seed}, {"version", r.version}}}};
}

}  // namespace

MovieResult evaluate_scores(const std::string& movie_id, const std::string& domain, std::span<const double> scores,
                            std::span<const std::uint8_t> labels, const MetricSpec& spec) {
  MovieResult out{movie_id, domain, {}};
  for (const std::string& name : spec.names) out.metrics[name] = metric_value(name, scores, labels, spec);
  return out;
}

void aggregate(EvalReport& report) {
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> per_domain;
  std::map<std::string, std::pair<double, std::size_t>> all;
  for (const MovieResult& m : report.movies) {
    for (const auto& [name, value] : m.metrics) {
      auto& d = per_domain[m.domain][name];
      d.first += value;
      ++d.second;
      auto& a = all[name];
      a.first += value;
      ++a.second;
    }
  }
  report.domains.clear();
  report.overall.clear();
  for (const auto& [domain, metrics] : per_domain) {
    for (const auto& [name, acc] : metrics) report.domains[domain][name] = acc.first / static_cast<double>(acc.second);
  }
  for (const auto& [name, acc] : all) report.overall[name] = acc.first / static_cast<double>(acc.second);
}

EvalReport evaluate(Model<double>& model, const TrainConfig& config, const Dataset& data, const MetricSpec& spec,
                    unsigned workers) {
  return evaluate_impl(model, config, data, spec, workers);
}

EvalReport evaluate(Model<float>& model, const TrainConfig& config, const Dataset& data, const MetricSpec& spec,
                    unsigned workers) {
  return evaluate_impl(model, config, data, spec, workers);
}

EvalReport average_splits(std::span<const EvalReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::InvalidArgument, "no reports to average");
  EvalReport out = reports.front();
  out.movies.clear();
  out.domains.clear();
  out.overall.clear();
  out.splits = 0;
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> domains;
  std::map<std::string, std::pair<double, std::size_t>> overall;
  for (const EvalReport& r : reports) {
    if (r.mode != out.mode) {
      throw Error(ErrorCode::InvalidArgument, "cannot average splits of modes " + out.mode + " and " + r.mode);
    }
    out.movies.insert(out.movies.end(), r.movies.begin(), r.movies.end());
    out.splits += r.splits;
    for (const auto& [d, metrics] : r.domains) {
      for (const auto& [name, v] : metrics) {
        domains[d][name].first += v;
        ++domains[d][name].second;
      }
    }
    for (const auto& [name, v] : r.overall) {
      overall[name].first += v;
      ++overall[name].second;
    }
  }
  for (const auto& [d, metrics] : domains) {
    for (const auto& [name, acc] : metrics) out.domains[d][name] = acc.first / static_cast<double>(acc.second);
  }
  for (const auto& [name, acc] : overall) out.overall[name] = acc.first / static_cast<double>(acc.second);
  return out;
}

std::string EvalReport::to_json() const { return to_json_obj(*this).dump(2); }

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "movie_id,domain,metric,value\n";
  for (const MovieResult& m : movies) {
    for (const auto& [name, value] : m.metrics) os << m.movie_id << ',' << m.domain << ',' << name << ',' << value << '\n';
  }
  return os.str();
}

EvalReport report_from_json(std::string_view text, const std::string& source) {
  EvalReport r;
  try {
    const json j = json::parse(text);
    r.mode = j.at("mode").get<std::string>();
    r.metric_names = j.at("metrics").get<std::vector<std::string>>();
    r.window_mode = j.at("conventions").at("rank_windows").get<std::string>();
    r.topk_denominator = j.at("conventions").at("topk_denominator").get<std::string>();
    r.splits = j.value("splits", std::size_t{1});
    for (const auto& m : j.at("movies")) {
      r.movies.push_back({m.at("movie_id").get<std::string>(), m.at("domain").get<std::string>(),
                          m.at("metrics").get<std::map<std::string, double>>()});
    }
    r.domains = j.at("domains").get<std::map<std::string, std::map<std::string, double>>>();
    r.overall = j.at("overall").get<std::map<std::string, double>>();
    const json& p = j.at("provenance");
    r.config_hash = p.at("config_hash").get<std::string>();
    r.seed = p.at("seed").get<std::uint64_t>();
    r.version = p.at("version").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, source + ": " + e.what());
  }
  return r;
}

EvalReport load_report(const std::string& path) { return report_from_json(binio::read_file(path), path); }

}  // namespace ccanet

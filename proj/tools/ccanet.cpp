// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccanet/binary_io.hpp"
#include "ccanet/config.hpp"
#include "ccanet/datamodel.hpp"
#include "ccanet/error.hpp"
#include "ccanet/evaluation.hpp"
#include "ccanet/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ccanet;

namespace {

struct GenOptions {
  std::string out;
  SyntheticSpec spec;
  double test_fraction = 0.25;
};

struct TrainOptions {
  std::string manifest, out, config, resume;
  std::vector<std::string> overrides;
  bool quiet = false;
};

struct EvalOptions {
  std::string checkpoint, manifest, out, csv;
  std::string metrics = "rank@10,rank@20,rank@global";
  std::string topk = "all_positives";
  bool sliding = false;
  unsigned workers = 1;
};

struct GradOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
};

struct ExportOptions {
  std::string checkpoint, manifest, out;
};

struct ReportOptions {
  std::vector<std::string> reports;
  std::string out, json;
};

TrainConfig make_config(const std::string& path, const std::vector<std::string>& overrides,
                        TrainConfig defaults = {}) {
  TrainConfig c = path.empty() ? defaults : load_config(path);
  for (const auto& o : overrides) apply_override(c, o);
  return c;
}

void write_split(const fs::path& dir, const std::string& name, const DatasetManifest& all, std::size_t begin,
                 std::size_t end) {
  DatasetManifest m;
  m.feature_dim = all.feature_dim;
  m.base_dir = dir;
  m.pairs.assign(all.pairs.begin() + static_cast<std::ptrdiff_t>(begin), all.pairs.begin() + static_cast<std::ptrdiff_t>(end));
  write_manifest(dir / name, m);
}

int run_gen(const GenOptions& o) {
  const SyntheticDataset syn = generate_synthetic(o.spec);
  Dataset data;
  for (std::size_t i = 0; i < syn.movies.size(); ++i) data.push_back(Example{syn.movies[i], syn.trailers[i], "synthetic"});
  const fs::path dir(o.out);
  const DatasetManifest all = write_dataset_files(dir, data);
  const std::size_t n = all.pairs.size();
  const auto n_test = static_cast<std::size_t>(std::llround(o.test_fraction * static_cast<double>(n)));
  if (o.test_fraction > 0.0 && (n_test == 0 || n_test >= n)) {
    throw Error(ErrorCode::ConfigError, "field 'test-fraction' leaves an empty split for " + std::to_string(n) + " movies");
  }
  write_split(dir, "all.json", all, 0, n);
  write_split(dir, "train.json", all, 0, n - n_test);
  write_split(dir, "test.json", all, n - n_test, n);
  const nlohmann::json spec = {{"n_movies", o.spec.n_movies},
                               {"shots_per_movie", o.spec.shots_per_movie},
                               {"key_rate", o.spec.key_rate},
                               {"feature_dim", o.spec.feature_dim},
                               {"noise_sigma", o.spec.noise_sigma},
                               {"trailer_fraction_of_keys", o.spec.trailer_fraction_of_keys},
                               {"distractor_centroids", o.spec.distractor_centroids},
                               {"seed", o.spec.seed},
                               {"test_fraction", o.test_fraction},
                               {"version", library_version()}};
  binio::write_file(dir / "synthetic.json", spec.dump(2));
  std::cout << "wrote " << n << " movies (" << n - n_test << " train, " << n_test << " test) to " << dir.string() << "\n";
  return 0;
}

int run_validate(const std::string& manifest_path, const std::string& mode) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const DatasetNeeds needs = mode.empty() ? DatasetNeeds{} : training_needs(parse_mode(mode));
  const ValidationReport report = validate_manifest(manifest, needs);
  for (const Violation& v : report.violations) {
    std::cout << v.file;
    if (v.row) std::cout << ":" << *v.row;
    std::cout << ": " << v.kind << ": " << v.message << "\n";
  }
  std::cout << report.violations.size() << " violation(s)\n";
  return report.ok() ? 0 : exit_code_for(ErrorCategory::data);
}

Dataset load_checked(const std::string& manifest_path, DatasetNeeds needs) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const ValidationReport report = validate_manifest(manifest, needs);
  if (!report.ok()) {
    const Violation& v = report.violations.front();
    throw Error(ErrorCode::ManifestInvalid, v.file + (v.row ? ":" + std::to_string(*v.row) : std::string()) + ": " +
                                                v.kind + ": " + v.message + " (" +
                                                std::to_string(report.violations.size()) + " violation(s))");
  }
  return load_dataset(manifest, needs);
}

template <typename T>
int train_with(const TrainConfig& config, const Dataset& data, const TrainOptions& o) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  Trainer<T> trainer(config, data);
  trainer.set_dump_path(dir / "nonfinite_dump.json");
  std::string log_text;
  if (!o.resume.empty()) {
    trainer.restore(read_checkpoint(o.resume));
    if (fs::exists(dir / "train_log.jsonl")) log_text = binio::read_file(dir / "train_log.jsonl");
  }
  const std::string provenance = provenance_json(config);
  const std::uint32_t remaining = config.epochs > trainer.epoch() ? config.epochs - trainer.epoch() : 0;
  trainer.run(remaining, [&](const EpochLog& log) {
    auto line = nlohmann::json::parse(log.to_json());
    line["provenance"] = nlohmann::json::parse(provenance);
    log_text += line.dump() + "\n";
    if (!o.quiet) std::cout << line.dump() << "\n";
  });
  write_checkpoint(dir / "checkpoint.cckp", trainer.to_checkpoint());
  binio::write_file(dir / "train_log.jsonl", log_text);
  auto cfg = nlohmann::json::parse(config_to_json(config));
  cfg["provenance"] = nlohmann::json::parse(provenance);
  binio::write_file(dir / "config.json", cfg.dump(2));
  return 0;
}

int run_train(const TrainOptions& o) {
  const TrainConfig config = make_config(o.config, o.overrides);
  const Dataset data = load_checked(o.manifest, training_needs(config.mode));
  return config.precision == Precision::f64 ? train_with<double>(config, data, o) : train_with<float>(config, data, o);
}

MetricSpec metric_spec(const EvalOptions& o) {
  MetricSpec spec;
  spec.names.clear();
  std::size_t start = 0;
  while (start <= o.metrics.size()) {
    const auto comma = o.metrics.find(',', start);
    const std::string name = o.metrics.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!name.empty()) spec.names.push_back(name);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (spec.names.empty()) throw Error(ErrorCode::ConfigError, "field 'metrics' is empty");
  spec.window = o.sliding ? WindowMode::sliding : WindowMode::disjoint;
  spec.topk = parse_topk_denominator(o.topk);
  return spec;
}

int run_eval(const EvalOptions& o) {
  const MetricSpec spec = metric_spec(o);
  LoadedModel loaded = load_model(read_checkpoint(o.checkpoint));
  const Dataset data = load_checked(o.manifest, scoring_needs(loaded.config.mode));
  EvalReport report;
  if (loaded.config.precision == Precision::f32) {
    Model<float> model = loaded.model.cast<float>();
    report = evaluate(model, loaded.config, data, spec, o.workers);
  } else {
    report = evaluate(loaded.model, loaded.config, data, spec, o.workers);
  }
  binio::write_file(o.out, report.to_json());
  if (!o.csv.empty()) binio::write_file(o.csv, report.to_csv());
  for (const auto& [name, value] : report.overall) std::printf("%-12s %.6f\n", name.c_str(), value);
  return 0;
}

int run_grad_check(const GradOptions& o) {
  // Finite differences visit every weight, so the toy batch uses narrow layers.
  TrainConfig defaults;
  defaults.d = 0;
  defaults.hidden = 16;
  const TrainConfig config = make_config(o.config, o.overrides, defaults);
  const Dataset data = toy_dataset(o.seed);
  const GradCheckReport report = check_objective_gradients(config, data, o.step, o.tolerance);
  for (const ParamGradError& p : report.params) {
    std::printf("%-14s max_rel_err=%.3e at %zu (analytic %.6e, numeric %.6e) kinks=%zu\n", p.name.c_str(),
                p.max_rel_error, p.worst_index, p.analytic, p.numeric, p.kinks);
  }
  std::printf("mode=%s max_rel_err=%.3e tolerance=%.1e kinks=%zu/%zu %s\n",
              std::string(to_string(config.mode)).c_str(), report.max_rel_error, report.tolerance, report.kinks,
              report.entries, report.passed ? "PASS" : "FAIL");
  return report.passed ? 0 : exit_code_for(ErrorCategory::numeric);
}

int run_export(const ExportOptions& o) {
  LoadedModel loaded = load_model(read_checkpoint(o.checkpoint));
  DatasetNeeds needs = scoring_needs(loaded.config.mode);
  needs.ground_truth = false;
  const Dataset data = load_checked(o.manifest, needs);
  const fs::path dir(o.out);
  for (const Example& ex : data) {
    const TrailerRecord* trailer = needs.trailers && ex.trailer ? &*ex.trailer : nullptr;
    auto [pre, post] = shot_embeddings(loaded.model, loaded.config, ex.movie, trailer);
    write_feature_file(dir / (ex.movie.movie_id + ".pre.ccaf"), FeatureMatrix(std::move(pre)));
    write_feature_file(dir / (ex.movie.movie_id + ".post.ccaf"), FeatureMatrix(std::move(post)));
  }
  std::cout << "exported " << data.size() << " movies to " << dir.string() << "\n";
  return 0;
}

int run_report(const ReportOptions& o) {
  std::vector<EvalReport> reports;
  for (const auto& path : o.reports) reports.push_back(load_report(path));
  const ReportTable table = make_table(reports);
  const std::string md = table.to_markdown();
  if (o.out.empty()) {
    std::cout << md;
  } else {
    binio::write_file(o.out, md);
  }
  if (!o.json.empty()) binio::write_file(o.json, table.to_json());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised shot ranking with co-attention and contrastive attention"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a planted-signal synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--movies", gen.spec.n_movies, "Number of movies")->capture_default_str();
  gen_cmd->add_option("--shots", gen.spec.shots_per_movie, "Shots per movie")->capture_default_str();
  gen_cmd->add_option("--key-rate", gen.spec.key_rate, "Fraction of key shots")->capture_default_str();
  gen_cmd->add_option("--dim", gen.spec.feature_dim, "Feature width")->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.noise_sigma, "Per-component noise sigma")->capture_default_str();
  gen_cmd->add_option("--trailer-fraction", gen.spec.trailer_fraction_of_keys, "Fraction of keys in the trailer")
      ->capture_default_str();
  gen_cmd->add_option("--distractors", gen.spec.distractor_centroids, "Distractor centroids")->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--test-fraction", gen.test_fraction, "Fraction of movies in test.json")->capture_default_str();

  std::string validate_manifest_path, validate_mode;
  auto* val_cmd = app.add_subcommand("validate", "Check a dataset manifest");
  val_cmd->add_option("--manifest", validate_manifest_path, "Manifest JSON")->required();
  val_cmd->add_option("--mode", validate_mode, "Only check what this training mode reads");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--manifest", train.manifest, "Training manifest")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--config", train.config, "Config JSON");
  train_cmd->add_option("--set", train.overrides, "key=value override, applied after --config");
  train_cmd->add_option("--resume", train.resume, "Checkpoint to continue from");
  train_cmd->add_flag("--quiet", train.quiet, "Do not echo the epoch log");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Test manifest")->required();
  eval_cmd->add_option("--out", ev.out, "Report JSON")->required();
  eval_cmd->add_option("--csv", ev.csv, "Per-movie CSV");
  eval_cmd->add_option("--metrics", ev.metrics, "Comma-separated metric names")->capture_default_str();
  eval_cmd->add_option("--topk-denominator", ev.topk, "all_positives, min_p_k or retrieved")->capture_default_str();
  eval_cmd->add_flag("--sliding", ev.sliding, "Sliding instead of disjoint Rank@N windows");
  eval_cmd->add_option("--workers", ev.workers, "Scoring threads")->capture_default_str()->check(CLI::PositiveNumber);

  GradOptions grad;
  auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference check of the training objective");
  grad_cmd->add_option("--config", grad.config, "Config JSON");
  grad_cmd->add_option("--set", grad.overrides, "key=value override");
  grad_cmd->add_option("--seed", grad.seed, "Toy data seed")->capture_default_str();
  grad_cmd->add_option("--step", grad.step, "Difference step")->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance, "Maximum relative error")->capture_default_str();

  ExportOptions exp;
  auto* exp_cmd = app.add_subcommand("export-embeddings", "Dump pre/post-augmentation shot features");
  exp_cmd->add_option("--checkpoint", exp.checkpoint, "Checkpoint file")->required();
  exp_cmd->add_option("--manifest", exp.manifest, "Manifest")->required();
  exp_cmd->add_option("--out", exp.out, "Output directory")->required();

  ReportOptions rep;
  auto* rep_cmd = app.add_subcommand("report", "Merge evaluation reports into a modes x metrics table");
  rep_cmd->add_option("reports", rep.reports, "Report JSON files")->required();
  rep_cmd->add_option("--out", rep.out, "Markdown output (stdout when omitted)");
  rep_cmd->add_option("--json", rep.json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code_for(ErrorCategory::config);
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*val_cmd) return run_validate(validate_manifest_path, validate_mode);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(ev);
    if (*grad_cmd) return run_grad_check(grad);
    if (*exp_cmd) return run_export(exp);
    if (*rep_cmd) return run_report(rep);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(ErrorCategory::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(ErrorCategory::data);
  }
  return 0;
}

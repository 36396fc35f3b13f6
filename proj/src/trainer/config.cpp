// Copyright 2026 The ccanet Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0. You may obtain a copy of
// the License at http://www.apache.org/licenses/LICENSE-2.0

#include "ccanet/config.hpp"

#include <cstdio>
#include <set>

#include "ccanet/binary_io.hpp"
#include "ccanet/error.hpp"
#include "ccanet/rng.hpp"
#include "json.hpp"

namespace ccanet {
namespace {

using nlohmann::json;

constexpr std::pair<Mode, std::string_view> kModes[] = {
    {Mode::sup, "sup"}, {Mode::sup_ca, "sup_ca"},   {Mode::pl, "pl"},         {Mode::pl_ca, "pl_ca"},
    {Mode::coa, "coa"}, {Mode::coa_aug, "coa_aug"}, {Mode::ccanet, "ccanet"},
};

[[noreturn]] void config_error(const std::string& source, const std::string& field, const std::string& what) {
  throw Error(ErrorCode::ConfigError, source + ": field '" + field + "' " + what);
}

json to_json(const TrainConfig& c) {
  return json{
      {"mode", std::string(to_string(c.mode))},
      {"lambda", c.lambda},
      {"gamma", c.gamma},
      {"epsilon_ratio", c.epsilon_ratio},
      {"literal_assignment", c.literal_assignment},
      {"window", c.window},
      {"d", c.d},
      {"hidden", c.hidden},
      {"lr", c.lr},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"adam_eps", c.adam_eps},
      {"weight_decay", c.weight_decay},
      {"grad_clip_norm", c.grad_clip_norm},
      {"epochs", c.epochs},
      {"batch_shots", c.batch_shots},
      {"negatives_per_positive", c.negatives_per_positive},
      {"pairs_per_shot", c.pairs_per_shot},
      {"pl_pos_frac", c.pl_pos_frac},
      {"pl_neg_frac", c.pl_neg_frac},
      {"seed", c.seed},
      {"precision", c.precision == Precision::f32 ? "f32" : "f64"},
      {"similarity", c.similarity == Similarity::inner_product ? "inner_product" : "cosine"},
      {"train_coattention_proj", c.train_coattention_proj},
  };
}

template <typename V>
void read_number(const json& j, const std::string& source, const std::string& key, V& out) {
  if (!j.is_number()) config_error(source, key, "must be a number");
  if constexpr (std::is_integral_v<V>) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
      config_error(source, key, "must be a non-negative integer");
    }
    out = j.get<V>();
  } else {
    out = j.get<V>();
  }
}

void read_bool(const json& j, const std::string& source, const std::string& key, bool& out) {
  if (!j.is_boolean()) config_error(source, key, "must be true or false");
  out = j.get<bool>();
}

std::string read_string(const json& j, const std::string& source, const std::string& key) {
  if (!j.is_string()) config_error(source, key, "must be a string");
  return j.get<std::string>();
}

void set_field(TrainConfig& c, const std::string& source, const std::string& key, const json& v) {
  if (key == "mode") {
    const std::string s = read_string(v, source, key);
    try {
      c.mode = parse_mode(s);
    } catch (const Error&) {
      config_error(source, key, "has unknown mode '" + s + "'");
    }
  } else if (key == "lambda") read_number(v, source, key, c.lambda);
  else if (key == "gamma") read_number(v, source, key, c.gamma);
  else if (key == "epsilon_ratio") read_number(v, source, key, c.epsilon_ratio);
  else if (key == "literal_assignment") read_bool(v, source, key, c.literal_assignment);
  else if (key == "window") read_number(v, source, key, c.window);
  else if (key == "d") read_number(v, source, key, c.d);
  else if (key == "hidden") read_number(v, source, key, c.hidden);
  else if (key == "lr") read_number(v, source, key, c.lr);
  else if (key == "beta1") read_number(v, source, key, c.beta1);
  else if (key == "beta2") read_number(v, source, key, c.beta2);
  else if (key == "adam_eps") read_number(v, source, key, c.adam_eps);
  else if (key == "weight_decay") read_number(v, source, key, c.weight_decay);
  else if (key == "grad_clip_norm") read_number(v, source, key, c.grad_clip_norm);
  else if (key == "epochs") read_number(v, source, key, c.epochs);
  else if (key == "batch_shots") read_number(v, source, key, c.batch_shots);
  else if (key == "negatives_per_positive") read_number(v, source, key, c.negatives_per_positive);
  else if (key == "pairs_per_shot") read_number(v, source, key, c.pairs_per_shot);
  else if (key == "pl_pos_frac") read_number(v, source, key, c.pl_pos_frac);
  else if (key == "pl_neg_frac") read_number(v, source, key, c.pl_neg_frac);
  else if (key == "seed") read_number(v, source, key, c.seed);
  else if (key == "precision") {
    const std::string s = read_string(v, source, key);
    if (s == "f32") c.precision = Precision::f32;
    else if (s == "f64") c.precision = Precision::f64;
    else config_error(source, key, "must be \"f32\" or \"f64\"");
  } else if (key == "similarity") {
    const std::string s = read_string(v, source, key);
    if (s == "inner_product") c.similarity = Similarity::inner_product;
    else if (s == "cosine") c.similarity = Similarity::cosine;
    else config_error(source, key, "must be \"inner_product\" or \"cosine\"");
  } else if (key == "train_coattention_proj") read_bool(v, source, key, c.train_coattention_proj);
  else config_error(source, key, "is not a known setting");
}

}  // namespace

std::string_view to_string(Mode mode) {
  for (const auto& [m, name] : kModes) {
    if (m == mode) return name;
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  for (const auto& [m, n] : kModes) {
    if (n == name) return m;
  }
  throw Error(ErrorCode::ConfigError, "unknown mode '" + std::string(name) + "'");
}

bool uses_trailers(Mode m) { return m != Mode::sup && m != Mode::sup_ca; }
bool uses_ground_truth(Mode m) { return m == Mode::sup || m == Mode::sup_ca; }
bool uses_coattention(Mode m) { return m == Mode::coa || m == Mode::coa_aug || m == Mode::ccanet; }
bool uses_augmentation(Mode m) {
  return m == Mode::sup_ca || m == Mode::pl_ca || m == Mode::coa_aug || m == Mode::ccanet;
}
bool uses_contrastive_loss(Mode m) { return m == Mode::sup_ca || m == Mode::pl_ca || m == Mode::ccanet; }
bool uses_pseudo_labels(Mode m) { return m == Mode::pl || m == Mode::pl_ca; }

void TrainConfig::validate() const {
  const std::string src = "config";
  if (!(lambda > 0.0)) config_error(src, "lambda", "must be > 0");
  if (!(gamma > 0.0)) config_error(src, "gamma", "must be > 0");
  if (!(epsilon_ratio > 0.0 && epsilon_ratio < 1.0)) config_error(src, "epsilon_ratio", "must lie in (0, 1)");
  if (!(pl_pos_frac > 0.0 && pl_pos_frac < 1.0)) config_error(src, "pl_pos_frac", "must lie in (0, 1)");
  if (!(pl_neg_frac > 0.0 && pl_neg_frac < 1.0)) config_error(src, "pl_neg_frac", "must lie in (0, 1)");
  if (batch_shots < 2) config_error(src, "batch_shots", "must be >= 2");
  if (hidden == 0) config_error(src, "hidden", "must be >= 1");
  if (!(lr >= 0.0)) config_error(src, "lr", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) config_error(src, "beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) config_error(src, "beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) config_error(src, "adam_eps", "must be > 0");
  if (!(weight_decay >= 0.0)) config_error(src, "weight_decay", "must be >= 0");
  if (!(grad_clip_norm >= 0.0)) config_error(src, "grad_clip_norm", "must be >= 0");
  if (negatives_per_positive == 0) config_error(src, "negatives_per_positive", "must be >= 1");
  if (pairs_per_shot == 0) config_error(src, "pairs_per_shot", "must be >= 1");
}

std::string config_to_json(const TrainConfig& config) { return to_json(config).dump(2); }

TrainConfig config_from_json(std::string_view text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, source + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, source + ": top level must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) set_field(c, source, key, value);
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = binio::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return config_from_json(text, path);
}

void apply_override(TrainConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::ConfigError, "override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  set_field(config, "--set", key, value);
  config.validate();
}

std::string config_hash(const TrainConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(config).dump())));
  return buf;
}

std::string library_version() {
#ifdef CCANET_VERSION
  return CCANET_VERSION;
#else
  return "0.0.0";
#endif
}

std::string provenance_json(const TrainConfig& config) {
  return json{{"config_hash", config_hash(config)}, {"seed", config.seed}, {"version", library_version()}}.dump();
}

}  // namespace ccanet

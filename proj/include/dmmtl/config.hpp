/*
 * Copyright 2026 The DMMTL Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Run configuration for the command-line front end. JSON object; unknown keys
// are rejected. `--set a.b=value` overrides are applied to the raw JSON before
// parsing, so they are validated the same way.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmmtl/data.hpp"
#include "dmmtl/errors.hpp"
#include "dmmtl/json_util.hpp"
#include "dmmtl/losses.hpp"

namespace dmmtl {

struct DataPaths {
  std::filesystem::path manifest;
  std::filesystem::path data;
  std::optional<std::filesystem::path> truth;
};

struct ModelBlock {
  std::size_t hidden_width = 12;
  std::size_t transition_depth = 1;
  std::size_t emission_depth = 1;
  bool feed_prev_outputs = false;
};

/// Closed interval [lo, hi] sampled by the tuner.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct TuneBlock {
  std::size_t trials = 10;
  Range lambda_x{0.01, 0.1};
  Range lambda{1e-6, 1e-4};
  Range gamma{0.5, 2.0};
  Range hidden_width{8, 16};
  Range prox_step{0.005, 0.02};
};

struct EvaluateBlock {
  std::vector<double> quantile_levels{0.2, 0.4, 0.5, 0.7};
  std::vector<std::string> baselines;  // any of ridge, lr, en, men, oracle
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::optional<GeneratorSpec> generator;
  std::optional<DataPaths> data;
  SplitFractions split;
  ModelBlock model;
  TrainConfig train;
  TuneBlock tune;
  EvaluateBlock evaluate;
  std::size_t top = 3;  // top-m importance listing
};

namespace detail {

inline void reject_unknown(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline Range read_range(const Json& j, const char* key, Range fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + "." + key + ": expected [lo, hi]");
  Range r{v[0].get<double>(), v[1].get<double>()};
  if (!(r.lo <= r.hi)) throw ConfigError(where + "." + key + ": lo must not exceed hi");
  return r;
}

}  // namespace detail

inline RunConfig parse_run_config(const Json& j) {
  using detail::read;
  detail::reject_unknown(j, "config",
                         {"seed", "output_dir", "generator", "data", "split", "model", "train", "tune", "evaluate",
                          "top"});
  RunConfig c;
  read(j, "seed", c.seed, "config");
  std::string out_dir = c.output_dir.string();
  read(j, "output_dir", out_dir, "config");
  c.output_dir = out_dir;
  read(j, "top", c.top, "config");
  if (c.top == 0) throw ConfigError("config.top: must be >= 1");

  if (j.contains("generator")) {
    const Json& g = j.at("generator");
    detail::reject_unknown(g, "generator",
                           {"case", "stages", "inputs_per_stage", "outputs_per_stage", "hidden_true", "sigma",
                            "n_unimportant", "groups", "lag", "n_samples"});
    GeneratorSpec s;
    read(g, "case", s.case_id, "generator");
    read(g, "stages", s.stages, "generator");
    read(g, "inputs_per_stage", s.inputs_per_stage, "generator");
    read(g, "outputs_per_stage", s.outputs_per_stage, "generator");
    read(g, "hidden_true", s.hidden_true, "generator");
    read(g, "sigma", s.sigma, "generator");
    if (g.contains("n_unimportant")) {
      std::size_t n = 0;
      read(g, "n_unimportant", n, "generator");
      s.n_unimportant = n;
    }
    read(g, "groups", s.groups, "generator");
    read(g, "lag", s.lag, "generator");
    read(g, "n_samples", s.n_samples, "generator");
    try {
      s.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
    c.generator = s;
  }
  if (j.contains("data")) {
    const Json& d = j.at("data");
    detail::reject_unknown(d, "data", {"manifest", "data", "truth"});
    DataPaths p;
    std::string manifest, data, truth;
    read(d, "manifest", manifest, "data");
    read(d, "data", data, "data");
    if (manifest.empty() || data.empty()) throw ConfigError("data: manifest and data paths are required");
    p.manifest = manifest;
    p.data = data;
    if (d.contains("truth")) {
      read(d, "truth", truth, "data");
      p.truth = truth;
    }
    for (const auto& path : {std::optional<std::filesystem::path>(p.manifest),
                             std::optional<std::filesystem::path>(p.data), p.truth})
      if (path && !std::filesystem::exists(*path)) throw ConfigError("data: path does not exist: " + path->string());
    c.data = p;
  }
  if (!c.generator && !c.data) c.generator = GeneratorSpec{};
  if (c.generator && c.data) throw ConfigError("config: give either a generator block or a data block, not both");
  if (c.generator) c.generator->seed = c.seed;

  if (j.contains("split")) {
    const Json& s = j.at("split");
    detail::reject_unknown(s, "split", {"train", "val", "test"});
    read(s, "train", c.split.train, "split");
    read(s, "val", c.split.val, "split");
    read(s, "test", c.split.test, "split");
  }
  if (!(c.split.train > 0 && c.split.val > 0 && c.split.test > 0) ||
      std::abs(c.split.train + c.split.val + c.split.test - 1.0) > 1e-9)
    throw ConfigError("split: fractions must be positive and sum to 1");

  if (j.contains("model")) {
    const Json& m = j.at("model");
    detail::reject_unknown(m, "model", {"hidden_width", "transition_depth", "emission_depth", "feed_prev_outputs"});
    read(m, "hidden_width", c.model.hidden_width, "model");
    read(m, "transition_depth", c.model.transition_depth, "model");
    read(m, "emission_depth", c.model.emission_depth, "model");
    read(m, "feed_prev_outputs", c.model.feed_prev_outputs, "model");
  }
  if (c.model.hidden_width < 1 || c.model.transition_depth < 1 || c.model.emission_depth < 1)
    throw ConfigError("model: widths and depths must be >= 1");

  if (j.contains("train")) {
    const Json& t = j.at("train");
    detail::reject_unknown(t, "train",
                           {"lambda_x", "lambda", "gamma", "loss", "prox_step", "sgd_step", "batch_size", "epochs",
                            "restart_patience", "max_restarts", "step_decay", "backtrack"});
    read(t, "lambda_x", c.train.lambda_x, "train");
    read(t, "lambda", c.train.lambda, "train");
    read(t, "gamma", c.train.gamma, "train");
    if (t.contains("loss")) {
      std::string loss;
      read(t, "loss", loss, "train");
      if (loss == "sse") c.train.loss = LossKind::Sse;
      else if (loss == "huber") c.train.loss = LossKind::Huber;
      else throw ConfigError("train.loss: expected 'sse' or 'huber'");
    }
    read(t, "prox_step", c.train.prox_step, "train");
    read(t, "sgd_step", c.train.sgd_step, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "epochs", c.train.epochs, "train");
    read(t, "restart_patience", c.train.restart_patience, "train");
    read(t, "max_restarts", c.train.max_restarts, "train");
    read(t, "step_decay", c.train.step_decay, "train");
    read(t, "backtrack", c.train.backtrack, "train");
  }
  c.train.seed = c.seed;
  try {
    c.train.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }

  if (j.contains("tune")) {
    const Json& t = j.at("tune");
    detail::reject_unknown(t, "tune", {"trials", "lambda_x", "lambda", "gamma", "hidden_width", "prox_step"});
    read(t, "trials", c.tune.trials, "tune");
    c.tune.lambda_x = detail::read_range(t, "lambda_x", c.tune.lambda_x, "tune");
    c.tune.lambda = detail::read_range(t, "lambda", c.tune.lambda, "tune");
    c.tune.gamma = detail::read_range(t, "gamma", c.tune.gamma, "tune");
    c.tune.hidden_width = detail::read_range(t, "hidden_width", c.tune.hidden_width, "tune");
    c.tune.prox_step = detail::read_range(t, "prox_step", c.tune.prox_step, "tune");
  }
  if (c.tune.trials < 1) throw ConfigError("tune.trials: must be >= 1");
  for (const Range* r : {&c.tune.lambda_x, &c.tune.lambda, &c.tune.gamma, &c.tune.prox_step})
    if (!(r->lo > 0.0)) throw ConfigError("tune: log-uniform ranges need positive bounds");
  if (!(c.tune.hidden_width.lo >= 1.0)) throw ConfigError("tune.hidden_width: lower bound must be >= 1");

  if (j.contains("evaluate")) {
    const Json& e = j.at("evaluate");
    detail::reject_unknown(e, "evaluate", {"quantile_levels", "baselines"});
    read(e, "quantile_levels", c.evaluate.quantile_levels, "evaluate");
    read(e, "baselines", c.evaluate.baselines, "evaluate");
  }
  for (double l : c.evaluate.quantile_levels)
    if (!(l > 0.0 && l < 1.0)) throw ConfigError("evaluate.quantile_levels: levels must lie in (0, 1)");
  for (const auto& b : c.evaluate.baselines)
    if (b != "ridge" && b != "lr" && b != "en" && b != "men" && b != "oracle")
      throw ConfigError("evaluate.baselines: unknown baseline '" + b + "'");
  return c;
}

/// Applies `key.path=value`; value is read as JSON when it parses, else as a string.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set: empty key segment in '" + key + "'");
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

inline Json read_config_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": invalid JSON");
  return j;
}

inline RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                                 const std::vector<std::string>& overrides) {
  Json j = path ? read_config_json(*path) : Json::object();
  for (const auto& o : overrides) apply_override(j, o);
  return parse_run_config(j);
}

}  // namespace dmmtl

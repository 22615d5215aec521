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

// Checkpoint container for trained models. JSON with a format tag, a version
// and a model-kind tag ("dmmtl" or "linear"); doubles are written in shortest
// round-trip form so save/load is lossless.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dmmtl/baselines.hpp"
#include "dmmtl/errors.hpp"
#include "dmmtl/json_util.hpp"
#include "dmmtl/model.hpp"

namespace dmmtl {

inline constexpr const char* kCheckpointFormat = "dmmtl-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;  // "dmmtl" or "linear"
  std::optional<ParameterSet> model;
  std::optional<StagewiseLinear> linear;
  std::size_t epochs_completed = 0;
};

inline Json topology_to_json(const StageTopology& t) {
  return Json{{"input_widths", t.input_widths},   {"output_widths", t.output_widths},
              {"hidden_width", t.hidden_width},   {"transition_depth", t.transition_depth},
              {"emission_depth", t.emission_depth}, {"feed_prev_outputs", t.feed_prev_outputs}};
}

inline StageTopology topology_from_json(const Json& j) {
  StageTopology t;
  t.input_widths = j.at("input_widths").get<std::vector<std::size_t>>();
  t.output_widths = j.at("output_widths").get<std::vector<std::size_t>>();
  t.hidden_width = j.at("hidden_width").get<std::size_t>();
  t.transition_depth = j.at("transition_depth").get<std::size_t>();
  t.emission_depth = j.at("emission_depth").get<std::size_t>();
  t.feed_prev_outputs = j.at("feed_prev_outputs").get<bool>();
  return t;
}

namespace detail {

inline Json mats_to_json(const std::vector<Mat>& ms) {
  Json a = Json::array();
  for (const auto& m : ms) a.push_back(mat_to_json(m));
  return a;
}

inline std::vector<Mat> mats_from_json(const Json& j) {
  std::vector<Mat> out;
  for (const auto& m : j) out.push_back(mat_from_json(m));
  return out;
}

/// Every tensor of `params` must have the shape `init` would give it.
inline void check_param_shapes(const ParameterSet& params) {
  const ParameterSet ref = zero_params(params.topology);
  if (ref.stages.size() != params.stages.size()) throw ParseError("checkpoint: stage count mismatch");
  const auto a = tensor_views(ref.stages);
  const auto b = tensor_views(params.stages);
  if (a.size() != b.size()) throw ParseError("checkpoint: layer count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].values.size() != b[i].values.size()) throw ParseError("checkpoint: tensor shape mismatch");
}

}  // namespace detail

inline Json checkpoint_to_json(const Checkpoint& c) {
  Json j{{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"kind", c.kind}};
  if (c.kind == "dmmtl") {
    if (!c.model) throw ArgumentError("checkpoint: dmmtl kind without a model");
    j["topology"] = topology_to_json(c.model->topology);
    j["epochs_completed"] = c.epochs_completed;
    Json stages = Json::array();
    for (const auto& s : c.model->stages)
      stages.push_back({{"input_weights", mat_to_json(s.input_weights)},
                        {"transition_weights", detail::mats_to_json(s.transition_weights)},
                        {"transition_biases", s.transition_biases},
                        {"emission_weights", detail::mats_to_json(s.emission_weights)},
                        {"emission_biases", s.emission_biases}});
    j["stages"] = stages;
  } else if (c.kind == "linear") {
    if (!c.linear) throw ArgumentError("checkpoint: linear kind without a model");
    j["method"] = c.linear->method;
    Json stages = Json::array();
    for (std::size_t k = 0; k < c.linear->stages.size(); ++k) {
      const auto& m = c.linear->stages[k];
      stages.push_back({{"weights", mat_to_json(m.weights)},
                        {"intercepts", m.intercepts},
                        {"feature_map", m.feature_map},
                        {"alphas", c.linear->alphas.at(k)},
                        {"betas", c.linear->betas.at(k)}});
    }
    j["stages"] = stages;
  } else {
    throw ArgumentError("checkpoint: unknown kind '" + c.kind + "'");
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ParseError("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("checkpoint: unsupported version");
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    if (c.kind == "dmmtl") {
      ParameterSet p;
      p.topology = topology_from_json(j.at("topology"));
      p.topology.validate();
      for (const auto& js : j.at("stages"))
        p.stages.push_back(StageParams{mat_from_json(js.at("input_weights")),
                                       detail::mats_from_json(js.at("transition_weights")),
                                       js.at("transition_biases").get<std::vector<Vec>>(),
                                       detail::mats_from_json(js.at("emission_weights")),
                                       js.at("emission_biases").get<std::vector<Vec>>()});
      detail::check_param_shapes(p);
      c.model = std::move(p);
      c.epochs_completed = j.at("epochs_completed").get<std::size_t>();
    } else if (c.kind == "linear") {
      StagewiseLinear l;
      l.method = j.at("method").get<std::string>();
      for (const auto& js : j.at("stages")) {
        LinearModel m{mat_from_json(js.at("weights")), js.at("intercepts").get<Vec>(),
                      js.at("feature_map").get<std::string>()};
        if (m.intercepts.size() != m.weights.cols()) throw ParseError("checkpoint: intercept count mismatch");
        l.stages.push_back(std::move(m));
        l.alphas.push_back(js.at("alphas").get<std::vector<double>>());
        l.betas.push_back(js.at("betas").get<std::vector<double>>());
      }
      c.linear = std::move(l);
    } else {
      throw ParseError("checkpoint: unknown kind '" + c.kind + "'");
    }
    return c;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot write");
  out << checkpoint_to_json(c).dump() << '\n';
  if (!out) throw ParseError(path.string() + ": write failed");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace dmmtl

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

// Stage-chained latent state model: topology, parameters, forward pass.
//
//   h_k = f_k(h_{k-1}, u_k),  yhat_k = g_k(h_k)
//
// f_k is a D1-deep sigmoid network whose first layer sees the effective input
// u_k (x_k, optionally followed by the previous stage's outputs) and the
// previous stage's deepest transition output. g_k is D2-1 sigmoid layers of
// width nh followed by a linear head. h_0 = 0.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmmtl/errors.hpp"
#include "dmmtl/rng.hpp"
#include "dmmtl/tensor.hpp"

namespace dmmtl {

using StageVectors = std::vector<Vec>;

/// One observation: per-stage inputs x_k and outputs y_k.
struct Sample {
  StageVectors inputs;
  StageVectors outputs;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct StageTopology {
  std::vector<std::size_t> input_widths;   // nx[k]
  std::vector<std::size_t> output_widths;  // ny[k]
  std::size_t hidden_width = 1;            // nh, shared by every stage
  std::size_t transition_depth = 1;        // D1
  std::size_t emission_depth = 1;          // D2
  bool feed_prev_outputs = false;

  std::size_t stages() const noexcept { return input_widths.size(); }

  /// Width of u_k: nx[k] plus ny[k-1] when previous outputs are fed forward.
  std::size_t effective_input_width(std::size_t k) const {
    return input_widths.at(k) + (feed_prev_outputs && k > 0 ? output_widths.at(k - 1) : 0);
  }

  std::size_t total_outputs() const {
    std::size_t n = 0;
    for (auto w : output_widths) n += w;
    return n;
  }

  void validate() const {
    if (input_widths.empty()) throw ArgumentError("topology: need at least one stage");
    if (input_widths.size() != output_widths.size())
      throw ArgumentError("topology: input/output stage counts differ");
    if (hidden_width < 1) throw ArgumentError("topology: hidden width must be >= 1");
    if (transition_depth < 1 || emission_depth < 1)
      throw ArgumentError("topology: layer depths must be >= 1");
    if (total_outputs() == 0) throw ArgumentError("topology: no stage has outputs");
  }

  friend bool operator==(const StageTopology&, const StageTopology&) = default;
};

/// Parameters of one stage. input_weights is W_x (nh x effective nx); its
/// columns are the groups targeted by the input-selection penalty.
struct StageParams {
  Mat input_weights;
  std::vector<Mat> transition_weights;  // U_h^d, nh x nh, d = 0..D1-1
  std::vector<Vec> transition_biases;   // b_h^d
  std::vector<Mat> emission_weights;    // V_y^d; last one is ny x nh
  std::vector<Vec> emission_biases;     // b_g^d

  friend bool operator==(const StageParams&, const StageParams&) = default;
};

struct ParameterSet {
  StageTopology topology;
  std::vector<StageParams> stages;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

/// Gradient container, shaped exactly like ParameterSet::stages.
struct ParamGrads {
  std::vector<StageParams> stages;
};

enum class TensorRole { InputWeights, TransitionWeights, TransitionBias, EmissionWeights, EmissionBias };

template <class T>
struct BasicTensorView {
  TensorRole role;
  std::size_t stage;
  std::span<T> values;
};

using TensorView = BasicTensorView<double>;
using ConstTensorView = BasicTensorView<const double>;

namespace detail {

template <class View, class Stages>
std::vector<View> collect_views(Stages& stages) {
  std::vector<View> out;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    auto& s = stages[k];
    out.push_back({TensorRole::InputWeights, k, s.input_weights.values()});
    for (auto& m : s.transition_weights) out.push_back({TensorRole::TransitionWeights, k, m.values()});
    for (auto& b : s.transition_biases) out.push_back({TensorRole::TransitionBias, k, b});
    for (auto& m : s.emission_weights) out.push_back({TensorRole::EmissionWeights, k, m.values()});
    for (auto& b : s.emission_biases) out.push_back({TensorRole::EmissionBias, k, b});
  }
  return out;
}

}  // namespace detail

/// Flat views over every tensor, in checkpoint order: per stage W_x, U_h^*,
/// b_h^*, V_y^*, b_g^*.
inline std::vector<TensorView> tensor_views(std::vector<StageParams>& stages) {
  return detail::collect_views<TensorView>(stages);
}

inline std::vector<ConstTensorView> tensor_views(const std::vector<StageParams>& stages) {
  return detail::collect_views<ConstTensorView>(stages);
}

/// Parameters with every entry zero, shaped by `topology`.
inline std::vector<StageParams> zero_stage_params(const StageTopology& topology) {
  topology.validate();
  const std::size_t nh = topology.hidden_width;
  std::vector<StageParams> stages(topology.stages());
  for (std::size_t k = 0; k < stages.size(); ++k) {
    auto& s = stages[k];
    s.input_weights = Mat(nh, topology.effective_input_width(k));
    for (std::size_t d = 0; d < topology.transition_depth; ++d) {
      s.transition_weights.emplace_back(nh, nh);
      s.transition_biases.emplace_back(nh, 0.0);
    }
    for (std::size_t d = 0; d + 1 < topology.emission_depth; ++d) {
      s.emission_weights.emplace_back(nh, nh);
      s.emission_biases.emplace_back(nh, 0.0);
    }
    s.emission_weights.emplace_back(topology.output_widths[k], nh);
    s.emission_biases.emplace_back(topology.output_widths[k], 0.0);
  }
  return stages;
}

inline ParameterSet zero_params(const StageTopology& topology) {
  return ParameterSet{topology, zero_stage_params(topology)};
}

inline ParamGrads zero_grads(const ParameterSet& params) {
  return ParamGrads{zero_stage_params(params.topology)};
}

/// Weights ~ N(0, std = 1/sqrt(fan_in)) with fan_in = matrix columns; biases 0.
inline ParameterSet init_params(const StageTopology& topology, std::uint64_t seed) {
  ParameterSet params = zero_params(topology);
  Rng rng = make_rng(seed, "init");
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Mat& m) {
    if (m.cols() == 0) return;
    const double sd = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (double& v : m.values()) v = sd * normal(rng);
  };
  for (auto& s : params.stages) {
    fill(s.input_weights);
    for (auto& m : s.transition_weights) fill(m);
    for (auto& m : s.emission_weights) fill(m);
  }
  return params;
}

struct StageTrace {
  Vec input;                            // u_k
  std::vector<Vec> transition_pre;      // per layer, before activation
  std::vector<Vec> transition_post;     // per layer; back() is h_k
  std::vector<Vec> emission_pre;        // hidden emission layers only
  std::vector<Vec> emission_post;
  Vec prediction;                       // yhat_k

  const Vec& hidden() const { return transition_post.back(); }
};

struct ForwardTrace {
  std::vector<StageTrace> stages;
  /// True when fed-forward outputs were the model's own predictions, so
  /// gradients must flow back through them.
  bool outputs_fed_from_model = false;
};


namespace detail {

inline void check_inputs(const StageTopology& topo, std::span<const Vec> x_seq) {
  if (x_seq.size() != topo.stages())
    throw ShapeError("forward: expected " + std::to_string(topo.stages()) + " stage inputs, got " +
                     std::to_string(x_seq.size()));
  for (std::size_t k = 0; k < x_seq.size(); ++k)
    if (x_seq[k].size() != topo.input_widths[k])
      throw ShapeError("forward: stage " + std::to_string(k) + " input has length " +
                       std::to_string(x_seq[k].size()) + ", expected " +
                       std::to_string(topo.input_widths[k]));
}

template <class Activation>
void forward_stage(const StageParams& s, const Vec* h_prev, StageTrace& t) {
  const std::size_t depth = s.transition_weights.size();
  t.transition_pre.resize(depth);
  t.transition_post.resize(depth);
  for (std::size_t d = 0; d < depth; ++d) {
    Vec z = s.transition_biases[d];
    if (d == 0) {
      matvec_accumulate(s.input_weights, t.input, z);
      if (h_prev) matvec_accumulate(s.transition_weights[0], *h_prev, z);
    } else {
      matvec_accumulate(s.transition_weights[d], t.transition_post[d - 1], z);
    }
    Vec a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = Activation::apply(z[i]);
    t.transition_pre[d] = std::move(z);
    t.transition_post[d] = std::move(a);
  }
  const std::size_t hidden_layers = s.emission_weights.size() - 1;
  t.emission_pre.resize(hidden_layers);
  t.emission_post.resize(hidden_layers);
  const Vec* prev = &t.transition_post.back();
  for (std::size_t d = 0; d < hidden_layers; ++d) {
    Vec z = s.emission_biases[d];
    matvec_accumulate(s.emission_weights[d], *prev, z);
    Vec a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = Activation::apply(z[i]);
    t.emission_pre[d] = std::move(z);
    t.emission_post[d] = std::move(a);
    prev = &t.emission_post[d];
  }
  t.prediction = s.emission_biases.back();
  matvec_accumulate(s.emission_weights.back(), *prev, t.prediction);
}

template <class Activation>
ForwardTrace forward_impl(const ParameterSet& params, std::span<const Vec> x_seq,
                          const std::span<const Vec>* teacher) {
  const auto& topo = params.topology;
  check_inputs(topo, x_seq);
  if (params.stages.size() != topo.stages()) throw ShapeError("forward: parameter stage count mismatch");
  ForwardTrace trace;
  trace.outputs_fed_from_model = topo.feed_prev_outputs && teacher == nullptr;
  trace.stages.resize(topo.stages());
  for (std::size_t k = 0; k < topo.stages(); ++k) {
    StageTrace& t = trace.stages[k];
    t.input = x_seq[k];
    if (topo.feed_prev_outputs && k > 0) {
      const Vec& fed = teacher ? (*teacher)[k - 1] : trace.stages[k - 1].prediction;
      if (fed.size() != topo.output_widths[k - 1])
        throw ShapeError("forward: fed output width mismatch at stage " + std::to_string(k));
      t.input.insert(t.input.end(), fed.begin(), fed.end());
    }
    if (t.input.size() != params.stages[k].input_weights.cols())
      throw ShapeError("forward: parameters do not match topology at stage " + std::to_string(k));
    const Vec* h_prev = k == 0 ? nullptr : &trace.stages[k - 1].hidden();
    forward_stage<Activation>(params.stages[k], h_prev, t);
  }
  return trace;
}

}  // namespace detail

/// Forward pass. With feed_prev_outputs the model's own yhat_{k-1} is fed
/// to stage k.
template <class Activation = Sigmoid>
ForwardTrace forward(const ParameterSet& params, std::span<const Vec> x_seq) {
  return detail::forward_impl<Activation>(params, x_seq, nullptr);
}

/// Forward pass feeding the measured y_{k-1} to stage k (teacher forcing).
/// Identical to forward() when feed_prev_outputs is off.
template <class Activation = Sigmoid>
ForwardTrace forward_teacher(const ParameterSet& params, std::span<const Vec> x_seq,
                             std::span<const Vec> y_seq) {
  if (params.topology.feed_prev_outputs && y_seq.size() != params.topology.stages())
    throw ShapeError("forward_teacher: expected one output vector per stage");
  return detail::forward_impl<Activation>(params, x_seq, &y_seq);
}

template <class Activation = Sigmoid>
StageVectors predict(const ParameterSet& params, std::span<const Vec> x_seq) {
  ForwardTrace trace = forward<Activation>(params, x_seq);
  StageVectors out;
  out.reserve(trace.stages.size());
  for (auto& s : trace.stages) out.push_back(std::move(s.prediction));
  return out;
}

template <class Activation = Sigmoid>
std::vector<StageVectors> predict_batch(const ParameterSet& params,
                                        std::span<const StageVectors> inputs) {
  std::vector<StageVectors> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(predict<Activation>(params, x));
  return out;
}

}  // namespace dmmtl

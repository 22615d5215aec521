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

// Reverse-mode differentiation through the stage chain. One sweep serves
// both parameter gradients (training) and input sensitivities
// (interpretability): stage k's transition parameters collect contributions
// from every output at stages k' >= k; emission parameters only from stage k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dmmtl/errors.hpp"
#include "dmmtl/model.hpp"
#include "dmmtl/tensor.hpp"

namespace dmmtl {

namespace detail {

inline void check_trace(const ParameterSet& params, const ForwardTrace& trace) {
  const auto& topo = params.topology;
  if (trace.stages.size() != topo.stages() || params.stages.size() != topo.stages())
    throw ShapeError("backward: trace/parameter stage count mismatch");
  for (std::size_t k = 0; k < topo.stages(); ++k) {
    const auto& t = trace.stages[k];
    const auto& s = params.stages[k];
    if (t.input.size() != s.input_weights.cols() ||
        t.transition_post.size() != s.transition_weights.size() ||
        t.emission_post.size() + 1 != s.emission_weights.size() ||
        t.prediction.size() != topo.output_widths[k])
      throw ShapeError("backward: trace does not match parameters at stage " + std::to_string(k));
  }
}

template <class Activation>
Vec activation_delta(std::span<const double> upstream, const Vec& post, const Vec& pre) {
  Vec delta(upstream.size());
  for (std::size_t i = 0; i < delta.size(); ++i)
    delta[i] = upstream[i] * Activation::derivative(post[i], pre[i]);
  return delta;
}

/// Core sweep. `output_grads[k]` is dL/dyhat_k (empty span = zero). Writes
/// accumulated parameter gradients into `param_out` and dL/dx_k (raw inputs
/// only) into `input_out` when those are non-null.
template <class Activation>
void reverse_sweep(const ParameterSet& params, const ForwardTrace& trace,
                   std::span<const Vec> output_grads, std::vector<StageParams>* param_out,
                   StageVectors* input_out) {
  check_trace(params, trace);
  const auto& topo = params.topology;
  const std::size_t K = topo.stages();
  if (output_grads.size() != K) throw ShapeError("backward: expected one output gradient per stage");
  if (param_out && param_out->size() != K) throw ShapeError("backward: gradient container mismatch");
  if (input_out) {
    input_out->assign(K, Vec{});
    for (std::size_t k = 0; k < K; ++k) (*input_out)[k].assign(topo.input_widths[k], 0.0);
  }

  const std::size_t nh = topo.hidden_width;
  Vec carry(nh, 0.0);  // dL/dh_k arriving from stage k+1
  Vec fed_grad;        // dL/dyhat_k arriving through stage k+1's input

  for (std::size_t kk = K; kk-- > 0;) {
    const StageParams& s = params.stages[kk];
    const StageTrace& t = trace.stages[kk];
    StageParams* g = param_out ? &(*param_out)[kk] : nullptr;

    Vec dpred(topo.output_widths[kk], 0.0);
    if (!output_grads[kk].empty()) {
      if (output_grads[kk].size() != dpred.size())
        throw ShapeError("backward: output gradient width mismatch at stage " + std::to_string(kk));
      dpred = output_grads[kk];
    }
    if (!fed_grad.empty())
      for (std::size_t j = 0; j < dpred.size(); ++j) dpred[j] += fed_grad[j];
    fed_grad.clear();

    // Emission: linear head, then hidden sigmoid layers in reverse.
    const std::size_t hidden_layers = t.emission_post.size();
    const Vec& head_in = hidden_layers == 0 ? t.hidden() : t.emission_post.back();
    if (g) {
      add_outer(g->emission_weights.back(), dpred, head_in);
      auto& gb = g->emission_biases.back();
      for (std::size_t j = 0; j < dpred.size(); ++j) gb[j] += dpred[j];
    }
    Vec upstream(head_in.size(), 0.0);
    matvec_transposed_accumulate(s.emission_weights.back(), dpred, upstream);
    for (std::size_t e = hidden_layers; e-- > 0;) {
      Vec delta = activation_delta<Activation>(upstream, t.emission_post[e], t.emission_pre[e]);
      const Vec& layer_in = e == 0 ? t.hidden() : t.emission_post[e - 1];
      if (g) {
        add_outer(g->emission_weights[e], delta, layer_in);
        auto& gb = g->emission_biases[e];
        for (std::size_t i = 0; i < delta.size(); ++i) gb[i] += delta[i];
      }
      upstream.assign(layer_in.size(), 0.0);
      matvec_transposed_accumulate(s.emission_weights[e], delta, upstream);
    }

    // dL/dh_k = emission path + downstream stage path.
    for (std::size_t i = 0; i < nh; ++i) upstream[i] += carry[i];

    const std::size_t depth = t.transition_post.size();
    for (std::size_t d = depth; d-- > 0;) {
      Vec delta = activation_delta<Activation>(upstream, t.transition_post[d], t.transition_pre[d]);
      if (g) {
        auto& gb = g->transition_biases[d];
        for (std::size_t i = 0; i < nh; ++i) gb[i] += delta[i];
      }
      if (d > 0) {
        if (g) add_outer(g->transition_weights[d], delta, t.transition_post[d - 1]);
        upstream.assign(nh, 0.0);
        matvec_transposed_accumulate(s.transition_weights[d], delta, upstream);
        continue;
      }
      // First layer: input weights, link to h_{k-1}.
      if (g) add_outer(g->input_weights, delta, t.input);
      carry.assign(nh, 0.0);
      if (kk > 0) {
        const Vec& h_prev = trace.stages[kk - 1].hidden();
        if (g) add_outer(g->transition_weights[0], delta, h_prev);
        matvec_transposed_accumulate(s.transition_weights[0], delta, carry);
      }
      const std::size_t nx = topo.input_widths[kk];
      const bool needs_fed = trace.outputs_fed_from_model && kk > 0;
      if (input_out || needs_fed) {
        Vec du(t.input.size(), 0.0);
        matvec_transposed_accumulate(s.input_weights, delta, du);
        if (input_out) std::copy(du.begin(), du.begin() + nx, (*input_out)[kk].begin());
        if (needs_fed) fed_grad.assign(du.begin() + nx, du.end());
      }
    }
  }
}

}  // namespace detail

/// Accumulates dL/dtheta into `grads` given dL/dyhat per stage.
template <class Activation = Sigmoid>
void accumulate_backward(const ParameterSet& params, const ForwardTrace& trace,
                         std::span<const Vec> loss_grads, ParamGrads& grads) {
  detail::reverse_sweep<Activation>(params, trace, loss_grads, &grads.stages, nullptr);
}

template <class Activation = Sigmoid>
ParamGrads backward(const ParameterSet& params, const ForwardTrace& trace,
                    std::span<const Vec> loss_grads) {
  ParamGrads grads = zero_grads(params);
  accumulate_backward<Activation>(params, trace, loss_grads, grads);
  return grads;
}

/// d yhat_{target_stage, target_output} / d x_{k,i} for every stage k and raw
/// input i. Entries for stages after target_stage are zero. Indices are
/// zero-based.
template <class Activation = Sigmoid>
StageVectors input_gradient(const ParameterSet& params, const ForwardTrace& trace,
                            std::size_t target_stage, std::size_t target_output) {
  const auto& topo = params.topology;
  if (target_stage >= topo.stages())
    throw ArgumentError("input_gradient: target stage out of range");
  if (target_output >= topo.output_widths[target_stage])
    throw ArgumentError("input_gradient: target output out of range");
  StageVectors seeds(topo.stages());
  seeds[target_stage].assign(topo.output_widths[target_stage], 0.0);
  seeds[target_stage][target_output] = 1.0;
  StageVectors out;
  detail::reverse_sweep<Activation>(params, trace, seeds, nullptr, &out);
  return out;
}

/// Sum of squared residuals for one sample (teacher forcing when outputs
/// are fed forward, which is what training optimizes).
template <class Activation = Sigmoid>
double sample_sse(const ParameterSet& params, std::span<const Vec> x_seq, std::span<const Vec> y_seq) {
  const ForwardTrace trace = forward_teacher<Activation>(params, x_seq, y_seq);
  double s = 0.0;
  for (std::size_t k = 0; k < trace.stages.size(); ++k)
    for (std::size_t j = 0; j < y_seq[k].size(); ++j) {
      const double e = y_seq[k][j] - trace.stages[k].prediction[j];
      s += e * e;
    }
  return s;
}

/// dL/dyhat for L = sum (y - yhat)^2.
inline StageVectors sse_output_grads(const ForwardTrace& trace, std::span<const Vec> y_seq) {
  StageVectors g(trace.stages.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec& p = trace.stages[k].prediction;
    if (y_seq[k].size() != p.size()) throw ShapeError("sse_output_grads: output width mismatch");
    g[k].resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) g[k][j] = -2.0 * (y_seq[k][j] - p[j]);
  }
  return g;
}

/// Denominator for gradient relative errors. The 1e-4 floor keeps entries
/// near zero from being judged on central-difference roundoff (about
/// 1e-16 |f| / eps, i.e. ~1e-10 at eps = 1e-5).
inline double relative_scale(double analytic, double numeric) {
  return std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

struct FiniteDiffReport {
  double max_relative_error = 0.0;  // |analytic - fd| / relative_scale
  double max_absolute_error = 0.0;
  std::size_t parameters_checked = 0;
};

/// Compares backward() against central differences of the single-sample SSE
/// objective over every parameter.
template <class Activation = Sigmoid>
FiniteDiffReport finite_diff_check(const ParameterSet& params, std::span<const Vec> x_seq,
                                   std::span<const Vec> y_seq, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("finite_diff_check: eps must be positive");
  const ForwardTrace trace = forward_teacher<Activation>(params, x_seq, y_seq);
  ParamGrads analytic = backward<Activation>(params, trace, sse_output_grads(trace, y_seq));
  ParameterSet probe = params;
  auto probe_views = tensor_views(probe.stages);
  auto grad_views = tensor_views(analytic.stages);
  FiniteDiffReport report;
  for (std::size_t v = 0; v < probe_views.size(); ++v) {
    auto values = probe_views[v].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = sample_sse<Activation>(probe, x_seq, y_seq);
      values[i] = saved - eps;
      const double down = sample_sse<Activation>(probe, x_seq, y_seq);
      values[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double a = grad_views[v].values[i];
      const double abs_err = std::abs(a - fd);
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      report.max_relative_error = std::max(report.max_relative_error, abs_err / relative_scale(a, fd));
      ++report.parameters_checked;
    }
  }
  return report;
}

}  // namespace dmmtl

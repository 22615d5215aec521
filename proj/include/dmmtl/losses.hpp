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

// Loss terms and the full training objective, in both the robust (Huber)
// form and the outlier-decomposed form
//
//   (1/B) sum_{n,k,j} [(y - yhat - a)^2 + gamma |a|]
//     + lambda_x sum_{k,i} ||W_x[k](:, i)||_2 + (lambda/2) ||Theta||^2.
//
// Minimizing the decomposed form over a gives a = S_{gamma/2}(y - yhat) and
// recovers the Huber form exactly.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmmtl/errors.hpp"
#include "dmmtl/model.hpp"
#include "dmmtl/tensor.hpp"

namespace dmmtl {

enum class LossKind { Sse, Huber };

struct TrainConfig {
  double lambda_x = 0.0;       // group penalty on W_x columns
  double lambda = 0.0;         // L2 on every parameter
  double gamma = 1.0;          // Huber / outlier threshold; unused for Sse
  LossKind loss = LossKind::Sse;
  double prox_step = 0.1;      // 1/L for the W_x proximal block
  double sgd_step = 0.1;       // c for the remaining parameters
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t restart_patience = 0;  // 0 disables restarts
  std::size_t max_restarts = 0;
  double step_decay = 0.0;     // steps scaled by 1/(1 + step_decay * epoch)
  bool backtrack = false;      // halve both steps when the epoch objective rises

  void validate() const {
    if (!(lambda_x >= 0.0) || !(lambda >= 0.0)) throw ArgumentError("train config: penalties must be >= 0");
    if (loss == LossKind::Huber && !(gamma > 0.0)) throw ArgumentError("train config: gamma must be > 0");
    if (!(prox_step > 0.0) || !(sgd_step > 0.0)) throw ArgumentError("train config: steps must be > 0");
    if (batch_size < 1 || epochs < 1) throw ArgumentError("train config: batch_size and epochs must be >= 1");
    if (!(step_decay >= 0.0)) throw ArgumentError("train config: step_decay must be >= 0");
  }
};

/// Outlier variables a[n][k][j] for one batch.
struct OutlierState {
  std::vector<StageVectors> values;
};

inline double sse_loss(std::span<const double> e) { return sum_squares(e); }

/// e^2 for |e| <= gamma/2, gamma|e| - gamma^2/4 beyond.
inline double huber(double e, double gamma) {
  if (!(gamma > 0.0)) throw ArgumentError("huber: gamma must be positive");
  const double a = std::abs(e);
  return a <= 0.5 * gamma ? e * e : gamma * a - 0.25 * gamma * gamma;
}

/// d huber / d e. At the kink both branches give gamma * sgn(e).
inline double huber_derivative(double e, double gamma) {
  if (!(gamma > 0.0)) throw ArgumentError("huber_derivative: gamma must be positive");
  if (std::abs(e) <= 0.5 * gamma) return 2.0 * e;
  return e > 0.0 ? gamma : -gamma;
}

inline double group_norm_sum(const ParameterSet& params) {
  double s = 0.0;
  for (const auto& st : params.stages)
    for (std::size_t c = 0; c < st.input_weights.cols(); ++c) s += st.input_weights.column_norm(c);
  return s;
}

/// lambda_x * sum of W_x column norms over every stage.
inline double group_penalty(const ParameterSet& params, double lambda_x) {
  if (!(lambda_x >= 0.0)) throw ArgumentError("group_penalty: lambda_x must be >= 0");
  return lambda_x * group_norm_sum(params);
}

inline double squared_norm(const ParameterSet& params) {
  double s = 0.0;
  for (const auto& v : tensor_views(params.stages)) s += sum_squares(v.values);
  return s;
}

inline double penalty_terms(const ParameterSet& params, const TrainConfig& config) {
  return group_penalty(params, config.lambda_x) + 0.5 * config.lambda * squared_norm(params);
}

/// Residuals y - yhat for one sample (teacher forcing when outputs are fed).
inline StageVectors residuals(const ParameterSet& params, const Sample& s) {
  const ForwardTrace trace = forward_teacher(params, s.inputs, s.outputs);
  StageVectors r(trace.stages.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    r[k].resize(s.outputs[k].size());
    for (std::size_t j = 0; j < r[k].size(); ++j) r[k][j] = s.outputs[k][j] - trace.stages[k].prediction[j];
  }
  return r;
}

/// Outlier-decomposed objective for fixed outliers (per-sample data terms
/// averaged over the batch; penalties unscaled).
inline double objective(const ParameterSet& params, std::span<const Sample> batch,
                        const TrainConfig& config, const OutlierState& outliers) {
  if (batch.empty()) throw ArgumentError("objective: empty batch");
  if (outliers.values.size() != batch.size()) throw ShapeError("objective: outlier batch size mismatch");
  const double gamma = config.loss == LossKind::Huber ? config.gamma : 0.0;
  double data = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const StageVectors r = residuals(params, batch[n]);
    const auto& a = outliers.values[n];
    if (a.size() != r.size()) throw ShapeError("objective: outlier stage count mismatch");
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (a[k].size() != r[k].size()) throw ShapeError("objective: outlier width mismatch");
      for (std::size_t j = 0; j < r[k].size(); ++j) {
        const double e = r[k][j] - a[k][j];
        data += e * e + gamma * std::abs(a[k][j]);
      }
    }
  }
  return data / static_cast<double>(batch.size()) + penalty_terms(params, config);
}

/// Robust objective: Huber (or squared) loss on residuals plus penalties.
inline double robust_objective(const ParameterSet& params, std::span<const Sample> batch,
                               const TrainConfig& config) {
  if (batch.empty()) throw ArgumentError("robust_objective: empty batch");
  double data = 0.0;
  for (const auto& s : batch) {
    for (const auto& rk : residuals(params, s))
      for (double e : rk) data += config.loss == LossKind::Huber ? huber(e, config.gamma) : e * e;
  }
  return data / static_cast<double>(batch.size()) + penalty_terms(params, config);
}

}  // namespace dmmtl

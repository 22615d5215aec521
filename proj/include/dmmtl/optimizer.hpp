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

// Block-coordinate stochastic proximal gradient training. Each iteration on
// a mini-batch:
//   1. forward pass at the current parameters,
//   2. outliers a = S_{gamma/2}(y - yhat) (zero for squared loss),
//   3. one backward pass of the decomposed loss sum (y - yhat - a)^2,
//   4. proximal group-lasso update of every W_x column,
//   5. gradient step on all remaining parameters.
// Steps 4 and 5 reuse the gradient from step 3.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmmtl/diagnostics.hpp"
#include "dmmtl/errors.hpp"
#include "dmmtl/gradients.hpp"
#include "dmmtl/losses.hpp"
#include "dmmtl/model.hpp"
#include "dmmtl/rng.hpp"

namespace dmmtl {

/// a = S_{gamma/2}(residual) per entry; all zeros for squared loss.
inline OutlierState update_outliers(std::span<const StageVectors> residuals, double gamma, LossKind loss) {
  if (loss == LossKind::Huber && !(gamma > 0.0)) throw ArgumentError("update_outliers: gamma must be positive");
  OutlierState state;
  state.values.reserve(residuals.size());
  for (const auto& r : residuals) {
    StageVectors a(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
      a[k].assign(r[k].size(), 0.0);
      if (loss == LossKind::Huber)
        for (std::size_t j = 0; j < r[k].size(); ++j) a[k][j] = soft_threshold_scalar(r[k][j], 0.5 * gamma);
    }
    state.values.push_back(std::move(a));
  }
  return state;
}

/// Closed-form minimizer of the linearized column subproblem
///   g.(w - w0) + (L/2)||w - w0||^2 + lambda_x ||w|| + (lambda/2)||w||^2,
/// i.e. w = S_{lambda_x/(L+lambda)}(L/(L+lambda) (w0 - g/L)) with L = 1/prox_step.
inline Vec prox_column(std::span<const double> w, std::span<const double> grad, double prox_step,
                       double lambda, double lambda_x) {
  if (!(prox_step > 0.0)) throw ArgumentError("prox_column: prox_step must be positive");
  if (w.size() != grad.size()) throw ShapeError("prox_column: length mismatch");
  const double L = 1.0 / prox_step;
  const double shrink = L / (L + lambda);
  Vec v(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) v[i] = shrink * (w[i] - prox_step * grad[i]);
  return soft_threshold_block(v, lambda_x / (L + lambda));
}

/// Proximal update of every W_x column in place.
inline void prox_update_wx(ParameterSet& params, const ParamGrads& grads, double prox_step, double lambda,
                           double lambda_x) {
  if (grads.stages.size() != params.stages.size()) throw ShapeError("prox_update_wx: stage count mismatch");
  for (std::size_t k = 0; k < params.stages.size(); ++k) {
    Mat& w = params.stages[k].input_weights;
    const Mat& g = grads.stages[k].input_weights;
    if (!w.same_shape(g)) throw ShapeError("prox_update_wx: W_x shape mismatch at stage " + std::to_string(k));
    for (std::size_t c = 0; c < w.cols(); ++c) w.set_column(c, prox_column(w.column(c), g.column(c), prox_step, lambda, lambda_x));
  }
}

inline void prox_update_wx(ParameterSet& params, const ParamGrads& grads, const TrainConfig& config) {
  prox_update_wx(params, grads, config.prox_step, config.lambda, config.lambda_x);
}

/// theta -= c (g + lambda theta) for every tensor except W_x.
inline void sgd_step(ParameterSet& params, const ParamGrads& grads, double c, double lambda) {
  if (!(c > 0.0)) throw ArgumentError("sgd_step: step must be positive");
  auto p = tensor_views(params.stages);
  const auto g = tensor_views(grads.stages);
  if (p.size() != g.size()) throw ShapeError("sgd_step: gradient structure mismatch");
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v].role == TensorRole::InputWeights) continue;
    if (p[v].values.size() != g[v].values.size()) throw ShapeError("sgd_step: tensor size mismatch");
    for (std::size_t i = 0; i < p[v].values.size(); ++i)
      p[v].values[i] -= c * (g[v].values[i] + lambda * p[v].values[i]);
  }
}

inline void set_zero(ParamGrads& grads) {
  for (auto& v : tensor_views(grads.stages)) std::fill(v.values.begin(), v.values.end(), 0.0);
}

/// Mean per-output relative RMSE of the model on `eval`, relative to the
/// train-set output means.
inline std::optional<double> mean_relative_rmse(const ParameterSet& params, std::span<const Sample> eval,
                                                const StageVectors& train_mean) {
  if (eval.empty()) return std::nullopt;
  std::vector<StageVectors> truth, pred;
  truth.reserve(eval.size());
  pred.reserve(eval.size());
  for (const auto& s : eval) {
    truth.push_back(s.outputs);
    pred.push_back(predict(params, s.inputs));
  }
  return table_mean(relative_rmse(truth, pred, train_mean));
}

struct EpochRecord {
  std::size_t epoch;                 // 1-based, continues across resumes
  std::size_t restart;               // initialization attempt index
  double objective;                  // robust objective over the train split
  std::optional<double> val_rmse;    // mean relative RMSE on validation
  double sgd_step;
  double prox_step;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::size_t restarts = 0;
  std::size_t epochs_completed = 0;  // final epoch number of the returned params
};

struct TrainResult {
  ParameterSet params;
  TrainReport report;
};

struct TrainOptions {
  /// Resume from these parameters instead of a fresh initialization.
  std::optional<ParameterSet> initial;
  std::size_t first_epoch = 0;  // epochs already completed by `initial`
  std::function<void(const EpochRecord&)> on_epoch;
};

namespace detail {

inline void run_batch(ParameterSet& params, std::span<const Sample> data, std::span<const std::size_t> batch,
                      const TrainConfig& config, double sgd_c, double prox_step, ParamGrads& grads) {
  set_zero(grads);
  const double scale = 1.0 / static_cast<double>(batch.size());
  StageVectors out_grads;
  for (std::size_t idx : batch) {
    const Sample& s = data[idx];
    const ForwardTrace trace = forward_teacher(params, s.inputs, s.outputs);
    out_grads.resize(trace.stages.size());
    for (std::size_t k = 0; k < trace.stages.size(); ++k) {
      const Vec& p = trace.stages[k].prediction;
      out_grads[k].resize(p.size());
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double r = s.outputs[k][j] - p[j];
        const double a = config.loss == LossKind::Huber ? soft_threshold_scalar(r, 0.5 * config.gamma) : 0.0;
        out_grads[k][j] = -2.0 * (r - a) * scale;
      }
    }
    accumulate_backward(params, trace, out_grads, grads);
  }
  prox_update_wx(params, grads, prox_step, config.lambda, config.lambda_x);
  sgd_step(params, grads, sgd_c, config.lambda);
}

}  // namespace detail

/// Trains on `train_set`; `val_set` (may be empty) drives restarts and the
/// logged validation RMSE. Deterministic given config.seed.
inline TrainResult train(std::span<const Sample> train_set, std::span<const Sample> val_set,
                         const StageTopology& topology, const TrainConfig& config,
                         const TrainOptions& options = {}) {
  if (train_set.empty()) throw ArgumentError("train: empty training set");
  config.validate();
  topology.validate();
  const StageVectors train_mean = output_means(train_set);

  TrainResult result;
  std::size_t restart = 0;
  for (;;) {
    ParameterSet params;
    if (options.initial && restart == 0) {
      params = *options.initial;
      if (!(params.topology == topology)) throw ShapeError("train: initial parameters do not match topology");
    } else {
      const std::uint64_t init_seed = restart == 0 ? config.seed : derive_seed(config.seed, "restart", restart);
      params = init_params(topology, init_seed);
    }
    ParamGrads grads = zero_grads(params);
    std::vector<std::size_t> order(train_set.size());
    double sgd_c = config.sgd_step;
    double prox_step = config.prox_step;
    double previous_objective = std::numeric_limits<double>::infinity();
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    bool restart_now = false;

    for (std::size_t e = 0; e < config.epochs; ++e) {
      const std::size_t epoch = options.first_epoch + e + 1;
      const double decay = 1.0 / (1.0 + config.step_decay * static_cast<double>(epoch - 1));
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng = make_rng(config.seed, "shuffle", (static_cast<std::uint64_t>(restart) << 32) | epoch);
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        detail::run_batch(params, train_set, std::span(order).subspan(begin, end - begin), config,
                          sgd_c * decay, prox_step * decay, grads);
      }

      const double obj = robust_objective(params, train_set, config);
      if (!std::isfinite(obj))
        throw DivergenceError("train: non-finite objective at epoch " + std::to_string(epoch), epoch);
      EpochRecord rec{epoch, restart, obj, mean_relative_rmse(params, val_set, train_mean), sgd_c * decay,
                      prox_step * decay};
      result.report.history.push_back(rec);
      if (options.on_epoch) options.on_epoch(rec);

      if (config.backtrack && obj > previous_objective) {
        sgd_c *= 0.5;
        prox_step *= 0.5;
      }
      previous_objective = obj;

      if (rec.val_rmse && config.restart_patience > 0) {
        if (*rec.val_rmse < best_val) {
          best_val = *rec.val_rmse;
          since_best = 0;
        } else if (++since_best >= config.restart_patience && *rec.val_rmse > 1.0 &&
                   restart < config.max_restarts) {
          restart_now = true;
          break;
        }
      }
    }
    if (restart_now) {
      ++restart;
      continue;
    }
    result.params = std::move(params);
    result.report.restarts = restart;
    result.report.epochs_completed = options.first_epoch + config.epochs;
    return result;
  }
}

}  // namespace dmmtl

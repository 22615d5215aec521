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

// Evaluation metrics and interpretability reports.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dmmtl/errors.hpp"
#include "dmmtl/gradients.hpp"
#include "dmmtl/model.hpp"

namespace dmmtl {

/// Per-(stage, output) metric; nullopt marks an undefined value.
using OutputTable = std::vector<std::vector<std::optional<double>>>;

inline StageVectors output_means(std::span<const Sample> samples) {
  if (samples.empty()) throw ArgumentError("output_means: no samples");
  StageVectors mean(samples.front().outputs.size());
  for (std::size_t k = 0; k < mean.size(); ++k) mean[k].assign(samples.front().outputs[k].size(), 0.0);
  for (const auto& s : samples)
    for (std::size_t k = 0; k < mean.size(); ++k)
      for (std::size_t j = 0; j < mean[k].size(); ++j) mean[k][j] += s.outputs[k][j];
  for (auto& m : mean)
    for (double& v : m) v /= static_cast<double>(samples.size());
  return mean;
}

/// Test SSE of the predictions divided by test SSE of the train-mean
/// predictor, per output. Constant test targets give nullopt.
inline OutputTable relative_rmse(std::span<const StageVectors> y_test, std::span<const StageVectors> y_pred,
                                 const StageVectors& y_train_mean) {
  if (y_test.size() != y_pred.size()) throw ShapeError("relative_rmse: sample count mismatch");
  if (y_test.empty()) throw ArgumentError("relative_rmse: no samples");
  const std::size_t K = y_train_mean.size();
  std::vector<Vec> num(K), den(K);
  for (std::size_t k = 0; k < K; ++k) {
    num[k].assign(y_train_mean[k].size(), 0.0);
    den[k].assign(y_train_mean[k].size(), 0.0);
  }
  for (std::size_t n = 0; n < y_test.size(); ++n) {
    if (y_test[n].size() != K || y_pred[n].size() != K) throw ShapeError("relative_rmse: stage count mismatch");
    for (std::size_t k = 0; k < K; ++k) {
      if (y_test[n][k].size() != num[k].size() || y_pred[n][k].size() != num[k].size())
        throw ShapeError("relative_rmse: output width mismatch");
      for (std::size_t j = 0; j < num[k].size(); ++j) {
        const double e = y_test[n][k][j] - y_pred[n][k][j];
        const double d = y_test[n][k][j] - y_train_mean[k][j];
        num[k][j] += e * e;
        den[k][j] += d * d;
      }
    }
  }
  OutputTable out(K);
  for (std::size_t k = 0; k < K; ++k) {
    out[k].resize(num[k].size());
    for (std::size_t j = 0; j < num[k].size(); ++j)
      if (den[k][j] > 0.0) out[k][j] = num[k][j] / den[k][j];
  }
  return out;
}

/// Defined entries in (stage, output) order.
inline std::vector<double> defined_values(const OutputTable& table) {
  std::vector<double> out;
  for (const auto& row : table)
    for (const auto& v : row)
      if (v) out.push_back(*v);
  return out;
}

inline std::optional<double> mean_of(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

inline std::optional<double> table_mean(const OutputTable& table) {
  const auto v = defined_values(table);
  return mean_of(v);
}

/// Mean of the defined entries of one stage.
inline std::optional<double> stage_mean(const OutputTable& table, std::size_t k) {
  std::vector<double> v;
  for (const auto& x : table.at(k))
    if (x) v.push_back(*x);
  return mean_of(v);
}

/// Empirical quantiles with linear interpolation between order statistics.
inline std::vector<double> rmse_quantiles(std::vector<double> values, std::span<const double> levels) {
  if (values.empty()) throw ArgumentError("rmse_quantiles: empty value list");
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(levels.size());
  for (double q : levels) {
    if (!(q > 0.0 && q < 1.0)) throw ArgumentError("rmse_quantiles: level outside (0,1)");
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.push_back(values[lo] + frac * (values[hi] - values[lo]));
  }
  return out;
}

struct MetricsReport {
  OutputTable per_output;
  std::vector<double> levels;
  std::vector<double> quantiles;

  std::size_t count_below(double threshold) const {
    std::size_t n = 0;
    for (double v : defined_values(per_output))
      if (v < threshold) ++n;
    return n;
  }
};

inline MetricsReport make_metrics_report(OutputTable table, std::vector<double> levels) {
  MetricsReport r;
  r.quantiles = rmse_quantiles(defined_values(table), levels);
  r.per_output = std::move(table);
  r.levels = std::move(levels);
  return r;
}

struct ImportanceEntry {
  std::size_t stage;
  std::size_t input;
  double score;
};

struct ImportanceReport {
  /// scores[k][i]; global reports cover the effective input width (fed
  /// outputs follow the raw inputs), local reports raw inputs only.
  StageVectors scores;
  std::optional<std::pair<std::size_t, std::size_t>> target;  // (stage, output)
  std::size_t sample_count = 0;

  /// Highest-scoring inputs, ties broken by (stage, input) order.
  std::vector<ImportanceEntry> top(std::size_t m) const {
    std::vector<ImportanceEntry> all;
    for (std::size_t k = 0; k < scores.size(); ++k)
      for (std::size_t i = 0; i < scores[k].size(); ++i) all.push_back({k, i, scores[k][i]});
    std::stable_sort(all.begin(), all.end(),
                     [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.score > b.score; });
    if (all.size() > m) all.resize(m);
    return all;
  }
};

/// Column norms ||W_x[k](:, i)||_2.
inline ImportanceReport global_importance(const ParameterSet& params) {
  ImportanceReport r;
  for (const auto& s : params.stages) {
    Vec col(s.input_weights.cols());
    for (std::size_t c = 0; c < col.size(); ++c) col[c] = s.input_weights.column_norm(c);
    r.scores.push_back(std::move(col));
  }
  return r;
}

/// Mean over the given samples of (d yhat_{stage,output} / d x_{k,i})^2.
template <class Activation = Sigmoid>
ImportanceReport local_importance(const ParameterSet& params, std::span<const StageVectors> inputs,
                                  std::size_t stage, std::size_t output) {
  if (inputs.empty()) throw ArgumentError("local_importance: empty sample set");
  ImportanceReport r;
  r.target = std::make_pair(stage, output);
  r.sample_count = inputs.size();
  for (const auto& x : inputs) {
    const ForwardTrace trace = forward<Activation>(params, x);
    const StageVectors g = input_gradient<Activation>(params, trace, stage, output);
    if (r.scores.empty()) {
      r.scores.resize(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) r.scores[k].assign(g[k].size(), 0.0);
    }
    for (std::size_t k = 0; k < g.size(); ++k)
      for (std::size_t i = 0; i < g[k].size(); ++i) r.scores[k][i] += g[k][i] * g[k][i];
  }
  for (auto& row : r.scores)
    for (double& v : row) v /= static_cast<double>(inputs.size());
  return r;
}

/// Scores of the raw inputs only, flattened in (stage, input) order.
inline std::vector<double> flatten_raw_scores(const ImportanceReport& report,
                                              std::span<const std::size_t> input_widths) {
  std::vector<double> out;
  for (std::size_t k = 0; k < input_widths.size(); ++k)
    for (std::size_t i = 0; i < input_widths[k]; ++i) out.push_back(report.scores.at(k).at(i));
  return out;
}

/// Mann-Whitney AUC of positives vs negatives; ties count 1/2. nullopt when
/// either class is empty.
inline std::optional<double> auc_score(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ShapeError("auc_score: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct SelectionMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> auc;
  double threshold = 0.0;  // inputs with score >= threshold are selected
  std::size_t selected = 0;
};

/// Variable-selection accuracy against a truth mask (true = important). The
/// threshold is the smallest score cutoff whose false positive rate among
/// truly unimportant inputs is <= fpr.
inline SelectionMetrics selection_metrics(std::span<const double> scores, const std::vector<bool>& important,
                                          double fpr) {
  if (scores.size() != important.size()) throw ShapeError("selection_metrics: length mismatch");
  if (!(fpr > 0.0 && fpr < 1.0)) throw ArgumentError("selection_metrics: fpr must be in (0,1)");
  SelectionMetrics m;
  m.auc = auc_score(scores, important);
  std::size_t n_pos = 0;
  for (bool b : important) n_pos += b ? 1 : 0;
  const std::size_t n_neg = scores.size() - n_pos;

  std::vector<double> cuts(scores.begin(), scores.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(std::numeric_limits<double>::infinity());
  for (double cut : cuts) {
    std::size_t fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (!important[i] && scores[i] >= cut) ++fp;
    const double rate = n_neg == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(n_neg);
    if (rate <= fpr) {
      m.threshold = cut;
      break;
    }
  }
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < m.threshold) continue;
    (important[i] ? tp : fp) += 1;
  }
  m.selected = tp + fp;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (n_pos > 0) m.recall = static_cast<double>(tp) / static_cast<double>(n_pos);
  return m;
}

}  // namespace dmmtl

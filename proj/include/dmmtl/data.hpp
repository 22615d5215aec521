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

// Datasets, synthetic multistage benchmark generators, normalization and
// splitting.
//
// Generators follow a linear latent recursion per chain c:
//   h_k = Wx_k x_k[c] + Uh_k h_{k-lag} + b_k,   y_k[c] = Wy_k h_k + eps,
// with h_j = 0 for j <= 0. Case 1 is one chain with lag 1; Case 2 splits the
// inputs/outputs of every stage into independent groups; Case 3 is one chain
// with lag 3. The trailing `n_unimportant` input slots of every chain and
// stage have zero Wx columns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmmtl/errors.hpp"
#include "dmmtl/model.hpp"
#include "dmmtl/rng.hpp"
#include "dmmtl/tensor.hpp"

namespace dmmtl {

struct ChainStage {
  Mat input_weights;       // nh x input_count
  Mat transition_weights;  // nh x nh
  Vec bias;                // nh
  Mat output_weights;      // output_count x nh

  friend bool operator==(const ChainStage&, const ChainStage&) = default;
};

struct LatentChain {
  std::size_t lag = 1;
  std::size_t input_begin = 0;
  std::size_t input_count = 0;
  std::size_t output_begin = 0;
  std::size_t output_count = 0;
  std::vector<ChainStage> stages;

  friend bool operator==(const LatentChain&, const LatentChain&) = default;
};

/// Ground truth retained by the generators.
struct GeneratorTruth {
  std::vector<LatentChain> chains;
  std::vector<std::vector<bool>> important;  // [stage][input]

  /// Noiseless outputs for raw inputs x_seq.
  StageVectors propagate(std::span<const Vec> x_seq) const {
    if (chains.empty()) throw ArgumentError("truth: no chains");
    const std::size_t K = chains.front().stages.size();
    if (x_seq.size() != K) throw ShapeError("truth: stage count mismatch");
    std::size_t ny = 0;
    for (const auto& c : chains) ny = std::max(ny, c.output_begin + c.output_count);
    StageVectors y(K, Vec(ny, 0.0));
    for (const auto& c : chains) {
      std::vector<Vec> h(K);
      for (std::size_t k = 0; k < K; ++k) {
        const ChainStage& st = c.stages[k];
        if (x_seq[k].size() < c.input_begin + c.input_count) throw ShapeError("truth: input too short");
        Vec hk = st.bias;
        matvec_accumulate(st.input_weights, std::span(x_seq[k]).subspan(c.input_begin, c.input_count), hk);
        if (k >= c.lag) matvec_accumulate(st.transition_weights, h[k - c.lag], hk);
        const Vec yk = matvec(st.output_weights, hk);
        std::copy(yk.begin(), yk.end(), y[k].begin() + static_cast<std::ptrdiff_t>(c.output_begin));
        h[k] = std::move(hk);
      }
    }
    return y;
  }

  friend bool operator==(const GeneratorTruth&, const GeneratorTruth&) = default;
};

struct VariableStats {
  double mean = 0.0;
  double scale = 1.0;  // population std; 1 for degenerate variables
  bool degenerate = false;

  friend bool operator==(const VariableStats&, const VariableStats&) = default;
};

struct NormalizationStats {
  std::vector<std::vector<VariableStats>> inputs;   // [stage][input]
  std::vector<std::vector<VariableStats>> outputs;  // [stage][output]
  std::vector<std::string> warnings;

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

struct Dataset {
  std::vector<std::size_t> input_widths;
  std::vector<std::size_t> output_widths;
  std::vector<std::vector<std::string>> input_names;
  std::vector<std::vector<std::string>> output_names;
  std::vector<Sample> samples;
  std::vector<std::size_t> ids;  // original row index of every sample
  std::optional<NormalizationStats> normalization;
  std::optional<GeneratorTruth> truth;
  /// Original-unit inputs per sample, kept by apply_normalization when truth is
  /// attached so the oracle does not see the rounding of a denormalize round trip.
  std::vector<StageVectors> raw_inputs;

  std::size_t stages() const noexcept { return input_widths.size(); }
  std::size_t size() const noexcept { return samples.size(); }

  /// Model topology over this dataset's stage layout.
  StageTopology topology(std::size_t hidden_width, std::size_t transition_depth = 1,
                         std::size_t emission_depth = 1, bool feed_prev_outputs = false) const {
    return StageTopology{input_widths, output_widths, hidden_width, transition_depth, emission_depth,
                         feed_prev_outputs};
  }

  std::vector<StageVectors> inputs() const {
    std::vector<StageVectors> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.inputs);
    return out;
  }

  std::vector<StageVectors> outputs() const {
    std::vector<StageVectors> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.outputs);
    return out;
  }

  /// Throws unless every sample conforms to the stage layout.
  void validate() const {
    if (input_widths.size() != output_widths.size()) throw ShapeError("dataset: stage layout mismatch");
    if (ids.size() != samples.size()) throw ShapeError("dataset: id count mismatch");
    if (!raw_inputs.empty() && raw_inputs.size() != samples.size())
      throw ShapeError("dataset: raw input count mismatch");
    for (const auto& s : samples) {
      if (s.inputs.size() != stages() || s.outputs.size() != stages())
        throw ShapeError("dataset: sample stage count mismatch");
      for (std::size_t k = 0; k < stages(); ++k)
        if (s.inputs[k].size() != input_widths[k] || s.outputs[k].size() != output_widths[k])
          throw ShapeError("dataset: sample width mismatch at stage " + std::to_string(k));
    }
  }
};

/// Default variable names x_<stage>_<index>, y_<stage>_<index> (1-based).
inline void assign_default_names(Dataset& ds) {
  ds.input_names.assign(ds.stages(), {});
  ds.output_names.assign(ds.stages(), {});
  for (std::size_t k = 0; k < ds.stages(); ++k) {
    for (std::size_t i = 0; i < ds.input_widths[k]; ++i)
      ds.input_names[k].push_back("x_" + std::to_string(k + 1) + "_" + std::to_string(i + 1));
    for (std::size_t j = 0; j < ds.output_widths[k]; ++j)
      ds.output_names[k].push_back("y_" + std::to_string(k + 1) + "_" + std::to_string(j + 1));
  }
}

struct GeneratorSpec {
  int case_id = 1;
  std::size_t stages = 9;
  std::size_t inputs_per_stage = 90;
  std::size_t outputs_per_stage = 6;
  std::size_t hidden_true = 5;
  double sigma = 0.5;
  /// Per chain and stage; unset means 15 (Cases 1, 3) or 5 (Case 2).
  std::optional<std::size_t> n_unimportant;
  std::size_t groups = 3;  // Case 2
  std::size_t lag = 3;     // Case 3
  std::size_t n_samples = 2000;
  std::uint64_t seed = 0;

  std::size_t unimportant_per_chain() const {
    if (n_unimportant) return *n_unimportant;
    return case_id == 2 ? 5 : 15;
  }

  void validate() const {
    if (case_id < 1 || case_id > 3) throw ArgumentError("generator: case must be 1, 2 or 3");
    if (stages == 0 || inputs_per_stage == 0 || outputs_per_stage == 0 || hidden_true == 0 || n_samples == 0)
      throw ArgumentError("generator: dimensions must be positive");
    if (!(sigma >= 0.0)) throw ArgumentError("generator: sigma must be >= 0");
    std::size_t chain_inputs = inputs_per_stage;
    if (case_id == 2) {
      if (groups == 0 || inputs_per_stage % groups != 0 || outputs_per_stage % groups != 0)
        throw ArgumentError("generator: Case 2 needs input/output widths divisible by groups");
      chain_inputs /= groups;
    }
    if (case_id == 3 && lag == 0) throw ArgumentError("generator: lag must be >= 1");
    if (unimportant_per_chain() >= chain_inputs)
      throw ArgumentError("generator: n_unimportant must be below the chain input width");
  }
};

namespace detail {

inline GeneratorTruth draw_truth(const GeneratorSpec& spec) {
  const std::size_t G = spec.case_id == 2 ? spec.groups : 1;
  const std::size_t nx = spec.inputs_per_stage / G;
  const std::size_t ny = spec.outputs_per_stage / G;
  const std::size_t nh = spec.hidden_true;
  const std::size_t unimportant = spec.unimportant_per_chain();
  Rng rng = make_rng(spec.seed, "generator-truth");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sx = 1.0 / std::sqrt(static_cast<double>(nx));
  const double sh = 1.0 / std::sqrt(static_cast<double>(nh));
  auto draw = [&](Mat& m, double sd) {
    for (double& v : m.values()) v = sd * normal(rng);
  };

  GeneratorTruth truth;
  for (std::size_t g = 0; g < G; ++g) {
    LatentChain c;
    c.lag = spec.case_id == 3 ? spec.lag : 1;
    c.input_begin = g * nx;
    c.input_count = nx;
    c.output_begin = g * ny;
    c.output_count = ny;
    for (std::size_t k = 0; k < spec.stages; ++k) {
      ChainStage st{Mat(nh, nx), Mat(nh, nh), Vec(nh), Mat(ny, nh)};
      draw(st.input_weights, sx);
      for (std::size_t i = nx - unimportant; i < nx; ++i)
        for (std::size_t r = 0; r < nh; ++r) st.input_weights(r, i) = 0.0;
      draw(st.transition_weights, sh);
      for (double& v : st.bias) v = sh * normal(rng);
      draw(st.output_weights, sh);
      c.stages.push_back(std::move(st));
    }
    truth.chains.push_back(std::move(c));
  }
  truth.important.assign(spec.stages, std::vector<bool>(spec.inputs_per_stage, true));
  for (std::size_t k = 0; k < spec.stages; ++k)
    for (std::size_t g = 0; g < G; ++g)
      for (std::size_t i = nx - unimportant; i < nx; ++i) truth.important[k][g * nx + i] = false;
  return truth;
}

inline Dataset generate(const GeneratorSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.input_widths.assign(spec.stages, spec.inputs_per_stage);
  ds.output_widths.assign(spec.stages, spec.outputs_per_stage);
  assign_default_names(ds);
  ds.truth = draw_truth(spec);
  ds.samples.resize(spec.n_samples);
  ds.ids.resize(spec.n_samples);
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    // Per-sample substream: samples can be produced independently.
    Rng rng = make_rng(spec.seed, "generator-sample", n);
    std::normal_distribution<double> normal(0.0, 1.0);
    Sample& s = ds.samples[n];
    s.inputs.assign(spec.stages, Vec(spec.inputs_per_stage));
    for (auto& xk : s.inputs)
      for (double& v : xk) v = normal(rng);
    s.outputs = ds.truth->propagate(s.inputs);
    for (auto& yk : s.outputs)
      for (double& v : yk) v += spec.sigma * normal(rng);
    ds.ids[n] = n;
  }
  return ds;
}

}  // namespace detail

/// Case 1: one unified chain.
inline Dataset generate_case1(GeneratorSpec spec) {
  spec.case_id = 1;
  return detail::generate(spec);
}

/// Case 2: independent parallel sensor groups inside every stage.
inline Dataset generate_case2(GeneratorSpec spec) {
  spec.case_id = 2;
  return detail::generate(spec);
}

/// Case 3: h_k depends on h_{k-lag}; stages congruent mod lag form independent lines.
inline Dataset generate_case3(GeneratorSpec spec) {
  spec.case_id = 3;
  return detail::generate(spec);
}

inline Dataset generate_dataset(const GeneratorSpec& spec) { return detail::generate(spec); }

namespace detail {

inline std::vector<std::vector<VariableStats>> fit_block(const Dataset& ds, bool inputs,
                                                         std::vector<std::string>& warnings) {
  const auto& widths = inputs ? ds.input_widths : ds.output_widths;
  std::vector<std::vector<VariableStats>> stats(widths.size());
  const double n = static_cast<double>(ds.size());
  for (std::size_t k = 0; k < widths.size(); ++k) {
    stats[k].resize(widths[k]);
    for (std::size_t i = 0; i < widths[k]; ++i) {
      double mean = 0.0;
      for (const auto& s : ds.samples) mean += (inputs ? s.inputs : s.outputs)[k][i];
      mean /= n;
      double var = 0.0;
      for (const auto& s : ds.samples) {
        const double d = (inputs ? s.inputs : s.outputs)[k][i] - mean;
        var += d * d;
      }
      var /= n;
      VariableStats& v = stats[k][i];
      v.mean = mean;
      if (var > 0.0) {
        v.scale = std::sqrt(var);
      } else {
        v.degenerate = true;
        const auto& names = inputs ? ds.input_names : ds.output_names;
        const std::string name = k < names.size() && i < names[k].size() ? names[k][i] : "?";
        warnings.push_back("zero variance: " + name + " (stage " + std::to_string(k + 1) + ") centered only");
      }
    }
  }
  return stats;
}

}  // namespace detail

/// Per-variable mean/std over `ds` (population std).
inline NormalizationStats fit_normalization(const Dataset& ds) {
  if (ds.samples.empty()) throw ArgumentError("fit_normalization: empty dataset");
  NormalizationStats stats;
  stats.inputs = detail::fit_block(ds, true, stats.warnings);
  stats.outputs = detail::fit_block(ds, false, stats.warnings);
  return stats;
}

inline Dataset apply_normalization(Dataset ds, const NormalizationStats& stats) {
  if (ds.normalization) throw ArgumentError("apply_normalization: dataset is already normalized");
  if (stats.inputs.size() != ds.stages() || stats.outputs.size() != ds.stages())
    throw ShapeError("apply_normalization: stats do not match the dataset");
  if (ds.truth) ds.raw_inputs = ds.inputs();
  for (auto& s : ds.samples)
    for (std::size_t k = 0; k < ds.stages(); ++k) {
      for (std::size_t i = 0; i < s.inputs[k].size(); ++i)
        s.inputs[k][i] = (s.inputs[k][i] - stats.inputs[k][i].mean) / stats.inputs[k][i].scale;
      for (std::size_t j = 0; j < s.outputs[k].size(); ++j)
        s.outputs[k][j] = (s.outputs[k][j] - stats.outputs[k][j].mean) / stats.outputs[k][j].scale;
    }
  ds.normalization = stats;
  return ds;
}

/// z-score using the dataset's own statistics.
inline Dataset normalize(const Dataset& ds) { return apply_normalization(ds, fit_normalization(ds)); }

inline Dataset denormalize(Dataset ds) {
  if (!ds.normalization) throw ArgumentError("denormalize: dataset is not normalized");
  const NormalizationStats& st = *ds.normalization;
  for (auto& s : ds.samples)
    for (std::size_t k = 0; k < ds.stages(); ++k) {
      for (std::size_t i = 0; i < s.inputs[k].size(); ++i)
        s.inputs[k][i] = s.inputs[k][i] * st.inputs[k][i].scale + st.inputs[k][i].mean;
      for (std::size_t j = 0; j < s.outputs[k].size(); ++j)
        s.outputs[k][j] = s.outputs[k][j] * st.outputs[k][j].scale + st.outputs[k][j].mean;
    }
  ds.normalization.reset();
  ds.raw_inputs.clear();
  return ds;
}

/// Raw-unit inputs of one normalized sample.
inline StageVectors raw_inputs(const StageVectors& x, const NormalizationStats& st) {
  StageVectors out = x;
  for (std::size_t k = 0; k < out.size(); ++k)
    for (std::size_t i = 0; i < out[k].size(); ++i)
      out[k][i] = out[k][i] * st.inputs[k][i].scale + st.inputs[k][i].mean;
  return out;
}

/// Normalized-unit version of raw outputs.
inline StageVectors normalized_outputs(const StageVectors& y, const NormalizationStats& st) {
  StageVectors out = y;
  for (std::size_t k = 0; k < out.size(); ++k)
    for (std::size_t j = 0; j < out[k].size(); ++j)
      out[k][j] = (out[k][j] - st.outputs[k][j].mean) / st.outputs[k][j].scale;
  return out;
}

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct DataSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out = ds;
  out.samples.clear();
  out.ids.clear();
  out.raw_inputs.clear();
  for (std::size_t r : rows) {
    out.samples.push_back(ds.samples.at(r));
    out.ids.push_back(ds.ids.at(r));
    if (!ds.raw_inputs.empty()) out.raw_inputs.push_back(ds.raw_inputs.at(r));
  }
  return out;
}

/// Deterministic shuffled partition. Sizes are round(f * N) for train and
/// validation; test takes the remainder.
inline DataSplits split(const Dataset& ds, const SplitFractions& f, std::uint64_t seed) {
  if (!(f.train > 0.0 && f.val > 0.0 && f.test > 0.0)) throw ArgumentError("split: fractions must be positive");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ArgumentError("split: fractions must sum to 1");
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) throw ArgumentError("split: a partition would be empty");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> all(order);
  return DataSplits{subset(ds, all.subspan(0, n_train)), subset(ds, all.subspan(n_train, n_val)),
                    subset(ds, all.subspan(n_train + n_val))};
}

/// split() followed by z-scoring all three parts with training statistics.
inline DataSplits prepare_splits(const Dataset& ds, const SplitFractions& f, std::uint64_t seed) {
  DataSplits parts = split(ds, f, seed);
  const NormalizationStats stats = fit_normalization(parts.train);
  parts.train = apply_normalization(std::move(parts.train), stats);
  parts.val = apply_normalization(std::move(parts.val), stats);
  parts.test = apply_normalization(std::move(parts.test), stats);
  return parts;
}

}  // namespace dmmtl

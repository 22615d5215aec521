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

#include <cstdint>
#include <random>
#include <vector>

#include "dmmtl/dmmtl.hpp"

namespace dmmtl::testing {

inline StageTopology small_topology(std::size_t d1 = 1, std::size_t d2 = 1, bool feed = false) {
  return StageTopology{{4, 4, 4}, {2, 2, 2}, 3, d1, d2, feed};
}

inline StageVectors random_stage_vectors(std::span<const std::size_t> widths, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  StageVectors out;
  for (auto w : widths) {
    Vec v(w);
    for (double& x : v) x = normal(rng);
    out.push_back(std::move(v));
  }
  return out;
}

inline Sample random_sample(const StageTopology& t, std::mt19937_64& rng) {
  return Sample{random_stage_vectors(t.input_widths, rng), random_stage_vectors(t.output_widths, rng)};
}

inline std::vector<Sample> random_samples(const StageTopology& t, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(t, rng));
  return out;
}

/// Every parameter entry perturbed with N(0, scale^2), biases included.
inline ParameterSet randomized(ParameterSet p, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : tensor_views(p.stages))
    for (double& x : v.values) x += normal(rng);
  return p;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace dmmtl::testing

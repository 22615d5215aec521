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
#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dmmtl/losses.hpp"
#include "dmmtl/optimizer.hpp"
#include "test_util.hpp"

namespace dmmtl {
namespace {

using testing::randomized;
using testing::small_topology;

TEST(SseLoss, Examples) {
  EXPECT_EQ(sse_loss(Vec{0, 0}), 0.0);
  EXPECT_EQ(sse_loss(Vec{3, 4}), 25.0);
  EXPECT_EQ(sse_loss(Vec{6, 8}), 4.0 * sse_loss(Vec{3, 4}));
}

TEST(Huber, Branches) {
  EXPECT_EQ(huber(0.5, 2.0), 0.25);
  EXPECT_EQ(huber(3.0, 2.0), 5.0);
  EXPECT_EQ(huber(-3.0, 2.0), 5.0);
  EXPECT_EQ(huber(1.0, 2.0), 1.0);
  EXPECT_THROW(huber(1.0, 0.0), ArgumentError);
  EXPECT_THROW(huber(1.0, -1.0), ArgumentError);
}

TEST(GroupPenalty, Examples) {
  const StageTopology t{{1}, {1}, 2, 1, 1, false};
  ParameterSet p = zero_params(t);
  EXPECT_EQ(group_penalty(p, 3.0), 0.0);
  p.stages[0].input_weights(0, 0) = 3.0;
  p.stages[0].input_weights(1, 0) = 4.0;
  EXPECT_EQ(group_penalty(p, 1.0), 5.0);

  ParameterSet twice{StageTopology{{1, 1}, {1, 1}, 2, 1, 1, false}, {p.stages[0], p.stages[0]}};
  EXPECT_EQ(group_penalty(twice, 1.0), 10.0);
}

TEST(GroupPenalty, HomogeneousInWeight) {
  const ParameterSet p = randomized(init_params(small_topology(), 1), 2);
  const double base = group_penalty(p, 1.0);
  for (double s : {0.0, 0.3, 2.0, 17.0}) EXPECT_NEAR(group_penalty(p, s), s * base, 1e-12 * (1 + s * base));
}

TEST(Objective, ReducesToPlainSseAndStageDecomposition) {
  const ParameterSet p = randomized(init_params(small_topology(2, 2), 3), 4);
  const auto batch = testing::random_samples(p.topology, 5, 5);
  TrainConfig c;
  OutlierState zeros;
  double independent = 0.0;
  for (const auto& s : batch) {
    StageVectors a;
    for (const auto& y : s.outputs) a.emplace_back(y.size(), 0.0);
    zeros.values.push_back(a);
    const StageVectors yhat = predict(p, s.inputs);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 2; ++j) independent += std::pow(s.outputs[k][j] - yhat[k][j], 2);
  }
  independent /= 5.0;
  EXPECT_NEAR(objective(p, batch, c, zeros), independent, 1e-10);
  EXPECT_NEAR(robust_objective(p, batch, c), independent, 1e-10);
}

TEST(Objective, PerfectPredictionsLeavePenaltiesOnly) {
  const ParameterSet p = randomized(init_params(small_topology(), 6), 7);
  auto batch = testing::random_samples(p.topology, 3, 8);
  for (auto& s : batch) s.outputs = predict(p, s.inputs);
  TrainConfig c;
  c.lambda_x = 0.3;
  c.lambda = 0.01;
  const OutlierState a = update_outliers(std::vector<StageVectors>(3, StageVectors{Vec(2), Vec(2), Vec(2)}), 1.0,
                                         LossKind::Sse);
  EXPECT_NEAR(objective(p, batch, c, a), group_penalty(p, 0.3) + 0.005 * squared_norm(p), 1e-12);
}

TEST(Objective, InvariantUnderBatchPermutation) {
  const ParameterSet p = randomized(init_params(small_topology(), 9), 10);
  auto batch = testing::random_samples(p.topology, 6, 11);
  TrainConfig c;
  c.loss = LossKind::Huber;
  c.gamma = 0.8;
  c.lambda_x = 0.1;
  std::vector<StageVectors> res;
  for (const auto& s : batch) res.push_back(residuals(p, s));
  OutlierState a = update_outliers(res, c.gamma, c.loss);
  const double before = objective(p, batch, c, a);
  std::vector<std::size_t> order{3, 0, 5, 1, 4, 2};
  std::vector<Sample> shuffled;
  OutlierState a2;
  for (auto i : order) {
    shuffled.push_back(batch[i]);
    a2.values.push_back(a.values[i]);
  }
  EXPECT_NEAR(objective(p, shuffled, c, a2), before, 1e-12);
}

TEST(Objective, ShapeAndEmptinessErrors) {
  const ParameterSet p = init_params(small_topology(), 1);
  const auto batch = testing::random_samples(p.topology, 2, 1);
  TrainConfig c;
  EXPECT_THROW(objective(p, {}, c, OutlierState{}), ArgumentError);
  EXPECT_THROW(objective(p, batch, c, OutlierState{}), ShapeError);
  OutlierState bad{{StageVectors{Vec(2), Vec(2), Vec(1)}, StageVectors{Vec(2), Vec(2), Vec(2)}}};
  EXPECT_THROW(objective(p, batch, c, bad), ShapeError);
}

// min_a (r - a)^2 + gamma |a| equals huber(r, gamma), attained at S_{gamma/2}(r).
TEST(OutlierDecomposition, AnalyticMinimizerMatchesHuberAndGridScan) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (int i = 0; i < 200; ++i) {
      const double r = normal(rng);
      const double a = soft_threshold_scalar(r, gamma / 2);
      const double value = (r - a) * (r - a) + gamma * std::abs(a);
      EXPECT_NEAR(value, huber(r, gamma), 1e-8);
      double best = 1e300, best_a = 0.0;
      for (double g = std::min(0.0, r) - 1.0; g <= std::max(0.0, r) + 1.0; g += 1e-4) {
        const double f = (r - g) * (r - g) + gamma * std::abs(g);
        if (f < best) {
          best = f;
          best_a = g;
        }
      }
      EXPECT_GE(best, value - 1e-12);
      EXPECT_NEAR(best_a, a, 1e-4);
    }
  }
}

TEST(OutlierDecomposition, ObjectiveWithUpdatedOutliersEqualsHuberObjective) {
  const ParameterSet p = randomized(init_params(small_topology(2, 1), 21), 22, 1.0);
  auto batch = testing::random_samples(p.topology, 8, 23);
  for (auto& s : batch)
    for (auto& y : s.outputs)
      for (double& v : y) v *= 3.0;  // plenty of residuals beyond the kink
  TrainConfig c;
  c.loss = LossKind::Huber;
  c.gamma = 1.0;
  c.lambda_x = 0.05;
  c.lambda = 0.001;
  std::vector<StageVectors> res;
  for (const auto& s : batch) res.push_back(residuals(p, s));
  const OutlierState a = update_outliers(res, c.gamma, c.loss);
  EXPECT_NEAR(objective(p, batch, c, a), robust_objective(p, batch, c), 1e-8);
}

TEST(TrainConfig, ValidationRejectsOutOfRangeFields) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.lambda_x = -1; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.lambda = -1; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.loss = LossKind::Huber; c.gamma = 0; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.prox_step = 0; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.sgd_step = -0.1; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.batch_size = 0; }).validate(), ArgumentError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.epochs = 0; }).validate(), ArgumentError);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

}  // namespace
}  // namespace dmmtl

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
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dmmtl/model.hpp"
#include "test_util.hpp"

namespace dmmtl {
namespace {

using testing::random_sample;
using testing::randomized;
using testing::small_topology;

TEST(Topology, ValidationRejectsDegenerateShapes) {
  EXPECT_THROW((StageTopology{{}, {}, 3, 1, 1, false}.validate()), ArgumentError);
  EXPECT_THROW((StageTopology{{2}, {1}, 0, 1, 1, false}.validate()), ArgumentError);
  EXPECT_THROW((StageTopology{{2}, {1}, 2, 0, 1, false}.validate()), ArgumentError);
  EXPECT_THROW((StageTopology{{2}, {0}, 2, 1, 1, false}.validate()), ArgumentError);
  EXPECT_THROW((StageTopology{{2, 2}, {1}, 2, 1, 1, false}.validate()), ArgumentError);
  EXPECT_NO_THROW((StageTopology{{0, 2}, {0, 1}, 2, 1, 1, false}.validate()));
}

TEST(Topology, EffectiveWidthIncludesFedOutputs) {
  const StageTopology t{{4, 5}, {2, 3}, 3, 1, 1, true};
  EXPECT_EQ(t.effective_input_width(0), 4u);
  EXPECT_EQ(t.effective_input_width(1), 7u);
}

TEST(InitParams, SameSeedIsBitwiseIdentical) {
  const auto t = small_topology(2, 2);
  EXPECT_EQ(init_params(t, 42), init_params(t, 42));
  EXPECT_NE(init_params(t, 42), init_params(t, 43));
}

TEST(InitParams, ShapesFollowTopology) {
  const ParameterSet p = init_params(small_topology(), 1);
  ASSERT_EQ(p.stages.size(), 3u);
  for (const auto& s : p.stages) {
    EXPECT_EQ(s.input_weights.rows(), 3u);
    EXPECT_EQ(s.input_weights.cols(), 4u);
    ASSERT_EQ(s.transition_weights.size(), 1u);
    EXPECT_EQ(s.transition_weights[0].rows(), 3u);
    EXPECT_EQ(s.transition_weights[0].cols(), 3u);
    ASSERT_EQ(s.emission_weights.size(), 1u);
    EXPECT_EQ(s.emission_weights[0].rows(), 2u);
    EXPECT_EQ(s.emission_weights[0].cols(), 3u);
    for (const auto& b : s.transition_biases)
      for (double v : b) EXPECT_EQ(v, 0.0);
  }
}

TEST(InitParams, WeightMomentsMatchFanIn) {
  const StageTopology t{{100}, {1}, 100, 1, 1, false};
  const ParameterSet p = init_params(t, 5);
  const auto w = p.stages[0].input_weights.values();
  ASSERT_EQ(w.size(), 10000u);
  double mean = 0.0, sq = 0.0;
  for (double v : w) {
    mean += v;
    sq += v * v;
  }
  mean /= 1e4;
  const double sd = std::sqrt(sq / 1e4 - mean * mean);
  EXPECT_LT(std::abs(mean), 3.0 * 0.1 / 100.0);
  EXPECT_NEAR(sd, 0.1, 0.005);
}

TEST(Forward, ZeroParametersGiveHalfHiddenAndZeroOutputs) {
  const ParameterSet p = zero_params(small_topology());
  std::mt19937_64 rng(1);
  const Sample s = random_sample(p.topology, rng);
  const ForwardTrace tr = forward(p, s.inputs);
  for (const auto& st : tr.stages) {
    for (double h : st.hidden()) EXPECT_EQ(h, 0.5);
    for (double y : st.prediction) EXPECT_EQ(y, 0.0);
  }
}

TEST(Forward, ScalarHandComputation) {
  const StageTopology t{{1}, {1}, 1, 1, 1, false};
  ParameterSet p = zero_params(t);
  p.stages[0].input_weights(0, 0) = 1.0;
  p.stages[0].emission_weights[0](0, 0) = 2.0;
  const ForwardTrace tr = forward(p, StageVectors{{0.0}});
  EXPECT_EQ(tr.stages[0].hidden()[0], 0.5);
  EXPECT_EQ(tr.stages[0].prediction[0], 1.0);
}

TEST(Forward, ShapeMismatchThrows) {
  const ParameterSet p = zero_params(small_topology());
  EXPECT_THROW(forward(p, StageVectors{{1, 2, 3, 4}, {1, 2, 3, 4}}), ShapeError);
  EXPECT_THROW(forward(p, StageVectors{{1, 2, 3, 4}, {1, 2, 3}, {1, 2, 3, 4}}), ShapeError);
}

TEST(Forward, PerturbingLastStageLeavesEarlierPredictions) {
  for (bool feed : {false, true}) {
    const ParameterSet p = randomized(init_params(small_topology(2, 2, feed), 3), 4);
    std::mt19937_64 rng(2);
    Sample s = random_sample(p.topology, rng);
    const StageVectors before = predict(p, s.inputs);
    for (double& v : s.inputs.back()) v += 1.7;
    const StageVectors after = predict(p, s.inputs);
    EXPECT_EQ(before[0], after[0]);
    EXPECT_EQ(before[1], after[1]);
    EXPECT_NE(before[2], after[2]);
  }
}

// Direct transcription of h_k = s(W x_k + U h_{k-1} + b), y_k = V h_k + c.
TEST(Forward, MatchesIndependentOneLayerTranscription) {
  const ParameterSet p = randomized(init_params(small_topology(), 9), 10);
  std::mt19937_64 rng(3);
  const Sample s = random_sample(p.topology, rng);
  const StageVectors got = predict(p, s.inputs);
  std::vector<double> h(3, 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& st = p.stages[k];
    std::vector<double> hn(3);
    for (std::size_t r = 0; r < 3; ++r) {
      double z = st.transition_biases[0][r];
      for (std::size_t c = 0; c < 4; ++c) z += st.input_weights(r, c) * s.inputs[k][c];
      for (std::size_t c = 0; c < 3; ++c) z += st.transition_weights[0](r, c) * h[c];
      hn[r] = 1.0 / (1.0 + std::exp(-z));
    }
    h = hn;
    for (std::size_t j = 0; j < 2; ++j) {
      double y = st.emission_biases[0][j];
      for (std::size_t c = 0; c < 3; ++c) y += st.emission_weights[0](j, c) * h[c];
      EXPECT_NEAR(got[k][j], y, 1e-12);
    }
  }
}

TEST(Forward, HiddenStatesLieInUnitInterval) {
  const ParameterSet p = randomized(init_params(small_topology(2, 2), 1), 2, 3.0);
  std::mt19937_64 rng(5);
  const ForwardTrace tr = forward(p, random_sample(p.topology, rng).inputs);
  for (const auto& st : tr.stages)
    for (double h : st.hidden()) {
      EXPECT_GT(h, 0.0);
      EXPECT_LT(h, 1.0);
    }
}

TEST(Forward, FedOutputsUseModelPredictionsAtInferenceAndTruthInTraining) {
  const ParameterSet p = randomized(init_params(small_topology(1, 1, true), 6), 7);
  std::mt19937_64 rng(8);
  const Sample s = random_sample(p.topology, rng);
  const ForwardTrace model_fed = forward(p, s.inputs);
  EXPECT_TRUE(model_fed.outputs_fed_from_model);
  EXPECT_EQ(model_fed.stages[1].input.size(), 6u);
  EXPECT_EQ(model_fed.stages[1].input[4], model_fed.stages[0].prediction[0]);
  const ForwardTrace teacher = forward_teacher(p, s.inputs, s.outputs);
  EXPECT_FALSE(teacher.outputs_fed_from_model);
  EXPECT_EQ(teacher.stages[1].input[5], s.outputs[0][1]);
}

TEST(Predict, AgreesWithForwardAndBatches) {
  const ParameterSet p = randomized(init_params(small_topology(2, 1), 2), 3);
  const auto samples = testing::random_samples(p.topology, 6, 4);
  std::vector<StageVectors> xs;
  for (const auto& s : samples) xs.push_back(s.inputs);
  const auto batch = predict_batch(p, xs);
  ASSERT_EQ(batch.size(), 6u);
  for (std::size_t n = 0; n < 6; ++n) {
    const ForwardTrace tr = forward(p, xs[n]);
    const StageVectors single = predict(p, xs[n]);
    EXPECT_EQ(batch[n], single);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(single[k], tr.stages[k].prediction);
  }
}

TEST(Predict, ZeroModelPredictsZero) {
  const ParameterSet p = zero_params(small_topology(2, 2));
  std::mt19937_64 rng(1);
  for (const auto& yk : predict(p, random_sample(p.topology, rng).inputs))
    for (double v : yk) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace dmmtl

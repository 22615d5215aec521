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
#include <vector>

#include <gtest/gtest.h>

#include "dmmtl/optimizer.hpp"
#include "test_util.hpp"

namespace dmmtl {
namespace {

using testing::randomized;
using testing::small_topology;

TEST(UpdateOutliers, SoftThresholdsResiduals) {
  const std::vector<StageVectors> r{{Vec{0.2, 2.0, -2.0}}};
  const OutlierState a = update_outliers(r, 1.0, LossKind::Huber);
  EXPECT_EQ(a.values[0][0], (Vec{0.0, 1.5, -1.5}));
  const OutlierState z = update_outliers(r, 1.0, LossKind::Sse);
  EXPECT_EQ(z.values[0][0], (Vec{0.0, 0.0, 0.0}));
  EXPECT_THROW(update_outliers(r, 0.0, LossKind::Huber), ArgumentError);
}

TEST(ProxColumn, Examples) {
  EXPECT_EQ(prox_column(Vec{1.0, -2.0}, Vec{0.0, 0.0}, 0.5, 0.0, 0.0), (Vec{1.0, -2.0}));
  // v = w - step*g = 1 - 0.5*1 = 0.5; no shrinkage.
  EXPECT_EQ(prox_column(Vec{1.0}, Vec{1.0}, 0.5, 0.0, 0.0), (Vec{0.5}));
  // L = 1, threshold lambda_x / L = 0.5.
  EXPECT_EQ(prox_column(Vec{1.0}, Vec{0.0}, 1.0, 0.0, 0.5), (Vec{0.5}));
  // (3,4) has norm 5; threshold 2.5 halves it.
  const Vec half = prox_column(Vec{3.0, 4.0}, Vec{0.0, 0.0}, 1.0, 0.0, 2.5);
  EXPECT_NEAR(half[0], 1.5, 1e-15);
  EXPECT_NEAR(half[1], 2.0, 1e-15);
  EXPECT_EQ(prox_column(Vec{3.0, 4.0}, Vec{0.0, 0.0}, 1.0, 0.0, 5.0), (Vec{0.0, 0.0}));
  // Ridge only: w * L / (L + lambda).
  EXPECT_NEAR(prox_column(Vec{2.0}, Vec{0.0}, 1.0, 1.0, 0.0)[0], 1.0, 1e-15);
  EXPECT_THROW(prox_column(Vec{1.0}, Vec{1.0}, 0.0, 0.0, 0.0), ArgumentError);
  EXPECT_THROW(prox_column(Vec{1.0}, Vec{1.0, 2.0}, 1.0, 0.0, 0.0), ShapeError);
}

struct Surrogate {
  Vec w0, g;
  double L, lambda, lambda_x;
  double operator()(const Vec& w) const {
    double lin = 0.0, quad = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      lin += g[i] * (w[i] - w0[i]);
      quad += (w[i] - w0[i]) * (w[i] - w0[i]);
      sq += w[i] * w[i];
    }
    return lin + 0.5 * L * quad + lambda_x * std::sqrt(sq) + 0.5 * lambda * sq;
  }
};

// Pattern search over coordinate and diagonal directions with step halving.
Vec pattern_search(const Surrogate& f, Vec w, double step) {
  const std::size_t n = w.size();
  std::vector<Vec> dirs;
  for (std::size_t i = 0; i < n; ++i)
    for (double s : {1.0, -1.0}) {
      Vec d(n, 0.0);
      d[i] = s;
      dirs.push_back(d);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (double a : {1.0, -1.0})
        for (double b : {1.0, -1.0}) {
          Vec d(n, 0.0);
          d[i] = a;
          d[j] = b;
          dirs.push_back(d);
        }
  double fw = f(w);
  while (step > 1e-11) {
    bool moved = false;
    for (const auto& d : dirs) {
      Vec t = w;
      for (std::size_t i = 0; i < n; ++i) t[i] += step * d[i];
      const double ft = f(t);
      if (ft < fw) {
        w = t;
        fw = ft;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }
  return w;
}

TEST(ProxColumn, MinimizesLinearizedSubproblem) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int zeros = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(dim(rng));
    Surrogate f{Vec(n), Vec(n), 0.5 + 4.0 * unit(rng), 0.5 * unit(rng), 2.0 * unit(rng)};
    for (std::size_t i = 0; i < n; ++i) {
      f.w0[i] = normal(rng);
      f.g[i] = normal(rng);
    }
    const Vec prox = prox_column(f.w0, f.g, 1.0 / f.L, f.lambda, f.lambda_x);
    const Vec search = pattern_search(f, f.w0, 1.0);
    EXPECT_LE(f(prox), f(search) + 1e-10) << "trial " << trial;
    EXPECT_LE(testing::max_abs_diff(prox, search), 1e-4) << "trial " << trial;
    if (std::all_of(prox.begin(), prox.end(), [](double v) { return v == 0.0; })) ++zeros;
    // No random perturbation improves on the closed form.
    for (int p = 0; p < 50; ++p) {
      Vec t = prox;
      const double scale = std::pow(10.0, -1.0 - 5.0 * unit(rng));
      for (double& v : t) v += scale * normal(rng);
      EXPECT_GE(f(t), f(prox) - 1e-12);
    }
  }
  EXPECT_GT(zeros, 0);  // the zero branch was exercised
}

TEST(SgdStep, QuadraticExampleAndWxUntouched) {
  ParameterSet p = randomized(init_params(small_topology(), 1), 2);
  const ParameterSet before = p;
  ParamGrads g = zero_grads(p);
  auto gv = tensor_views(g.stages);
  const auto pv = tensor_views(p.stages);
  for (std::size_t v = 0; v < gv.size(); ++v)
    for (std::size_t i = 0; i < gv[v].values.size(); ++i) gv[v].values[i] = 2.0 * pv[v].values[i];
  sgd_step(p, g, 0.1, 0.5);
  const auto after = tensor_views(p.stages);
  const auto orig = tensor_views(before.stages);
  for (std::size_t v = 0; v < after.size(); ++v)
    for (std::size_t i = 0; i < after[v].values.size(); ++i) {
      const double expected = after[v].role == TensorRole::InputWeights ? orig[v].values[i]
                                                                         : orig[v].values[i] * (1.0 - 0.1 * 2.5);
      EXPECT_NEAR(after[v].values[i], expected, 1e-15);
    }
  EXPECT_THROW(sgd_step(p, g, 0.0, 0.0), ArgumentError);
}

TEST(SgdStep, ZeroGradientWithoutDecayIsIdentity) {
  ParameterSet p = randomized(init_params(small_topology(2, 2), 3), 4);
  const ParameterSet before = p;
  sgd_step(p, zero_grads(p), 0.3, 0.0);
  EXPECT_EQ(p, before);
}

TEST(SgdStep, DescendsOnSmoothQuadratic) {
  ParameterSet p = randomized(init_params(small_topology(), 5), 6);
  auto energy = [](const ParameterSet& q) {
    double s = 0.0;
    for (const auto& v : tensor_views(q.stages))
      if (v.role != TensorRole::InputWeights) s += sum_squares(v.values);
    return s;
  };
  double prev = energy(p);
  for (int it = 0; it < 10; ++it) {
    ParamGrads g = zero_grads(p);
    auto gv = tensor_views(g.stages);
    const auto pv = tensor_views(p.stages);
    for (std::size_t v = 0; v < gv.size(); ++v)
      for (std::size_t i = 0; i < gv[v].values.size(); ++i) gv[v].values[i] = 2.0 * pv[v].values[i];
    sgd_step(p, g, 0.05, 0.0);
    const double cur = energy(p);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

std::vector<Sample> teacher_data(const StageTopology& t, std::size_t n, std::uint64_t seed) {
  const ParameterSet truth = randomized(init_params(t, seed), seed + 1, 1.0);
  auto data = testing::random_samples(t, n, seed + 2);
  for (auto& s : data) s.outputs = predict(truth, s.inputs);
  return data;
}

TEST(Train, HugeGroupPenaltyZeroesEveryInputColumn) {
  const auto t = small_topology();
  const auto data = teacher_data(t, 20, 7);
  TrainConfig c;
  c.lambda_x = 1e3;
  c.epochs = 2;
  c.batch_size = 5;
  const TrainResult r = train(data, {}, t, c);
  for (const auto& s : r.params.stages)
    for (double v : s.input_weights.values()) EXPECT_EQ(v, 0.0);
}

TEST(Train, NoGroupPenaltyLeavesNoZeroColumn) {
  const auto t = small_topology();
  const auto data = teacher_data(t, 20, 8);
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 4;
  const TrainResult r = train(data, {}, t, c);
  for (const auto& s : r.params.stages)
    for (std::size_t col = 0; col < s.input_weights.cols(); ++col) EXPECT_GT(s.input_weights.column_norm(col), 0.0);
}

TEST(Train, FullBatchSmallStepsDecreaseObjective) {
  const StageTopology t{{3, 3}, {2, 2}, 4, 1, 1, false};
  auto data = teacher_data(t, 16, 9);
  data[3].outputs[1][0] += 8.0;  // an outlier for the robust loss
  TrainConfig c;
  c.loss = LossKind::Huber;
  c.gamma = 1.0;
  c.lambda_x = 0.02;
  c.lambda = 1e-3;
  c.prox_step = 0.01;
  c.sgd_step = 0.01;
  c.batch_size = data.size();
  c.epochs = 60;
  const TrainResult r = train(data, {}, t, c);
  ASSERT_EQ(r.report.history.size(), 60u);
  for (std::size_t e = 1; e < r.report.history.size(); ++e)
    EXPECT_LE(r.report.history[e].objective, r.report.history[e - 1].objective * (1 + 1e-12));
  EXPECT_LT(r.report.history.back().objective, r.report.history.front().objective);
}

// With no penalties, squared loss and full batches, each epoch is one plain
// gradient step; the oracle uses central differences for its gradient.
TEST(Train, MatchesIndependentGradientDescentLoop) {
  const StageTopology t{{2, 2}, {1, 1}, 2, 1, 1, false};
  const auto data = teacher_data(t, 6, 10);
  TrainConfig c;
  c.prox_step = 0.05;
  c.sgd_step = 0.05;
  c.batch_size = data.size();
  c.epochs = 1;

  ParameterSet oracle = randomized(init_params(t, 11), 12);
  ParameterSet trained = oracle;
  for (std::size_t step = 0; step < 5; ++step) {
    std::vector<double> grad;
    {
      ParameterSet probe = oracle;
      auto views = tensor_views(probe.stages);
      for (auto& v : views)
        for (double& x : v.values) {
          const double keep = x, h = 1e-6;
          x = keep + h;
          const double up = robust_objective(probe, data, c);
          x = keep - h;
          const double down = robust_objective(probe, data, c);
          x = keep;
          grad.push_back((up - down) / (2 * h));
        }
    }
    std::size_t g = 0;
    for (auto& v : tensor_views(oracle.stages))
      for (double& x : v.values) x -= 0.05 * grad[g++];

    TrainOptions opt;
    opt.initial = trained;
    opt.first_epoch = step;
    trained = train(data, {}, t, c, opt).params;

    const auto a = tensor_views(oracle.stages);
    const auto b = tensor_views(trained.stages);
    for (std::size_t v = 0; v < a.size(); ++v)
      EXPECT_LE(testing::max_abs_diff(a[v].values, b[v].values), 1e-8) << "step " << step;
  }
}

TEST(Train, DeterministicGivenSeed) {
  const auto t = small_topology(1, 1, true);
  const auto data = teacher_data(t, 24, 13);
  TrainConfig c;
  c.epochs = 4;
  c.batch_size = 5;
  c.lambda_x = 0.01;
  c.seed = 99;
  const TrainResult a = train(data, data, t, c);
  const TrainResult b = train(data, data, t, c);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.report.history.size(), b.report.history.size());
  for (std::size_t e = 0; e < a.report.history.size(); ++e)
    EXPECT_EQ(a.report.history[e].objective, b.report.history[e].objective);
  c.seed = 100;
  EXPECT_FALSE(train(data, data, t, c).params == a.params);
}

TEST(Train, ResumeContinuesNumberingAndTrajectory) {
  const auto t = small_topology();
  const auto data = teacher_data(t, 20, 14);
  TrainConfig c;
  c.batch_size = 6;
  c.step_decay = 0.1;
  c.lambda_x = 0.01;
  c.epochs = 5;
  const TrainResult full = train(data, {}, t, c);
  c.epochs = 3;
  const TrainResult first = train(data, {}, t, c);
  c.epochs = 2;
  TrainOptions opt;
  opt.initial = first.params;
  opt.first_epoch = 3;
  const TrainResult second = train(data, {}, t, c, opt);
  ASSERT_EQ(second.report.history.size(), 2u);
  EXPECT_EQ(second.report.history[0].epoch, 4u);
  EXPECT_EQ(second.report.history[1].epoch, 5u);
  EXPECT_EQ(second.report.epochs_completed, 5u);
  EXPECT_EQ(second.params, full.params);
}

TEST(Train, HuberMatchesSquaredLossBelowThreshold) {
  const auto t = small_topology();
  const auto data = teacher_data(t, 20, 15);
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 7;
  const TrainResult sse = train(data, {}, t, c);
  c.loss = LossKind::Huber;
  c.gamma = 1e6;
  const TrainResult hub = train(data, {}, t, c);
  EXPECT_EQ(sse.params, hub.params);
  for (std::size_t e = 0; e < sse.report.history.size(); ++e)
    EXPECT_EQ(sse.report.history[e].objective, hub.report.history[e].objective);
}

TEST(Train, RestartsWhenValidationStaysWorseThanMean) {
  const auto t = small_topology();
  const auto data = teacher_data(t, 30, 16);
  auto val = data;
  for (auto& s : val)
    for (auto& y : s.outputs)
      for (double& v : y) v = -v;  // fitting the train set hurts here
  TrainConfig c;
  c.epochs = 6;
  c.batch_size = 5;
  c.restart_patience = 1;
  c.max_restarts = 2;
  const TrainResult r = train(data, val, t, c);
  EXPECT_EQ(r.report.restarts, 2u);
  std::size_t last = 0;
  for (const auto& rec : r.report.history)
    if (rec.restart == 2) ++last;
  EXPECT_EQ(last, 6u);
  EXPECT_EQ(r.report.history.front().restart, 0u);
}

TEST(Train, DivergenceIsReported) {
  const auto t = small_topology();
  const auto data = teacher_data(t, 20, 17);
  TrainConfig c;
  c.sgd_step = 1e8;
  c.prox_step = 1e8;
  c.batch_size = 1;
  c.epochs = 200;
  try {
    train(data, {}, t, c);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1u);
  }
}

TEST(Train, RejectsEmptyDataAndMismatchedInitialization) {
  const auto t = small_topology();
  TrainConfig c;
  EXPECT_THROW(train({}, {}, t, c), ArgumentError);
  const auto data = teacher_data(t, 4, 18);
  TrainOptions opt;
  opt.initial = init_params(StageTopology{{4, 4, 4}, {2, 2, 2}, 5, 1, 1, false}, 1);
  EXPECT_THROW(train(data, {}, t, c, opt), ShapeError);
}

}  // namespace
}  // namespace dmmtl

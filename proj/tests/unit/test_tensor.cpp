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

#include "dmmtl/tensor.hpp"
#include "test_util.hpp"

namespace dmmtl {
namespace {

TEST(Matvec, IdentityReturnsInput) {
  EXPECT_EQ(matvec(Mat::identity(3), Vec{1, 2, 3}), (Vec{1, 2, 3}));
}

TEST(Matvec, ZeroMatrixAnnihilates) {
  EXPECT_EQ(matvec(Mat(2, 3), Vec{5, 5, 5}), (Vec{0, 0}));
}

TEST(Matvec, HandComputedProduct) {
  const Mat m{{1, 2}, {3, 4}};
  EXPECT_EQ(matvec(m, Vec{1, 1}), (Vec{3, 7}));
}

TEST(Matvec, DimensionMismatchThrows) {
  EXPECT_THROW(matvec(Mat(2, 3), Vec{1, 2}), ShapeError);
}

TEST(Matvec, IsLinear) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Mat m(4, 5);
    for (double& v : m.values()) v = normal(rng);
    Vec u(5), w(5), mix(5);
    const double a = normal(rng), b = normal(rng);
    for (std::size_t i = 0; i < 5; ++i) {
      u[i] = normal(rng);
      w[i] = normal(rng);
      mix[i] = a * u[i] + b * w[i];
    }
    const Vec lhs = matvec(m, mix);
    const Vec mu = matvec(m, u), mw = matvec(m, w);
    for (std::size_t r = 0; r < 4; ++r) {
      const double rhs = a * mu[r] + b * mw[r];
      EXPECT_NEAR(lhs[r], rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(Mat, RaggedInitializerThrows) {
  EXPECT_THROW((Mat{{1, 2}, {3}}), ShapeError);
}

TEST(Mat, TransposeAndColumns) {
  const Mat m{{1, 2, 3}, {4, 5, 6}};
  const Mat t = m.transposed();
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t(2, 1), 6.0);
  EXPECT_EQ(m.column(1), (Vec{2, 5}));
  EXPECT_DOUBLE_EQ(m.column_norm(0), std::sqrt(17.0));
}

TEST(Sigmoid, HalfAtZero) { EXPECT_EQ(sigmoid(0.0), 0.5); }

TEST(Sigmoid, SymmetricPairsSumToOne) {
  for (double x : {-40.0, -3.0, -0.25, 0.1, 2.0, 35.0}) EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
}

TEST(Sigmoid, SaturatesWithoutOverflow) {
  const double s = sigmoid(1000.0);
  EXPECT_GT(s, 1.0 - 1e-12);
  EXPECT_LE(s, 1.0);
  const double t = sigmoid(-1000.0);
  EXPECT_GE(t, 0.0);
  EXPECT_TRUE(std::isfinite(t));
}

TEST(Sigmoid, MonotoneAndBounded) {
  double prev = -1.0;
  for (double x = -30.0; x <= 30.0; x += 0.01) {
    const double s = sigmoid(x);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    EXPECT_GE(s, prev);
    prev = s;
  }
  EXPECT_EQ(sigmoid(Vec{0.0, 0.0}), (Vec{0.5, 0.5}));
}

TEST(SoftThresholdScalar, Examples) {
  EXPECT_EQ(soft_threshold_scalar(5.0, 2.0), 3.0);
  EXPECT_EQ(soft_threshold_scalar(-1.0, 2.0), 0.0);
  EXPECT_EQ(soft_threshold_scalar(-5.0, 2.0), -3.0);
  for (double x : {-2.5, 0.0, 1e-9, 7.0}) EXPECT_EQ(soft_threshold_scalar(x, 0.0), x);
}

TEST(SoftThresholdScalar, NegativeThresholdThrows) {
  EXPECT_THROW(soft_threshold_scalar(1.0, -0.1), ArgumentError);
}

TEST(SoftThresholdBlock, Examples) {
  EXPECT_EQ(soft_threshold_block(Vec{3, 4}, 5.0), (Vec{0, 0}));
  EXPECT_EQ(soft_threshold_block(Vec{3, 4}, 0.0), (Vec{3, 4}));
  const Vec r = soft_threshold_block(Vec{3, 4}, 2.5);
  EXPECT_NEAR(r[0], 1.5, 1e-15);
  EXPECT_NEAR(r[1], 2.0, 1e-15);
  EXPECT_THROW(soft_threshold_block(Vec{1}, -1.0), ArgumentError);
}

TEST(SoftThresholdBlock, ReducesToScalarInOneDimension) {
  for (double x : {-3.0, -0.5, 0.0, 0.4, 2.0})
    for (double t : {0.0, 0.5, 1.0}) EXPECT_DOUBLE_EQ(soft_threshold_block(Vec{x}, t)[0], soft_threshold_scalar(x, t));
}

// The minimizer of 0.5||u - w||^2 + t||u|| lies on the ray u = s*w, s >= 0;
// scan s numerically and compare.
TEST(SoftThresholdBlock, MatchesNumericScanOfProxObjective) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> dim(2, 4);
  std::uniform_real_distribution<double> thr(0.0, 3.0);
  for (int trial = 0; trial < 40; ++trial) {
    Vec w(static_cast<std::size_t>(dim(rng)));
    for (double& v : w) v = normal(rng);
    const double t = thr(rng);
    const double nw = norm2(w);
    auto f = [&](double s) { return 0.5 * (s - 1.0) * (s - 1.0) * nw * nw + t * s * nw; };
    // coarse scan, then ternary refinement around the best grid point
    double best_s = 0.0;
    for (int i = 0; i <= 2000; ++i)
      if (f(i * 1e-3) < f(best_s)) best_s = i * 1e-3;
    double lo = std::max(0.0, best_s - 1e-3), hi = best_s + 1e-3;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (f(m1) <= f(m2)) hi = m2;
      else lo = m1;
    }
    best_s = 0.5 * (lo + hi);
    const Vec got = soft_threshold_block(w, t);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(got[i], best_s * w[i], 1e-6 * std::max(1.0, nw));
  }
}

TEST(SoftThresholdBlock, ZeroVectorIsExact) {
  const Vec r = soft_threshold_block(Vec{1e-3, -2e-3}, 1.0);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_FALSE(std::signbit(r[1]));
}

}  // namespace
}  // namespace dmmtl

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

// Minimal dense kernel: row-major matrices, plain vectors, and the
// elementwise maps shared by the model and the solvers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "dmmtl/errors.hpp"

namespace dmmtl {

using Vec = std::vector<double>;

class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Row-major construction from nested rows, e.g. Mat{{1, 2}, {3, 4}}.
  Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Mat: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vec column(std::size_t c) const {
    Vec out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  void set_column(std::size_t c, std::span<const double> v) {
    if (v.size() != rows_) throw ShapeError("Mat::set_column: length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  double column_norm(std::size_t c) const {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) s += (*this)(r, c) * (*this)(r, c);
    return std::sqrt(s);
  }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool same_shape(const Mat& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

inline std::string shape_string(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// out = m * v
inline Vec matvec(const Mat& m, std::span<const double> v) {
  if (m.cols() != v.size())
    throw ShapeError("matvec: " + shape_string(m) + " times length " + std::to_string(v.size()));
  Vec out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * v[c];
    out[r] = s;
  }
  return out;
}

/// out += m * v, without allocating.
inline void matvec_accumulate(const Mat& m, std::span<const double> v, std::span<double> out) {
  if (m.cols() != v.size() || m.rows() != out.size())
    throw ShapeError("matvec_accumulate: " + shape_string(m) + " operand mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * v[c];
    out[r] += s;
  }
}

/// out += m^T * v
inline void matvec_transposed_accumulate(const Mat& m, std::span<const double> v,
                                         std::span<double> out) {
  if (m.rows() != v.size() || m.cols() != out.size())
    throw ShapeError("matvec_transposed: " + shape_string(m) + " operand mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * vr;
  }
}

/// m += scale * a b^T
inline void add_outer(Mat& m, std::span<const double> a, std::span<const double> b,
                      double scale = 1.0) {
  if (m.rows() != a.size() || m.cols() != b.size())
    throw ShapeError("add_outer: " + shape_string(m) + " operand mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += ar * b[c];
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double sum_squares(std::span<const double> v) { return dot(v, v); }

// Branch form keeps exp() argument non-positive, so no overflow for large |x|.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vec sigmoid(std::span<const double> v) {
  Vec out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return sigmoid(x); });
  return out;
}

/// sgn(x) * max(|x| - t, 0)
inline double soft_threshold_scalar(double x, double t) {
  if (!(t >= 0.0)) throw ArgumentError("soft_threshold_scalar: negative threshold");
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Proximal map of t*||.||_2: w * max(1 - t/||w||, 0). Returns exact zeros
/// inside the dead zone.
inline Vec soft_threshold_block(std::span<const double> w, double t) {
  if (!(t >= 0.0)) throw ArgumentError("soft_threshold_block: negative threshold");
  const double n = norm2(w);
  Vec out(w.size(), 0.0);
  if (n <= t) return out;
  const double scale = 1.0 - t / n;
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] * scale;
  return out;
}

// Activation policies for the stage networks. The model is sigmoid-only;
// Identity exists so tests can check gradients against linear closed forms.
struct Sigmoid {
  static double apply(double z) { return sigmoid(z); }
  /// d activation / dz expressed through the output a = apply(z).
  static double derivative(double a, double /*z*/) { return a * (1.0 - a); }
};

struct Identity {
  static double apply(double z) { return z; }
  static double derivative(double, double) { return 1.0; }
};

}  // namespace dmmtl

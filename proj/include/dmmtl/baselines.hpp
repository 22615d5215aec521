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

// Linear reference predictors: ridge, elastic net (coordinate descent),
// multi-task elastic net (monotone FISTA with row-wise block shrinkage), and
// the noiseless generator recursion used as an oracle.
//
// All fits center features and targets; intercepts are unpenalized. Solvers
// work on the sufficient statistics G = Xc'Xc/n and C = Xc'Yc/n, so the
// stage-k problem is the leading p_k x p_k block of the stage-K problem.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmmtl/data.hpp"
#include "dmmtl/errors.hpp"
#include "dmmtl/model.hpp"
#include "dmmtl/tensor.hpp"

namespace dmmtl {

struct LinearModel {
  Mat weights;      // features x tasks
  Vec intercepts;   // tasks
  std::string feature_map = "concat x_1..x_k";

  Vec predict(std::span<const double> features) const {
    if (features.size() != weights.rows()) throw ShapeError("LinearModel: feature width mismatch");
    Vec out = intercepts;
    matvec_transposed_accumulate(weights, features, out);
    return out;
  }

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

/// Centered sufficient statistics of a least-squares problem.
struct LinearProblem {
  Mat gram;      // p x p
  Mat cross;     // p x t
  Vec x_mean;    // p
  Vec y_mean;    // t
  Vec y_energy;  // per task ||yc||^2 / n
  std::size_t n = 0;

  std::size_t features() const noexcept { return gram.rows(); }
  std::size_t tasks() const noexcept { return cross.cols(); }

  /// Problem restricted to the first p features and the given task columns.
  LinearProblem restrict(std::size_t p, std::span<const std::size_t> task_ids) const {
    if (p > features()) throw ArgumentError("LinearProblem::restrict: too many features");
    LinearProblem out;
    out.n = n;
    out.gram = Mat(p, p);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c) out.gram(r, c) = gram(r, c);
    out.cross = Mat(p, task_ids.size());
    for (std::size_t t = 0; t < task_ids.size(); ++t) {
      if (task_ids[t] >= tasks()) throw ArgumentError("LinearProblem::restrict: task out of range");
      for (std::size_t r = 0; r < p; ++r) out.cross(r, t) = cross(r, task_ids[t]);
      out.y_mean.push_back(y_mean[task_ids[t]]);
      out.y_energy.push_back(y_energy[task_ids[t]]);
    }
    out.x_mean.assign(x_mean.begin(), x_mean.begin() + static_cast<std::ptrdiff_t>(p));
    return out;
  }
};

inline LinearProblem make_problem(const Mat& x, const Mat& y) {
  if (x.rows() != y.rows()) throw ShapeError("make_problem: row count mismatch");
  if (x.rows() == 0) throw ArgumentError("make_problem: no samples");
  const std::size_t n = x.rows(), p = x.cols(), t = y.cols();
  LinearProblem pr;
  pr.n = n;
  pr.x_mean.assign(p, 0.0);
  pr.y_mean.assign(t, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) pr.x_mean[c] += x(r, c);
    for (std::size_t c = 0; c < t; ++c) pr.y_mean[c] += y(r, c);
  }
  for (double& v : pr.x_mean) v /= static_cast<double>(n);
  for (double& v : pr.y_mean) v /= static_cast<double>(n);
  pr.gram = Mat(p, p);
  pr.cross = Mat(p, t);
  pr.y_energy.assign(t, 0.0);
  Vec xc(p), yc(t);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) xc[c] = x(r, c) - pr.x_mean[c];
    for (std::size_t c = 0; c < t; ++c) yc[c] = y(r, c) - pr.y_mean[c];
    for (std::size_t a = 0; a < p; ++a) {
      const double xa = xc[a];
      if (xa == 0.0) continue;
      auto grow = pr.gram.row(a);
      for (std::size_t b = a; b < p; ++b) grow[b] += xa * xc[b];
      auto crow = pr.cross.row(a);
      for (std::size_t c = 0; c < t; ++c) crow[c] += xa * yc[c];
    }
    for (std::size_t c = 0; c < t; ++c) pr.y_energy[c] += yc[c] * yc[c];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a; b < p; ++b) {
      pr.gram(a, b) *= inv;
      pr.gram(b, a) = pr.gram(a, b);
    }
  for (double& v : pr.cross.values()) v *= inv;
  for (double& v : pr.y_energy) v *= inv;
  return pr;
}

namespace detail {

inline LinearModel finish_model(const LinearProblem& pr, Mat w) {
  LinearModel m;
  m.intercepts = pr.y_mean;
  for (std::size_t t = 0; t < pr.tasks(); ++t)
    for (std::size_t r = 0; r < pr.features(); ++r) m.intercepts[t] -= pr.x_mean[r] * w(r, t);
  m.weights = std::move(w);
  return m;
}

/// In-place lower Cholesky factor of a symmetric positive definite matrix.
inline void cholesky(Mat& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) throw ConvergenceError("cholesky: matrix not positive definite");
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const auto ri = a.row(i);
      const auto rj = a.row(j);
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      a(i, j) = s / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = 0.0;
}

inline void cholesky_solve(const Mat& l, std::span<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * b[k];
    b[i] = s / l(i, i);
  }
}

}  // namespace detail

/// Minimizes ||Y - XW||^2/(2n) + (lambda/2)||W||^2 via (G + lambda I) W = C.
inline LinearModel ridge_solve(const LinearProblem& pr, double lambda) {
  if (!(lambda > 0.0)) throw ArgumentError("ridge: lambda must be > 0");
  Mat l = pr.gram;
  for (std::size_t i = 0; i < l.rows(); ++i) l(i, i) += lambda;
  detail::cholesky(l);
  Mat w(pr.features(), pr.tasks());
  for (std::size_t t = 0; t < pr.tasks(); ++t) {
    Vec b = pr.cross.column(t);
    detail::cholesky_solve(l, b);
    w.set_column(t, b);
  }
  return detail::finish_model(pr, std::move(w));
}

inline LinearModel ridge_fit(const Mat& features, const Mat& targets, double lambda) {
  return ridge_solve(make_problem(features, targets), lambda);
}

/// Ordinary least squares realized as ridge with a vanishing penalty.
inline LinearModel least_squares_fit(const Mat& features, const Mat& targets) {
  return ridge_fit(features, targets, 1e-8);
}

struct SolverOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 100000;
};

inline void check_elastic_args(double alpha, double beta) {
  if (!(alpha >= 0.0)) throw ArgumentError("elastic net: alpha must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ArgumentError("elastic net: beta must lie in [0, 1]");
}

/// Elastic-net objective ||y - Xw||^2/(2n) + a*b*|w|_1 + (a(1-b)/2)|w|^2 for task t.
inline double elastic_net_objective(const LinearProblem& pr, std::size_t task, std::span<const double> w,
                                    double alpha, double beta) {
  const std::size_t p = pr.features();
  double quad = 0.0, lin = 0.0, l1 = 0.0, l2 = 0.0;
  for (std::size_t a = 0; a < p; ++a) {
    if (w[a] == 0.0) continue;
    double ga = 0.0;
    for (std::size_t b = 0; b < p; ++b) ga += pr.gram(a, b) * w[b];
    quad += w[a] * ga;
    lin += pr.cross(a, task) * w[a];
    l1 += std::abs(w[a]);
    l2 += w[a] * w[a];
  }
  return 0.5 * (pr.y_energy[task] - 2.0 * lin + quad) + alpha * beta * l1 + 0.5 * alpha * (1.0 - beta) * l2;
}

/// Smallest alpha at which the elastic-net solution is identically zero.
inline double elastic_net_alpha_max(const LinearProblem& pr, double beta) {
  double m = 0.0;
  for (double v : pr.cross.values()) m = std::max(m, std::abs(v));
  return beta > 0.0 ? m / beta : m;
}

/// Covariance-update coordinate descent for one task; `w` is the warm start.
inline Vec elastic_net_solve(const LinearProblem& pr, std::size_t task, double alpha, double beta, Vec w = {},
                             const SolverOptions& opt = {}) {
  check_elastic_args(alpha, beta);
  const std::size_t p = pr.features();
  if (task >= pr.tasks()) throw ArgumentError("elastic net: task out of range");
  if (w.empty()) w.assign(p, 0.0);
  if (w.size() != p) throw ShapeError("elastic net: warm start width mismatch");
  Vec gw(p, 0.0);  // G w
  for (std::size_t a = 0; a < p; ++a)
    if (w[a] != 0.0)
      for (std::size_t b = 0; b < p; ++b) gw[b] += pr.gram(b, a) * w[a];
  const double l1 = alpha * beta, l2 = alpha * (1.0 - beta);
  for (std::size_t sweep = 0; sweep < opt.max_iterations; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double gjj = pr.gram(j, j);
      const double denom = gjj + l2;
      if (denom <= 0.0) continue;  // constant feature with no ridge term stays at zero
      const double rho = pr.cross(j, task) - gw[j] + gjj * w[j];
      const double updated = soft_threshold_scalar(rho, l1) / denom;
      const double delta = updated - w[j];
      if (delta == 0.0) continue;
      const auto col = pr.gram.row(j);  // symmetric
      for (std::size_t b = 0; b < p; ++b) gw[b] += col[b] * delta;
      w[j] = updated;
      max_change = std::max(max_change, std::abs(delta));
    }
    if (max_change < opt.tolerance) return w;
  }
  throw ConvergenceError("elastic net: no convergence after " + std::to_string(opt.max_iterations) + " sweeps");
}

inline LinearModel elastic_net_fit(const Mat& features, std::span<const double> target, double alpha, double beta,
                                   const SolverOptions& opt = {}) {
  Mat y(target.size(), 1);
  for (std::size_t r = 0; r < target.size(); ++r) y(r, 0) = target[r];
  const LinearProblem pr = make_problem(features, y);
  Mat w(pr.features(), 1);
  w.set_column(0, elastic_net_solve(pr, 0, alpha, beta, {}, opt));
  return detail::finish_model(pr, std::move(w));
}

/// ||Y - XW||^2/(2n) + a*b*sum_i ||W_i.|| + (a(1-b)/2)||W||^2.
inline double men_objective(const LinearProblem& pr, const Mat& w, double alpha, double beta) {
  const std::size_t p = pr.features(), t = pr.tasks();
  double total = 0.0;
  for (std::size_t c = 0; c < t; ++c) total += 0.5 * pr.y_energy[c];
  Vec gw(t);
  for (std::size_t a = 0; a < p; ++a) {
    const auto wa = w.row(a);
    if (std::all_of(wa.begin(), wa.end(), [](double v) { return v == 0.0; })) continue;
    std::fill(gw.begin(), gw.end(), 0.0);
    for (std::size_t b = 0; b < p; ++b) {
      const double g = pr.gram(a, b);
      const auto wb = w.row(b);
      for (std::size_t c = 0; c < t; ++c) gw[c] += g * wb[c];
    }
    for (std::size_t c = 0; c < t; ++c) total += 0.5 * wa[c] * gw[c] - pr.cross(a, c) * wa[c];
    total += alpha * beta * norm2(wa) + 0.5 * alpha * (1.0 - beta) * sum_squares(wa);
  }
  return total;
}

inline double men_alpha_max(const LinearProblem& pr, double beta) {
  double m = 0.0;
  for (std::size_t a = 0; a < pr.features(); ++a) m = std::max(m, norm2(pr.cross.row(a)));
  return beta > 0.0 ? m / beta : m;
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double largest_eigenvalue(const Mat& g, std::size_t iterations = 300) {
  const std::size_t p = g.rows();
  if (p == 0) return 0.0;
  Vec v(p, 1.0 / std::sqrt(static_cast<double>(p)));
  double lambda = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    Vec next = matvec(g, v);
    const double nn = norm2(next);
    if (nn == 0.0) return 0.0;
    for (double& x : next) x /= nn;
    const double prev = lambda;
    lambda = nn;
    v = std::move(next);
    if (it > 10 && std::abs(lambda - prev) <= 1e-10 * lambda) break;
  }
  return lambda;
}

struct MenTrace {
  std::vector<double> objective;  // per accepted iterate
  std::size_t iterations = 0;
};

namespace detail {

/// G * W restricted to the non-zero rows of W.
inline Mat gram_times(const LinearProblem& pr, const Mat& w) {
  const std::size_t p = pr.features(), t = pr.tasks();
  Mat out(p, t);
  for (std::size_t b = 0; b < p; ++b) {
    const auto wb = w.row(b);
    if (std::all_of(wb.begin(), wb.end(), [](double v) { return v == 0.0; })) continue;
    const auto gb = pr.gram.row(b);  // column b, by symmetry
    double* o = out.values().data();
    for (std::size_t a = 0; a < p; ++a, o += t) {
      const double g = gb[a];
      for (std::size_t c = 0; c < t; ++c) o[c] += g * wb[c];
    }
  }
  return out;
}

}  // namespace detail

namespace detail {

/// men_objective given gw = G w.
inline double men_objective_from(const LinearProblem& pr, const Mat& w, const Mat& gw, double alpha, double beta) {
  double total = 0.0;
  for (std::size_t c = 0; c < pr.tasks(); ++c) total += 0.5 * pr.y_energy[c];
  for (std::size_t a = 0; a < pr.features(); ++a) {
    const auto wa = w.row(a);
    const auto ga = gw.row(a);
    const auto ca = pr.cross.row(a);
    for (std::size_t c = 0; c < wa.size(); ++c) total += 0.5 * wa[c] * ga[c] - ca[c] * wa[c];
    total += alpha * beta * norm2(wa) + 0.5 * alpha * (1.0 - beta) * sum_squares(wa);
  }
  return total;
}

}  // namespace detail

/// Monotone FISTA on the multi-task elastic net; rows of W share sparsity.
inline Mat men_solve(const LinearProblem& pr, double alpha, double beta, std::optional<Mat> warm = std::nullopt,
                     const SolverOptions& opt = {}, MenTrace* trace = nullptr, double lipschitz = -1.0) {
  check_elastic_args(alpha, beta);
  const std::size_t p = pr.features(), t = pr.tasks();
  Mat x = warm ? std::move(*warm) : Mat(p, t);
  if (x.rows() != p || x.cols() != t) throw ShapeError("men: warm start shape mismatch");
  const double l2 = alpha * (1.0 - beta);
  const double lip = (lipschitz > 0.0 ? lipschitz : largest_eigenvalue(pr.gram) * 1.01) + l2;
  if (lip <= 0.0) return Mat(p, t);
  const double shrink = alpha * beta / lip;

  // G times the current iterate and the extrapolated point; both follow from
  // G z by linearity, so every iteration costs one product.
  Mat gx = detail::gram_times(pr, x);
  Mat y = x, gy = gx;
  double step = 1.0;
  bool from_best = true;  // y == x
  double fx = detail::men_objective_from(pr, x, gx, alpha, beta);
  if (trace) trace->objective.push_back(fx);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    Mat z(p, t);
    Vec row(t);
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t c = 0; c < t; ++c) {
        const double grad = gy(a, c) - pr.cross(a, c) + l2 * y(a, c);
        row[c] = y(a, c) - grad / lip;
      }
      const Vec shrunk = soft_threshold_block(row, shrink);
      std::copy(shrunk.begin(), shrunk.end(), z.row(a).begin());
    }
    const Mat gz = detail::gram_times(pr, z);
    const double fz = detail::men_objective_from(pr, z, gz, alpha, beta);
    const double next_step = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * step * step));
    const bool accepted = fz <= fx;
    double change = 0.0;  // prox step length from the current iterate
    for (std::size_t i = 0; i < x.size(); ++i) change = std::max(change, std::abs(z.values()[i] - x.values()[i]));
    const Mat& xn = accepted ? z : x;
    const Mat& gxn = accepted ? gz : gx;
    // y = xn + (step/next)(z - xn) + ((step-1)/next)(xn - x)
    const double c1 = step / next_step, c2 = (step - 1.0) / next_step;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double v = xn.values()[i], gv = gxn.values()[i];
      y.values()[i] = v + c1 * (z.values()[i] - v) + c2 * (v - x.values()[i]);
      gy.values()[i] = gv + c1 * (gz.values()[i] - gv) + c2 * (gv - gx.values()[i]);
    }
    if (accepted) {
      x = z;
      gx = gz;
      fx = fz;
      step = next_step;
      from_best = false;
    } else {
      // A plain prox step from the best iterate cannot increase the objective
      // for a valid Lipschitz constant; a rejection there is rounding noise.
      if (from_best) return x;
      // momentum overshot: restart from the best iterate
      y = x;
      gy = gx;
      step = 1.0;
      from_best = true;
    }
    if (trace) {
      trace->objective.push_back(fx);
      trace->iterations = it + 1;
    }
    if (change < opt.tolerance) return x;
  }
  throw ConvergenceError("men: no convergence after " + std::to_string(opt.max_iterations) + " iterations");
}

inline LinearModel men_fit(const Mat& features, const Mat& targets, double alpha, double beta,
                           const SolverOptions& opt = {}, MenTrace* trace = nullptr) {
  const LinearProblem pr = make_problem(features, targets);
  return detail::finish_model(pr, men_solve(pr, alpha, beta, std::nullopt, opt, trace));
}

/// Noiseless generator recursion on raw inputs.
inline StageVectors sov_oracle_predict(const std::optional<GeneratorTruth>& truth, std::span<const Vec> x_seq) {
  if (!truth) throw ArgumentError("sov oracle: dataset carries no generator truth");
  return truth->propagate(x_seq);
}

/// Oracle predictions for every sample, in the dataset's own units.
inline std::vector<StageVectors> sov_oracle_predict(const Dataset& ds) {
  if (!ds.truth) throw ArgumentError("sov oracle: dataset carries no generator truth");
  std::vector<StageVectors> out;
  out.reserve(ds.size());
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const StageVectors& x = ds.samples[n].inputs;
    if (ds.normalization) {
      const StageVectors raw = ds.raw_inputs.empty() ? raw_inputs(x, *ds.normalization) : ds.raw_inputs[n];
      out.push_back(normalized_outputs(ds.truth->propagate(raw), *ds.normalization));
    } else {
      out.push_back(ds.truth->propagate(x));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage-wise benchmark protocol: stage-k targets regress on x_1 ⊕ ... ⊕ x_k.

/// Row per sample: concatenated inputs of stages 0..stage (zero-based).
inline Mat stage_features(const Dataset& ds, std::size_t stage) {
  if (stage >= ds.stages()) throw ArgumentError("stage_features: stage out of range");
  std::size_t p = 0;
  for (std::size_t k = 0; k <= stage; ++k) p += ds.input_widths[k];
  Mat x(ds.size(), p);
  for (std::size_t n = 0; n < ds.size(); ++n) {
    std::size_t c = 0;
    for (std::size_t k = 0; k <= stage; ++k)
      for (double v : ds.samples[n].inputs[k]) x(n, c++) = v;
  }
  return x;
}

inline Mat stage_targets(const Dataset& ds, std::size_t stage) {
  if (stage >= ds.stages()) throw ArgumentError("stage_targets: stage out of range");
  Mat y(ds.size(), ds.output_widths[stage]);
  for (std::size_t n = 0; n < ds.size(); ++n)
    for (std::size_t j = 0; j < ds.output_widths[stage]; ++j) y(n, j) = ds.samples[n].outputs[stage][j];
  return y;
}

/// All outputs side by side, stage-major.
inline Mat all_targets(const Dataset& ds) {
  std::size_t t = 0;
  for (auto w : ds.output_widths) t += w;
  Mat y(ds.size(), t);
  for (std::size_t n = 0; n < ds.size(); ++n) {
    std::size_t c = 0;
    for (const auto& yk : ds.samples[n].outputs)
      for (double v : yk) y(n, c++) = v;
  }
  return y;
}

/// One LinearModel per stage over the stage's feature prefix.
struct StagewiseLinear {
  std::string method;
  std::vector<LinearModel> stages;
  std::vector<std::vector<double>> alphas;  // chosen penalty per (stage, output)
  std::vector<std::vector<double>> betas;   // chosen mixing per (stage, output)

  StageVectors predict(const StageVectors& x) const {
    StageVectors out(stages.size());
    Vec features;
    for (std::size_t k = 0; k < stages.size(); ++k) {
      features.insert(features.end(), x.at(k).begin(), x.at(k).end());
      out[k] = stages[k].predict(features);
    }
    return out;
  }

  std::vector<StageVectors> predict_all(const Dataset& ds) const {
    std::vector<StageVectors> out;
    out.reserve(ds.size());
    for (const auto& s : ds.samples) out.push_back(predict(s.inputs));
    return out;
  }

  /// |weight| of each input (stage-major) for one output's model.
  Vec input_weights(std::size_t stage, std::size_t output) const {
    const LinearModel& m = stages.at(stage);
    if (output >= m.weights.cols()) throw ArgumentError("input_weights: output out of range");
    Vec out(m.weights.rows());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = std::abs(m.weights(r, output));
    return out;
  }
};

/// Importance of each raw input (stage-major): L2 norm of its coefficients
/// across every stage model and output whose features include it. Mirrors
/// the W_x column norm used for the network.
inline std::vector<double> linear_input_importance(const StagewiseLinear& m) {
  std::size_t p = 0;
  for (const auto& s : m.stages) p = std::max(p, s.weights.rows());
  std::vector<double> out(p, 0.0);
  for (const auto& s : m.stages)
    for (std::size_t r = 0; r < s.weights.rows(); ++r)
      for (std::size_t j = 0; j < s.weights.cols(); ++j) out[r] += s.weights(r, j) * s.weights(r, j);
  for (double& v : out) v = std::sqrt(v);
  return out;
}

struct BaselineGrid {
  std::vector<double> ridge_lambdas{1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0, 10.0, 30.0, 100.0};
  std::vector<double> betas{0.25, 0.5, 0.75, 1.0};
  std::size_t path_length = 12;
  double path_ratio = 3e-3;  // alpha_min / alpha_max
};

namespace detail {

/// Features of the last stage for both splits plus the full-width problem.
struct BenchmarkData {
  LinearProblem full;
  Mat val_features;
  Mat val_targets;
  std::vector<std::size_t> feature_prefix;  // features available to stage k
  std::vector<std::size_t> target_offset;   // first target column of stage k
};

inline BenchmarkData benchmark_data(const Dataset& train, const Dataset& val) {
  BenchmarkData d;
  const std::size_t K = train.stages();
  d.full = make_problem(stage_features(train, K - 1), all_targets(train));
  d.val_features = stage_features(val, K - 1);
  d.val_targets = all_targets(val);
  std::size_t p = 0, t = 0;
  for (std::size_t k = 0; k < K; ++k) {
    p += train.input_widths[k];
    d.feature_prefix.push_back(p);
    d.target_offset.push_back(t);
    t += train.output_widths[k];
  }
  return d;
}

/// Validation SSE of weights `w` (prefix features) for one target column.
inline double val_sse(const BenchmarkData& d, const LinearProblem& pr, std::span<const double> w,
                      std::size_t task_local, std::size_t target_col) {
  const std::size_t p = pr.features();
  double intercept = pr.y_mean[task_local];
  for (std::size_t r = 0; r < p; ++r) intercept -= pr.x_mean[r] * w[r];
  double sse = 0.0;
  for (std::size_t n = 0; n < d.val_features.rows(); ++n) {
    const auto xr = d.val_features.row(n);
    double pred = intercept;
    for (std::size_t r = 0; r < p; ++r) pred += xr[r] * w[r];
    const double e = d.val_targets(n, target_col) - pred;
    sse += e * e;
  }
  return sse;
}

inline std::vector<double> alpha_path(double alpha_max, const BaselineGrid& grid) {
  std::vector<double> out;
  if (alpha_max <= 0.0) return {0.0};
  const std::size_t n = std::max<std::size_t>(grid.path_length, 2);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(alpha_max * std::pow(grid.path_ratio, static_cast<double>(i) / static_cast<double>(n - 1)));
  return out;
}

inline std::vector<std::size_t> stage_tasks(const BenchmarkData& d, const Dataset& ds, std::size_t k) {
  std::vector<std::size_t> ids(ds.output_widths[k]);
  for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = d.target_offset[k] + j;
  return ids;
}

}  // namespace detail

/// Ridge per output with lambda chosen by validation SSE.
inline StagewiseLinear fit_ridge_selected(const Dataset& train, const Dataset& val, const BaselineGrid& grid = {}) {
  const auto d = detail::benchmark_data(train, val);
  StagewiseLinear out;
  out.method = "ridge";
  for (std::size_t k = 0; k < train.stages(); ++k) {
    const auto tasks = detail::stage_tasks(d, train, k);
    const LinearProblem pr = d.full.restrict(d.feature_prefix[k], tasks);
    Mat best(pr.features(), pr.tasks());
    std::vector<double> best_sse(pr.tasks(), std::numeric_limits<double>::infinity());
    std::vector<double> chosen(pr.tasks(), 0.0);
    for (double lambda : grid.ridge_lambdas) {
      const LinearModel m = ridge_solve(pr, lambda);
      for (std::size_t j = 0; j < pr.tasks(); ++j) {
        const Vec w = m.weights.column(j);
        const double sse = detail::val_sse(d, pr, w, j, tasks[j]);
        if (sse < best_sse[j]) {
          best_sse[j] = sse;
          chosen[j] = lambda;
          best.set_column(j, w);
        }
      }
    }
    out.stages.push_back(detail::finish_model(pr, std::move(best)));
    out.alphas.push_back(chosen);
    out.betas.push_back(std::vector<double>(pr.tasks(), 0.0));
  }
  return out;
}

/// Ordinary least squares per stage (ridge with lambda = 1e-8).
inline StagewiseLinear fit_least_squares(const Dataset& train) {
  StagewiseLinear out;
  out.method = "lr";
  for (std::size_t k = 0; k < train.stages(); ++k) {
    out.stages.push_back(least_squares_fit(stage_features(train, k), stage_targets(train, k)));
    out.alphas.push_back(std::vector<double>(train.output_widths[k], 1e-8));
    out.betas.push_back(std::vector<double>(train.output_widths[k], 0.0));
  }
  return out;
}

/// Elastic net per output; (alpha, beta) chosen by validation SSE over a
/// warm-started path per beta.
inline StagewiseLinear fit_elastic_net_selected(const Dataset& train, const Dataset& val,
                                                const BaselineGrid& grid = {}, const SolverOptions& opt = {}) {
  const auto d = detail::benchmark_data(train, val);
  StagewiseLinear out;
  out.method = "en";
  for (std::size_t k = 0; k < train.stages(); ++k) {
    const auto tasks = detail::stage_tasks(d, train, k);
    const LinearProblem pr = d.full.restrict(d.feature_prefix[k], tasks);
    Mat best(pr.features(), pr.tasks());
    std::vector<double> alphas(pr.tasks()), betas(pr.tasks());
    for (std::size_t j = 0; j < pr.tasks(); ++j) {
      double best_sse = std::numeric_limits<double>::infinity();
      const std::size_t tj[] = {j};
      const LinearProblem single = pr.restrict(pr.features(), tj);
      for (double beta : grid.betas) {
        Vec w;
        for (double alpha : detail::alpha_path(elastic_net_alpha_max(single, beta), grid)) {
          w = elastic_net_solve(single, 0, alpha, beta, std::move(w), opt);
          const double sse = detail::val_sse(d, single, w, 0, tasks[j]);
          if (sse < best_sse) {
            best_sse = sse;
            alphas[j] = alpha;
            betas[j] = beta;
            best.set_column(j, w);
          }
        }
      }
    }
    out.stages.push_back(detail::finish_model(pr, std::move(best)));
    out.alphas.push_back(alphas);
    out.betas.push_back(betas);
  }
  return out;
}

/// Multi-task elastic net per stage; (alpha, beta) chosen by the stage's
/// total validation SSE.
inline StagewiseLinear fit_men_selected(const Dataset& train, const Dataset& val, const BaselineGrid& grid = {},
                                        const SolverOptions& opt = {}) {
  const auto d = detail::benchmark_data(train, val);
  StagewiseLinear out;
  out.method = "men";
  for (std::size_t k = 0; k < train.stages(); ++k) {
    const auto tasks = detail::stage_tasks(d, train, k);
    const LinearProblem pr = d.full.restrict(d.feature_prefix[k], tasks);
    const double lip = largest_eigenvalue(pr.gram) * 1.01;
    Mat best(pr.features(), pr.tasks());
    double best_sse = std::numeric_limits<double>::infinity();
    double best_alpha = 0.0, best_beta = 0.0;
    for (double beta : grid.betas) {
      std::optional<Mat> w;
      for (double alpha : detail::alpha_path(men_alpha_max(pr, beta), grid)) {
        Mat sol = men_solve(pr, alpha, beta, std::move(w), opt, nullptr, lip);
        double sse = 0.0;
        for (std::size_t j = 0; j < pr.tasks(); ++j) sse += detail::val_sse(d, pr, sol.column(j), j, tasks[j]);
        if (sse < best_sse) {
          best_sse = sse;
          best_alpha = alpha;
          best_beta = beta;
          best = sol;
        }
        w = std::move(sol);
      }
    }
    out.stages.push_back(detail::finish_model(pr, std::move(best)));
    out.alphas.push_back(std::vector<double>(pr.tasks(), best_alpha));
    out.betas.push_back(std::vector<double>(pr.tasks(), best_beta));
  }
  return out;
}

}  // namespace dmmtl

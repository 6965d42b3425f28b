// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>
#include <vector>

namespace fc {

struct Penalty {
  enum class Kind { L1, L2, ElasticNet };
  Kind kind = Kind::L2;
  double l1_ratio = 0.5;  // elasticnet mixing, 1 = pure L1

  static Penalty l1() { return {Kind::L1, 1.0}; }
  static Penalty l2() { return {Kind::L2, 0.0}; }
  static Penalty elasticnet(double ratio) { return {Kind::ElasticNet, ratio}; }

  double l1_weight() const {
    switch (kind) {
      case Kind::L1: return 1.0;
      case Kind::L2: return 0.0;
      case Kind::ElasticNet: return l1_ratio;
    }
    return 0.0;
  }
};

inline std::string to_string(Penalty p) {
  switch (p.kind) {
    case Penalty::Kind::L1: return "l1";
    case Penalty::Kind::L2: return "l2";
    case Penalty::Kind::ElasticNet: return "elasticnet";
  }
  return "?";
}

enum class LinearLoss { Logistic, Hinge };

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> objective_trace;
};

struct LinearModel {
  Vector weights;
  double bias = 0.0;
  Penalty penalty;
  double c_reg = 1.0;
  LinearLoss loss = LinearLoss::Logistic;
  FitDiagnostics diagnostics;

  Vector decision(const Matrix& x) const { return (x * weights).array() + bias; }
};

struct LogisticOptions {
  Penalty penalty = Penalty::l2();
  double c_reg = 1.0;
  double tolerance = 1e-6;
  int max_iter = 20000;
};

namespace detail {

inline void check_fit_inputs(const Matrix& x, const Labels& y, const char* who) {
  if (x.rows() != static_cast<Index>(y.size())) throw DataError(std::string(who) + ": row/label count mismatch");
  if (x.rows() == 0 || x.cols() == 0) throw DataError(std::string(who) + ": empty design matrix");
  if (!x.allFinite()) throw DataError(std::string(who) + ": non-finite features");
  require_binary(y, who);
  if (!both_classes_present(y)) throw DataError(std::string(who) + ": both classes must be present");
}

/// C * sum log-loss + (1 - a)/2 ||w||^2 and its gradient; the bias is the last
/// coordinate of `theta` and is not penalized.
struct LogisticSmooth {
  const Matrix& x;
  Vector y;
  double c;
  double l2;

  double value_and_grad(const Vector& theta, Vector& grad) const {
    const Index f = x.cols();
    const Vector z = (x * theta.head(f)).array() + theta(f);
    double loss = 0.0;
    Vector r(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double zi = z(i);
      // log(1 + e^z) - y z, stable for both signs.
      loss += std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi))) - y(i) * zi;
      r(i) = sigmoid(zi) - y(i);
    }
    grad.resize(f + 1);
    grad.head(f) = c * (x.transpose() * r) + l2 * theta.head(f);
    grad(f) = c * r.sum();
    return c * loss + 0.5 * l2 * theta.head(f).squaredNorm();
  }
};

inline double soft_threshold(double v, double t) {
  return v > t ? v - t : (v < -t ? v + t : 0.0);
}

}  // namespace detail

/// Penalized logistic regression:
///   C * sum_i log-loss_i + a * ||w||_1 + (1 - a)/2 * ||w||^2
/// with a = 0 (L2), 1 (L1) or the elasticnet ratio. Pure L2 runs L-BFGS with
/// Armijo backtracking; any L1 weight switches to proximal gradient with
/// backtracking. Both are monotone in the objective.
inline LinearModel fit_logistic(const Matrix& x, const Labels& y, LogisticOptions opt = {}) {
  detail::check_fit_inputs(x, y, "fit_logistic");
  if (!(opt.c_reg > 0.0)) throw DataError("fit_logistic: C must be positive");
  const double a = opt.penalty.l1_weight();
  if (!(a >= 0.0 && a <= 1.0)) throw DataError("fit_logistic: elasticnet ratio must be in [0,1]");

  const Index f = x.cols();
  Vector yv(static_cast<Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) yv(static_cast<Index>(i)) = y[i];
  detail::LogisticSmooth smooth{x, yv, opt.c_reg, 1.0 - a};
  const double l1 = a;

  LinearModel model;
  model.penalty = opt.penalty;
  model.c_reg = opt.c_reg;
  model.loss = LinearLoss::Logistic;
  auto& diag = model.diagnostics;

  Vector theta = Vector::Zero(f + 1);
  Vector grad;
  double fval = smooth.value_and_grad(theta, grad);

  if (l1 == 0.0) {
    constexpr int kHistory = 10;
    std::deque<Vector> s_hist, y_hist;
    int stalled = 0;
    diag.objective_trace.push_back(fval);
    for (int it = 0; it < opt.max_iter; ++it) {
      diag.gradient_norm = grad.norm();
      diag.iterations = it;
      if (diag.gradient_norm <= opt.tolerance) {
        diag.converged = true;
        break;
      }
      // Two-loop recursion.
      Vector q = grad;
      std::vector<double> alpha(s_hist.size());
      for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
        const auto ku = static_cast<std::size_t>(k);
        alpha[ku] = s_hist[ku].dot(q) / y_hist[ku].dot(s_hist[ku]);
        q -= alpha[ku] * y_hist[ku];
      }
      if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      else q /= std::max(1.0, grad.norm());
      for (std::size_t k = 0; k < s_hist.size(); ++k) {
        const double beta = y_hist[k].dot(q) / y_hist[k].dot(s_hist[k]);
        q += (alpha[k] - beta) * s_hist[k];
      }
      Vector dir = -q;
      double slope = grad.dot(dir);
      if (!(slope < 0.0)) {
        s_hist.clear();
        y_hist.clear();
        dir = -grad / std::max(1.0, grad.norm());
        slope = grad.dot(dir);
      }
      double step = 1.0;
      Vector next_grad;
      Vector next = theta + step * dir;
      double next_val = smooth.value_and_grad(next, next_grad);
      int backtracks = 0;
      while (!(next_val <= fval + 1e-4 * step * slope) && backtracks < 60) {
        step *= 0.5;
        next = theta + step * dir;
        next_val = smooth.value_and_grad(next, next_grad);
        ++backtracks;
      }
      // No further progress at machine precision.
      if (!(next_val <= fval) || backtracks == 60) break;
      stalled = next_val < fval ? 0 : stalled + 1;
      if (stalled == 10) break;
      Vector s = next - theta;
      Vector yk = next_grad - grad;
      if (s.dot(yk) > 1e-12 * s.norm() * yk.norm()) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(yk));
        if (static_cast<int>(s_hist.size()) > kHistory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      theta = std::move(next);
      grad = std::move(next_grad);
      fval = next_val;
      diag.objective_trace.push_back(fval);
      diag.iterations = it + 1;
    }
    diag.gradient_norm = grad.norm();
    if (diag.gradient_norm <= opt.tolerance) diag.converged = true;
  } else {
    auto total = [&](const Vector& t, double smooth_val) { return smooth_val + l1 * t.head(f).lpNorm<1>(); };
    auto prox = [&](const Vector& v, double step) {
      Vector out = v;
      for (Index j = 0; j < f; ++j) out(j) = detail::soft_threshold(v(j), step * l1);
      return out;
    };
    // Lipschitz estimate grows on backtracking, shrinks slowly on success.
    double lip = std::max(1e-8, opt.c_reg * 0.25 * (x.squaredNorm() + static_cast<double>(x.rows())) /
                                    std::max<Index>(1, f) + (1.0 - a));
    double obj = total(theta, fval);
    diag.objective_trace.push_back(obj);
    for (int it = 0; it < opt.max_iter; ++it) {
      Vector next, next_grad;
      double next_val = 0.0;
      while (true) {
        next = prox(theta - grad / lip, 1.0 / lip);
        next_val = smooth.value_and_grad(next, next_grad);
        const Vector d = next - theta;
        if (next_val <= fval + grad.dot(d) + 0.5 * lip * d.squaredNorm() + 1e-12 * std::abs(fval)) break;
        lip *= 2.0;
        if (lip > 1e300) break;
      }
      diag.gradient_norm = lip * (theta - next).norm();
      diag.iterations = it + 1;
      const double next_obj = total(next, next_val);
      if (next_obj <= obj) {
        theta = std::move(next);
        grad = std::move(next_grad);
        fval = next_val;
        obj = next_obj;
      }
      diag.objective_trace.push_back(obj);
      if (diag.gradient_norm <= opt.tolerance) {
        diag.converged = true;
        break;
      }
      lip *= 0.9;
    }
  }
  model.weights = theta.head(f);
  model.bias = theta(f);
  return model;
}

struct LinearSvmOptions {
  double c_reg = 1.0;
  double tolerance = 1e-4;
  int max_epochs = 10000;
  std::uint64_t seed = 0;
};

/// Hinge-loss linear SVM, 1/2 ||[w; b]||^2 + C sum_i max(0, 1 - y_i f(x_i)),
/// solved in the dual by coordinate descent. The bias is an extra constant
/// feature and is regularized with the weights.
inline LinearModel fit_linear_svm(const Matrix& x, const Labels& y, LinearSvmOptions opt = {}) {
  detail::check_fit_inputs(x, y, "fit_linear_svm");
  if (!(opt.c_reg > 0.0)) throw DataError("fit_linear_svm: C must be positive");
  const Index n = x.rows();
  const Index f = x.cols();
  Vector sign(n);
  for (Index i = 0; i < n; ++i) sign(i) = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  Vector qdiag = x.rowwise().squaredNorm().array() + 1.0;
  Vector alpha = Vector::Zero(n);
  Vector w = Vector::Zero(f);
  double b = 0.0;

  LinearModel model;
  model.penalty = Penalty::l2();
  model.c_reg = opt.c_reg;
  model.loss = LinearLoss::Hinge;
  auto& diag = model.diagnostics;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(opt.seed);
  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    rng.shuffle(order);
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (Index i : order) {
      const double g = sign(i) * (x.row(i).dot(w) + b) - 1.0;
      double pg = g;
      if (alpha(i) == 0.0) pg = std::min(g, 0.0);
      else if (alpha(i) == opt.c_reg) pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) > 1e-14) {
        const double old = alpha(i);
        alpha(i) = std::clamp(old - g / qdiag(i), 0.0, opt.c_reg);
        const double delta = (alpha(i) - old) * sign(i);
        w += delta * x.row(i).transpose();
        b += delta;
      }
    }
    diag.iterations = epoch + 1;
    // No equality constraint in this dual, so every |projected gradient| must vanish.
    diag.gradient_norm = std::max(pg_max, -pg_min);
    if (diag.gradient_norm <= opt.tolerance) {
      diag.converged = true;
      break;
    }
  }
  model.weights = w;
  model.bias = b;
  return model;
}

}  // namespace fc

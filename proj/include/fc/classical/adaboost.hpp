// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace fc {

/// Depth-one threshold classifier: predicts `left_label` when
/// x[feature] <= threshold, else `right_label`.
struct Stump {
  Index feature = 0;
  double threshold = 0.0;
  int left_label = 0;
  int right_label = 1;

  int predict(const Eigen::Ref<const RowVector>& x) const {
    return x(feature) <= threshold ? left_label : right_label;
  }
};

/// Weighted-error minimizing stump. Ties go to the lowest feature index, then
/// the lowest threshold, then the (0 | 1) orientation.
inline Stump fit_stump(const Matrix& x, const Labels& y, const Vector& w,
                       const std::vector<std::vector<Index>>& sorted_rows, double* error_out = nullptr) {
  const double total = w.sum();
  double pos_total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) pos_total += y[static_cast<std::size_t>(i)] * w(i);

  Stump best;
  double best_err = std::numeric_limits<double>::infinity();
  auto consider = [&](Index feat, double threshold, double left_pos, double left_w) {
    const double left_neg = left_w - left_pos;
    const double right_pos = pos_total - left_pos;
    const double right_neg = (total - pos_total) - left_neg;
    // Orientation (0 | 1): misclassified = left positives + right negatives.
    const double err01 = left_pos + right_neg;
    const double err10 = left_neg + right_pos;
    if (err01 < best_err) {
      best_err = err01;
      best = Stump{feat, threshold, 0, 1};
    }
    if (err10 < best_err) {
      best_err = err10;
      best = Stump{feat, threshold, 1, 0};
    }
  };
  for (Index feat = 0; feat < x.cols(); ++feat) {
    const auto& order = sorted_rows[static_cast<std::size_t>(feat)];
    // Everything on the right.
    consider(feat, x(order.front(), feat) - 1.0, 0.0, 0.0);
    double left_pos = 0.0, left_w = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const Index r = order[k];
      left_w += w(r);
      left_pos += y[static_cast<std::size_t>(r)] * w(r);
      const double a = x(r, feat), b = x(order[k + 1], feat);
      if (a == b) continue;
      consider(feat, 0.5 * (a + b), left_pos, left_w);
    }
  }
  if (error_out) *error_out = best_err / total;
  return best;
}

inline std::vector<std::vector<Index>> presort_columns(const Matrix& x) {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) {
    auto& order = out[static_cast<std::size_t>(j)];
    order.resize(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a, j) < x(b, j); });
  }
  return out;
}

struct AdaBoostOptions {
  int n_estimators = 50;
  double learning_rate = 1.0;
};

struct AdaBoostModel {
  std::vector<Stump> stumps;
  std::vector<double> stage_weights;
  std::vector<double> stage_errors;  // weighted training error of each accepted stump
  int n_estimators = 0;
  double learning_rate = 1.0;

  /// sum_m alpha_m * (+1 | -1)
  Vector decision(const Matrix& x) const {
    Vector out = Vector::Zero(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      for (std::size_t m = 0; m < stumps.size(); ++m) {
        out(i) += stage_weights[m] * (stumps[m].predict(x.row(i)) == 1 ? 1.0 : -1.0);
      }
    }
    return out;
  }

  Vector feature_importance(Index features) const {
    Vector imp = Vector::Zero(features);
    for (std::size_t m = 0; m < stumps.size(); ++m) imp(stumps[m].feature) += stage_weights[m];
    const double total = imp.sum();
    return total > 0.0 ? Vector(imp / total) : imp;
  }
};

/// Binary SAMME boosting: stage weight lr * log((1 - err) / err), misclassified
/// rows reweighted by exp(stage weight), weights renormalized each round.
/// Stops after a zero-error stump (kept with weight 1) or before a stump with
/// error >= 0.5.
inline AdaBoostModel fit_adaboost(const Matrix& x, const Labels& y, AdaBoostOptions opt = {}) {
  if (x.rows() != static_cast<Index>(y.size())) throw DataError("fit_adaboost: row/label count mismatch");
  if (x.rows() == 0 || x.cols() == 0) throw DataError("fit_adaboost: empty design matrix");
  if (opt.n_estimators < 1) throw DataError("fit_adaboost: n_estimators must be >= 1");
  if (!(opt.learning_rate > 0.0)) throw DataError("fit_adaboost: learning_rate must be positive");
  require_binary(y, "fit_adaboost");

  AdaBoostModel model;
  model.n_estimators = opt.n_estimators;
  model.learning_rate = opt.learning_rate;
  const Index n = x.rows();
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const auto sorted = presort_columns(x);

  for (int m = 0; m < opt.n_estimators; ++m) {
    double err = 0.0;
    const Stump stump = fit_stump(x, y, w, sorted, &err);
    if (err <= 0.0) {
      model.stumps.push_back(stump);
      model.stage_weights.push_back(1.0);
      model.stage_errors.push_back(0.0);
      break;
    }
    if (err >= 0.5) {
      if (m == 0) {
        throw NumericalError("fit_adaboost: first weak learner has weighted error " + std::to_string(err) +
                             " >= 0.5; no stump beats chance on this data");
      }
      break;
    }
    const double alpha = opt.learning_rate * std::log((1.0 - err) / err);
    model.stumps.push_back(stump);
    model.stage_weights.push_back(alpha);
    model.stage_errors.push_back(err);
    for (Index i = 0; i < n; ++i) {
      if (stump.predict(x.row(i)) != y[static_cast<std::size_t>(i)]) w(i) *= std::exp(alpha);
    }
    w /= w.sum();
  }
  return model;
}

}  // namespace fc

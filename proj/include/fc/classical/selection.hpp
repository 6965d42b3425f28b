// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/classical/linear.hpp"
#include "fc/core.hpp"

#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace fc {

/// Fits a model on the given columns and returns one importance per column.
using ImportanceFn = std::function<Vector(const Matrix&, const Labels&)>;

struct RfeResult {
  std::vector<std::size_t> selected;  // original column indices, ascending
  int refits = 0;
};

/// Recursive feature elimination: refit, drop the single least important
/// column (first on ties), repeat until `target_count` columns remain.
/// `target_count` 0 means floor(F / 2).
inline RfeResult rfe_select(const ImportanceFn& importance, const Matrix& x, const Labels& y,
                            std::size_t target_count = 0) {
  const auto f = static_cast<std::size_t>(x.cols());
  if (target_count == 0) target_count = f / 2;
  if (target_count < 1 || target_count >= f) {
    throw DataError("rfe_select: target count must be in [1, F)");
  }
  RfeResult res;
  res.selected.resize(f);
  std::iota(res.selected.begin(), res.selected.end(), std::size_t{0});
  while (res.selected.size() > target_count) {
    const Vector imp = importance(select_cols(x, res.selected), y);
    ++res.refits;
    if (imp.size() != static_cast<Index>(res.selected.size())) {
      throw Error("rfe_select: importance vector has wrong length");
    }
    Index weakest = 0;
    imp.minCoeff(&weakest);
    res.selected.erase(res.selected.begin() + weakest);
  }
  return res;
}

/// |weight| importance of a linear model fitted by `fit`.
inline ImportanceFn linear_importance(std::function<LinearModel(const Matrix&, const Labels&)> fit) {
  return [fit = std::move(fit)](const Matrix& x, const Labels& y) -> Vector {
    return fit(x, y).weights.cwiseAbs();
  };
}

struct SfmThreshold {
  bool use_mean = true;
  double value = 0.0;

  static SfmThreshold mean() { return {true, 0.0}; }
  static SfmThreshold fixed(double v) { return {false, v}; }
};

/// Keeps columns with |weight| >= threshold (default: mean |weight|).
inline std::vector<std::size_t> select_from_model(const Vector& weights, SfmThreshold thr = SfmThreshold::mean()) {
  const Vector mag = weights.cwiseAbs();
  const double t = thr.use_mean ? mag.mean() : thr.value;
  std::vector<std::size_t> keep;
  for (Index j = 0; j < mag.size(); ++j) {
    // Relative slack so equal magnitudes survive the rounding in the mean.
    if (mag(j) >= t - 1e-12 * std::abs(t)) keep.push_back(static_cast<std::size_t>(j));
  }
  if (keep.empty()) {
    throw DataError("select_from_model: no feature reaches threshold " + std::to_string(t) +
                    "; lower the threshold");
  }
  return keep;
}

inline std::vector<std::size_t> select_from_model(const LinearModel& model, SfmThreshold thr = SfmThreshold::mean()) {
  return select_from_model(model.weights, thr);
}

}  // namespace fc

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"
#include "fc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace fc {

/// Positive class is label 1.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion(const Labels& y_true, const Labels& y_pred) {
  if (y_true.size() != y_pred.size()) throw DataError("confusion: length mismatch");
  require_binary(y_true, "confusion");
  require_binary(y_pred, "confusion");
  ConfusionCounts cc;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 1) (y_pred[i] == 1 ? cc.tp : cc.fn)++;
    else (y_pred[i] == 1 ? cc.fp : cc.tn)++;
  }
  return cc;
}

/// Ratios with an empty denominator have no value.
inline std::optional<double> accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) return std::nullopt;
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline std::optional<double> sensitivity(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline std::optional<double> specificity(const ConfusionCounts& c) {
  if (c.tn + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

/// Mann-Whitney AUC: (concordant + 0.5 * tied) / (P * N) over all
/// positive-negative pairs, computed from average ranks.
inline double roc_auc(const Labels& y_true, const Vector& scores) {
  if (static_cast<Index>(y_true.size()) != scores.size()) throw DataError("roc_auc: length mismatch");
  require_binary(y_true, "roc_auc");
  if (!both_classes_present(y_true)) throw DataError("roc_auc: both classes must be present");
  const auto n = y_true.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Index>(a)) < scores(static_cast<Index>(b));
  });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t k = i;
    while (k + 1 < n && scores(static_cast<Index>(order[k + 1])) == scores(static_cast<Index>(order[i]))) ++k;
    const double rank = 0.5 * static_cast<double>(i + k) + 1.0;
    for (std::size_t m = i; m <= k; ++m) {
      if (y_true[order[m]] == 1) pos_rank_sum += rank;
    }
    i = k + 1;
  }
  const auto p = static_cast<double>(std::count(y_true.begin(), y_true.end(), 1));
  const double q = static_cast<double>(n) - p;
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

inline Labels threshold(const Vector& probs, double t = 0.5) {
  Labels out(static_cast<std::size_t>(probs.size()));
  for (Index i = 0; i < probs.size(); ++i) out[static_cast<std::size_t>(i)] = probs(i) >= t ? 1 : 0;
  return out;
}

enum class MetricId { Accuracy, Sensitivity, Specificity, Auc };
inline constexpr std::array<MetricId, 4> kMetrics{MetricId::Accuracy, MetricId::Sensitivity,
                                                  MetricId::Specificity, MetricId::Auc};

inline std::string metric_name(MetricId m) {
  switch (m) {
    case MetricId::Accuracy: return "Accuracy";
    case MetricId::Sensitivity: return "Sensitivity";
    case MetricId::Specificity: return "Specificity";
    case MetricId::Auc: return "AUC";
  }
  return "?";
}

/// Metrics of one evaluated fold or replicate, as fractions in [0, 1].
struct MetricSample {
  std::array<std::optional<double>, 4> values;

  std::optional<double>& operator[](MetricId m) { return values[static_cast<std::size_t>(m)]; }
  const std::optional<double>& operator[](MetricId m) const { return values[static_cast<std::size_t>(m)]; }
};

/// Scores are P(label = 1); predictions threshold them at 0.5.
inline MetricSample evaluate_scores(const Labels& y_true, const Vector& scores) {
  const auto cc = confusion(y_true, threshold(scores));
  MetricSample s;
  s[MetricId::Accuracy] = accuracy(cc);
  s[MetricId::Sensitivity] = sensitivity(cc);
  s[MetricId::Specificity] = specificity(cc);
  if (both_classes_present(y_true)) s[MetricId::Auc] = roc_auc(y_true, scores);
  return s;
}

enum class StdConvention { Sample, Population };

inline std::string to_string(StdConvention s) { return s == StdConvention::Sample ? "sample" : "population"; }

/// Summary of one metric across evaluations, in percent.
struct MetricStats {
  double min = 0.0;
  double average = 0.0;
  double max = 0.0;
  double std = 0.0;
  std::size_t count = 0;

  bool operator==(const MetricStats&) const = default;
};

struct MetricReport {
  std::array<std::optional<MetricStats>, 4> metrics;
  StdConvention std_convention = StdConvention::Sample;
  std::size_t evaluations = 0;

  const std::optional<MetricStats>& operator[](MetricId m) const { return metrics[static_cast<std::size_t>(m)]; }
  std::optional<MetricStats>& operator[](MetricId m) { return metrics[static_cast<std::size_t>(m)]; }
  bool operator==(const MetricReport&) const = default;
};

/// min / average / max / std in percent. Undefined values in a sample are
/// skipped; a metric with no defined value stays empty. With a single value
/// the sample standard deviation is reported as 0.
inline MetricReport aggregate(const std::vector<MetricSample>& samples, StdConvention conv = StdConvention::Sample) {
  MetricReport report;
  report.std_convention = conv;
  report.evaluations = samples.size();
  for (auto id : kMetrics) {
    std::vector<double> v;
    for (const auto& s : samples) {
      if (s[id]) v.push_back(100.0 * *s[id]);
    }
    if (v.empty()) continue;
    // Sorted accumulation makes the result independent of sample order.
    std::sort(v.begin(), v.end());
    MetricStats st;
    st.count = v.size();
    st.min = v.front();
    st.max = v.back();
    st.average = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - st.average) * (x - st.average);
    const double denom = conv == StdConvention::Sample ? static_cast<double>(v.size()) - 1.0 : static_cast<double>(v.size());
    st.std = denom > 0.0 ? std::sqrt(ss / denom) : 0.0;
    st.average = std::clamp(st.average, st.min, st.max);
    report[id] = st;
  }
  return report;
}

struct Fold {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> holdout_idx;
};

/// Each class is shuffled and dealt round-robin into k folds; the dealing
/// position carries over between classes so fold sizes also stay balanced.
inline std::vector<Fold> stratified_kfold(const Labels& y, std::size_t k, std::uint64_t seed) {
  require_binary(y, "stratified_kfold");
  if (k < 2) throw DataError("stratified_kfold: k must be >= 2");
  std::array<std::vector<std::size_t>, 2> classes;
  for (std::size_t i = 0; i < y.size(); ++i) classes[static_cast<std::size_t>(y[i])].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (classes[static_cast<std::size_t>(c)].size() < k) {
      throw DataError("stratified_kfold: class " + std::to_string(c) + " has " +
                      std::to_string(classes[static_cast<std::size_t>(c)].size()) + " members, fewer than k=" +
                      std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> fold_of(y.size());
  std::size_t pos = 0;
  for (auto& members : classes) {
    rng.shuffle(members);
    for (std::size_t i : members) fold_of[i] = pos++ % k;
  }
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) (fold_of[i] == f ? folds[f].holdout_idx : folds[f].train_idx).push_back(i);
  }
  return folds;
}

/// Fits on (x_train, y_train) and returns P(label = 1) for the rows of x_eval.
using ScoreFn = std::function<Vector(const Matrix& x_train, const Labels& y_train, const Matrix& x_eval,
                                     std::uint64_t seed)>;

struct EvaluationRun {
  MetricReport report;
  std::vector<MetricSample> samples;  // in (repeat, fold) order
};

/// Repeated stratified k-fold. Repeat r shuffles with derive_seed(seed, r);
/// statistics pool every fold x repeat score.
inline EvaluationRun repeated_cv(const ScoreFn& fit_score, const Matrix& x, const Labels& y, std::size_t k,
                                 std::size_t repeats, std::uint64_t seed,
                                 StdConvention conv = StdConvention::Sample) {
  if (repeats < 1) throw DataError("repeated_cv: repeats must be >= 1");
  if (x.rows() != static_cast<Index>(y.size())) throw DataError("repeated_cv: row/label count mismatch");
  EvaluationRun run;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto repeat_seed = derive_seed(seed, r);
    const auto folds = stratified_kfold(y, k, repeat_seed);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& fold = folds[f];
      try {
        const Vector scores = fit_score(select_rows(x, fold.train_idx), select(y, fold.train_idx),
                                        select_rows(x, fold.holdout_idx), derive_seed(repeat_seed, f));
        run.samples.push_back(evaluate_scores(select(y, fold.holdout_idx), scores));
      } catch (const Error& e) {
        throw Error("repeat " + std::to_string(r) + " fold " + std::to_string(f) + ": " + e.what());
      }
    }
  }
  run.report = aggregate(run.samples, conv);
  return run;
}

/// Replicated hold-out evaluation: replicate r draws a fresh stratified
/// train/test split with derive_seed(seed, r).
inline EvaluationRun split_replicates(const ScoreFn& fit_score, const Matrix& x, const Labels& y,
                                      std::size_t replicates, std::uint64_t seed, double test_fraction = 0.2,
                                      StdConvention conv = StdConvention::Sample) {
  if (replicates < 1) throw DataError("split_replicates: replicates must be >= 1");
  EvaluationRun run;
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto rep_seed = derive_seed(seed, r);
    const auto plan = split_stratified(y, {1.0 - test_fraction, 0.0, test_fraction}, rep_seed);
    try {
      const Vector scores = fit_score(select_rows(x, plan.train_idx), select(y, plan.train_idx),
                                      select_rows(x, plan.test_idx), derive_seed(rep_seed, 1));
      run.samples.push_back(evaluate_scores(select(y, plan.test_idx), scores));
    } catch (const Error& e) {
      throw Error("replicate " + std::to_string(r) + ": " + e.what());
    }
  }
  run.report = aggregate(run.samples, conv);
  return run;
}

}  // namespace fc

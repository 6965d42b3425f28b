// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace fc {

enum class Criterion { Gini, Entropy };

inline std::string to_string(Criterion c) { return c == Criterion::Gini ? "gini" : "entropy"; }

inline Criterion parse_criterion(const std::string& s) {
  if (s == "gini") return Criterion::Gini;
  if (s == "entropy") return Criterion::Entropy;
  throw Error("unknown split criterion '" + s + "' (expected gini|entropy)");
}

/// Impurity of a node whose positive-class share is p (entropy in bits).
inline double impurity(Criterion c, double p) {
  const double q = 1.0 - p;
  if (c == Criterion::Gini) return 1.0 - p * p - q * q;
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (q > 0.0) h -= q * std::log2(q);
  return h;
}

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prob1 = 0.0;  // share of class 1 among training rows at this node
  int depth = 0;
};

/// Binary CART classifier; rows with x[feature] <= threshold go left.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(const Eigen::Ref<const RowVector>& x) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(at)];
      at = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)];
  }

  int depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
  }
};

struct TreeOptions {
  int max_depth = 5;  // number of split levels; 1 is a stump, 0 a single leaf
  Criterion criterion = Criterion::Gini;
  Index max_features = 0;  // candidates per split; 0 = all
  Index min_samples_split = 2;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Labels& y, TreeOptions opt, Rng& rng, Vector& importance)
      : x_(x), y_(y), opt_(opt), rng_(rng), importance_(importance) {}

  DecisionTree build(std::vector<Index> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<Index> rows, int depth) {
    const auto n = static_cast<double>(rows.size());
    double pos = 0.0;
    for (Index r : rows) pos += y_[static_cast<std::size_t>(r)];
    const double p = pos / n;
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{-1, 0.0, -1, -1, p, depth});

    const double node_impurity = impurity(opt_.criterion, p);
    if (depth >= opt_.max_depth || node_impurity == 0.0 ||
        static_cast<Index>(rows.size()) < opt_.min_samples_split) {
      return id;
    }

    const Index f = x_.cols();
    std::vector<Index> features(static_cast<std::size_t>(f));
    std::iota(features.begin(), features.end(), Index{0});
    const Index mtry = opt_.max_features > 0 ? std::min(opt_.max_features, f) : f;
    // Partial Fisher-Yates: the first mtry entries are a uniform sample.
    for (Index k = 0; k < mtry; ++k) {
      const auto pick = static_cast<std::size_t>(k) + rng_.below(static_cast<std::size_t>(f - k));
      std::swap(features[static_cast<std::size_t>(k)], features[pick]);
    }

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> column(rows.size());
    for (Index k = 0; k < mtry; ++k) {
      const Index feat = features[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        column[i] = {x_(rows[i], feat), y_[static_cast<std::size_t>(rows[i])]};
      }
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double child = (nl * impurity(opt_.criterion, left_pos / nl) +
                              nr * impurity(opt_.criterion, (pos - left_pos) / nr)) / n;
        const double gain = node_impurity - child;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = static_cast<int>(feat);
          best_threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Index> left, right;
    for (Index r : rows) (x_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    importance_(best_feature) += n * best_gain;
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Matrix& x_;
  const Labels& y_;
  TreeOptions opt_;
  Rng& rng_;
  Vector& importance_;
  DecisionTree tree_;
};

}  // namespace detail

struct ForestOptions {
  int n_trees = 100;
  int max_depth = 5;
  Criterion criterion = Criterion::Gini;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  Index max_features = 0;  // 0 = floor(sqrt(F))
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_trees = 0;
  int max_depth = 0;
  Criterion criterion = Criterion::Gini;
  std::uint64_t seed = 0;
  Vector feature_importance;  // mean impurity decrease, normalized per tree

  /// Share of trees whose leaf majority is class 1 (ties count half).
  Vector vote_share(const Matrix& x) const {
    Vector out = Vector::Zero(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      double votes = 0.0;
      for (const auto& t : trees) {
        const double p = t.leaf_for(x.row(i)).prob1;
        votes += p > 0.5 ? 1.0 : (p < 0.5 ? 0.0 : 0.5);
      }
      out(i) = votes / static_cast<double>(trees.size());
    }
    return out;
  }
};

/// Bagged CART ensemble. Tree t draws from its own stream derived from
/// (seed, t), so the fitted forest does not depend on build order.
inline ForestModel fit_random_forest(const Matrix& x, const Labels& y, ForestOptions opt = {}) {
  if (x.rows() != static_cast<Index>(y.size())) throw DataError("fit_random_forest: row/label count mismatch");
  if (x.rows() == 0 || x.cols() == 0) throw DataError("fit_random_forest: empty design matrix");
  if (opt.n_trees < 1) throw DataError("fit_random_forest: n_trees must be >= 1");
  if (opt.max_depth < 0) throw DataError("fit_random_forest: max_depth must be >= 0");
  require_binary(y, "fit_random_forest");

  ForestModel model;
  model.n_trees = opt.n_trees;
  model.max_depth = opt.max_depth;
  model.criterion = opt.criterion;
  model.seed = opt.seed;
  model.feature_importance = Vector::Zero(x.cols());

  TreeOptions topt;
  topt.max_depth = opt.max_depth;
  topt.criterion = opt.criterion;
  topt.max_features = opt.max_features > 0
                          ? opt.max_features
                          : std::max<Index>(1, static_cast<Index>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
  const auto n = static_cast<std::size_t>(x.rows());
  model.trees.reserve(static_cast<std::size_t>(opt.n_trees));
  for (int t = 0; t < opt.n_trees; ++t) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(t)));
    std::vector<Index> rows(n);
    if (opt.bootstrap) {
      for (auto& r : rows) r = static_cast<Index>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), Index{0});
    }
    Vector importance = Vector::Zero(x.cols());
    detail::TreeBuilder builder(x, y, topt, rng, importance);
    model.trees.push_back(builder.build(std::move(rows)));
    const double total = importance.sum();
    if (total > 0.0) model.feature_importance += importance / total;
  }
  model.feature_importance /= static_cast<double>(opt.n_trees);
  return model;
}

}  // namespace fc

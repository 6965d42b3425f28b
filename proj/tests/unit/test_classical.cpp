// SPDX-License-Identifier: Apache-2.0
#include "fc/classical/adaboost.hpp"
#include "fc/classical/forest.hpp"
#include "fc/classical/kernel_svm.hpp"
#include "fc/classical/linear.hpp"
#include "fc/classical/selection.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace fc;

namespace {

struct Data {
  Matrix x;
  Labels y;
};

// Labels from a noisy linear rule on the first `informative` columns.
Data linear_data(Index n, Index f, Index informative, double noise, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, f), Labels(static_cast<std::size_t>(n))};
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index j = 0; j < f; ++j) {
      d.x(i, j) = rng.normal();
      if (j < informative) s += d.x(i, j);
    }
    d.y[static_cast<std::size_t>(i)] = s + noise * rng.normal() > 0.0 ? 1 : 0;
  }
  if (!both_classes_present(d.y)) d.y[0] = 1 - d.y[0];
  return d;
}

double accuracy(const Vector& decision, const Labels& y, double cut = 0.0) {
  int ok = 0;
  for (Index i = 0; i < decision.size(); ++i) ok += (decision(i) > cut ? 1 : 0) == y[static_cast<std::size_t>(i)];
  return static_cast<double>(ok) / static_cast<double>(decision.size());
}

// Residual r = sigmoid(Xw + b) - y.
Vector logistic_residual(const Matrix& x, const Labels& y, const Vector& w, double b) {
  Vector r(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    r(i) = 1.0 / (1.0 + std::exp(-(x.row(i).dot(w) + b))) - y[static_cast<std::size_t>(i)];
  }
  return r;
}

// Newton's method on C * sum log-loss + 1/2 ||w||^2 with an unpenalized bias.
Vector newton_logistic(const Matrix& x, const Labels& y, double c) {
  const Index f = x.cols();
  Matrix xa(x.rows(), f + 1);
  xa << x, Vector::Ones(x.rows());
  Vector theta = Vector::Zero(f + 1);
  for (int it = 0; it < 100; ++it) {
    const Vector r = logistic_residual(x, y, theta.head(f), theta(f));
    Vector g = c * xa.transpose() * r;
    g.head(f) += theta.head(f);
    Matrix h = Matrix::Zero(f + 1, f + 1);
    for (Index i = 0; i < x.rows(); ++i) {
      const double p = r(i) + y[static_cast<std::size_t>(i)];
      h += c * p * (1 - p) * xa.row(i).transpose() * xa.row(i);
    }
    h.topLeftCorner(f, f) += Matrix::Identity(f, f);
    theta -= h.ldlt().solve(g);
    if (g.norm() < 1e-13) break;
  }
  return theta;
}

// Euclidean projection onto {0 <= a <= c, y.a = 0} by bisection on the multiplier.
Vector project_box_hyperplane(const Vector& v, const Vector& y, double c) {
  auto clip = [&](double mu) { return (v - mu * y).cwiseMax(0.0).cwiseMin(c); };
  double lo = -1e6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (y.dot(clip(mid)) > 0.0) lo = mid;
    else hi = mid;
  }
  return clip(0.5 * (lo + hi));
}

// Projected gradient on min 1/2 a'Qa - 1'a.
Vector svm_dual_oracle(const Matrix& k, const Vector& y, double c) {
  const Matrix q = (y * y.transpose()).cwiseProduct(k);
  const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(q).eigenvalues().maxCoeff();
  Vector a = Vector::Zero(y.size());
  for (int it = 0; it < 100000; ++it) a = project_box_hyperplane(a - step * (q * a - Vector::Ones(y.size())), y, c);
  return a;
}

double hinge_primal(const Matrix& x, const Labels& y, const Vector& w, double b, double c) {
  double loss = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    loss += std::max(0.0, 1.0 - s * (x.row(i).dot(w) + b));
  }
  return 0.5 * (w.squaredNorm() + b * b) + c * loss;
}

}  // namespace

TEST(Logistic, SeparableDataIsClassifiedPerfectly) {
  Matrix x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  const Labels y{0, 0, 0, 1, 1, 1};
  const auto m = fit_logistic(x, y, {Penalty::l2(), 10.0});
  EXPECT_EQ(accuracy(m.decision(x), y), 1.0);
  EXPECT_GT(m.weights(0), 0.0);
}

TEST(Logistic, L2MatchesNewtonOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = linear_data(40, 3, 2, 1.5, seed);
    const auto m = fit_logistic(d.x, d.y, {Penalty::l2(), 0.7, 1e-6});
    const Vector want = newton_logistic(d.x, d.y, 0.7);
    EXPECT_LE((m.weights - want.head(3)).cwiseAbs().maxCoeff(), 1e-5) << "seed " << seed;
    EXPECT_NEAR(m.bias, want(3), 1e-5);
    EXPECT_TRUE(m.diagnostics.converged);
  }
}

TEST(Logistic, L1SolutionSatisfiesOptimalityAndIsSparse) {
  const auto d = linear_data(100, 20, 2, 0.5, 11);
  const double c = 0.05;
  const auto m = fit_logistic(d.x, d.y, {Penalty::l1(), c, 1e-9, 200000});
  const Vector g = c * d.x.transpose() * logistic_residual(d.x, d.y, m.weights, m.bias);
  int zeros = 0;
  for (Index j = 0; j < 20; ++j) {
    if (m.weights(j) == 0.0) {
      ++zeros;
      EXPECT_LE(std::abs(g(j)), 1.0 + 1e-5) << j;
    } else {
      EXPECT_NEAR(g(j), -(m.weights(j) > 0 ? 1.0 : -1.0), 1e-5) << j;
    }
  }
  EXPECT_GE(zeros, 10);
  EXPECT_NE(m.weights(0), 0.0);
  EXPECT_NE(m.weights(1), 0.0);
}

TEST(Logistic, ObjectiveTraceIsMonotone) {
  const auto d = linear_data(60, 8, 3, 1.0, 2);
  for (auto p : {Penalty::l2(), Penalty::l1(), Penalty::elasticnet(0.5)}) {
    const auto tr = fit_logistic(d.x, d.y, {p, 1.0}).diagnostics.objective_trace;
    ASSERT_FALSE(tr.empty());
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i], tr[i - 1] + 1e-12) << to_string(p);
  }
}

TEST(Logistic, InvalidInputs) {
  Matrix x = Matrix::Ones(3, 2);
  EXPECT_THROW(fit_logistic(x, {1, 1, 1}), DataError);
  EXPECT_THROW(fit_logistic(x, {1, 0}), DataError);
  EXPECT_THROW(fit_logistic(x, {1, 0, 1}, {Penalty::l2(), 0.0}), DataError);
}

TEST(LinearSvm, TwoPointMarginIsTheMidpoint) {
  Matrix x(2, 2);
  x << 0, 0, 2, 0;
  const auto m = fit_linear_svm(x, {0, 1}, {1e6, 1e-10});
  Matrix mid(1, 2);
  mid << 1, 0;
  EXPECT_NEAR(m.decision(mid)(0), 0.0, 1e-6);
  EXPECT_NEAR(m.weights(0), 1.0, 1e-6);
  EXPECT_NEAR(m.bias, -1.0, 1e-6);
}

TEST(LinearSvm, PrimalIsLocallyOptimal) {
  const auto d = linear_data(50, 4, 2, 0.8, 5);
  const double c = 0.5;
  const auto m = fit_linear_svm(d.x, d.y, {c, 1e-8, 100000, 1});
  const double best = hinge_primal(d.x, d.y, m.weights, m.bias, c);
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    Vector w = m.weights;
    for (Index j = 0; j < 4; ++j) w(j) += 1e-3 * rng.normal();
    EXPECT_GE(hinge_primal(d.x, d.y, w, m.bias + 1e-3 * rng.normal(), c), best - 1e-6);
  }
  EXPECT_GE(accuracy(m.decision(d.x), d.y), 0.8);
}

TEST(KernelSvm, SymmetricPairSplitsAtMidpoint) {
  Matrix x(2, 1);
  x << -1, 1;
  const auto m = fit_kernel_svm(x, {0, 1}, {10.0, 0.5});
  EXPECT_NEAR(m.decision(Matrix::Zero(1, 1))(0), 0.0, 1e-9);
}

TEST(KernelSvm, SolvesXor) {
  Matrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const Labels y{0, 0, 1, 1};
  const auto m = fit_kernel_svm(x, y, {10.0, 1.0});
  EXPECT_EQ(accuracy(m.decision(x), y), 1.0);
}

TEST(KernelSvm, MatchesProjectedGradientDual) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto d = linear_data(20, 2, 2, 1.0, 40 + seed);
    const double c = 1.0, gamma = 0.5;
    Vector y(20);
    for (Index i = 0; i < 20; ++i) y(i) = d.y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    const Matrix k = rbf_kernel(d.x, d.x, gamma);
    const auto sol = solve_smo(k, y, c, 1e-8, 10000000);
    const Vector want = svm_dual_oracle(k, y, c);
    EXPECT_NEAR(svm_dual_objective(k, y, sol.alpha), svm_dual_objective(k, y, want), 1e-3);
    EXPECT_LE((sol.alpha - want).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_NEAR(sol.alpha.dot(y), 0.0, 1e-8);
    EXPECT_GE(sol.alpha.minCoeff(), 0.0);
    EXPECT_LE(sol.alpha.maxCoeff(), c);
  }
}

TEST(KernelSvm, ModelIsDualFeasible) {
  const auto d = linear_data(60, 5, 3, 1.0, 9);
  const auto m = fit_kernel_svm(d.x, d.y, {2.0, 0.0});
  EXPECT_NEAR(m.dual_coeffs.sum(), 0.0, 1e-8);
  EXPECT_LE(m.dual_coeffs.cwiseAbs().maxCoeff(), 2.0 + 1e-12);
  EXPECT_NEAR(m.gamma, default_gamma(d.x), 0.0);
  EXPECT_TRUE(m.diagnostics.converged);
}

TEST(Forest, ImpurityValues) {
  EXPECT_DOUBLE_EQ(impurity(Criterion::Gini, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(impurity(Criterion::Gini, 0.25), 0.375);
  EXPECT_DOUBLE_EQ(impurity(Criterion::Entropy, 0.5), 1.0);
  EXPECT_NEAR(impurity(Criterion::Entropy, 0.25), 0.8112781244591328, 1e-15);
  EXPECT_EQ(impurity(Criterion::Gini, 1.0), 0.0);
  EXPECT_EQ(impurity(Criterion::Entropy, 0.0), 0.0);
}

TEST(Forest, DepthIsBounded) {
  const auto d = linear_data(200, 6, 6, 2.0, 1);
  for (int depth : {0, 1, 3, 5}) {
    const auto m = fit_random_forest(d.x, d.y, {20, depth, Criterion::Gini, 7});
    for (const auto& t : m.trees) EXPECT_LE(t.depth(), depth);
    if (depth == 0) {
      for (const auto& t : m.trees) EXPECT_EQ(t.nodes.size(), 1u);
    }
  }
}

TEST(Forest, PureNodesAreLeaves) {
  Matrix x(4, 1);
  x << 0, 1, 2, 3;
  ForestOptions opt{1, 5, Criterion::Gini, 0, false, 1};
  const auto m = fit_random_forest(x, {0, 0, 1, 1}, opt);
  ASSERT_EQ(m.trees[0].nodes.size(), 3u);
  EXPECT_EQ(m.trees[0].nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(m.trees[0].nodes[0].threshold, 1.5);
  const auto one = fit_random_forest(x, {1, 1, 1, 1}, opt);
  EXPECT_EQ(one.trees[0].nodes.size(), 1u);
  EXPECT_EQ(one.trees[0].nodes[0].prob1, 1.0);
}

TEST(Forest, TreesDependOnlyOnSeedAndIndex) {
  const auto d = linear_data(80, 5, 3, 1.0, 3);
  const auto small = fit_random_forest(d.x, d.y, {5, 4, Criterion::Entropy, 21});
  const auto large = fit_random_forest(d.x, d.y, {12, 4, Criterion::Entropy, 21});
  for (std::size_t t = 0; t < 5; ++t) {
    ASSERT_EQ(small.trees[t].nodes.size(), large.trees[t].nodes.size());
    for (std::size_t k = 0; k < small.trees[t].nodes.size(); ++k) {
      EXPECT_EQ(small.trees[t].nodes[k].feature, large.trees[t].nodes[k].feature);
      EXPECT_EQ(small.trees[t].nodes[k].threshold, large.trees[t].nodes[k].threshold);
    }
  }
  const auto again = fit_random_forest(d.x, d.y, {12, 4, Criterion::Entropy, 21});
  EXPECT_EQ(again.vote_share(d.x), large.vote_share(d.x));
  EXPECT_EQ(again.feature_importance, large.feature_importance);
}

TEST(Forest, LearnsLinearRule) {
  const auto d = linear_data(300, 4, 2, 0.3, 8);
  const auto m = fit_random_forest(d.x, d.y, {100, 5, Criterion::Gini, 2});
  EXPECT_GE(accuracy(m.vote_share(d.x), d.y, 0.5), 0.9);
  EXPECT_NEAR(m.feature_importance.sum(), 1.0, 1e-12);
  EXPECT_GT(std::min(m.feature_importance(0), m.feature_importance(1)),
            std::max(m.feature_importance(2), m.feature_importance(3)));
}

TEST(AdaBoost, PerfectStumpStopsAfterOneStage) {
  Matrix x(4, 1);
  x << 0, 1, 2, 3;
  const auto m = fit_adaboost(x, {0, 0, 1, 1}, {50, 1.0});
  ASSERT_EQ(m.stumps.size(), 1u);
  EXPECT_EQ(m.stage_errors[0], 0.0);
  EXPECT_DOUBLE_EQ(m.stumps[0].threshold, 1.5);
  EXPECT_EQ(m.stumps[0].left_label, 0);
}

TEST(AdaBoost, FirstStageUsesUniformWeights) {
  Matrix x(5, 1);
  x << 0, 1, 2, 3, 4;
  const auto m = fit_adaboost(x, {0, 0, 1, 0, 1}, {1, 1.0});
  ASSERT_EQ(m.stumps.size(), 1u);
  EXPECT_DOUBLE_EQ(m.stage_errors[0], 0.2);
  EXPECT_DOUBLE_EQ(m.stage_weights[0], std::log(4.0));
}

TEST(AdaBoost, TraceMatchesHandSimulation) {
  const auto d = linear_data(30, 3, 3, 1.5, 12);
  const double lr = 0.5;
  const auto m = fit_adaboost(d.x, d.y, {5, lr});
  ASSERT_EQ(m.stumps.size(), 5u);
  Vector w = Vector::Constant(30, 1.0 / 30.0);
  for (std::size_t s = 0; s < 5; ++s) {
    // Exhaustive search over features, midpoints and both orientations.
    double best = 1.0;
    for (Index j = 0; j < 3; ++j) {
      std::vector<double> v(d.x.col(j).data(), d.x.col(j).data() + 30);
      std::sort(v.begin(), v.end());
      std::vector<double> cuts{v.front() - 1.0};
      for (std::size_t k = 0; k + 1 < v.size(); ++k) cuts.push_back(0.5 * (v[k] + v[k + 1]));
      for (double t : cuts) {
        double err = 0.0;
        for (Index i = 0; i < 30; ++i) err += (d.x(i, j) <= t ? 0 : 1) != d.y[static_cast<std::size_t>(i)] ? w(i) : 0.0;
        best = std::min({best, err, 1.0 - err});
      }
    }
    EXPECT_NEAR(m.stage_errors[s], best, 1e-12) << "stage " << s;
    double chosen = 0.0;
    for (Index i = 0; i < 30; ++i) chosen += m.stumps[s].predict(d.x.row(i)) != d.y[static_cast<std::size_t>(i)] ? w(i) : 0.0;
    EXPECT_NEAR(chosen, m.stage_errors[s], 1e-12);
    const double alpha = lr * std::log((1.0 - chosen) / chosen);
    EXPECT_NEAR(m.stage_weights[s], alpha, 1e-12);
    for (Index i = 0; i < 30; ++i)
      if (m.stumps[s].predict(d.x.row(i)) != d.y[static_cast<std::size_t>(i)]) w(i) *= std::exp(alpha);
    w /= w.sum();
  }
}

TEST(AdaBoost, ChanceLevelFirstLearnerIsAnError) {
  Matrix x(4, 1);
  x << 1, 1, 1, 1;
  EXPECT_THROW(fit_adaboost(x, {0, 1, 0, 1}), NumericalError);
}

TEST(Selection, RfeDropsWeakestOneAtATime) {
  const Vector fixed = (Vector(4) << 0.1, 0.5, 0.3, 0.9).finished();
  int calls = 0;
  ImportanceFn imp = [&](const Matrix& x, const Labels&) -> Vector {
    ++calls;
    Vector out(x.cols());
    // Columns carry their original index in row 0.
    for (Index j = 0; j < x.cols(); ++j) out(j) = fixed(static_cast<Index>(x(0, j)));
    return out;
  };
  Matrix x(2, 4);
  x << 0, 1, 2, 3, 0, 0, 0, 0;
  const auto res = rfe_select(imp, x, {0, 1}, 2);
  EXPECT_EQ(res.selected, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(res.refits, 2);
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(rfe_select(imp, x, {0, 1}).selected.size(), 2u);
  EXPECT_THROW(rfe_select(imp, x, {0, 1}, 4), DataError);
}

TEST(Selection, RfeRecoversPlantedSignal) {
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = linear_data(200, 12, 3, 0.3, 500 + seed);
    const auto res = rfe_select(linear_importance([](const Matrix& x, const Labels& y) {
                                  return fit_logistic(x, y, {Penalty::l2(), 1.0});
                                }),
                                d.x, d.y, 3);
    recovered += res.selected == std::vector<std::size_t>{0, 1, 2};
  }
  EXPECT_GE(recovered, 18);
}

TEST(Selection, SelectFromModelThresholds) {
  const Vector w = (Vector(4) << 0.1, -0.4, 0.2, 0.5).finished();
  EXPECT_EQ(select_from_model(w), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(select_from_model(w, SfmThreshold::fixed(0.15)), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(select_from_model(Vector::Constant(3, 0.7)), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(select_from_model(w, SfmThreshold::fixed(1.0)), DataError);
}

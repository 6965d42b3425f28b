// SPDX-License-Identifier: Apache-2.0
#include "fc/connectivity.hpp"
#include "fc/models.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace fc;

namespace {

constexpr std::array<ModelKind, 7> kAll{ModelKind::LogisticRegression, ModelKind::LinearSvm, ModelKind::KernelSvm,
                                        ModelKind::RandomForest,       ModelKind::AdaBoost,  ModelKind::Lstm,
                                        ModelKind::Gru};

// Small budgets so every kind fits in well under a second.
ModelParams quick() {
  ModelParams p;
  p.n_trees = 40;
  p.n_estimators = 40;
  p.boost_learning_rate = 0.5;
  p.train.max_epochs = 40;
  p.train.batch_size = 8;
  return p;
}

struct Data {
  Matrix x;
  Labels y;
};

Data shifted(Index n, Index f, double shift, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, f), Labels(static_cast<std::size_t>(n))};
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    d.y[static_cast<std::size_t>(i)] = label;
    for (Index j = 0; j < f; ++j) d.x(i, j) = rng.normal() + (j < 2 ? shift * (2 * label - 1) : 0.0);
  }
  return d;
}

double accuracy(const Labels& a, const Labels& b) {
  int ok = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ok += a[i] == b[i];
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

}  // namespace

TEST(ModelKind, NamesRoundTrip) {
  for (auto k : kAll) EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_EQ(to_string(ModelKind::KernelSvm), "ksvc");
  EXPECT_TRUE(is_recurrent(ModelKind::Gru));
  EXPECT_FALSE(is_recurrent(ModelKind::AdaBoost));
  EXPECT_THROW(parse_model_kind("cnn"), Error);
}

TEST(Classifier, ZeroWeightLogisticGivesOneHalf) {
  LinearModel m;
  m.weights = Vector::Zero(3);
  const Classifier clf{ModelKind::LogisticRegression, {}, 3, m};
  const Vector p = predict_proba(clf, Matrix::Random(4, 3));
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(p(i), 0.5);
  EXPECT_EQ(predict(clf, Matrix::Zero(2, 3)), (Labels{1, 1}));
}

TEST(Classifier, WidthMismatchIsRejected) {
  const auto d = shifted(30, 4, 1.0, 1);
  const auto clf = fit_classifier(ModelKind::LogisticRegression, d.x, d.y, quick(), 1);
  EXPECT_THROW(predict_proba(clf, Matrix::Zero(2, 5)), DataError);
}

TEST(Classifier, JsonRoundTripPreservesPredictions) {
  const auto d = shifted(40, 5, 1.0, 2);
  const auto dir = std::filesystem::temp_directory_path();
  for (auto k : kAll) {
    const auto clf = fit_classifier(k, d.x, d.y, quick(), 3);
    const auto path = dir / ("fc_model_" + to_string(k) + ".json");
    save_classifier(path, clf);
    const auto back = load_classifier(path);
    EXPECT_EQ(back.kind, k);
    EXPECT_EQ(back.input_width, 5);
    EXPECT_EQ(predict_proba(back, d.x), predict_proba(clf, d.x)) << to_string(k);
    std::filesystem::remove(path);
  }
}

TEST(Classifier, ProbabilitiesAreValidAndDeterministic) {
  const auto d = shifted(40, 4, 1.0, 5);
  for (auto k : kAll) {
    const Vector a = predict_proba(fit_classifier(k, d.x, d.y, quick(), 9), d.x);
    const Vector b = predict_proba(fit_classifier(k, d.x, d.y, quick(), 9), d.x);
    EXPECT_EQ(a, b) << to_string(k);
    EXPECT_GE(a.minCoeff(), 0.0);
    EXPECT_LE(a.maxCoeff(), 1.0);
  }
}

TEST(Classifier, EveryKindFitsTheSyntheticCohort) {
  const auto cohort = generate_synthetic_cohort(30, 60, 10, 0.8, 7);
  const auto fm = build_feature_matrix(cohort, Method::Pearson);
  for (auto k : kAll) {
    const auto clf = fit_classifier(k, fm.values, fm.labels, quick(), 1);
    EXPECT_GE(accuracy(predict(clf, fm.values), fm.labels), 0.85) << to_string(k);
  }
}

TEST(Classifier, FeatureSelectionMapsColumnsBack) {
  const auto d = shifted(80, 8, 1.5, 4);
  ModelParams p = quick();
  p.rfe_target = -1;
  const auto rfe = fit_classifier(ModelKind::LogisticRegression, d.x, d.y, p, 1);
  ASSERT_EQ(rfe.columns.size(), 4u);
  EXPECT_EQ(rfe.columns[0], 0u);
  EXPECT_EQ(rfe.columns[1], 1u);
  p.sfm = true;
  const auto both = fit_classifier(ModelKind::LogisticRegression, d.x, d.y, p, 1);
  EXPECT_LE(both.columns.size(), 4u);
  for (auto c : both.columns) EXPECT_NE(std::find(rfe.columns.begin(), rfe.columns.end(), c), rfe.columns.end());
  EXPECT_EQ(std::get<LinearModel>(both.model).weights.size(), static_cast<Index>(both.columns.size()));
  p.sfm = false;
  p.rfe_target = 2;
  EXPECT_THROW(fit_classifier(ModelKind::KernelSvm, d.x, d.y, p, 1), DataError);
}

TEST(ModelParams, ReadsConfigKeys) {
  const auto cfg = Config::parse(
      "penalty = elasticnet\nl1_ratio = 0.3\nc = 2.5\nn_trees = 7\ncriterion = entropy\noptimizer = nadam\n"
      "learning_rate = 0.005\nbatch_size = 16\nstop_rule = nondecreasing\nrfe = half\nsfm = 0.1\n");
  const auto p = ModelParams::from_config(cfg);
  EXPECT_EQ(p.penalty.kind, Penalty::Kind::ElasticNet);
  EXPECT_EQ(p.penalty.l1_ratio, 0.3);
  EXPECT_EQ(p.c, 2.5);
  EXPECT_EQ(p.n_trees, 7);
  EXPECT_EQ(p.criterion, Criterion::Entropy);
  EXPECT_EQ(p.train.optimizer, OptimizerKind::Nadam);
  EXPECT_EQ(p.train.learning_rate, 0.005);
  EXPECT_EQ(p.train.batch_size, 16);
  EXPECT_EQ(p.train.stop_rule, StopRule::NonDecreasing);
  EXPECT_EQ(p.rfe_target, -1);
  EXPECT_TRUE(p.sfm);
  EXPECT_FALSE(p.sfm_threshold.use_mean);
  EXPECT_EQ(p.sfm_threshold.value, 0.1);
  EXPECT_THROW(ModelParams::from_config(Config::parse("penalty = l3\n")), DataError);
  EXPECT_THROW(ModelParams::from_config(Config::parse("stop_rule = never\n")), DataError);
}

TEST(ModelParams, PaperDefaults) {
  const ModelParams p;
  EXPECT_EQ(p.n_trees, 2500);
  EXPECT_EQ(p.max_depth, 5);
  EXPECT_EQ(p.criterion, Criterion::Gini);
  const auto text = p.describe(ModelKind::Gru);
  EXPECT_NE(text.find("neurons = 10\n"), std::string::npos);
  EXPECT_NE(text.find("optimizer = Adam\n"), std::string::npos);
}

// SPDX-License-Identifier: Apache-2.0
#include "fc/dataset.hpp"
#include "fc/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace fc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fc_dataset_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

Labels balanced(int pos, int neg) {
  Labels y(static_cast<std::size_t>(pos), 1);
  y.insert(y.end(), static_cast<std::size_t>(neg), 0);
  return y;
}

int count_label(const Labels& y, const std::vector<std::size_t>& idx, int label) {
  int n = 0;
  for (auto i : idx) n += y[i] == label;
  return n;
}

}  // namespace

TEST(LoadCohort, MinimalValidInput) {
  const auto dir = scratch("minimal");
  write(dir / "b.csv", "1,2,3\n2,1,5\n3,7,1\n4,4,4.5\n");
  write(dir / "a.csv", "0.5,1,2\n1,0,3\n2,2,1\n-1,1,0\n");
  write(dir / "labels.csv", "id,label\na,1\nb,0\n");
  const auto c = load_cohort(dir, dir / "labels.csv");
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.time_points(), 4);
  EXPECT_EQ(c.rois(), 3);
  EXPECT_EQ(c.ids(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(c.labels(), (Labels{1, 0}));
}

TEST(LoadCohort, ConstantColumnNamesSubjectAndColumn) {
  const auto dir = scratch("constant");
  write(dir / "a.csv", "1,2,3\n2,2,5\n3,2,1\n");
  write(dir / "b.csv", "1,2,3\n2,1,5\n3,7,1\n");
  write(dir / "labels.csv", "id,label\na,1\nb,0\n");
  try {
    load_cohort(dir, dir / "labels.csv");
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 1"), std::string::npos) << msg;
  }
}

TEST(LoadCohort, DimensionMismatchAndMissingLabel) {
  const auto dir = scratch("mismatch");
  write(dir / "a.csv", "1,2,3\n2,1,5\n3,7,1\n");
  write(dir / "b.csv", "1,2\n2,1\n3,7\n");
  write(dir / "labels.csv", "id,label\na,1\nb,0\n");
  EXPECT_THROW(load_cohort(dir, dir / "labels.csv"), DataError);
  write(dir / "b.csv", "1,2,3\n2,1,5\n3,7,1\n");
  write(dir / "labels.csv", "id,label\na,1\n");
  try {
    load_cohort(dir, dir / "labels.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'b': missing label"), std::string::npos);
  }
}

TEST(LoadCohort, RejectsNonFiniteValues) {
  const auto dir = scratch("nonfinite");
  write(dir / "a.csv", "1,2,3\n2,nan,5\n3,7,1\n");
  write(dir / "b.csv", "1,2,3\n2,1,5\n3,7,1\n");
  write(dir / "labels.csv", "id,label\na,1\nb,0\n");
  EXPECT_THROW(load_cohort(dir, dir / "labels.csv"), DataError);
}

TEST(Cohort, RequiresBothLabels) {
  Matrix s(3, 2);
  s << 1, 2, 2, 1, 3, 5;
  EXPECT_THROW(Cohort({{"a", s, 1}, {"b", s, 1}}), DataError);
  EXPECT_THROW(Cohort({{"a", s, 1}}), DataError);
  EXPECT_THROW(Cohort({{"a", s, 1}, {"a", s, 0}}), DataError);
}

TEST(Cohort, SaveLoadRoundTripIsExact) {
  const auto c = generate_synthetic_cohort(3, 7, 4, 0.5, 12);
  const auto dir = scratch("roundtrip");
  save_cohort(c, dir);
  const auto back = load_cohort(dir, dir / "labels.csv");
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back[i].id, c[i].id);
    EXPECT_EQ(back[i].label, c[i].label);
    EXPECT_EQ(back[i].series, c[i].series);
  }
}

TEST(Cohort, SummaryListsShapeAndCounts) {
  const auto c = generate_synthetic_cohort(4, 5, 3, 0.0, 1);
  EXPECT_EQ(summary(c), "subjects: 8\ntime_points: 5\nrois: 3\nlabel_1: 4\nlabel_0: 4\n");
}

TEST(Synthetic, SameSeedSameBytes) {
  const auto a = generate_synthetic_cohort(5, 10, 6, 0.8, 7);
  const auto b = generate_synthetic_cohort(5, 10, 6, 0.8, 7);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].series, b[i].series);
  const auto c = generate_synthetic_cohort(5, 10, 6, 0.8, 8);
  EXPECT_NE(a[0].series, c[0].series);
}

TEST(Synthetic, ZeroEffectDrawsBothClassesAlike) {
  const auto c = generate_synthetic_cohort(200, 60, 6, 0.0, 3);
  double mean[2] = {0, 0};
  for (const auto& s : c.subjects()) {
    const Matrix z = (s.series.rowwise() - s.series.colwise().mean()).colwise().normalized();
    mean[s.label] += (z.transpose() * z)(0, 1) / 200.0;
  }
  EXPECT_NEAR(mean[0], mean[1], 0.04);
}

TEST(Synthetic, EffectRaisesBlockCorrelation) {
  const auto c = generate_synthetic_cohort(50, 200, 8, 1.0, 3);
  const auto pairs = synthetic_signal_pairs(8);
  EXPECT_EQ(pairs.size(), 6u);  // block of 4 ROIs
  double mean[2] = {0, 0};
  for (const auto& s : c.subjects()) {
    const Matrix z = (s.series.rowwise() - s.series.colwise().mean()).colwise().normalized();
    mean[s.label] += (z.transpose() * z)(0, 1) / 50.0;
  }
  EXPECT_NEAR(mean[1] - mean[0], 0.675, 0.05);
}

TEST(Synthetic, InvalidSizes) {
  EXPECT_THROW(generate_synthetic_cohort(2, 2, 3, 0.5, 1), DataError);
  EXPECT_THROW(generate_synthetic_cohort(2, 5, 1, 0.5, 1), DataError);
  EXPECT_THROW(generate_synthetic_cohort(2, 5, 3, 1.5, 1), DataError);
}

TEST(Split, ExactDivisibility) {
  const auto y = balanced(10, 10);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto plan = split_stratified(y, {0.8, 0.0, 0.2}, seed);
    EXPECT_EQ(count_label(y, plan.train_idx, 1), 8);
    EXPECT_EQ(count_label(y, plan.train_idx, 0), 8);
    EXPECT_EQ(count_label(y, plan.test_idx, 1), 2);
    EXPECT_EQ(count_label(y, plan.test_idx, 0), 2);
    EXPECT_TRUE(plan.val_idx.empty());
  }
}

TEST(Split, PaperScheme) {
  const auto y = balanced(50, 50);
  const auto plan = split_stratified(y, {0.64, 0.16, 0.20}, 3);
  EXPECT_EQ(plan.train_idx.size(), 64u);
  EXPECT_EQ(plan.val_idx.size(), 16u);
  EXPECT_EQ(plan.test_idx.size(), 20u);
  EXPECT_EQ(count_label(y, plan.train_idx, 1), 32);
  EXPECT_EQ(count_label(y, plan.val_idx, 1), 8);
  EXPECT_EQ(count_label(y, plan.test_idx, 1), 10);
}

TEST(Split, Deterministic) {
  const auto y = balanced(13, 21);
  const auto a = split_stratified(y, {0.6, 0.2, 0.2}, 99);
  const auto b = split_stratified(y, {0.6, 0.2, 0.2}, 99);
  EXPECT_EQ(a.train_idx, b.train_idx);
  EXPECT_EQ(a.val_idx, b.val_idx);
  EXPECT_EQ(a.test_idx, b.test_idx);
}

TEST(Split, DisjointExhaustiveAndStratified) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int pos = 10 + static_cast<int>(rng.below(40)), neg = 10 + static_cast<int>(rng.below(40));
    const auto y = balanced(pos, neg);
    const SplitFractions f{0.7, 0.1, 0.2};
    const auto plan = split_stratified(y, f, rng.next());
    std::set<std::size_t> all;
    for (const auto* part : {&plan.train_idx, &plan.val_idx, &plan.test_idx})
      for (auto i : *part) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), y.size());
    for (int label : {0, 1}) {
      const double n = label ? pos : neg;
      EXPECT_LE(std::abs(count_label(y, plan.test_idx, label) - f.test * n), 1.0);
      EXPECT_LE(std::abs(count_label(y, plan.val_idx, label) - f.val * n), 1.0);
      EXPECT_LE(std::abs(count_label(y, plan.train_idx, label) - f.train * n), 1.0 + 1e-9);
    }
  }
}

TEST(Split, ClassTooSmallForPartitions) {
  EXPECT_THROW(split_stratified(balanced(1, 10), {0.8, 0.0, 0.2}, 1), DataError);
  EXPECT_THROW(split_stratified(balanced(2, 10), {0.6, 0.2, 0.2}, 1), DataError);
  EXPECT_THROW(split_stratified(balanced(5, 5), {0.5, 0.0, 0.4}, 1), DataError);
}

TEST(Split, UnstratifiedOption) {
  const auto y = balanced(10, 10);
  const auto plan = split_stratified(y, {0.8, 0.0, 0.2}, 4, false);
  EXPECT_EQ(plan.test_idx.size(), 4u);
  EXPECT_EQ(plan.train_idx.size(), 16u);
}

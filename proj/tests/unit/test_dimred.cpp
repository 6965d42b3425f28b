// SPDX-License-Identifier: Apache-2.0
#include "fc/dimred.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace fc;

namespace {

Matrix gaussian(Index n, Index f, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(n, f);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < f; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Correlated columns with a decaying spectrum so eigenvalues are well separated.
Matrix structured(Index n, Index f, std::uint64_t seed) {
  Matrix mix = gaussian(f, f, seed + 1);
  for (Index j = 0; j < f; ++j) mix.row(j) *= std::pow(0.8, static_cast<double>(j));
  return gaussian(n, f, seed) * mix;
}

}  // namespace

TEST(Pca, RankOneData) {
  Matrix x(5, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  const auto m = fit_pca(x, PcaTarget::explained(0.99));
  ASSERT_EQ(m.k(), 1);
  EXPECT_NEAR(m.explained_ratio(0), 1.0, 1e-12);
  const double s = 1.0 / std::sqrt(5.0);
  EXPECT_NEAR(m.components(0, 0), s, 1e-12);
  EXPECT_NEAR(m.components(0, 1), 2 * s, 1e-12);
  EXPECT_THROW(fit_pca(x, PcaTarget::components(2)), DataError);
}

TEST(Pca, IsotropicNeedsBothComponents) {
  const Matrix x = gaussian(10000, 2, 4);
  const auto m = fit_pca(x, PcaTarget::components(2));
  EXPECT_NEAR(m.explained_ratio(0), 0.5, 0.05);
  EXPECT_NEAR(m.explained_ratio(1), 0.5, 0.05);
  EXPECT_EQ(fit_pca(x, PcaTarget::explained(0.6)).k(), 2);
}

TEST(Pca, FullRankReconstructionIsExact) {
  const Matrix x = structured(30, 8, 2);
  const auto m = fit_pca(x, PcaTarget::components(8));
  EXPECT_LE((inverse_transform(m, transform(m, x)) - x).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(m.explained_ratio.sum(), 1.0, 1e-10);
}

TEST(Pca, MatchesCovarianceEigenOracle) {
  for (Index f : {3, 10, 50}) {
    const Matrix x = structured(80, f, static_cast<std::uint64_t>(f));
    const Index k = std::min<Index>(f, 5);
    const auto m = fit_pca(x, PcaTarget::components(k));
    const Matrix c = x.rowwise() - x.colwise().mean();
    const Matrix cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    for (Index i = 0; i < k; ++i) {
      const Index col = f - 1 - i;
      EXPECT_NEAR(m.explained_variance(i), es.eigenvalues()(col), 1e-8 * es.eigenvalues()(f - 1));
      Vector v = es.eigenvectors().col(col);
      Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      EXPECT_LE((m.components.row(i).transpose() - v).cwiseAbs().maxCoeff(), 1e-8) << "f=" << f << " pc" << i;
    }
    EXPECT_NEAR(m.total_variance, cov.trace(), 1e-10 * cov.trace());
  }
}

TEST(Pca, ComponentsOrthonormalAndScoresUncorrelated) {
  const Matrix x = structured(60, 12, 9);
  const auto m = fit_pca(x, PcaTarget::explained(0.9));
  const Matrix gram = m.components * m.components.transpose();
  EXPECT_LE((gram - Matrix::Identity(m.k(), m.k())).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix s = transform(m, x);
  EXPECT_LE(s.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
  const Matrix cov = s.transpose() * s / static_cast<double>(x.rows() - 1);
  for (Index i = 0; i < m.k(); ++i)
    for (Index j = 0; j < m.k(); ++j)
      EXPECT_NEAR(cov(i, j), i == j ? m.explained_variance(i) : 0.0, 1e-9 * m.explained_variance(0));
  for (Index i = 1; i < m.k(); ++i) EXPECT_GE(m.explained_variance(i - 1), m.explained_variance(i));
}

TEST(Pca, VarianceTargetPicksSmallestK) {
  const Matrix x = structured(50, 10, 3);
  const auto full = fit_pca(x, PcaTarget::components(10));
  for (double target : {0.5, 0.8, 0.9, 0.99}) {
    const auto m = fit_pca(x, PcaTarget::explained(target));
    EXPECT_GE(full.explained_ratio.head(m.k()).sum(), target - 1e-12);
    if (m.k() > 1) {
      EXPECT_LT(full.explained_ratio.head(m.k() - 1).sum(), target);
    }
  }
}

TEST(Pca, MeanRowMapsToZero) {
  const Matrix x = gaussian(20, 6, 1);
  const auto m = fit_pca(x, PcaTarget::components(3));
  EXPECT_LE(transform(m, Matrix(m.mean)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, InvalidRequests) {
  const Matrix x = gaussian(5, 10, 1);
  EXPECT_THROW(fit_pca(x, PcaTarget::components(5)), DataError);  // N-1 = 4
  EXPECT_THROW(fit_pca(x, PcaTarget::components(0)), DataError);
  EXPECT_THROW(fit_pca(x, PcaTarget::explained(1.5)), DataError);
  EXPECT_THROW(fit_pca(Matrix::Ones(4, 3), PcaTarget::components(1)), DataError);
  const auto m = fit_pca(x, PcaTarget::components(2));
  EXPECT_THROW(transform(m, gaussian(2, 9, 1)), DataError);
}

TEST(Pca, SaveLoadRoundTrip) {
  const Matrix x = structured(25, 7, 5);
  const auto m = fit_pca(x, PcaTarget::components(4));
  const auto path = std::filesystem::temp_directory_path() / "fc_pca_roundtrip.txt";
  save_pca(path, m);
  const auto back = load_pca(path);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.components, m.components);
  EXPECT_EQ(back.explained_variance, m.explained_variance);
  EXPECT_EQ(back.explained_ratio, m.explained_ratio);
  EXPECT_EQ(back.total_variance, m.total_variance);
  EXPECT_EQ(transform(back, x), transform(m, x));
  std::filesystem::remove(path);
}

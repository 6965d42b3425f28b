// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/connectivity.hpp"
#include "fc/core.hpp"
#include "fc/io.hpp"

#include <Eigen/SVD>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fc {

/// Either a fixed component count or a cumulative explained-variance target.
struct PcaTarget {
  enum class Kind { Count, Variance };
  Kind kind = Kind::Variance;
  Index count = 0;
  double variance = 0.8;

  static PcaTarget components(Index k) { return {Kind::Count, k, 0.0}; }
  static PcaTarget explained(double ratio) { return {Kind::Variance, 0, ratio}; }
};

struct PcaModel {
  RowVector mean;              // length F
  Matrix components;           // k x F, orthonormal rows
  Vector explained_variance;   // length k, nonincreasing
  Vector explained_ratio;      // length k
  double total_variance = 0.0;

  Index k() const { return components.rows(); }
  Index features() const { return components.cols(); }
};

/// Mean-centered SVD. Each component's largest-magnitude loading is made
/// positive so fitted models are reproducible to the byte.
inline PcaModel fit_pca(const Matrix& x, PcaTarget target) {
  const Index n = x.rows();
  const Index f = x.cols();
  if (n < 2) throw DataError("fit_pca: need at least 2 rows");
  if (f < 1) throw DataError("fit_pca: need at least 1 feature");
  if (!x.allFinite()) throw DataError("fit_pca: non-finite input");

  PcaModel model;
  model.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - model.mean;
  const double denom = static_cast<double>(n - 1);
  model.total_variance = centered.squaredNorm() / denom;
  if (model.total_variance == 0.0) throw DataError("fit_pca: all rows are identical");

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = static_cast<double>(std::max(n, f)) * std::numeric_limits<double>::epsilon() * sv(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  rank = std::min(rank, n - 1);

  Index k = 0;
  if (target.kind == PcaTarget::Kind::Count) {
    if (target.count < 1) throw DataError("fit_pca: component count must be >= 1");
    if (target.count > std::min(n - 1, f)) {
      throw DataError("fit_pca: k=" + std::to_string(target.count) + " exceeds min(N-1, F)=" +
                      std::to_string(std::min(n - 1, f)));
    }
    if (target.count > rank) {
      throw DataError("fit_pca: k=" + std::to_string(target.count) + " exceeds data rank " +
                      std::to_string(rank));
    }
    k = target.count;
  } else {
    if (!(target.variance > 0.0 && target.variance <= 1.0)) {
      throw DataError("fit_pca: variance target must be in (0, 1]");
    }
    double cumulative = 0.0;
    while (k < rank) {
      cumulative += sv(k) * sv(k) / denom / model.total_variance;
      ++k;
      if (cumulative >= target.variance - 1e-12) break;
    }
  }

  model.components = svd.matrixV().leftCols(k).transpose();
  model.explained_variance = sv.head(k).array().square() / denom;
  model.explained_ratio = model.explained_variance / model.total_variance;
  for (Index c = 0; c < k; ++c) {
    Index arg = 0;
    model.components.row(c).cwiseAbs().maxCoeff(&arg);
    if (model.components(c, arg) < 0.0) model.components.row(c) *= -1.0;
  }
  return model;
}

inline PcaModel fit_pca(const FeatureMatrix& fm, PcaTarget target) { return fit_pca(fm.values, target); }

inline Matrix transform(const PcaModel& model, const Matrix& x) {
  if (x.cols() != model.features()) {
    throw DataError("pca transform: expected " + std::to_string(model.features()) + " columns, got " +
                    std::to_string(x.cols()));
  }
  return (x.rowwise() - model.mean) * model.components.transpose();
}

inline FeatureMatrix transform(const PcaModel& model, const FeatureMatrix& fm) {
  FeatureMatrix out;
  out.values = transform(model, fm.values);
  out.labels = fm.labels;
  out.provenance = "pca(" + std::to_string(model.k()) + ")";
  for (Index c = 0; c < model.k(); ++c) out.feature_names.push_back("pc" + std::to_string(c + 1));
  return out;
}

inline Matrix inverse_transform(const PcaModel& model, const Matrix& scores) {
  if (scores.cols() != model.k()) throw DataError("pca inverse_transform: width mismatch");
  return (scores * model.components).rowwise() + model.mean;
}

/// Text blocks: `[mean]`, `[explained_variance]`, `[explained_ratio]`,
/// `[total_variance]`, `[components]` (one row per component).
inline void save_pca(const std::filesystem::path& path, const PcaModel& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "# pca model: k=" << m.k() << " features=" << m.features() << '\n';
  out << "[mean]\n";
  io::write_row(out, m.mean, ',');
  out << "\n[explained_variance]\n";
  io::write_row(out, m.explained_variance.transpose(), ',');
  out << "\n[explained_ratio]\n";
  io::write_row(out, m.explained_ratio.transpose(), ',');
  out << "\n[total_variance]\n" << io::format_double(m.total_variance) << '\n';
  out << "[components]\n";
  for (Index c = 0; c < m.k(); ++c) {
    io::write_row(out, m.components.row(c), ',');
    out << '\n';
  }
}

inline PcaModel load_pca(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line, block;
  std::vector<std::vector<double>> comps;
  PcaModel m;
  auto parse_row = [&](const std::string& l) {
    auto fields = io::split(l, ',');
    Vector v(static_cast<Index>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      v(static_cast<Index>(i)) = io::parse_double_or_throw(fields[i], path.string());
    }
    return v;
  };
  while (std::getline(in, line)) {
    const auto body = std::string(io::trim(line));
    if (body.empty() || body.front() == '#') continue;
    if (body.front() == '[') {
      block = body;
      continue;
    }
    if (block == "[mean]") m.mean = parse_row(body).transpose();
    else if (block == "[explained_variance]") m.explained_variance = parse_row(body);
    else if (block == "[explained_ratio]") m.explained_ratio = parse_row(body);
    else if (block == "[total_variance]") m.total_variance = parse_row(body)(0);
    else if (block == "[components]") {
      Vector v = parse_row(body);
      comps.emplace_back(v.data(), v.data() + v.size());
    } else {
      throw DataError(path.string() + ": unexpected block " + block);
    }
  }
  m.components.resize(static_cast<Index>(comps.size()), m.mean.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (static_cast<Index>(comps[c].size()) != m.mean.size()) throw DataError(path.string() + ": component width mismatch");
    for (std::size_t j = 0; j < comps[c].size(); ++j) m.components(static_cast<Index>(c), static_cast<Index>(j)) = comps[c][j];
  }
  if (m.explained_variance.size() != m.k() || m.explained_ratio.size() != m.k()) {
    throw DataError(path.string() + ": inconsistent pca model blocks");
  }
  return m;
}

}  // namespace fc

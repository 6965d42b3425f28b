// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"
#include "fc/dataset.hpp"
#include "fc/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace fc {

enum class Method { Pearson, Spearman, Partial };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Pearson: return "pearson";
    case Method::Spearman: return "spearman";
    case Method::Partial: return "partial";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "pearson") return Method::Pearson;
  if (s == "spearman") return Method::Spearman;
  if (s == "partial") return Method::Partial;
  throw Error("unknown connectivity method '" + s + "' (expected pearson|spearman|partial)");
}

/// Symmetric R x R functional-connectivity matrix of one subject.
struct ConnectivityMatrix {
  Matrix values;
  Method method = Method::Pearson;
  std::string subject_id;
};

/// Convex shrinkage weight toward the identity on the correlation scale.
struct ShrinkageConfig {
  double lambda = 0.1;
};

namespace detail {

inline void require_series(const Matrix& series) {
  if (series.rows() < 3) throw DataError("connectivity: need at least 3 time points");
  if (series.cols() < 2) throw DataError("connectivity: need at least 2 ROIs");
  if (!series.allFinite()) throw DataError("connectivity: non-finite value in series");
}

/// Columns centered and scaled to unit norm; throws on a constant column.
inline Matrix standardized_columns(const Matrix& series) {
  Matrix z = series.rowwise() - series.colwise().mean();
  for (Index j = 0; j < z.cols(); ++j) {
    const double norm = z.col(j).norm();
    if (norm == 0.0) {
      throw DataError("connectivity: column " + std::to_string(j) + " is constant (zero variance)");
    }
    z.col(j) /= norm;
  }
  return z;
}

inline void symmetrize_unit_diagonal(Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    m(i, i) = 1.0;
    for (Index j = i + 1; j < m.cols(); ++j) {
      const double v = std::clamp(m(i, j), -1.0, 1.0);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
}

}  // namespace detail

/// Product-moment correlation of every column pair.
inline ConnectivityMatrix pearson_matrix(const Matrix& series) {
  detail::require_series(series);
  const Matrix z = detail::standardized_columns(series);
  ConnectivityMatrix cm{z.transpose() * z, Method::Pearson, {}};
  detail::symmetrize_unit_diagonal(cm.values);
  return cm;
}

/// Average ranks (1-based) within each column; ties share the mean rank.
inline Matrix rank_transform(const Matrix& series) {
  Matrix ranks(series.rows(), series.cols());
  std::vector<Index> order(static_cast<std::size_t>(series.rows()));
  for (Index j = 0; j < series.cols(); ++j) {
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return series(a, j) < series(b, j); });
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t k = i;
      while (k + 1 < order.size() && series(order[k + 1], j) == series(order[i], j)) ++k;
      const double rank = 0.5 * static_cast<double>(i + k) + 1.0;
      for (std::size_t m = i; m <= k; ++m) ranks(order[m], j) = rank;
      i = k + 1;
    }
  }
  return ranks;
}

inline ConnectivityMatrix spearman_matrix(const Matrix& series) {
  detail::require_series(series);
  auto cm = pearson_matrix(rank_transform(series));
  cm.method = Method::Spearman;
  return cm;
}

/// Partial correlation from the precision of the shrunk correlation matrix
/// (1 - lambda) * C + lambda * I.
inline ConnectivityMatrix partial_matrix(const Matrix& series, ShrinkageConfig cfg = {}) {
  detail::require_series(series);
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    throw DataError("partial correlation: lambda must be in [0,1]");
  }
  const Matrix z = detail::standardized_columns(series);
  const Matrix corr = z.transpose() * z;
  const Index r = corr.rows();
  const Matrix shrunk = (1.0 - cfg.lambda) * corr + cfg.lambda * Matrix::Identity(r, r);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(shrunk);
  if (eig.info() != Eigen::Success) throw NumericalError("partial correlation: eigendecomposition failed");
  const double min_ev = eig.eigenvalues().minCoeff();
  const double max_ev = eig.eigenvalues().maxCoeff();
  // Relative floor: below this the inverse is dominated by rounding error.
  constexpr double kRelFloor = 1e-10;
  if (!(min_ev > kRelFloor * max_ev)) {
    // (1 - l) e + l > floor  <=>  l > (floor - e) / (1 - e), e = min eigenvalue of C.
    Eigen::SelfAdjointEigenSolver<Matrix> raw(corr, Eigen::EigenvaluesOnly);
    const double e = raw.eigenvalues().minCoeff();
    const double floor = 1e-3;
    const double suggested = std::clamp((floor - e) / (1.0 - e), 1e-3, 1.0);
    throw NumericalError("partial correlation: shrunk covariance is not positive definite (lambda=" +
                         io::format_double(cfg.lambda) + ", T=" + std::to_string(series.rows()) +
                         ", R=" + std::to_string(r) + "); try lambda >= " +
                         io::format_fixed(suggested, 3));
  }
  const Matrix precision =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  ConnectivityMatrix cm{Matrix(r, r), Method::Partial, {}};
  for (Index i = 0; i < r; ++i) {
    for (Index j = i + 1; j < r; ++j) {
      cm.values(i, j) = -precision(i, j) / std::sqrt(precision(i, i) * precision(j, j));
    }
  }
  detail::symmetrize_unit_diagonal(cm.values);
  return cm;
}

inline ConnectivityMatrix connectivity_matrix(const Matrix& series, Method method,
                                              ShrinkageConfig cfg = {}) {
  switch (method) {
    case Method::Pearson: return pearson_matrix(series);
    case Method::Spearman: return spearman_matrix(series);
    case Method::Partial: return partial_matrix(series, cfg);
  }
  throw Error("unknown connectivity method");
}

inline Index upper_length(Index r) { return r * (r - 1) / 2; }

/// Strict upper triangle in row-major order: (0,1), (0,2), ..., (R-2,R-1).
inline Vector vectorize_upper(const Matrix& m) {
  if (m.rows() != m.cols()) throw DataError("vectorize_upper: matrix must be square");
  const Index r = m.rows();
  Vector out(upper_length(r));
  Index k = 0;
  for (Index i = 0; i < r; ++i) {
    for (Index j = i + 1; j < r; ++j) out(k++) = m(i, j);
  }
  return out;
}

inline Vector vectorize_upper(const ConnectivityMatrix& cm) { return vectorize_upper(cm.values); }

/// Inverse of vectorize_upper: symmetric matrix with the given diagonal value.
inline Matrix unvectorize_upper(const Vector& v, double diagonal = 1.0) {
  // Solve r(r-1)/2 = n for r.
  const auto n = v.size();
  const auto r = static_cast<Index>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(n))) / 2.0));
  if (upper_length(r) != n) throw DataError("unvectorize_upper: length is not triangular");
  Matrix m = Matrix::Constant(r, r, diagonal);
  Index k = 0;
  for (Index i = 0; i < r; ++i) {
    for (Index j = i + 1; j < r; ++j) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  }
  return m;
}

inline std::vector<std::string> roi_pair_names(Index r) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(upper_length(r)));
  for (Index i = 0; i < r; ++i) {
    for (Index j = i + 1; j < r; ++j) {
      names.push_back("roi" + std::to_string(i) + "_roi" + std::to_string(j));
    }
  }
  return names;
}

/// N x F design matrix with aligned labels.
struct FeatureMatrix {
  Matrix values;
  Labels labels;
  std::vector<std::string> feature_names;
  std::string provenance;  // "raw-rsfc:<method>" or "pca(<k>)"

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  void validate() const {
    if (static_cast<Index>(labels.size()) != values.rows()) {
      throw DataError("feature matrix: label count does not match row count");
    }
    if (static_cast<Index>(feature_names.size()) != values.cols()) {
      throw DataError("feature matrix: feature name count does not match column count");
    }
    if (!values.allFinite()) throw DataError("feature matrix: non-finite entry");
    require_binary(labels, "feature matrix");
  }

  FeatureMatrix subset(const std::vector<std::size_t>& rows) const {
    return {select_rows(values, rows), select(labels, rows), feature_names, provenance};
  }

  FeatureMatrix columns(const std::vector<std::size_t>& cols) const {
    return {select_cols(values, cols), labels, select(feature_names, cols), provenance};
  }
};

/// One row per subject: vectorized connectivity under `method`.
inline FeatureMatrix build_feature_matrix(const Cohort& cohort, Method method, ShrinkageConfig cfg = {}) {
  const Index r = cohort.rois();
  FeatureMatrix fm;
  fm.values.resize(static_cast<Index>(cohort.size()), upper_length(r));
  fm.labels = cohort.labels();
  fm.feature_names = roi_pair_names(r);
  fm.provenance = "raw-rsfc:" + to_string(method);
  for (std::size_t n = 0; n < cohort.size(); ++n) {
    const auto& s = cohort[n];
    try {
      fm.values.row(static_cast<Index>(n)) = vectorize_upper(connectivity_matrix(s.series, method, cfg)).transpose();
    } catch (const NumericalError& e) {
      throw NumericalError("subject '" + s.id + "': " + e.what());
    } catch (const DataError& e) {
      throw DataError("subject '" + s.id + "': " + e.what());
    }
  }
  return fm;
}

/// Feature file: header of feature names plus a trailing `label` column.
/// A leading `# provenance: ...` comment line records where the columns came from.
inline void write_features(const std::filesystem::path& path, const FeatureMatrix& fm, char delim = ',') {
  fm.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "# provenance: " << fm.provenance << '\n';
  for (const auto& name : fm.feature_names) out << name << delim;
  out << "label\n";
  for (Index i = 0; i < fm.rows(); ++i) {
    io::write_row(out, fm.values.row(i), delim);
    out << delim << fm.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

inline FeatureMatrix read_features(const std::filesystem::path& path, char delim = ',') {
  std::string provenance = "unknown";
  {
    std::ifstream in(path);
    std::string first;
    if (in && std::getline(in, first)) {
      const std::string tag = "# provenance: ";
      if (first.rfind(tag, 0) == 0) provenance = std::string(io::trim(first.substr(tag.size())));
    }
  }
  auto table = io::read_table(path, delim);
  if (table.header.empty() || table.header.back() != "label") {
    throw DataError(path.string() + ": feature file needs a header ending in 'label'");
  }
  FeatureMatrix fm;
  const Index f = table.values.cols() - 1;
  fm.values = table.values.leftCols(f);
  fm.feature_names.assign(table.header.begin(), table.header.end() - 1);
  fm.labels.reserve(static_cast<std::size_t>(table.values.rows()));
  for (Index i = 0; i < table.values.rows(); ++i) {
    const double v = table.values(i, f);
    if (v != 0.0 && v != 1.0) throw DataError(path.string() + ": label must be 0 or 1");
    fm.labels.push_back(static_cast<int>(v));
  }
  fm.provenance = provenance;
  fm.validate();
  return fm;
}

}  // namespace fc

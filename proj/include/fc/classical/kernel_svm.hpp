// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/classical/linear.hpp"
#include "fc/core.hpp"

#include <cmath>
#include <limits>

namespace fc {

struct KernelSvmModel {
  Matrix support_vectors;
  Vector dual_coeffs;  // alpha_i * y_i for each support vector
  double bias = 0.0;
  double gamma = 1.0;
  double c_reg = 1.0;
  FitDiagnostics diagnostics;

  Vector decision(const Matrix& x) const {
    Vector out(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      const Vector d2 = (support_vectors.rowwise() - x.row(i)).rowwise().squaredNorm();
      out(i) = (-gamma * d2.array()).exp().matrix().dot(dual_coeffs) + bias;
    }
    return out;
  }
};

/// exp(-gamma * ||a_i - b_j||^2)
inline Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * a * b.transpose()).colwise() + an;
  d2.rowwise() += bn.transpose();
  return (-gamma * d2.array().max(0.0)).exp().matrix();
}

/// 1 / (F * Var(X)) over all entries.
inline double default_gamma(const Matrix& x) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(x.cols()) * var);
}

struct KernelSvmOptions {
  double c_reg = 1.0;
  double gamma = 0.0;  // 0 selects default_gamma
  double tolerance = 1e-3;
  long max_iter = 0;   // 0 selects max(10^7, 100 N)
};

struct SmoSolution {
  Vector alpha;
  double rho = 0.0;
  FitDiagnostics diagnostics;
};

/// Solves min 1/2 a'Qa - e'a s.t. 0 <= a_i <= C, y'a = 0 with Q_ij = y_i y_j K_ij
/// by sequential minimal optimization, selecting the working pair by the
/// second-order rule. Stops when the maximal KKT violation is below `tol`.
inline SmoSolution solve_smo(const Matrix& kernel, const Vector& y, double c, double tol, long max_iter) {
  const Index n = kernel.rows();
  SmoSolution sol;
  sol.alpha = Vector::Zero(n);
  Vector& a = sol.alpha;
  Vector grad = Vector::Constant(n, -1.0);
  auto& diag = sol.diagnostics;
  constexpr double kTau = 1e-12;

  auto in_up = [&](Index t) { return (y(t) > 0 && a(t) < c) || (y(t) < 0 && a(t) > 0); };
  auto in_low = [&](Index t) { return (y(t) > 0 && a(t) > 0) || (y(t) < 0 && a(t) < c); };

  long it = 0;
  for (; it < max_iter; ++it) {
    Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (in_up(t) && -y(t) * grad(t) >= gmax) {
        if (-y(t) * grad(t) > gmax || i < 0) i = t;
        gmax = -y(t) * grad(t);
      }
    }
    Index j = -1;
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y(t) * grad(t);
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double b = gmax - v;
        double quad = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(b * b) / quad;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    diag.gradient_norm = gmax - gmin;
    if (i < 0 || j < 0 || gmax - gmin < tol) {
      diag.converged = true;
      break;
    }

    const double qii = kernel(i, i), qjj = kernel(j, j), qij = y(i) * y(j) * kernel(i, j);
    const double ai_old = a(i), aj_old = a(j);
    if (y(i) != y(j)) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = a(i) - a(j);
      a(i) += delta;
      a(j) += delta;
      if (diff > 0) {
        if (a(j) < 0) { a(j) = 0; a(i) = diff; }
      } else {
        if (a(i) < 0) { a(i) = 0; a(j) = -diff; }
      }
      if (diff > 0) {
        if (a(i) > c) { a(i) = c; a(j) = c - diff; }
      } else {
        if (a(j) > c) { a(j) = c; a(i) = c + diff; }
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = a(i) + a(j);
      a(i) -= delta;
      a(j) += delta;
      if (sum > c) {
        if (a(i) > c) { a(i) = c; a(j) = sum - c; }
      } else {
        if (a(j) < 0) { a(j) = 0; a(i) = sum; }
      }
      if (sum > c) {
        if (a(j) > c) { a(j) = c; a(i) = sum - c; }
      } else {
        if (a(i) < 0) { a(i) = 0; a(j) = sum; }
      }
    }
    const double di = a(i) - ai_old, dj = a(j) - aj_old;
    for (Index t = 0; t < n; ++t) {
      grad(t) += y(t) * (y(i) * kernel(t, i) * di + y(j) * kernel(t, j) * dj);
    }
  }
  diag.iterations = static_cast<int>(std::min<long>(it, std::numeric_limits<int>::max()));

  // rho from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (a(t) >= c) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a(t) <= 0) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  sol.rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  return sol;
}

/// Dual objective 1/2 a'Qa - e'a.
inline double svm_dual_objective(const Matrix& kernel, const Vector& y, const Vector& alpha) {
  const Vector ya = y.cwiseProduct(alpha);
  return 0.5 * ya.dot(kernel * ya) - alpha.sum();
}

/// RBF-kernel SVM; non-convergence within the iteration cap is reported in
/// the model diagnostics.
inline KernelSvmModel fit_kernel_svm(const Matrix& x, const Labels& labels, KernelSvmOptions opt = {}) {
  detail::check_fit_inputs(x, labels, "fit_kernel_svm");
  if (!(opt.c_reg > 0.0)) throw DataError("fit_kernel_svm: C must be positive");
  const double gamma = opt.gamma > 0.0 ? opt.gamma : default_gamma(x);
  const Index n = x.rows();
  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  const Matrix k = rbf_kernel(x, x, gamma);
  const long cap = opt.max_iter > 0 ? opt.max_iter : std::max<long>(10'000'000, 100 * static_cast<long>(n));
  auto sol = solve_smo(k, y, opt.c_reg, opt.tolerance, cap);

  KernelSvmModel model;
  model.gamma = gamma;
  model.c_reg = opt.c_reg;
  model.bias = -sol.rho;
  model.diagnostics = sol.diagnostics;
  std::vector<std::size_t> sv;
  for (Index i = 0; i < n; ++i) {
    if (sol.alpha(i) > 0.0) sv.push_back(static_cast<std::size_t>(i));
  }
  model.support_vectors = select_rows(x, sv);
  model.dual_coeffs.resize(static_cast<Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    const auto i = static_cast<Index>(sv[s]);
    model.dual_coeffs(static_cast<Index>(s)) = sol.alpha(i) * y(i);
  }
  return model;
}

}  // namespace fc

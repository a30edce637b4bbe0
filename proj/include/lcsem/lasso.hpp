#pragma once

#include <cmath>

#include "lcsem/common.hpp"

namespace lcsem {

struct LassoOptions {
  double tol = 1e-8;       // max KKT violation
  long max_sweeps = 100000;
};

struct LassoResult {
  Vector coef;
  long sweeps = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

/// Max KKT violation of min ||T b - t||_2^2 + lambda ||b||_1 at b, expressed
/// through the precomputed gram = T^T T and corr = T^T t.
inline double lasso_kkt_residual(const Matrix& gram, const Vector& corr, const Vector& b,
                                 double lambda) {
  const Vector g = 2.0 * (gram * b - corr);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    double v;
    if (b(j) == 0.0)
      v = std::max(std::abs(g(j)) - lambda, 0.0);
    else
      v = std::abs(g(j) + (b(j) > 0.0 ? lambda : -lambda));
    worst = std::max(worst, v);
  }
  return worst;
}

/// Cyclic coordinate descent with soft thresholding for
///   min_b ||T b - t||_2^2 + lambda ||b||_1.
/// Covariance-form updates: T^T T and T^T t are formed once, so a sweep costs
/// O(cols^2). Columns with norm below 1e-14 keep a zero coefficient. The
/// cyclic order (ascending column index) is fixed for reproducibility.
inline LassoResult lasso_cd(const Matrix& t_mat, const Vector& t_vec, double lambda,
                            const LassoOptions& opts = {}, const Vector* warm_start = nullptr) {
  require(lambda >= 0.0, "lasso_cd: lambda must be non-negative");
  require(t_mat.rows() == t_vec.size(), "lasso_cd: row count mismatch");
  require(t_mat.allFinite() && t_vec.allFinite(), "lasso_cd: inputs must be finite");

  const Eigen::Index n = t_mat.cols();
  const Matrix gram = lcsem::gram(t_mat);
  const Vector corr = t_mat.transpose() * t_vec;

  LassoResult res;
  res.coef = (warm_start && warm_start->size() == n) ? *warm_start : Vector::Zero(n);

  std::vector<char> degenerate(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::sqrt(gram(j, j)) < 1e-14) {
      degenerate[static_cast<std::size_t>(j)] = 1;
      res.coef(j) = 0.0;
    }
  }

  Vector gb(n);
  for (long sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    gb = gram * res.coef;  // fresh per sweep, incremental within it
    for (Eigen::Index j = 0; j < n; ++j) {
      if (degenerate[static_cast<std::size_t>(j)]) continue;
      const double old = res.coef(j);
      const double partial = corr(j) - (gb(j) - gram(j, j) * old);
      const double updated = soft_threshold(partial, 0.5 * lambda) / gram(j, j);
      if (updated != old) {
        res.coef(j) = updated;
        gb += gram.col(j) * (updated - old);
      }
    }
    res.sweeps = sweep + 1;
    res.kkt_residual = lasso_kkt_residual(gram, corr, res.coef, lambda);
    if (res.kkt_residual <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline double lasso_objective(const Matrix& t_mat, const Vector& t_vec, double lambda,
                              const Vector& b) {
  return (t_mat * b - t_vec).squaredNorm() + lambda * b.lpNorm<1>();
}

}  // namespace lcsem

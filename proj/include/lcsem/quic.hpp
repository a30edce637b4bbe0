#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "lcsem/common.hpp"

namespace lcsem {

struct ThetaProxOptions {
  double tol = 1e-6;        // minimal-norm subgradient, sup-norm
  int max_newton = 100;
  int max_cd_sweeps = 8;
  int max_linesearch = 40;
  double armijo_sigma = 1e-3;
};

struct ThetaProxResult {
  Matrix theta;
  int newton_iters = 0;
  double subgrad_residual = kInf;
  bool converged = false;
};

namespace detail {

/// Value of Tr(S Theta) - log det Theta + lambda ||Theta||_1
/// + (rho/2) ||Theta - M||_F^2; +inf when Theta is not PD.
/// On success fills the Cholesky factor for reuse.
inline double theta_prox_objective(const Matrix& theta, const Matrix& sigma_hat, const Matrix& m,
                                   double lambda, double rho, Matrix* lower_out = nullptr) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success) return kInf;
  Matrix lower = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) logdet += std::log(lower(i, i));
  logdet *= 2.0;
  double val = theta.cwiseProduct(sigma_hat).sum() - logdet + lambda * theta.lpNorm<1>();
  if (rho > 0.0) val += 0.5 * rho * (theta - m).squaredNorm();
  if (lower_out) *lower_out = std::move(lower);
  return val;
}

inline double theta_prox_subgradient(const Matrix& theta, const Matrix& grad, double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < theta.cols(); ++j) {
    for (Eigen::Index i = 0; i < theta.rows(); ++i) {
      double v;
      if (theta(i, j) != 0.0)
        v = std::abs(grad(i, j) + (theta(i, j) > 0.0 ? lambda : -lambda));
      else
        v = std::max(std::abs(grad(i, j)) - lambda, 0.0);
      worst = std::max(worst, v);
    }
  }
  return worst;
}

}  // namespace detail

/// Proximal-Newton solver (coordinate-descent inner direction, Armijo
/// backtracking with a PD guard) for the convex subproblem
///   min_{Theta PD sym}  Tr(S Theta) - log det Theta + lambda ||Theta||_1
///                       + (rho/2) ||Theta - M||_F^2.
/// rho = 0 is allowed and recovers the plain graphical-lasso objective.
inline ThetaProxResult theta_prox_subproblem(const Matrix& sigma_hat, const Matrix& prox_target,
                                             double lambda, double rho,
                                             const ThetaProxOptions& opts = {},
                                             const Matrix* warm_start = nullptr) {
  require(rho >= 0.0, "theta_prox_subproblem: rho must be >= 0");
  require(lambda >= 0.0, "theta_prox_subproblem: lambda must be >= 0");
  require(sigma_hat.rows() == sigma_hat.cols(), "theta_prox_subproblem: S must be square");
  const Eigen::Index p = sigma_hat.rows();
  const Matrix s = symmetrize(sigma_hat);
  const Matrix m = symmetrize(prox_target);

  ThetaProxResult res;

  // Start from the warm start when it is PD, otherwise from a safe diagonal.
  Matrix theta;
  if (warm_start && warm_start->rows() == p) {
    theta = symmetrize(*warm_start);
    if (Eigen::LLT<Matrix>(theta).info() != Eigen::Success) theta.resize(0, 0);
  }
  if (theta.size() == 0) {
    theta = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) theta(i, i) = 1.0 / std::max(s(i, i) + lambda, 1e-8);
  }

  Matrix lower;
  double fval = detail::theta_prox_objective(theta, s, m, lambda, rho, &lower);

  for (int newton = 0; newton < opts.max_newton; ++newton) {
    res.newton_iters = newton + 1;
    // W = Theta^{-1}; smooth gradient G = S - W + rho (Theta - M)
    Eigen::LLT<Matrix> llt(theta);
    if (llt.info() != Eigen::Success) break;  // should not happen: iterates stay PD
    const Matrix w = llt.solve(Matrix::Identity(p, p));
    Matrix grad = s - w;
    if (rho > 0.0) grad += rho * (theta - m);

    res.subgrad_residual = detail::theta_prox_subgradient(theta, grad, lambda);
    if (res.subgrad_residual <= opts.tol) {
      res.converged = true;
      break;
    }

    // Free set: active coordinates of Theta plus violated zero coordinates.
    std::vector<std::pair<int, int>> free_set;
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i <= j; ++i)
        if (theta(i, j) != 0.0 || std::abs(grad(i, j)) > lambda)
          free_set.emplace_back(static_cast<int>(i), static_cast<int>(j));

    // Newton direction by cyclic coordinate descent over the free set.
    Matrix d = Matrix::Zero(p, p);
    Matrix u = Matrix::Zero(p, p);  // U = D W, maintained incrementally
    const int sweeps = std::min(opts.max_cd_sweeps, 1 + newton / 2 + 1);
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (const auto& [i, j] : free_set) {
        const double wdw_ij = w.col(i).dot(u.col(j));
        const double c = theta(i, j) + d(i, j);
        double a, b;
        if (i == j) {
          a = w(i, i) * w(i, i) + rho;
          b = grad(i, i) + wdw_ij + rho * d(i, i);
        } else {
          a = w(i, j) * w(i, j) + w(i, i) * w(j, j) + rho;
          b = grad(i, j) + wdw_ij + rho * d(i, j);
        }
        const double mu = -c + soft_threshold(c - b / a, lambda / a);
        if (mu != 0.0) {
          d(i, j) += mu;
          u.row(i) += mu * w.row(j);
          if (i != j) {
            d(j, i) += mu;
            u.row(j) += mu * w.row(i);
          }
        }
      }
    }
    if (d.lpNorm<Eigen::Infinity>() == 0.0) break;  // no usable direction

    // Armijo backtracking on f(Theta + alpha D) with PD guard embedded in
    // the objective (non-PD trial evaluates to +inf).
    const double delta =
        grad.cwiseProduct(d).sum() + lambda * ((theta + d).lpNorm<1>() - theta.lpNorm<1>());
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_linesearch; ++ls) {
      Matrix trial = theta + alpha * d;
      Matrix trial_lower;
      const double ftrial = detail::theta_prox_objective(trial, s, m, lambda, rho, &trial_lower);
      if (std::isfinite(ftrial) && ftrial <= fval + opts.armijo_sigma * alpha * delta) {
        theta = std::move(trial);
        lower = std::move(trial_lower);
        fval = ftrial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
  }

  // final residual at the returned point
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() == Eigen::Success) {
    const Matrix w = llt.solve(Matrix::Identity(p, p));
    Matrix grad = s - w;
    if (rho > 0.0) grad += rho * (theta - m);
    res.subgrad_residual = detail::theta_prox_subgradient(theta, grad, lambda);
    res.converged = res.subgrad_residual <= opts.tol;
  }
  res.theta = std::move(theta);
  return res;
}

}  // namespace lcsem

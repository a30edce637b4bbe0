#pragma once

#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#include "lcsem/admm.hpp"
#include "lcsem/lbfgs.hpp"
#include "lcsem/likelihood.hpp"

namespace lcsem {

struct AlmOptions {
  double rho0 = 1.0;
  double rho_growth = 4.0;
  double rho_max = 1e8;
  int max_outer = 30;
  double constraint_tol = 1e-8;  // |  ||B - center||^2 - u  |
  OptimOptions inner{.max_iter = 300, .memory = 10, .grad_tol = 1e-6};
  bool record_timings = true;
};

struct AlmResult {
  StructureMatrix b_loc;
  SolverReport report;
  bool projected = false;  // final iterate pulled back onto the ball
};

namespace detail {

/// Splits B into (B+, B-, u) coordinates: x = [offdiag(B+), offdiag(B-), u].
struct AlmVars {
  Eigen::Index p;
  Eigen::Index n_off;  // p^2 - p

  Vector pack(const Matrix& b, double u) const {
    Vector x(2 * n_off + 1);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i < p; ++i)
        if (i != j) {
          x(k) = std::max(b(i, j), 0.0);
          x(n_off + k) = std::max(-b(i, j), 0.0);
          ++k;
        }
    x(2 * n_off) = u;
    return x;
  }

  Matrix unpack_b(const Vector& x) const {
    Matrix b = Matrix::Zero(p, p);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i < p; ++i)
        if (i != j) {
          b(i, j) = x(k) - x(n_off + k);
          ++k;
        }
    return b;
  }

  double unpack_u(const Vector& x) const { return x(2 * n_off); }
};

}  // namespace detail

/// Augmented-Lagrangian refinement of the two-step estimator: minimizes the
/// l1-penalized likelihood restricted to the Frobenius ball of radius r_loc
/// around b_center. The ball constraint ||B - center||_F^2 = u, u in
/// [0, r_loc^2] is handled by an outer multiplier loop; the inner problem is
/// box-constrained quasi-Newton over (B+, B-, u) with the l1 term as the
/// linear term lambda_loc * sum(B+ + B-).
///
/// r_loc = 0 returns the center; r_loc = +inf drops the ball machinery and
/// minimizes the penalized likelihood directly (the "unconstr" stress mode
/// when combined with start_override).
inline AlmResult alm_refine(const std::vector<Matrix>& covariances, const ExperimentSystem& system,
                            const StructureMatrix& b_center, double r_loc, double lambda_loc,
                            const AlmOptions& opts = {}, const Matrix* start_override = nullptr) {
  require(r_loc >= 0.0, "alm_refine: r_loc must be >= 0");
  require(lambda_loc >= 0.0, "alm_refine: lambda_loc must be >= 0");
  system.check();
  require(b_center.dim() == system.p, "alm_refine: center and system dimension mismatch");
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  AlmResult res;
  if (r_loc == 0.0) {
    res.b_loc = b_center;
    res.report.converged = true;
    res.report.status = "radius_zero";
    return res;
  }

  const Eigen::Index p = system.p;
  const Matrix& center = b_center.matrix();
  const bool bounded = std::isfinite(r_loc);
  const double r_sq = bounded ? r_loc * r_loc : 0.0;

  detail::AlmVars vars{p, p * p - p};
  const Eigen::Index dim = 2 * vars.n_off + 1;
  Vector lower = Vector::Zero(dim);
  Vector upper = Vector::Constant(dim, kInf);
  upper(2 * vars.n_off) = bounded ? r_sq : kInf;

  // Start at the center (or override); fall back to B = 0 when the
  // likelihood is not finite there.
  Matrix b_start = start_override ? *start_override : center;
  {
    Matrix dummy;
    if (!std::isfinite(nll_value_and_gradient(b_start, covariances, system, dummy)))
      b_start = Matrix::Zero(p, p);
  }
  double u_start = bounded ? std::min((b_start - center).squaredNorm(), r_sq) : 0.0;
  Vector x = vars.pack(b_start, u_start);

  double mult = 0.0;       // multiplier of ||B - center||^2 - u = 0
  double rho = opts.rho0;
  double prev_violation = kInf;

  const int outer_rounds = bounded ? opts.max_outer : 1;
  for (int outer = 0; outer < outer_rounds; ++outer) {
    Objective fn = [&](const Vector& xv, Vector& grad) {
      Matrix b = vars.unpack_b(xv);
      Matrix g_b;
      double val = nll_value_and_gradient(b, covariances, system, g_b);
      if (!std::isfinite(val)) return kInf;
      grad.resize(dim);
      double c_lin = 0.0;
      if (bounded) {
        const double u = vars.unpack_u(xv);
        const double c = (b - center).squaredNorm() - u;
        val += mult * c + 0.5 * rho * c * c;
        c_lin = mult + rho * c;
        g_b += 2.0 * c_lin * (b - center);
        g_b.diagonal().setZero();
      }
      Eigen::Index k = 0;
      for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < p; ++i)
          if (i != j) {
            grad(k) = g_b(i, j) + lambda_loc;
            grad(vars.n_off + k) = -g_b(i, j) + lambda_loc;
            ++k;
          }
      grad(2 * vars.n_off) = bounded ? -c_lin : 0.0;
      val += lambda_loc * xv.head(2 * vars.n_off).sum();  // entries are box-constrained >= 0
      return val;
    };

    OptimResult inner = minimize_lbfgs_box(fn, x, lower, upper, opts.inner);
    if (inner.line_search_failed) res.report.fallbacks += 1;
    x = inner.x;

    const Matrix b_cur = vars.unpack_b(x);
    const double u_cur = vars.unpack_u(x);
    const double violation = bounded ? (b_cur - center).squaredNorm() - u_cur : 0.0;

    TraceRow row;
    row.iter = outer;
    row.objective = objective_loc(b_cur, covariances, system, lambda_loc);
    row.primal_residual = std::abs(violation);
    row.dual_residual = inner.grad_norm;
    row.rho = rho;
    row.wall_time_ms =
        opts.record_timings
            ? std::chrono::duration<double, std::milli>(clock::now() - t0).count()
            : 0.0;
    res.report.trace.push_back(row);

    if (!bounded) {
      res.report.converged = inner.converged;
      res.report.status = inner.converged ? "converged" : "inner_incomplete";
      break;
    }

    if (std::abs(violation) <= opts.constraint_tol && inner.converged) {
      res.report.converged = true;
      res.report.status = "converged";
      break;
    }
    mult += rho * violation;
    if (std::abs(violation) > 0.25 * prev_violation)
      rho = std::min(rho * opts.rho_growth, opts.rho_max);
    prev_violation = std::abs(violation);
  }
  if (res.report.status.empty()) res.report.status = "outer_cap";

  Matrix b_final = vars.unpack_b(x);
  if (bounded) {
    const double dist = (b_final - center).norm();
    if (dist > r_loc + 1e-6) {
      b_final = center + (b_final - center) * (r_loc / dist);
      res.projected = true;
    }
  }
  res.b_loc = StructureMatrix(std::move(b_final));
  return res;
}

}  // namespace lcsem

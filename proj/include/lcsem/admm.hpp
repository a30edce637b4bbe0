#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "lcsem/lbfgs.hpp"
#include "lcsem/likelihood.hpp"
#include "lcsem/quic.hpp"
#include "lcsem/rng.hpp"

namespace lcsem {

/// One row of a solver convergence trace.
struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho = 0.0;
  double wall_time_ms = 0.0;
};

struct SolverReport {
  std::vector<TraceRow> trace;
  bool converged = false;
  bool diverged = false;
  std::string status;
  int fallbacks = 0;

  std::string to_csv() const {
    std::string out = "iter,objective,primal_residual,dual_residual,rho,wall_time_ms\n";
    char buf[256];
    for (const TraceRow& r : trace) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.iter, r.objective,
                    r.primal_residual, r.dual_residual, r.rho, r.wall_time_ms);
      out += buf;
    }
    return out;
  }
};

namespace detail {

/// Maps between a zero-diagonal p x p matrix and its stacked off-diagonal
/// entries (column-major order, diagonal skipped).
inline Vector offdiag_to_vector(const Matrix& b) {
  const Eigen::Index p = b.rows();
  Vector x(p * p - p);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i)
      if (i != j) x(k++) = b(i, j);
  return x;
}

inline Matrix vector_to_offdiag(const Vector& x, Eigen::Index p) {
  Matrix b = Matrix::Zero(p, p);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i)
      if (i != j) b(i, j) = x(k++);
  return b;
}

}  // namespace detail

struct BSubproblemOptions {
  OptimOptions optim{.max_iter = 200, .memory = 10, .grad_tol = 1e-6};
};

struct BSubproblemResult {
  Matrix b;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Objective of the ADMM B-step,
///   sum_e || Theta^e + Lambda^e - (I - U_e B)^T (I - U_e B) ||_F^2,
/// with gradient 4 sum_e U_e (I - U_e B) R_e restricted to off-diagonal
/// entries, where R_e is the residual inside the norm.
inline double b_subproblem_objective(const Matrix& b, const std::vector<Matrix>& thetas,
                                     const std::vector<Matrix>& lambdas,
                                     const ExperimentSystem& system, Matrix* grad_out = nullptr) {
  const int p = system.p;
  double value = 0.0;
  Matrix grad = Matrix::Zero(p, p);
  for (int e = 0; e < system.size(); ++e) {
    const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
    Matrix a = i_minus_ub(exp, b);
    Matrix resid = thetas[static_cast<std::size_t>(e)] + lambdas[static_cast<std::size_t>(e)] -
                   gram(a);
    value += resid.squaredNorm();
    if (grad_out) {
      Matrix term = a * resid;
      for (int j : exp.intervened()) term.row(j).setZero();
      grad += 4.0 * term;
    }
  }
  if (grad_out) {
    grad.diagonal().setZero();
    *grad_out = std::move(grad);
  }
  return value;
}

/// Quasi-Newton solve of the (non-convex, smooth) B-step from B_start.
inline BSubproblemResult b_subproblem(const std::vector<Matrix>& thetas,
                                      const std::vector<Matrix>& lambdas,
                                      const ExperimentSystem& system, const Matrix& b_start,
                                      const BSubproblemOptions& opts = {}) {
  const Eigen::Index p = system.p;
  Objective fn = [&](const Vector& x, Vector& grad) {
    Matrix b = detail::vector_to_offdiag(x, p);
    Matrix g;
    const double v = b_subproblem_objective(b, thetas, lambdas, system, &g);
    grad = detail::offdiag_to_vector(g);
    return v;
  };
  OptimResult opt = minimize_lbfgs(fn, detail::offdiag_to_vector(b_start), opts.optim);
  BSubproblemResult res;
  res.b = detail::vector_to_offdiag(opt.x, p);
  res.objective = opt.fval;
  res.iterations = opt.iterations;
  res.converged = opt.converged;
  res.line_search_failed = opt.line_search_failed;
  return res;
}

struct AdmmOptions {
  double rho0 = 1.0;
  double rho_min = 1e-4;
  double rho_max = 1e6;
  double balance_ratio = 10.0;  // rebalance when one residual exceeds ratio x other
  double balance_factor = 2.0;
  double primal_tol = 1e-5;
  double dual_tol = 1e-5;
  int max_iter = 500;
  double divergence_threshold = 1e6;
  bool random_triangular_init = false;  // stress mode: strict triangular N(0, 10) start
  std::uint64_t init_seed = 1;
  bool record_timings = true;
  ThetaProxOptions theta_opts{.tol = 1e-6, .max_newton = 50};
  BSubproblemOptions b_opts;
};

/// Mutable state of the non-convex ADMM iteration.
struct AdmmState {
  Matrix b;
  std::vector<Matrix> thetas;   // Theta^{e,k}, symmetric PD
  std::vector<Matrix> lambdas;  // scaled duals
  double rho = 1.0;
};

struct AdmmResult {
  StructureMatrix b_init;
  SolverReport report;
  AdmmState state;  // final state, reusable as a warm start
  double best_objective = kInf;
};

/// Non-convex ADMM for the initialization estimator: alternates the
/// per-experiment Theta proximal subproblems, the quasi-Newton B-step and the
/// dual update, with dual-balanced step size rho. Returns the iterate with
/// the best penalized-likelihood objective seen.
inline AdmmResult admm_init(const std::vector<Matrix>& covariances, const ExperimentSystem& system,
                            double lambda_init, const AdmmOptions& opts = {},
                            const AdmmState* warm_start = nullptr) {
  require(lambda_init >= 0.0, "admm_init: lambda_init must be >= 0");
  system.check();
  const int p = system.p;
  const int num_e = system.size();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  AdmmState st;
  if (warm_start && warm_start->b.rows() == p &&
      static_cast<int>(warm_start->thetas.size()) == num_e) {
    st = *warm_start;
  } else {
    st.rho = opts.rho0;
    st.b = Matrix::Zero(p, p);
    if (opts.random_triangular_init) {
      Rng rng(opts.init_seed);
      for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) st.b(i, j) = rng.normal() * std::sqrt(10.0);
    }
    st.thetas.resize(static_cast<std::size_t>(num_e));
    st.lambdas.assign(static_cast<std::size_t>(num_e), Matrix::Zero(p, p));
    for (int e = 0; e < num_e; ++e) {
      Matrix s = covariances[static_cast<std::size_t>(e)] + 1e-6 * Matrix::Identity(p, p);
      Eigen::LLT<Matrix> llt(s);
      st.thetas[static_cast<std::size_t>(e)] =
          symmetrize(llt.solve(Matrix::Identity(p, p)));
    }
  }

  AdmmResult res;
  res.report.status = "running";
  Matrix best_b = st.b;
  double best_obj = objective_init(st.b, covariances, system, lambda_init);

  Matrix b_prev = st.b;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Theta-step: per-experiment proximal subproblems (independent).
    for (int e = 0; e < num_e; ++e) {
      const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
      Matrix theta_b = gram(i_minus_ub(exp, st.b));
      Matrix target = theta_b - st.lambdas[static_cast<std::size_t>(e)];
      ThetaProxResult pr = theta_prox_subproblem(
          covariances[static_cast<std::size_t>(e)], target, lambda_init, st.rho, opts.theta_opts,
          &st.thetas[static_cast<std::size_t>(e)]);
      st.thetas[static_cast<std::size_t>(e)] = std::move(pr.theta);
    }

    // B-step.
    BSubproblemResult bs = b_subproblem(st.thetas, st.lambdas, system, st.b, opts.b_opts);
    if (bs.line_search_failed) res.report.fallbacks += 1;
    b_prev = std::move(st.b);
    st.b = std::move(bs.b);

    // Dual update and residuals.
    double primal = 0.0;
    for (int e = 0; e < num_e; ++e) {
      const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
      Matrix theta_b = gram(i_minus_ub(exp, st.b));
      Matrix gap = st.thetas[static_cast<std::size_t>(e)] - theta_b;
      st.lambdas[static_cast<std::size_t>(e)] += gap;
      primal = std::max(primal, gap.norm());
    }
    const double dual = (st.b - b_prev).norm();

    const double obj = objective_init(st.b, covariances, system, lambda_init);
    if (std::isfinite(obj) && obj < best_obj) {
      best_obj = obj;
      best_b = st.b;
    }

    TraceRow row;
    row.iter = iter;
    row.objective = obj;
    row.primal_residual = primal;
    row.dual_residual = dual;
    row.rho = st.rho;
    row.wall_time_ms =
        opts.record_timings
            ? std::chrono::duration<double, std::milli>(clock::now() - t0).count()
            : 0.0;
    res.report.trace.push_back(row);

    if (primal > opts.divergence_threshold) {
      res.report.diverged = true;
      res.report.status = "diverged";
      break;
    }
    if (primal <= opts.primal_tol && dual <= opts.dual_tol) {
      res.report.converged = true;
      res.report.status = "converged";
      break;
    }

    // Dual balancing: grow rho when the primal residual dominates, shrink it
    // when the dual residual does; scaled duals are rescaled accordingly.
    const double rho_scaled_dual = st.rho * dual;
    double new_rho = st.rho;
    if (primal > opts.balance_ratio * rho_scaled_dual)
      new_rho = std::min(st.rho * opts.balance_factor, opts.rho_max);
    else if (rho_scaled_dual > opts.balance_ratio * primal)
      new_rho = std::max(st.rho / opts.balance_factor, opts.rho_min);
    if (new_rho != st.rho) {
      const double scale = st.rho / new_rho;
      for (auto& l : st.lambdas) l *= scale;
      st.rho = new_rho;
    }
  }
  if (res.report.status == "running") res.report.status = "iteration_cap";

  res.best_objective = best_obj;
  res.b_init = StructureMatrix(best_b);
  res.state = std::move(st);
  return res;
}

}  // namespace lcsem

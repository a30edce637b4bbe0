#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <utility>

#include "lcsem/common.hpp"

namespace lcsem {

/// Objective callback: returns f(x) and fills grad (same size as x).
/// May return +inf for points outside the domain; grad is ignored there.
using Objective = std::function<double(const Vector&, Vector&)>;

struct OptimOptions {
  int max_iter = 500;
  int memory = 10;
  double grad_tol = 1e-6;   // sup-norm of the (projected) gradient
  int max_linesearch = 60;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
};

struct OptimResult {
  Vector x;
  double fval = kInf;
  double grad_norm = kInf;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

namespace detail {

struct LbfgsMemory {
  std::deque<Vector> s, y;
  std::deque<double> rho;
  int capacity = 10;

  void push(const Vector& s_new, const Vector& y_new) {
    const double sy = s_new.dot(y_new);
    if (!(sy > 1e-12 * s_new.norm() * y_new.norm())) return;  // skip non-curvature pairs
    s.push_back(s_new);
    y.push_back(y_new);
    rho.push_back(1.0 / sy);
    if (static_cast<int>(s.size()) > capacity) {
      s.pop_front();
      y.pop_front();
      rho.pop_front();
    }
  }

  /// Two-loop recursion, d = -H g.
  Vector direction(const Vector& g) const {
    Vector q = g;
    const int m = static_cast<int>(s.size());
    std::vector<double> alpha(static_cast<std::size_t>(m));
    for (int i = m - 1; i >= 0; --i) {
      alpha[static_cast<std::size_t>(i)] = rho[static_cast<std::size_t>(i)] *
                                           s[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    }
    if (m > 0) {
      const Vector& sl = s.back();
      const Vector& yl = y.back();
      q *= sl.dot(yl) / yl.squaredNorm();
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)].dot(q);
      q += (alpha[static_cast<std::size_t>(i)] - beta) * s[static_cast<std::size_t>(i)];
    }
    return -q;
  }
};

}  // namespace detail

/// L-BFGS with a strong-Wolfe line search (bracket + bisection zoom).
/// Trial points with infinite objective shrink the bracket, which acts as the
/// positive-definiteness guard for likelihood objectives.
inline OptimResult minimize_lbfgs(const Objective& f, Vector x0, const OptimOptions& opts = {}) {
  OptimResult res;
  res.x = std::move(x0);
  Vector g(res.x.size());
  res.fval = f(res.x, g);
  res.evaluations = 1;
  require(std::isfinite(res.fval), "minimize_lbfgs: objective infinite at start");

  detail::LbfgsMemory mem;
  mem.capacity = opts.memory;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    res.iterations = iter;
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= opts.grad_tol) {
      res.converged = true;
      return res;
    }

    Vector d = mem.direction(g);
    double dg = d.dot(g);
    if (!(dg < 0.0)) {  // not a descent direction; restart with steepest descent
      d = -g;
      dg = -g.squaredNorm();
    }

    // strong Wolfe: f(x+td) <= f + c1 t dg  and  |d.g(x+td)| <= c2 |dg|
    double lo = 0.0, hi = kInf;
    double t = 1.0;
    double f_lo = res.fval;
    Vector x_trial, g_trial(res.x.size());
    Vector x_best, g_best;
    double f_trial = kInf, dg_trial = 0.0, f_best = res.fval;
    bool ok = false;
    for (int ls = 0; ls < opts.max_linesearch; ++ls) {
      x_trial = res.x + t * d;
      f_trial = f(x_trial, g_trial);
      ++res.evaluations;
      if (std::isfinite(f_trial) && f_trial < f_best) {
        f_best = f_trial;
        x_best = x_trial;
        g_best = g_trial;
      }
      if (!std::isfinite(f_trial) || f_trial > res.fval + opts.wolfe_c1 * t * dg ||
          (ls > 0 && f_trial >= f_lo)) {
        hi = t;
      } else {
        dg_trial = d.dot(g_trial);
        if (std::abs(dg_trial) <= -opts.wolfe_c2 * dg) {
          ok = true;
          break;
        }
        if (dg_trial >= 0.0) {
          hi = t;
        } else {
          lo = t;
          f_lo = f_trial;
        }
      }
      t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
      if (t <= 1e-18) break;
    }
    if (!ok) {
      if (f_best >= res.fval) {
        res.line_search_failed = true;  // return best iterate so far
        return res;
      }
      x_trial = std::move(x_best);  // Wolfe failed; take the best decrease seen
      g_trial = std::move(g_best);
      f_trial = f_best;
    }

    Vector s_new = x_trial - res.x;
    Vector y_new = g_trial - g;
    res.x = std::move(x_trial);
    res.fval = f_trial;
    g = g_trial;
    mem.push(s_new, y_new);
  }
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  res.converged = res.grad_norm <= opts.grad_tol;
  return res;
}

inline Vector clamp_to_box(const Vector& x, const Vector& lower, const Vector& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

/// Projected L-BFGS for box constraints l <= x <= u: coordinates pressed
/// against an active bound are frozen out of the two-loop direction, and an
/// Armijo backtracking search runs along the projection arc
/// x(t) = P(x + t d). Convergence is measured by ||x - P(x - g)||_inf.
inline OptimResult minimize_lbfgs_box(const Objective& f, Vector x0, const Vector& lower,
                                      const Vector& upper, const OptimOptions& opts = {}) {
  require(lower.size() == x0.size() && upper.size() == x0.size(),
          "minimize_lbfgs_box: bound size mismatch");
  OptimResult res;
  res.x = clamp_to_box(x0, lower, upper);
  Vector g(res.x.size());
  res.fval = f(res.x, g);
  res.evaluations = 1;
  require(std::isfinite(res.fval), "minimize_lbfgs_box: objective infinite at start");

  detail::LbfgsMemory mem;
  mem.capacity = opts.memory;
  const double active_eps = 1e-12;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    res.iterations = iter;
    res.grad_norm = (res.x - clamp_to_box(res.x - g, lower, upper)).lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= opts.grad_tol) {
      res.converged = true;
      return res;
    }

    Vector g_free = g;
    for (Eigen::Index i = 0; i < res.x.size(); ++i) {
      const bool at_lower = res.x(i) <= lower(i) + active_eps && g(i) > 0.0;
      const bool at_upper = res.x(i) >= upper(i) - active_eps && g(i) < 0.0;
      if (at_lower || at_upper) g_free(i) = 0.0;
    }

    Vector d = mem.direction(g_free);
    for (Eigen::Index i = 0; i < res.x.size(); ++i)
      if (g_free(i) == 0.0 && g(i) != 0.0) d(i) = 0.0;
    if (!(d.dot(g_free) < 0.0)) d = -g_free;

    double t = 1.0;
    bool accepted = false;
    Vector x_trial, g_trial(res.x.size());
    double f_trial = kInf;
    for (int ls = 0; ls < opts.max_linesearch; ++ls) {
      x_trial = clamp_to_box(res.x + t * d, lower, upper);
      const Vector step = x_trial - res.x;
      if (step.lpNorm<Eigen::Infinity>() <= 1e-18) break;
      f_trial = f(x_trial, g_trial);
      ++res.evaluations;
      if (std::isfinite(f_trial) && f_trial <= res.fval + opts.wolfe_c1 * g.dot(step)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      return res;
    }

    Vector s_new = x_trial - res.x;
    Vector y_new = g_trial - g;
    res.x = std::move(x_trial);
    res.fval = f_trial;
    g = g_trial;
    mem.push(s_new, y_new);
  }
  res.grad_norm = (res.x - clamp_to_box(res.x - g, lower, upper)).lpNorm<Eigen::Infinity>();
  res.converged = res.grad_norm <= opts.grad_tol;
  return res;
}

}  // namespace lcsem

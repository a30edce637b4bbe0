#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "lcsem/chol_update.hpp"
#include "lcsem/common.hpp"
#include "lcsem/model.hpp"

namespace lcsem {

struct FastCholResult {
  Matrix lower;
  bool used_fallback = false;  // direct factorization after a failed downdate
  bool pd = true;
};

/// Cholesky factor of Theta^e(B) from the factor of (I - B)^T (I - B) via the
/// low-rank identity
///   Theta^e(B) = (I-B)^T(I-B) - (J_e - J_e B)^T (J_e - J_e B) + J_e^T J_e:
/// |J_e| rank-one updates with the intervened identity rows, then |J_e|
/// rank-one downdates with the intervened rows of (I - B). Falls back to a
/// direct factorization when a downdate loses positive definiteness.
inline FastCholResult fast_chol_theta(const Matrix& b, const Experiment& e,
                                      const Matrix& base_factor) {
  const Eigen::Index p = b.rows();
  FastCholResult res;
  res.lower = base_factor;
  Vector v(p);
  for (int j : e.intervened()) {
    v.setZero();
    v(j) = 1.0;
    chol_rank1_update(res.lower, v);
  }
  for (int j : e.intervened()) {
    v = -b.row(j).transpose();
    v(j) += 1.0;
    if (!chol_rank1_downdate(res.lower, v)) {
      res.used_fallback = true;
      Matrix theta = gram(i_minus_ub(e, b));
      Eigen::LLT<Matrix> llt(theta);
      if (llt.info() != Eigen::Success) {
        res.pd = false;
        return res;
      }
      res.lower = llt.matrixL();
      res.pd = factor_pivots_ok(res.lower);
      return res;
    }
  }
  return res;
}

inline FastCholResult fast_chol_theta(const StructureMatrix& b, const Experiment& e,
                                      const Matrix& base_factor) {
  return fast_chol_theta(b.matrix(), e, base_factor);
}

struct NllResult {
  double value = kInf;
  bool pd = true;             // all Theta^e(B) positive definite
  int fallbacks = 0;          // fast-path downdate failures
  bool base_factor_ok = true; // (I-B)^T(I-B) factorizable (fast path only)
};

namespace detail {

inline bool naive_experiment_nll(const Matrix& b, const Experiment& e, const Matrix& sigma_hat,
                                 double& out) {
  Matrix theta = gram(i_minus_ub(e, b));
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success) return false;
  const Matrix lower = llt.matrixL();
  if (!factor_pivots_ok(lower)) return false;
  out = theta.cwiseProduct(sigma_hat).sum() - logdet_from_cholesky(lower);
  return true;
}

}  // namespace detail

/// Negative Gaussian log-likelihood
///   L(B) = sum_e [ Tr(Sigma_hat^e Theta^e(B)) - log det Theta^e(B) ].
/// Non-PD Theta^e (singular I - U_e B) yields +inf with pd = false.
/// fast = true uses the low-rank update path; both paths agree to 1e-9
/// relative on valid inputs.
inline NllResult neg_log_likelihood_detail(const Matrix& b, const std::vector<Matrix>& covariances,
                                           const ExperimentSystem& system, bool fast = false) {
  require(static_cast<int>(covariances.size()) == system.size(),
          "neg_log_likelihood: one covariance per experiment required");
  require(b.rows() == system.p && b.cols() == system.p,
          "neg_log_likelihood: B and system dimension mismatch");

  NllResult res;
  double total = 0.0;

  if (!fast) {
    for (int e = 0; e < system.size(); ++e) {
      double term;
      if (!detail::naive_experiment_nll(b, system.experiments[static_cast<std::size_t>(e)],
                                        covariances[static_cast<std::size_t>(e)], term)) {
        res.pd = false;
        res.value = kInf;
        return res;
      }
      total += term;
    }
    res.value = total;
    return res;
  }

  // Fast path: factor K = (I-B)^T(I-B) once, then per-experiment low-rank
  // updates for both the log-determinant and the trace term.
  Matrix a = -b;
  a.diagonal().array() += 1.0;
  const Matrix k_mat = gram(a);
  Eigen::LLT<Matrix> base(k_mat);
  if (base.info() != Eigen::Success || !factor_pivots_ok(base.matrixL())) {
    // I - B itself is singular; experiments may still be valid, so handle
    // each one directly.
    res.base_factor_ok = false;
    for (int e = 0; e < system.size(); ++e) {
      double term;
      if (!detail::naive_experiment_nll(b, system.experiments[static_cast<std::size_t>(e)],
                                        covariances[static_cast<std::size_t>(e)], term)) {
        res.pd = false;
        res.value = kInf;
        return res;
      }
      res.fallbacks += 1;
      total += term;
    }
    res.value = total;
    return res;
  }
  const Matrix base_lower = base.matrixL();

  Vector v(system.p);
  for (int e = 0; e < system.size(); ++e) {
    const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
    const Matrix& sigma_hat = covariances[static_cast<std::size_t>(e)];

    // Tr(Sigma_hat Theta^e) = <K, Sigma_hat> - sum_j v_j^T Sigma_hat v_j + sum_j Sigma_hat_jj
    double trace = k_mat.cwiseProduct(sigma_hat).sum();
    for (int j : exp.intervened()) {
      v = -b.row(j).transpose();
      v(j) += 1.0;
      trace -= v.dot(sigma_hat * v);
      trace += sigma_hat(j, j);
    }

    FastCholResult fc = fast_chol_theta(b, exp, base_lower);
    if (!fc.pd || !factor_pivots_ok(fc.lower)) {
      res.pd = false;
      res.value = kInf;
      return res;
    }
    if (fc.used_fallback) res.fallbacks += 1;
    total += trace - logdet_from_cholesky(fc.lower);
  }
  res.value = total;
  return res;
}

inline double neg_log_likelihood(const StructureMatrix& b, const std::vector<Matrix>& covariances,
                                 const ExperimentSystem& system, bool fast = false) {
  return neg_log_likelihood_detail(b.matrix(), covariances, system, fast).value;
}

/// Gradient of the negative log-likelihood restricted to off-diagonal
/// coordinates: 2 sum_e U_e (I - U_e B) (Theta^e(B)^{-1} - Sigma_hat^e),
/// diagonal forced to zero. Throws model_error when some Theta^e is not PD.
inline Matrix nll_gradient_detail(const Matrix& b, const std::vector<Matrix>& covariances,
                                  const ExperimentSystem& system) {
  require(static_cast<int>(covariances.size()) == system.size(),
          "nll_gradient: one covariance per experiment required");
  const int p = static_cast<int>(b.rows());
  Matrix grad = Matrix::Zero(p, p);
  for (int e = 0; e < system.size(); ++e) {
    const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
    Matrix a = i_minus_ub(exp, b);
    Matrix theta = gram(a);
    Eigen::LLT<Matrix> llt(theta);
    if (llt.info() != Eigen::Success || !factor_pivots_ok(llt.matrixL()))
      throw model_error("nll_gradient: Theta^e(B) is not positive definite");
    Matrix diff = llt.solve(Matrix::Identity(p, p)) -
                  covariances[static_cast<std::size_t>(e)];
    Matrix term = a * diff;  // (I - U_e B) (Theta^{-1} - Sigma_hat)
    for (int j : exp.intervened()) term.row(j).setZero();  // U_e projection
    grad += 2.0 * term;
  }
  grad.diagonal().setZero();
  return grad;
}

inline Matrix nll_gradient(const StructureMatrix& b, const std::vector<Matrix>& covariances,
                           const ExperimentSystem& system) {
  return nll_gradient_detail(b.matrix(), covariances, system);
}

/// Value and gradient in one pass (they share the per-experiment Cholesky).
/// Returns +inf and leaves grad untouched when some Theta^e is not PD.
inline double nll_value_and_gradient(const Matrix& b, const std::vector<Matrix>& covariances,
                                     const ExperimentSystem& system, Matrix& grad) {
  const int p = static_cast<int>(b.rows());
  double total = 0.0;
  Matrix g = Matrix::Zero(p, p);
  for (int e = 0; e < system.size(); ++e) {
    const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
    Matrix a = i_minus_ub(exp, b);
    Matrix theta = gram(a);
    Eigen::LLT<Matrix> llt(theta);
    if (llt.info() != Eigen::Success) return kInf;
    const Matrix& sigma_hat = covariances[static_cast<std::size_t>(e)];
    const Matrix lower = llt.matrixL();
    if (!factor_pivots_ok(lower)) return kInf;
    total += theta.cwiseProduct(sigma_hat).sum() - logdet_from_cholesky(lower);
    Matrix diff = llt.solve(Matrix::Identity(p, p)) - sigma_hat;
    Matrix term = a * diff;
    for (int j : exp.intervened()) term.row(j).setZero();
    g += 2.0 * term;
  }
  g.diagonal().setZero();
  grad = std::move(g);
  return total;
}

/// Caches the Cholesky factor of (I - B)^T (I - B) and the per-experiment
/// update vectors for repeated likelihood evaluations at one B. The cache is
/// rebuilt whenever set_b sees a different matrix.
class LikelihoodWorkspace {
 public:
  LikelihoodWorkspace(std::vector<Matrix> covariances, ExperimentSystem system)
      : covariances_(std::move(covariances)), system_(std::move(system)) {
    system_.check();
    require(static_cast<int>(covariances_.size()) == system_.size(),
            "LikelihoodWorkspace: one covariance per experiment required");
  }

  const ExperimentSystem& system() const { return system_; }
  const std::vector<Matrix>& covariances() const { return covariances_; }

  /// Installs B; returns false when (I - B)^T (I - B) cannot be factored
  /// (the fast path then degrades to per-experiment factorizations).
  bool set_b(const Matrix& b) {
    if (has_b_ && b_ == b) return base_ok_;
    require(b.rows() == system_.p && b.cols() == system_.p,
            "LikelihoodWorkspace: B dimension mismatch");
    b_ = b;
    has_b_ = true;
    Matrix a = -b_;
    a.diagonal().array() += 1.0;
    k_mat_ = gram(a);
    Eigen::LLT<Matrix> llt(k_mat_);
    base_ok_ = llt.info() == Eigen::Success && factor_pivots_ok(llt.matrixL());
    if (base_ok_) base_lower_ = llt.matrixL();

    update_vectors_.clear();
    update_vectors_.resize(static_cast<std::size_t>(system_.size()));
    for (int e = 0; e < system_.size(); ++e) {
      const Experiment& exp = system_.experiments[static_cast<std::size_t>(e)];
      for (int j : exp.intervened()) {
        Vector v = -b_.row(j).transpose();
        v(j) += 1.0;
        update_vectors_[static_cast<std::size_t>(e)].push_back(std::move(v));
      }
    }
    return base_ok_;
  }

  /// Likelihood at the installed B; fast = true reuses the cached factor.
  double value(bool fast = true) const {
    require(has_b_, "LikelihoodWorkspace: set_b before value");
    if (!fast || !base_ok_)
      return neg_log_likelihood_detail(b_, covariances_, system_, false).value;

    double total = 0.0;
    for (int e = 0; e < system_.size(); ++e) {
      const Experiment& exp = system_.experiments[static_cast<std::size_t>(e)];
      const Matrix& sigma_hat = covariances_[static_cast<std::size_t>(e)];
      double trace = k_mat_.cwiseProduct(sigma_hat).sum();
      for (std::size_t k = 0; k < update_vectors_[static_cast<std::size_t>(e)].size(); ++k) {
        const Vector& v = update_vectors_[static_cast<std::size_t>(e)][k];
        const int j = exp.intervened()[k];
        trace -= v.dot(sigma_hat * v);
        trace += sigma_hat(j, j);
      }
      FastCholResult fc = fast_chol_theta(b_, exp, base_lower_);
      if (!fc.pd || !factor_pivots_ok(fc.lower)) return kInf;
      total += trace - logdet_from_cholesky(fc.lower);
    }
    return total;
  }

 private:
  std::vector<Matrix> covariances_;
  ExperimentSystem system_;
  Matrix b_;
  Matrix k_mat_;
  Matrix base_lower_;
  std::vector<std::vector<Vector>> update_vectors_;
  bool has_b_ = false;
  bool base_ok_ = false;
};

/// Penalized likelihood objectives of the two-step estimator.
inline double theta_l1_penalty(const Matrix& b, const ExperimentSystem& system) {
  double acc = 0.0;
  for (const Experiment& e : system.experiments)
    acc += gram(i_minus_ub(e, b)).lpNorm<1>();
  return acc;
}

inline double objective_init(const Matrix& b, const std::vector<Matrix>& covariances,
                             const ExperimentSystem& system, double lambda_init) {
  const NllResult nll = neg_log_likelihood_detail(b, covariances, system, false);
  if (!nll.pd) return kInf;
  return nll.value + lambda_init * theta_l1_penalty(b, system);
}

inline double objective_loc(const Matrix& b, const std::vector<Matrix>& covariances,
                            const ExperimentSystem& system, double lambda_loc) {
  const NllResult nll = neg_log_likelihood_detail(b, covariances, system, false);
  if (!nll.pd) return kInf;
  return nll.value + lambda_loc * b.lpNorm<1>();
}

}  // namespace lcsem

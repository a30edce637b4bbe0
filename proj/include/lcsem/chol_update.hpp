#pragma once

#include <cmath>

#include "lcsem/common.hpp"

namespace lcsem {

/// In-place rank-one update of a lower Cholesky factor:
/// L L^T + v v^T = L' L'^T. O(p^2). v is consumed as workspace.
inline void chol_rank1_update(Matrix& lower, Vector& v) {
  const Eigen::Index p = lower.rows();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double lkk = lower(k, k);
    const double vk = v(k);
    const double r = std::hypot(lkk, vk);
    const double c = r / lkk;
    const double s = vk / lkk;
    lower(k, k) = r;
    if (k + 1 < p) {
      auto col = lower.col(k).segment(k + 1, p - k - 1);
      auto tail = v.segment(k + 1, p - k - 1);
      col = (col + s * tail) / c;
      tail = c * tail - s * col;
    }
  }
}

/// In-place rank-one downdate: L L^T - v v^T = L' L'^T.
/// Returns false (factor left unspecified) when the result stops being
/// positive definite numerically. v is consumed as workspace.
inline bool chol_rank1_downdate(Matrix& lower, Vector& v) {
  const Eigen::Index p = lower.rows();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double lkk = lower(k, k);
    const double vk = v(k);
    const double rsq = (lkk - vk) * (lkk + vk);
    if (rsq <= 0.0 || !(lkk > 0.0)) return false;
    const double r = std::sqrt(rsq);
    const double c = r / lkk;
    const double s = vk / lkk;
    lower(k, k) = r;
    if (k + 1 < p) {
      auto col = lower.col(k).segment(k + 1, p - k - 1);
      auto tail = v.segment(k + 1, p - k - 1);
      col = (col - s * tail) / c;
      tail = c * tail - s * col;
    }
  }
  return true;
}

inline double logdet_from_cholesky(const Matrix& lower) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) acc += std::log(lower(i, i));
  return 2.0 * acc;
}

/// Factor pivots must be positive and not span more than ~7 orders of
/// magnitude; beyond that the factored matrix counts as numerically singular.
inline bool factor_pivots_ok(const Matrix& lower) {
  double lo = kInf, hi = 0.0;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    const double d = lower(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return lo > 1e-7 * hi;
}

}  // namespace lcsem

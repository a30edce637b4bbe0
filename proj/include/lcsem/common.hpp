#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace lcsem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when inputs violate a documented precondition (shapes, ranges, file contents).
class invalid_input : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a matrix leaves the valid model class (e.g. singular I - U_e B).
class model_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw invalid_input(msg);
}

/// Symmetric part (A + A^T) / 2.
inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// A^T A computed so the result is bitwise symmetric.
inline Matrix gram(const Matrix& a) {
  Matrix g = Matrix::Zero(a.cols(), a.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

/// A A^T computed so the result is bitwise symmetric.
inline Matrix outer_gram(const Matrix& a) {
  Matrix g = Matrix::Zero(a.rows(), a.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(a);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace lcsem

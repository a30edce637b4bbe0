#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "lcsem/common.hpp"
#include "lcsem/rng.hpp"

namespace lcsem {

/// Dense p x p causal coefficient matrix with a structurally zero diagonal.
/// Entry (i, j) is the effect of node j on node i.
class StructureMatrix {
 public:
  StructureMatrix() = default;

  explicit StructureMatrix(Matrix coeffs) : m_(std::move(coeffs)) {
    require(m_.rows() == m_.cols(), "StructureMatrix: matrix must be square");
    require(m_.allFinite(), "StructureMatrix: entries must be finite");
    for (Eigen::Index i = 0; i < m_.rows(); ++i)
      require(m_(i, i) == 0.0, "StructureMatrix: diagonal must be exactly zero");
  }

  static StructureMatrix zeros(int p) { return StructureMatrix(Matrix::Zero(p, p)); }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Matrix m_;
};

/// The sparse structure class: zero diagonal, operator norm <= 1 - eta,
/// at most d non-zeros per row.
struct MatrixClassSpec {
  int p = 0;
  int d = 0;
  double eta = 0.5;

  void check() const {
    require(p >= 1, "MatrixClassSpec: p must be positive");
    require(d >= 1 && d <= p - 1, "MatrixClassSpec: need 1 <= d <= p-1");
    require(eta > 0.0 && eta <= 0.5, "MatrixClassSpec: eta must lie in (0, 1/2]");
  }
};

/// One experiment: the node set whose equations are replaced by exogenous
/// noise (intervened) and its complement (untouched).
class Experiment {
 public:
  Experiment(int p, std::vector<int> intervened) : p_(p) {
    require(p >= 1, "Experiment: p must be positive");
    std::sort(intervened.begin(), intervened.end());
    intervened.erase(std::unique(intervened.begin(), intervened.end()), intervened.end());
    mask_.assign(static_cast<std::size_t>(p), 0);
    for (int j : intervened) {
      require(j >= 0 && j < p, "Experiment: intervened index out of range");
      mask_[static_cast<std::size_t>(j)] = 1;
    }
    intervened_ = std::move(intervened);
    untouched_.reserve(static_cast<std::size_t>(p) - intervened_.size());
    for (int i = 0; i < p; ++i)
      if (!mask_[static_cast<std::size_t>(i)]) untouched_.push_back(i);
  }

  int dim() const { return p_; }
  const std::vector<int>& intervened() const { return intervened_; }
  const std::vector<int>& untouched() const { return untouched_; }
  bool is_intervened(int i) const { return mask_[static_cast<std::size_t>(i)] != 0; }

 private:
  int p_ = 0;
  std::vector<int> intervened_;
  std::vector<int> untouched_;
  std::vector<char> mask_;
};

/// Ordered collection of experiments over a common node set.
struct ExperimentSystem {
  int p = 0;
  std::vector<Experiment> experiments;

  int size() const { return static_cast<int>(experiments.size()); }

  void check() const {
    require(p >= 1, "ExperimentSystem: p must be positive");
    for (const auto& e : experiments)
      require(e.dim() == p, "ExperimentSystem: experiment dimension mismatch");
  }
};

/// U_e B: rows of B at intervened nodes zeroed out.
inline Matrix apply_untouched_projection(const Experiment& e, const Matrix& b) {
  Matrix ub = b;
  for (int j : e.intervened()) ub.row(j).setZero();
  return ub;
}

/// I - U_e B.
inline Matrix i_minus_ub(const Experiment& e, const Matrix& b) {
  Matrix a = -apply_untouched_projection(e, b);
  a.diagonal().array() += 1.0;
  return a;
}

/// Concentration matrix Theta^e(B) = (I - U_e B)^T (I - U_e B).
inline Matrix theta_of(const StructureMatrix& b, const Experiment& e) {
  require(b.dim() == e.dim(), "theta_of: dimension mismatch between B and experiment");
  return gram(i_minus_ub(e, b.matrix()));
}

/// Covariance Sigma^e(B) = (I - U_e B)^{-1} (I - U_e B)^{-T}.
inline Matrix sigma_of(const StructureMatrix& b, const Experiment& e) {
  require(b.dim() == e.dim(), "sigma_of: dimension mismatch between B and experiment");
  Matrix a = i_minus_ub(e, b.matrix());
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible())
    throw model_error("sigma_of: I - U_e B is singular (invalid model)");
  Matrix ainv = lu.inverse();
  return outer_gram(ainv);
}

/// Largest singular value by power iteration on M^T M, with a dense SVD
/// fallback for small matrices when the iteration stalls.
inline double operator_norm(const Matrix& m, double rel_tol = 1e-10, int max_iter = 10000) {
  if (m.size() == 0) return 0.0;
  const double frob = m.norm();
  if (frob == 0.0) return 0.0;

  const Eigen::Index n = m.cols();
  Rng rng(0x5EEDC0DEull);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = m.transpose() * (m * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;  // v landed in the null space; norm dominated elsewhere
    const double lambda_new = v.dot(w);
    w /= nw;
    if (it > 0 && std::abs(lambda_new - lambda) <= rel_tol * std::abs(lambda_new)) {
      return std::sqrt(std::max(lambda_new, 0.0));
    }
    lambda = lambda_new;
    v = w;
  }
  if (std::max(m.rows(), m.cols()) <= 64) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
  }
  return std::sqrt(std::max(lambda, 0.0));
}

struct MembershipReport {
  bool member = true;
  std::vector<std::string> violations;
};

/// Diagnostic membership test for the class B(p, d, eta).
inline MembershipReport validate_membership(const StructureMatrix& b, const MatrixClassSpec& spec) {
  spec.check();
  MembershipReport rep;
  const Matrix& m = b.matrix();
  if (b.dim() != spec.p) {
    rep.violations.push_back("dimension: matrix is " + std::to_string(b.dim()) +
                             "x" + std::to_string(b.dim()) + ", spec has p=" +
                             std::to_string(spec.p));
  }
  const double norm = operator_norm(m);
  if (norm > 1.0 - spec.eta + 1e-9) {
    rep.violations.push_back("operator norm: " + std::to_string(norm) + " > " +
                             std::to_string(1.0 - spec.eta));
  }
  for (int i = 0; i < b.dim(); ++i) {
    int nnz = 0;
    for (int j = 0; j < b.dim(); ++j)
      if (m(i, j) != 0.0) ++nnz;
    if (nnz > spec.d) {
      rep.violations.push_back("in-degree: row " + std::to_string(i) + " has " +
                               std::to_string(nnz) + " non-zeros > d=" +
                               std::to_string(spec.d));
      break;
    }
  }
  rep.member = rep.violations.empty();
  return rep;
}

/// Per-experiment sample blocks and/or empirical covariances.
struct DatasetBundle {
  ExperimentSystem system;
  std::vector<Matrix> samples;      // one (n_e x p) block per experiment; may be empty
  std::vector<Matrix> covariances;  // always one (p x p) per experiment
  std::vector<long> block_sizes;    // n_e
  std::uint64_t seed = 0;

  bool has_samples() const { return !samples.empty(); }

  long total_samples() const {
    long n = 0;
    for (long ne : block_sizes) n += ne;
    return n;
  }

  static DatasetBundle from_covariances(ExperimentSystem sys, std::vector<Matrix> covs,
                                        std::vector<long> n_e = {}) {
    sys.check();
    require(static_cast<int>(covs.size()) == sys.size(),
            "DatasetBundle: one covariance per experiment required");
    DatasetBundle b;
    b.system = std::move(sys);
    b.covariances = std::move(covs);
    b.block_sizes = n_e.empty() ? std::vector<long>(b.covariances.size(), 0) : std::move(n_e);
    b.check(false);
    return b;
  }

  void check(bool verify_sample_covariance = true) const {
    system.check();
    require(static_cast<int>(covariances.size()) == system.size(),
            "DatasetBundle: covariance count mismatch");
    for (const Matrix& s : covariances) {
      require(s.rows() == system.p && s.cols() == system.p,
              "DatasetBundle: covariance shape mismatch");
      require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff()),
              "DatasetBundle: covariance not symmetric within 1e-12");
    }
    if (has_samples() && verify_sample_covariance) {
      require(samples.size() == covariances.size(), "DatasetBundle: sample block count mismatch");
      for (std::size_t e = 0; e < samples.size(); ++e) {
        const Matrix recon = outer_gram(samples[e].transpose()) / static_cast<double>(samples[e].rows());
        const double scale = std::max(1.0, covariances[e].cwiseAbs().maxCoeff());
        require((recon - covariances[e]).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                "DatasetBundle: stored covariance disagrees with samples");
      }
    }
  }
};

/// Block sizes when n samples are spread over E experiments; the remainder is
/// assigned round-robin to the first experiments.
inline std::vector<long> split_sample_counts(long n, int num_experiments) {
  require(num_experiments >= 1, "split_sample_counts: need at least one experiment");
  require(n >= num_experiments, "split_sample_counts: need n >= E");
  std::vector<long> out(static_cast<std::size_t>(num_experiments), n / num_experiments);
  for (long r = 0; r < n % num_experiments; ++r) ++out[static_cast<std::size_t>(r)];
  return out;
}

/// Draws interventional Gaussian data X_k^e = (I - U_e B)^{-1} Z_k^e.
/// Each experiment owns an independent stream derived from (seed, e), so the
/// result does not depend on evaluation order.
inline DatasetBundle sample_dataset(const StructureMatrix& b, const ExperimentSystem& system,
                                    long n, std::uint64_t seed, bool keep_samples = true) {
  system.check();
  require(b.dim() == system.p, "sample_dataset: B and system dimension mismatch");
  const int p = system.p;
  const int num_e = system.size();
  require(num_e >= 1, "sample_dataset: empty experiment system");

  DatasetBundle bundle;
  bundle.system = system;
  bundle.seed = seed;
  bundle.block_sizes = split_sample_counts(n, num_e);
  bundle.covariances.resize(static_cast<std::size_t>(num_e));
  if (keep_samples) bundle.samples.resize(static_cast<std::size_t>(num_e));

  for (int e = 0; e < num_e; ++e) {
    const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
    const long ne = bundle.block_sizes[static_cast<std::size_t>(e)];
    Matrix a = i_minus_ub(exp, b.matrix());
    Eigen::PartialPivLU<Matrix> lu(a);

    Rng rng(seed, derive_stream(seed, {0x5A4D50ull, static_cast<std::uint64_t>(e)}));
    Matrix x(ne, p);
    Vector z(p);
    for (long k = 0; k < ne; ++k) {
      for (int i = 0; i < p; ++i) z(i) = rng.normal();
      x.row(k) = lu.solve(z).transpose();
    }
    bundle.covariances[static_cast<std::size_t>(e)] =
        outer_gram(x.transpose()) / static_cast<double>(ne);
    if (keep_samples) bundle.samples[static_cast<std::size_t>(e)] = std::move(x);
  }
  return bundle;
}

/// Empirical covariances (1/n_e) sum_k X_k (X_k)^T, no mean subtraction.
inline std::vector<Matrix> empirical_covariances(const DatasetBundle& bundle) {
  require(bundle.has_samples(), "empirical_covariances: bundle carries no samples");
  std::vector<Matrix> covs;
  covs.reserve(bundle.samples.size());
  for (const Matrix& x : bundle.samples) {
    require(x.rows() > 0, "empirical_covariances: empty sample block");
    covs.push_back(outer_gram(x.transpose()) / static_cast<double>(x.rows()));
  }
  return covs;
}

}  // namespace lcsem

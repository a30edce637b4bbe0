#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "lcsem/io.hpp"
#include "lcsem/model.hpp"
#include "lcsem/rng.hpp"

namespace lcsem {

namespace detail {

/// Gaussian values on a 0/1 support, normalized to operator norm 1 - eta
/// (skipped for the zero matrix).
inline Matrix fill_and_normalize(const Matrix& adjacency, double eta, Rng& rng) {
  const Eigen::Index p = adjacency.rows();
  Matrix b = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      if (adjacency(i, j) != 0.0) b(i, j) = rng.normal();
  const double norm = operator_norm(b);
  if (norm > 0.0) b *= (1.0 - eta) / norm;
  return b;
}

}  // namespace detail

/// Random regular ground truth: every row draws d support indices without
/// replacement from the other nodes, standard normal values, then the whole
/// matrix is scaled to operator norm exactly 1 - eta.
inline StructureMatrix gen_random_regular(int p, int d, double eta, std::uint64_t seed) {
  require(p >= 2, "gen_random_regular: p must be >= 2");
  require(d >= 1 && d <= p - 1, "gen_random_regular: need 1 <= d <= p-1");
  require(eta > 0.0 && eta < 1.0, "gen_random_regular: eta must lie in (0,1)");
  Rng rng(seed, derive_stream(seed, {0x6772ull}));
  Matrix adj = Matrix::Zero(p, p);
  std::vector<int> pool;
  for (int i = 0; i < p; ++i) {
    pool.clear();
    for (int j = 0; j < p; ++j)
      if (j != i) pool.push_back(j);
    for (int j : rng.choose_without_replacement(pool, d)) adj(i, j) = 1.0;
  }
  return StructureMatrix(detail::fill_and_normalize(adj, eta, rng));
}

/// Disconnected d-cliques: floor(p/d) cliques of size d plus one of size
/// p mod d; all-ones-off-diagonal blocks, Gaussian values, same
/// normalization. d = 1 yields the zero matrix.
inline StructureMatrix gen_disconnected_cliques(int p, int d, double eta, std::uint64_t seed) {
  require(p >= 1, "gen_disconnected_cliques: p must be >= 1");
  require(d >= 1 && d <= p, "gen_disconnected_cliques: need 1 <= d <= p");
  require(eta > 0.0 && eta < 1.0, "gen_disconnected_cliques: eta must lie in (0,1)");
  Rng rng(seed, derive_stream(seed, {0x636Cull}));
  Matrix adj = Matrix::Zero(p, p);
  for (int start = 0; start < p; start += d) {
    const int end = std::min(start + d, p);
    for (int i = start; i < end; ++i)
      for (int j = start; j < end; ++j)
        if (i != j) adj(i, j) = 1.0;
  }
  return StructureMatrix(detail::fill_and_normalize(adj, eta, rng));
}

/// Ground truth from a CSV adjacency file: 0/1 files get Gaussian values on
/// the support; weighted files keep their values. Both are normalized to
/// operator norm 1 - eta.
inline StructureMatrix load_adjacency_csv(const std::string& path, double eta,
                                          std::uint64_t seed) {
  Matrix raw = read_matrix_csv(path);
  require(raw.rows() == raw.cols(), "load_adjacency_csv: matrix must be square");
  require(raw.allFinite(), "load_adjacency_csv: unreadable or non-finite values");
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    require(raw(i, i) == 0.0, "load_adjacency_csv: diagonal must be zero");

  bool binary = true;
  for (Eigen::Index i = 0; i < raw.rows() && binary; ++i)
    for (Eigen::Index j = 0; j < raw.cols() && binary; ++j)
      if (raw(i, j) != 0.0 && raw(i, j) != 1.0) binary = false;

  if (binary) {
    Rng rng(seed, derive_stream(seed, {0x61646Aull}));
    return StructureMatrix(detail::fill_and_normalize(raw, eta, rng));
  }
  const double norm = operator_norm(raw);
  if (norm > 0.0) raw *= (1.0 - eta) / norm;
  return StructureMatrix(std::move(raw));
}

struct PackingResult {
  std::vector<Matrix> matrices;  // 0/1 entries
  bool complete = true;          // false: retry cap hit, largest subset returned
  int attempts = 0;
};

inline long matrix_hamming_distance(const Matrix& a, const Matrix& b) {
  long dist = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (a(i, j) != b(i, j)) ++dist;
  return dist;
}

/// Packing-set hard instances: M = ceil(exp((m d / 16) log(1 + m/(2d))))
/// candidate 0/1 matrices with d-sparse rows drawn without replacement,
/// rejection-resampled until all pairwise Hamming distances reach m d / 2.
/// After 100 failed attempts the largest pairwise-valid subset found is
/// returned with complete = false.
inline PackingResult vg_packing(int m, int d, std::uint64_t seed) {
  require(m >= 2, "vg_packing: m must be >= 2");
  require(d >= 1 && 2 * d <= m, "vg_packing: need 1 <= d <= m/2");
  const double log_m_count =
      (static_cast<double>(m) * d / 16.0) * std::log1p(static_cast<double>(m) / (2.0 * d));
  require(log_m_count <= std::log(1e5), "vg_packing: requested family is too large");
  const long count = static_cast<long>(std::ceil(std::exp(log_m_count)));
  const long min_dist = static_cast<long>(m) * d / 2;

  Rng rng(seed, derive_stream(seed, {0x7647ull}));
  std::vector<int> all(static_cast<std::size_t>(m));
  std::iota(all.begin(), all.end(), 0);

  auto draw_candidate = [&]() {
    Matrix h = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j : rng.choose_without_replacement(all, d)) h(i, j) = 1.0;
    return h;
  };

  PackingResult res;
  std::vector<Matrix> best_subset;
  const int retry_cap = 100;
  for (int attempt = 0; attempt < retry_cap; ++attempt) {
    res.attempts = attempt + 1;
    std::vector<Matrix> cand;
    cand.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) cand.push_back(draw_candidate());

    bool ok = true;
    for (std::size_t a = 0; a < cand.size() && ok; ++a)
      for (std::size_t b = a + 1; b < cand.size() && ok; ++b)
        if (matrix_hamming_distance(cand[a], cand[b]) < min_dist) ok = false;
    if (ok) {
      res.matrices = std::move(cand);
      res.complete = true;
      return res;
    }

    // greedy pairwise-valid subset, kept if it is the largest so far
    std::vector<Matrix> subset;
    for (const Matrix& h : cand) {
      bool fits = true;
      for (const Matrix& s : subset)
        if (matrix_hamming_distance(h, s) < min_dist) {
          fits = false;
          break;
        }
      if (fits) subset.push_back(h);
    }
    if (subset.size() > best_subset.size()) best_subset = std::move(subset);
  }
  res.matrices = std::move(best_subset);
  res.complete = false;
  return res;
}

/// Squared Frobenius error ||Bhat - Bstar||_F^2.
inline double frobenius_error(const StructureMatrix& estimate, const StructureMatrix& truth) {
  require(estimate.dim() == truth.dim(), "frobenius_error: shape mismatch");
  return (estimate.matrix() - truth.matrix()).squaredNorm();
}

}  // namespace lcsem

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lcsem/design.hpp"
#include "lcsem/lasso.hpp"
#include "lcsem/model.hpp"

namespace lcsem {

/// The per-node linear system T_i b = t_i built from interventional
/// covariances: one row per (experiment e, intervened node j) with node i
/// untouched in e. Columns run over [p] \ {i} in ascending node order.
struct RowSystem {
  int node = -1;
  Matrix rows;   // m_i x (p-1)
  Vector rhs;    // m_i
  std::vector<std::pair<int, int>> row_tags;  // (experiment index, intervened node)
  bool no_rows = false;  // node untouched in no experiment

  /// Column index of node j in the reduced coordinate system (j != node).
  int col_of(int j) const { return j < node ? j : j - 1; }
};

/// Builds T_i / t_i from the covariance list. Row (e, j) holds
/// e_j^T (J_e + Sigma^e U_e) with the i-th coordinate dropped; the rhs entry
/// is Sigma^e_{j,i}. With exact_interventions the entries on intervened
/// columns are the hard-coded constants 1 (at j) and 0 (on J_e \ {j}); in
/// population mode they are read from Sigma^e, where the two coincide.
inline RowSystem assemble_row_system(const std::vector<Matrix>& covariances,
                                     const ExperimentSystem& system, int node,
                                     bool exact_interventions) {
  system.check();
  require(node >= 0 && node < system.p, "assemble_row_system: node out of range");
  require(static_cast<int>(covariances.size()) == system.size(),
          "assemble_row_system: one covariance per experiment required");
  const int p = system.p;
  for (const Matrix& s : covariances)
    require(s.rows() == p && s.cols() == p, "assemble_row_system: covariance shape mismatch");

  RowSystem rs;
  rs.node = node;

  long m = 0;
  for (const Experiment& e : system.experiments)
    if (!e.is_intervened(node)) m += static_cast<long>(e.intervened().size());
  if (m == 0) {
    rs.no_rows = true;
    rs.rows = Matrix::Zero(0, p - 1);
    rs.rhs = Vector::Zero(0);
    return rs;
  }

  rs.rows = Matrix::Zero(m, p - 1);
  rs.rhs = Vector::Zero(m);
  rs.row_tags.reserve(static_cast<std::size_t>(m));

  long row = 0;
  for (int e = 0; e < system.size(); ++e) {
    const Experiment& exp = system.experiments[static_cast<std::size_t>(e)];
    if (exp.is_intervened(node)) continue;
    const Matrix& sigma = covariances[static_cast<std::size_t>(e)];
    for (int j : exp.intervened()) {
      for (int c = 0; c < p; ++c) {
        if (c == node) continue;
        double value;
        if (exact_interventions && exp.is_intervened(c))
          value = (c == j) ? 1.0 : 0.0;
        else
          value = sigma(j, c);
        rs.rows(row, rs.col_of(c)) = value;
      }
      rs.rhs(row) = sigma(j, node);
      rs.row_tags.emplace_back(e, j);
      ++row;
    }
  }
  return rs;
}

struct LlcRowStat {
  int node = -1;
  long sweeps = 0;
  double kkt_residual = 0.0;
  bool converged = false;
  bool no_rows = false;
};

struct LlcReport {
  std::vector<LlcRowStat> rows;
  bool system_separating = true;
  std::string warning;

  bool all_converged() const {
    for (const auto& r : rows)
      if (!r.no_rows && !r.converged) return false;
    return true;
  }
};

struct LlcOptions {
  LassoOptions lasso;
  bool exact_interventions = true;
};

namespace detail {

inline void scatter_row(Matrix& b, const RowSystem& rs, const Vector& coef) {
  const int p = static_cast<int>(b.rows());
  for (int c = 0; c < p; ++c)
    if (c != rs.node) b(rs.node, c) = coef(rs.col_of(c));
}

}  // namespace detail

/// LLC estimate from covariances: solve the l1-penalized least squares
/// problem of every row system and scatter the solutions into B with a zero
/// diagonal. Per-row solver failures are recorded in the report; other rows
/// are still solved.
inline std::pair<StructureMatrix, LlcReport> estimate_llc(const std::vector<Matrix>& covariances,
                                                          const ExperimentSystem& system,
                                                          double lambda,
                                                          const LlcOptions& opts = {}) {
  const int p = system.p;
  LlcReport report;
  const SeparationCheck sep = is_completely_separating(system);
  report.system_separating = sep.separating;
  if (!sep.separating)
    report.warning = "system is not completely separating; estimate may be non-unique";

  Matrix b = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    RowSystem rs = assemble_row_system(covariances, system, i, opts.exact_interventions);
    LlcRowStat stat;
    stat.node = i;
    if (rs.no_rows) {
      stat.no_rows = true;
    } else {
      LassoResult lr = lasso_cd(rs.rows, rs.rhs, lambda, opts.lasso);
      stat.sweeps = lr.sweeps;
      stat.kkt_residual = lr.kkt_residual;
      stat.converged = lr.converged;
      detail::scatter_row(b, rs, lr.coef);
    }
    report.rows.push_back(stat);
  }
  return {StructureMatrix(std::move(b)), std::move(report)};
}

inline std::pair<StructureMatrix, LlcReport> estimate_llc(const DatasetBundle& bundle,
                                                          double lambda,
                                                          const LlcOptions& opts = {}) {
  return estimate_llc(bundle.covariances, bundle.system, lambda, opts);
}

struct LambdaPathEntry {
  double lambda = 0.0;
  StructureMatrix estimate;
  LlcReport report;
};

/// Solves the LLC problems along a strictly descending lambda grid, warm
/// starting every row problem from its solution at the previous lambda.
inline std::vector<LambdaPathEntry> lambda_path(const std::vector<Matrix>& covariances,
                                                const ExperimentSystem& system,
                                                const std::vector<double>& grid,
                                                const LlcOptions& opts = {}) {
  require(!grid.empty(), "lambda_path: empty grid");
  for (std::size_t g = 1; g < grid.size(); ++g)
    require(grid[g] < grid[g - 1], "lambda_path: grid must be strictly descending");

  const int p = system.p;
  const SeparationCheck sep = is_completely_separating(system);

  std::vector<RowSystem> systems;
  systems.reserve(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i)
    systems.push_back(assemble_row_system(covariances, system, i, opts.exact_interventions));

  std::vector<Vector> warm(static_cast<std::size_t>(p), Vector::Zero(p - 1));
  std::vector<LambdaPathEntry> path;
  path.reserve(grid.size());

  for (double lambda : grid) {
    LambdaPathEntry entry;
    entry.lambda = lambda;
    entry.report.system_separating = sep.separating;
    Matrix b = Matrix::Zero(p, p);
    for (int i = 0; i < p; ++i) {
      const RowSystem& rs = systems[static_cast<std::size_t>(i)];
      LlcRowStat stat;
      stat.node = i;
      if (rs.no_rows) {
        stat.no_rows = true;
      } else {
        LassoResult lr = lasso_cd(rs.rows, rs.rhs, lambda, opts.lasso,
                                  &warm[static_cast<std::size_t>(i)]);
        warm[static_cast<std::size_t>(i)] = lr.coef;
        stat.sweeps = lr.sweeps;
        stat.kkt_residual = lr.kkt_residual;
        stat.converged = lr.converged;
        detail::scatter_row(b, rs, lr.coef);
      }
      entry.report.rows.push_back(stat);
    }
    entry.estimate = StructureMatrix(std::move(b));
    path.push_back(std::move(entry));
  }
  return path;
}

/// Smallest lambda that provably yields the all-zero estimate,
/// max_i 2 ||T_i^T t_i||_inf (the KKT bound at b = 0).
inline double llc_lambda_max(const std::vector<Matrix>& covariances,
                             const ExperimentSystem& system, bool exact_interventions = true) {
  double bound = 0.0;
  for (int i = 0; i < system.p; ++i) {
    RowSystem rs = assemble_row_system(covariances, system, i, exact_interventions);
    if (rs.no_rows) continue;
    bound = std::max(bound, 2.0 * (rs.rows.transpose() * rs.rhs).cwiseAbs().maxCoeff());
  }
  return bound;
}

}  // namespace lcsem

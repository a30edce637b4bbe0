#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lcsem/alm.hpp"
#include "lcsem/admm.hpp"
#include "lcsem/design.hpp"
#include "lcsem/graphs.hpp"
#include "lcsem/llc.hpp"
#include "lcsem/model.hpp"

namespace lcsem {

enum class GraphKind { random_regular, disconnected_cliques, adjacency_file };
enum class SweepAxis { n, p, d, k, drop };

struct BenchConfig {
  GraphKind graph = GraphKind::random_regular;
  std::string adjacency_path;

  int p = 10;
  int d = 2;
  double eta = 0.5;
  DesignKind design = DesignKind::binary;
  int design_k = 1;

  SweepAxis sweep = SweepAxis::n;
  std::vector<double> sweep_values{2000, 8000, 32000};
  long n = 8000;  // sample budget when the sweep axis is not n

  int repetitions = 32;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency

  std::vector<std::string> estimators{"llc", "init", "loc"};
  std::vector<double> lambdas_llc;   // empty: grid_size log-spaced on [1e-4,1e1] x KKT bound
  std::vector<double> lambdas_init;  // empty: grid_size log-spaced on [1e-4,1e1]
  std::vector<double> lambdas_loc;   // empty: grid_size log-spaced on [1e-4,1e1]
  int grid_size = 20;

  bool record_timings = true;
  bool fast_likelihood = false;

  AdmmOptions admm;
  AlmOptions alm;
  LlcOptions llc;

  bool has_estimator(const std::string& tag) const {
    return std::find(estimators.begin(), estimators.end(), tag) != estimators.end();
  }

  void validate() const {
    require(repetitions >= 1, "BenchConfig: repetitions must be >= 1");
    require(!sweep_values.empty(), "BenchConfig: sweep_values must not be empty");
    require(!estimators.empty(), "BenchConfig: at least one estimator required");
    require(p >= 2, "BenchConfig: p must be >= 2");
    if (graph == GraphKind::adjacency_file)
      require(!adjacency_path.empty(), "BenchConfig: adjacency_file graph needs a path");
  }
};

struct RunRecord {
  double sweep_value = 0.0;
  int repetition = 0;
  std::string estimator;
  double sq_frob_error = 0.0;
  double lambda = 0.0;
  double wall_time_ms = 0.0;
  std::string flags;
};

struct OracleChoice {
  double lambda = 0.0;
  StructureMatrix estimate;
  double sq_error = kInf;
  std::size_t index = 0;
};

/// Oracle tuning: the candidate closest to the truth in squared Frobenius
/// error; ties resolved toward the smaller lambda.
inline OracleChoice oracle_select(const std::vector<std::pair<double, StructureMatrix>>& candidates,
                                  const StructureMatrix& truth) {
  require(!candidates.empty(), "oracle_select: empty candidate list");
  OracleChoice best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double err = frobenius_error(candidates[i].second, truth);
    const bool better = err < best.sq_error ||
                        (err == best.sq_error && candidates[i].first < best.lambda);
    if (i == 0 || better) {
      best.lambda = candidates[i].first;
      best.estimate = candidates[i].second;
      best.sq_error = err;
      best.index = i;
    }
  }
  return best;
}

inline std::vector<double> log_spaced_grid(double lo, double hi, int count) {
  require(count >= 1 && lo > 0.0 && hi >= lo, "log_spaced_grid: bad parameters");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = hi;
    return g;
  }
  const double step = (std::log(hi) - std::log(lo)) / (count - 1);
  for (int i = 0; i < count; ++i)
    g[static_cast<std::size_t>(i)] = std::exp(std::log(hi) - i * step);  // descending
  return g;
}

struct BenchResult {
  std::vector<RunRecord> records;
  int failure_count = 0;
  std::vector<std::string> failure_messages;

  std::string results_csv() const {
    std::string out = "sweep_value,repetition,estimator,sq_frob_error,lambda,wall_time_ms,flags\n";
    char buf[320];
    for (const RunRecord& r : records) {
      std::snprintf(buf, sizeof(buf), "%.17g,%d,%s,%.17g,%.17g,%.3f,%s\n", r.sweep_value,
                    r.repetition, r.estimator.c_str(), r.sq_frob_error, r.lambda, r.wall_time_ms,
                    r.flags.c_str());
      out += buf;
    }
    return out;
  }

  std::vector<double> errors(double sweep_value, const std::string& estimator) const {
    std::vector<double> out;
    for (const RunRecord& r : records)
      if (r.sweep_value == sweep_value && r.estimator == estimator)
        out.push_back(r.sq_frob_error);
    return out;
  }

  std::string summary_csv() const {
    std::map<std::pair<double, std::string>, std::vector<double>> cells;
    for (const RunRecord& r : records)
      cells[{r.sweep_value, r.estimator}].push_back(r.sq_frob_error);
    std::string out = "sweep_value,estimator,count,median_sq_frob_error,mean_sq_frob_error\n";
    char buf[256];
    for (auto& [key, errs] : cells) {
      const double med = median(errs);
      double mean = 0.0;
      for (double v : errs) mean += v;
      mean /= static_cast<double>(errs.size());
      std::snprintf(buf, sizeof(buf), "%.17g,%s,%zu,%.17g,%.17g\n", key.first, key.second.c_str(),
                    errs.size(), med, mean);
      out += buf;
    }
    return out;
  }

  static double median(std::vector<double> v) {
    require(!v.empty(), "median: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  }
};

namespace detail {

struct ResolvedCell {
  int p;
  int d;
  long n;
  ExperimentSystem system;
};

inline ResolvedCell resolve_cell(const BenchConfig& cfg, double sweep_value) {
  ResolvedCell cell;
  cell.p = cfg.p;
  cell.d = cfg.d;
  cell.n = cfg.n;
  int k = cfg.design_k;
  int drop = 0;
  switch (cfg.sweep) {
    case SweepAxis::n:
      cell.n = static_cast<long>(sweep_value);
      break;
    case SweepAxis::p:
      cell.p = static_cast<int>(sweep_value);
      break;
    case SweepAxis::d:
      cell.d = static_cast<int>(sweep_value);
      break;
    case SweepAxis::k:
      k = static_cast<int>(sweep_value);
      break;
    case SweepAxis::drop:
      drop = static_cast<int>(sweep_value);
      break;
  }
  if (cfg.sweep == SweepAxis::k) {
    cell.system = design_bounded(cell.p, k);
  } else if (cfg.sweep == SweepAxis::drop) {
    // robustness mode: single-node system with the last `drop` experiments removed
    cell.system = design_single_node(cell.p);
    require(drop >= 0 && drop < cell.p, "bench: drop count out of range");
    cell.system.experiments.erase(cell.system.experiments.end() - drop,
                                  cell.system.experiments.end());
  } else {
    cell.system = make_design(cfg.design, cell.p, k);
  }
  return cell;
}

inline StructureMatrix make_truth(const BenchConfig& cfg, const ResolvedCell& cell,
                                  std::uint64_t truth_seed) {
  switch (cfg.graph) {
    case GraphKind::random_regular:
      return gen_random_regular(cell.p, cell.d, cfg.eta, truth_seed);
    case GraphKind::disconnected_cliques:
      return gen_disconnected_cliques(cell.p, cell.d, cfg.eta, truth_seed);
    case GraphKind::adjacency_file:
      return load_adjacency_csv(cfg.adjacency_path, cfg.eta, truth_seed);
  }
  throw invalid_input("bench: unknown graph kind");
}

inline std::string solver_flags(const SolverReport& rep) {
  std::string f = rep.status;
  if (rep.fallbacks > 0) f += ";fallbacks=" + std::to_string(rep.fallbacks);
  return f;
}

}  // namespace detail

/// Runs one benchmark cell repetition; returns one record per estimator.
/// Deterministic given (config, sweep index, repetition).
inline std::vector<RunRecord> run_benchmark_cell(const BenchConfig& cfg, std::size_t sweep_idx,
                                                 int repetition) {
  using clock = std::chrono::steady_clock;
  const double sweep_value = cfg.sweep_values[sweep_idx];
  const detail::ResolvedCell cell = detail::resolve_cell(cfg, sweep_value);

  const std::uint64_t truth_seed =
      derive_stream(cfg.seed, {0x7472ull, sweep_idx, static_cast<std::uint64_t>(repetition)});
  const std::uint64_t data_seed =
      derive_stream(cfg.seed, {0x6474ull, sweep_idx, static_cast<std::uint64_t>(repetition)});

  const StructureMatrix truth = detail::make_truth(cfg, cell, truth_seed);
  const DatasetBundle bundle =
      sample_dataset(truth, cell.system, cell.n, data_seed, /*keep_samples=*/false);
  const std::vector<Matrix>& covs = bundle.covariances;

  std::vector<RunRecord> out;
  auto push_record = [&](const std::string& tag, double err, double lambda, double ms,
                         std::string flags) {
    RunRecord r;
    r.sweep_value = sweep_value;
    r.repetition = repetition;
    r.estimator = tag;
    r.sq_frob_error = err;
    r.lambda = lambda;
    r.wall_time_ms = cfg.record_timings ? ms : 0.0;
    r.flags = std::move(flags);
    out.push_back(std::move(r));
  };

  // --- LLC ---
  if (cfg.has_estimator("llc")) {
    const auto t0 = clock::now();
    std::vector<double> grid = cfg.lambdas_llc;
    if (grid.empty()) {
      const double bound = std::max(llc_lambda_max(covs, cell.system), 1e-12);
      grid = log_spaced_grid(1e-4 * bound, 1e1 * bound, cfg.grid_size);
    }
    auto path = lambda_path(covs, cell.system, grid, cfg.llc);
    std::vector<std::pair<double, StructureMatrix>> cands;
    cands.reserve(path.size());
    for (auto& entry : path) cands.emplace_back(entry.lambda, std::move(entry.estimate));
    const OracleChoice choice = oracle_select(cands, truth);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    const LlcReport& rep = path[choice.index].report;
    push_record("llc", choice.sq_error, choice.lambda, ms,
                rep.all_converged() ? "converged" : "row_cap");
  }

  // --- MLE stage 1: ADMM initialization with a warm-started lambda sweep ---
  StructureMatrix b_init_choice;
  bool have_init = false;
  std::string init_flags;
  if (cfg.has_estimator("init") || cfg.has_estimator("loc")) {
    const auto t0 = clock::now();
    std::vector<double> grid =
        cfg.lambdas_init.empty() ? log_spaced_grid(1e-4, 1e1, cfg.grid_size) : cfg.lambdas_init;
    AdmmOptions admm_opts = cfg.admm;
    admm_opts.record_timings = cfg.record_timings;
    std::vector<std::pair<double, StructureMatrix>> cands;
    std::vector<std::string> flags;
    AdmmState warm;
    bool have_warm = false;
    for (double lambda : grid) {
      AdmmResult r = admm_init(covs, cell.system, lambda, admm_opts, have_warm ? &warm : nullptr);
      warm = std::move(r.state);
      have_warm = true;
      flags.push_back(detail::solver_flags(r.report));
      cands.emplace_back(lambda, std::move(r.b_init));
    }
    const OracleChoice choice = oracle_select(cands, truth);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    b_init_choice = choice.estimate;
    have_init = true;
    init_flags = flags[choice.index];
    if (cfg.has_estimator("init"))
      push_record("init", choice.sq_error, choice.lambda, ms, init_flags);
  }

  // --- MLE stage 2: ALM refinement inside the oracle ball ---
  if (cfg.has_estimator("loc") && have_init) {
    const auto t0 = clock::now();
    const double radius = 2.0 * std::sqrt(frobenius_error(b_init_choice, truth));
    std::vector<double> grid =
        cfg.lambdas_loc.empty() ? log_spaced_grid(1e-4, 1e1, cfg.grid_size) : cfg.lambdas_loc;
    AlmOptions alm_opts = cfg.alm;
    alm_opts.record_timings = cfg.record_timings;
    std::vector<std::pair<double, StructureMatrix>> cands;
    std::vector<std::string> flags;
    for (double lambda : grid) {
      AlmResult r = alm_refine(covs, cell.system, b_init_choice, radius, lambda, alm_opts);
      flags.push_back(detail::solver_flags(r.report));
      cands.emplace_back(lambda, std::move(r.b_loc));
    }
    const OracleChoice choice = oracle_select(cands, truth);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    push_record("loc", choice.sq_error, choice.lambda, ms, flags[choice.index]);
  }

  // --- stress mode: unconstrained likelihood from a random triangular start ---
  if (cfg.has_estimator("unconstr")) {
    const auto t0 = clock::now();
    const std::uint64_t init_seed =
        derive_stream(cfg.seed, {0x756Eull, sweep_idx, static_cast<std::uint64_t>(repetition)});
    Rng rng(init_seed);
    Matrix start = Matrix::Zero(cell.p, cell.p);
    for (int i = 0; i < cell.p; ++i)
      for (int j = i + 1; j < cell.p; ++j) start(i, j) = rng.normal() * std::sqrt(10.0);
    std::vector<double> grid =
        cfg.lambdas_loc.empty() ? log_spaced_grid(1e-4, 1e1, cfg.grid_size) : cfg.lambdas_loc;
    AlmOptions alm_opts = cfg.alm;
    alm_opts.record_timings = cfg.record_timings;
    std::vector<std::pair<double, StructureMatrix>> cands;
    std::vector<std::string> flags;
    for (double lambda : grid) {
      AlmResult r = alm_refine(covs, cell.system, StructureMatrix::zeros(cell.p), kInf, lambda,
                               alm_opts, &start);
      flags.push_back(detail::solver_flags(r.report));
      cands.emplace_back(lambda, std::move(r.b_loc));
    }
    const OracleChoice choice = oracle_select(cands, truth);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    push_record("unconstr", choice.sq_error, choice.lambda, ms, flags[choice.index]);
  }

  return out;
}

/// Full benchmark: every (sweep value, repetition) is an independent work
/// item executed by a bounded worker pool; records are sorted before
/// emission, so the output does not depend on scheduling.
inline BenchResult run_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  const std::size_t cells = cfg.sweep_values.size();
  const std::size_t tasks = cells * static_cast<std::size_t>(cfg.repetitions);

  std::vector<std::vector<RunRecord>> slots(tasks);
  std::vector<std::string> errors(tasks);
  std::atomic<std::size_t> next{0};

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::min<unsigned>(hw, static_cast<unsigned>(tasks));

  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks) return;
      const std::size_t sweep_idx = t / static_cast<std::size_t>(cfg.repetitions);
      const int rep = static_cast<int>(t % static_cast<std::size_t>(cfg.repetitions));
      try {
        slots[t] = run_benchmark_cell(cfg, sweep_idx, rep);
      } catch (const std::exception& ex) {
        errors[t] = ex.what();
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BenchResult res;
  for (std::size_t t = 0; t < tasks; ++t) {
    if (!errors[t].empty()) {
      ++res.failure_count;
      const std::size_t sweep_idx = t / static_cast<std::size_t>(cfg.repetitions);
      res.failure_messages.push_back(
          "sweep_value=" + std::to_string(cfg.sweep_values[sweep_idx]) + " repetition=" +
          std::to_string(t % static_cast<std::size_t>(cfg.repetitions)) + ": " + errors[t]);
      continue;
    }
    for (auto& r : slots[t]) res.records.push_back(std::move(r));
  }
  std::sort(res.records.begin(), res.records.end(), [](const RunRecord& a, const RunRecord& b) {
    if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
    if (a.repetition != b.repetition) return a.repetition < b.repetition;
    return a.estimator < b.estimator;
  });
  return res;
}

// ---------------------------------------------------------------------------
// plain-text config files: `key = value` lines, '#' comments
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::strtod(item.c_str(), nullptr));
  }
  return out;
}

}  // namespace detail

inline BenchConfig parse_bench_config(std::istream& in) {
  BenchConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos,
            "bench config: line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "graph") {
      if (value == "random_regular")
        cfg.graph = GraphKind::random_regular;
      else if (value == "disconnected_cliques")
        cfg.graph = GraphKind::disconnected_cliques;
      else if (value == "adjacency_file")
        cfg.graph = GraphKind::adjacency_file;
      else
        throw invalid_input("bench config: unknown graph '" + value + "'");
    } else if (key == "adjacency") {
      cfg.adjacency_path = value;
    } else if (key == "p") {
      cfg.p = std::stoi(value);
    } else if (key == "d") {
      cfg.d = std::stoi(value);
    } else if (key == "eta") {
      cfg.eta = std::strtod(value.c_str(), nullptr);
    } else if (key == "design") {
      if (value == "single")
        cfg.design = DesignKind::single_node;
      else if (value == "binary")
        cfg.design = DesignKind::binary;
      else if (value == "bounded")
        cfg.design = DesignKind::bounded;
      else
        throw invalid_input("bench config: unknown design '" + value + "'");
    } else if (key == "k") {
      cfg.design_k = std::stoi(value);
    } else if (key == "sweep") {
      if (value == "n")
        cfg.sweep = SweepAxis::n;
      else if (value == "p")
        cfg.sweep = SweepAxis::p;
      else if (value == "d")
        cfg.sweep = SweepAxis::d;
      else if (value == "k")
        cfg.sweep = SweepAxis::k;
      else if (value == "drop")
        cfg.sweep = SweepAxis::drop;
      else
        throw invalid_input("bench config: unknown sweep axis '" + value + "'");
    } else if (key == "sweep_values") {
      cfg.sweep_values = detail::parse_double_list(value);
    } else if (key == "n") {
      cfg.n = std::stol(value);
    } else if (key == "repetitions") {
      cfg.repetitions = std::stoi(value);
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "threads") {
      cfg.threads = std::stoi(value);
    } else if (key == "estimators") {
      cfg.estimators.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!detail::trim(item).empty()) cfg.estimators.push_back(detail::trim(item));
    } else if (key == "lambdas_llc") {
      cfg.lambdas_llc = detail::parse_double_list(value);
    } else if (key == "lambdas_init") {
      cfg.lambdas_init = detail::parse_double_list(value);
    } else if (key == "lambdas_loc") {
      cfg.lambdas_loc = detail::parse_double_list(value);
    } else if (key == "grid_size") {
      cfg.grid_size = std::stoi(value);
    } else if (key == "timing") {
      cfg.record_timings = (value == "on" || value == "true" || value == "1");
    } else if (key == "fast_likelihood") {
      cfg.fast_likelihood = (value == "on" || value == "true" || value == "1");
    } else if (key == "admm_max_iter") {
      cfg.admm.max_iter = std::stoi(value);
    } else if (key == "alm_max_outer") {
      cfg.alm.max_outer = std::stoi(value);
    } else {
      throw invalid_input("bench config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline BenchConfig parse_bench_config_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "bench config: cannot open " + path);
  return parse_bench_config(f);
}

}  // namespace lcsem

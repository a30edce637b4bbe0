// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Heavier statistical checks share a single benchmark run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "lcsem/lcsem.hpp"

using namespace lcsem;
using clock_type = std::chrono::steady_clock;

namespace {

struct Criterion {
  int number;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Criterion> g_results;

void record(int number, const std::string& name, bool pass, const std::string& detail) {
  g_results.push_back({number, name, pass, detail});
  std::printf("[%s] criterion %2d: %s — %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::vector<Matrix> population_covariances(const StructureMatrix& b, const ExperimentSystem& sys) {
  std::vector<Matrix> covs;
  for (const Experiment& e : sys.experiments) covs.push_back(sigma_of(b, e));
  return covs;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

char buf[512];

// --- criterion 1: population-level exact recovery -------------------------

void criterion_1() {
  const auto t0 = clock_type::now();
  double worst = 0.0;
  bool ok = true;
  auto sys = design_binary(8);
  for (std::uint64_t seed = 0; seed < 16 && ok; ++seed) {
    auto truth = gen_random_regular(8, 2, 0.5, 10'000 + seed);
    auto covs = population_covariances(truth, sys);
    auto [est, rep] = estimate_llc(covs, sys, 1e-10);
    const double err = std::sqrt(frobenius_error(est, truth));
    worst = std::max(worst, err);
    ok = ok && err <= 1e-6 && rep.all_converged();
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 10.0;
  std::snprintf(buf, sizeof(buf),
                "16 draws from B(8,2,0.5), binary design: max ||Bhat-B*||_F = %.3g (<= 1e-6), %.1f s (< 10 s)",
                worst, secs);
  record(1, "population exact recovery", ok, buf);
}

// --- criteria 2, 3, 12: shared n-sweep benchmark ---------------------------

BenchConfig rate_config() {
  BenchConfig cfg;
  cfg.graph = GraphKind::random_regular;
  cfg.p = 10;
  cfg.d = 2;
  cfg.eta = 0.5;
  cfg.design = DesignKind::binary;
  cfg.sweep = SweepAxis::n;
  cfg.sweep_values = {2000, 8000, 32000};
  cfg.repetitions = 16;
  cfg.seed = 20'240'817;
  cfg.estimators = {"llc", "init", "loc"};
  cfg.grid_size = 20;
  cfg.record_timings = false;  // byte-identical reruns (criterion 12)
  return cfg;
}

BenchResult criterion_2(double* bench_seconds) {
  const auto t0 = clock_type::now();
  BenchConfig cfg = rate_config();
  BenchResult res = run_benchmark(cfg);
  const double secs = seconds_since(t0);
  *bench_seconds = secs;

  bool ok = res.failure_count == 0 && secs < 600.0;
  std::string detail;
  for (const std::string est : {"llc", "init", "loc"}) {
    std::vector<double> medians;
    for (double n : cfg.sweep_values)
      medians.push_back(BenchResult::median(res.errors(n, est)));
    const double slope = fit_loglog_slope(cfg.sweep_values, medians);
    ok = ok && slope >= -1.3 && slope <= -0.7;
    for (std::size_t i = 1; i < medians.size(); ++i)
      ok = ok && medians[i] <= medians[i - 1];  // medians non-increasing in n
    std::snprintf(buf, sizeof(buf), "%s slope %.3f  ", est.c_str(), slope);
    detail += buf;
  }
  std::snprintf(buf, sizeof(buf), "(target [-1.3, -0.7]); 16 reps, oracle lambda; %.0f s (< 600 s)",
                secs);
  detail += buf;
  record(2, "1/n error rate", ok, detail);
  return res;
}

void criterion_3(const BenchResult& res) {
  const double llc = BenchResult::median(res.errors(8000, "llc"));
  const double init = BenchResult::median(res.errors(8000, "init"));
  const double loc = BenchResult::median(res.errors(8000, "loc"));
  const bool ok = loc <= 1.05 * init && init <= 1.05 * llc;
  std::snprintf(buf, sizeof(buf),
                "medians at n=8000: loc %.4g <= 1.05 x init %.4g <= 1.05 x llc %.4g", loc, init,
                llc);
  record(3, "estimator ordering loc <= init <= llc (5% slack)", ok, buf);
}

void criterion_12(const BenchResult& first) {
  BenchResult second = run_benchmark(rate_config());
  const std::string csv1 = first.results_csv();
  const std::string csv2 = second.results_csv();
  const bool ok = csv1 == csv2 && !csv1.empty();
  std::snprintf(buf, sizeof(buf), "full n-sweep benchmark re-run: results CSV %s (%zu bytes)",
                ok ? "byte-identical" : "DIFFERS", csv1.size());
  record(12, "benchmark determinism", ok, buf);
}

// --- criterion 4: disconnected cliques -------------------------------------

void criterion_4() {
  BenchConfig cfg;
  cfg.graph = GraphKind::disconnected_cliques;
  cfg.p = 12;
  cfg.d = 3;
  cfg.eta = 0.5;
  cfg.design = DesignKind::binary;
  cfg.sweep = SweepAxis::n;
  cfg.sweep_values = {8000};
  cfg.repetitions = 16;
  cfg.seed = 515'151;
  cfg.estimators = {"init", "loc"};
  cfg.grid_size = 12;
  cfg.record_timings = false;
  BenchResult res = run_benchmark(cfg);

  const double init = BenchResult::median(res.errors(8000, "init"));
  const double loc = BenchResult::median(res.errors(8000, "loc"));
  const double better = std::min(init, loc);
  const bool ok = res.failure_count == 0 && init <= 2.0 * better && loc <= 2.0 * better;
  std::snprintf(buf, sizeof(buf),
                "cliques p=12,d=3,n=8000: median init %.4g, loc %.4g; both within 2x of %.4g",
                init, loc, better);
  record(4, "cliques: init and loc within 2x of the better", ok, buf);
}

// --- criterion 5: low-rank likelihood path ----------------------------------

void criterion_5() {
  // agreement on 100 random (B, e) pairs at p = 20
  Rng rng(606);
  std::vector<int> all(20);
  for (int i = 0; i < 20; ++i) all[i] = i;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto b = gen_random_regular(20, 3, 0.5, 7'000 + trial);
    ExperimentSystem sys{
        20, {Experiment(20, rng.choose_without_replacement(all, rng.uniform_int(4)))}};
    auto bundle = sample_dataset(b, sys, 120, 8'000 + trial, false);
    const double naive = neg_log_likelihood(b, bundle.covariances, sys, false);
    const double fast = neg_log_likelihood(b, bundle.covariances, sys, true);
    worst_rel = std::max(worst_rel, std::abs(fast - naive) / std::abs(naive));
  }
  const bool agree_ok = worst_rel <= 1e-9;

  // wall time at p = 50, E = 25, |J_e| = 2
  const int p = 50, num_e = 25;
  auto b = gen_random_regular(p, 3, 0.5, 909);
  ExperimentSystem sys;
  sys.p = p;
  std::vector<int> pool(p);
  for (int i = 0; i < p; ++i) pool[i] = i;
  Rng rng2(707);
  for (int e = 0; e < num_e; ++e)
    sys.experiments.emplace_back(p, rng2.choose_without_replacement(pool, 2));
  auto bundle = sample_dataset(b, sys, 50 * num_e, 1'234, false);

  auto time_path = [&](bool fast) {
    std::vector<double> times;
    volatile double sink = 0.0;
    for (int rep = 0; rep < 15; ++rep) {
      const auto t0 = clock_type::now();
      sink = sink + neg_log_likelihood(b, bundle.covariances, sys, fast);
      times.push_back(
          std::chrono::duration<double, std::milli>(clock_type::now() - t0).count());
    }
    (void)sink;
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
  };
  const double t_naive = time_path(false);
  const double t_fast = time_path(true);
  const bool time_ok = t_fast <= 0.5 * t_naive;

  std::snprintf(buf, sizeof(buf),
                "max rel diff %.2e (<= 1e-9) on 100 trials; p=50,E=25,|J|=2: fast %.2f ms vs naive "
                "%.2f ms (<= 0.5x)",
                worst_rel, t_fast, t_naive);
  record(5, "low-rank likelihood path", agree_ok && time_ok, buf);
}

// --- criterion 6: gradient correctness --------------------------------------

bool check_gradients_at(int p, std::uint64_t seed, double* worst_rel) {
  auto sys = design_binary(p);
  auto truth = gen_random_regular(p, 2, 0.5, seed);
  auto bundle = sample_dataset(truth, sys, 400 * sys.size(), seed + 1, false);
  Rng rng(seed + 2);
  Matrix b = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j) b(i, j) = 0.3 * rng.normal() / std::sqrt(static_cast<double>(p));

  const double h = 1e-5;
  bool ok = true;

  Matrix grad = nll_gradient_detail(b, bundle.covariances, sys);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      Matrix bp = b, bm = b;
      bp(i, j) += h;
      bm(i, j) -= h;
      const double fd = (neg_log_likelihood_detail(bp, bundle.covariances, sys).value -
                         neg_log_likelihood_detail(bm, bundle.covariances, sys).value) /
                        (2.0 * h);
      const double rel = std::abs(grad(i, j) - fd) / std::max(std::abs(fd), 1e-2);
      *worst_rel = std::max(*worst_rel, rel);
      ok = ok && rel <= 1e-5;
    }
  }

  // the ADMM B-step objective at a random point
  std::vector<Matrix> thetas, lambdas;
  for (const Experiment& e : sys.experiments) {
    Matrix noise(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) noise(i, j) = 0.05 * rng.normal();
    thetas.push_back(theta_of(truth, e) + symmetrize(noise));
    lambdas.push_back(symmetrize(noise));
  }
  Matrix bgrad;
  b_subproblem_objective(b, thetas, lambdas, sys, &bgrad);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      Matrix bp = b, bm = b;
      bp(i, j) += h;
      bm(i, j) -= h;
      const double fd = (b_subproblem_objective(bp, thetas, lambdas, sys) -
                         b_subproblem_objective(bm, thetas, lambdas, sys)) /
                        (2.0 * h);
      const double rel = std::abs(bgrad(i, j) - fd) / std::max(std::abs(fd), 1e-2);
      *worst_rel = std::max(*worst_rel, rel);
      ok = ok && rel <= 1e-5;
    }
  }
  return ok;
}

void criterion_6() {
  double worst = 0.0;
  bool ok = true;
  int points = 0;
  for (int p : {4, 6}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {  // 10 points per p, 20 total
      ok = check_gradients_at(p, 3'000 + 100 * static_cast<std::uint64_t>(p) + seed, &worst) && ok;
      ++points;
    }
  }
  std::snprintf(buf, sizeof(buf),
                "likelihood + B-step gradients vs central differences at %d random points, worst "
                "rel %.2e (<= 1e-5)",
                points, worst);
  record(6, "gradient correctness", ok, buf);
}

// --- criterion 7: KL diagnostic ---------------------------------------------

void criterion_7() {
  Rng rng(808);
  auto random_spd = [&](int p) {
    Matrix a(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
    return Matrix(gram(a) / p + 0.5 * Matrix::Identity(p, p));
  };

  Matrix theta = random_spd(5);
  const bool zero_ok = kl_gaussian(theta, theta) == 0.0;

  Matrix t1(1, 1), t2(1, 1);
  t1 << 1.0;
  t2 << 2.0;
  const double scalar = kl_gaussian(t1, t2);
  const double expected = 0.5 * (1.0 - std::log(2.0));
  const bool scalar_ok = std::abs(scalar - expected) <= 1e-12;

  bool nonneg_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = random_spd(5), b = random_spd(5);
    nonneg_ok = nonneg_ok && kl_gaussian(a, b) >= 0.0;
  }

  std::snprintf(buf, sizeof(buf),
                "KL(T,T)=0 exactly: %s; scalar(1,2)=%.15f vs 0.5(1-ln 2) (|diff| <= 1e-12); "
                "non-negative on 100 PD pairs: %s",
                zero_ok ? "yes" : "no", scalar, nonneg_ok ? "yes" : "no");
  record(7, "KL diagnostic", zero_ok && scalar_ok && nonneg_ok, buf);
}

// --- criterion 8: identifiability verdicts ----------------------------------

void criterion_8() {
  ExperimentSystem observational{4, {Experiment(4, {})}};
  auto b1 = gen_random_regular(4, 2, 0.5, 4'040);
  auto rep1 = identifiability_rank(b1, observational);
  const bool obs_ok = rep1.m_bound == 10 && rep1.ambient_dim == 12 &&
                      rep1.verdict == IdentifiabilityVerdict::non_identifiable;

  auto b2 = gen_random_regular(4, 2, 0.5, 4'041);
  auto rep2 = identifiability_rank(b2, design_single_node(4));
  const bool single_ok =
      rep2.numeric_rank == 12 && rep2.verdict == IdentifiabilityVerdict::identifiable_locally;

  std::snprintf(buf, sizeof(buf),
                "p=4 no interventions: m=%ld < 12, %s; p=4 single-node: rank %ld = 12, %s",
                rep1.m_bound, to_string(rep1.verdict), rep2.numeric_rank, to_string(rep2.verdict));
  record(8, "identifiability verdicts", obs_ok && single_ok, buf);
}

// --- criterion 9: design correctness ----------------------------------------

void criterion_9() {
  bool ok = true;
  int checked = 0;
  for (int p = 2; p <= 64; ++p) {
    auto single = design_single_node(p);
    auto binary = design_binary(p);
    ok = ok && is_completely_separating(single).separating;
    ok = ok && is_completely_separating(binary).separating;
    int bits = 0;
    while ((1 << bits) < p) ++bits;
    ok = ok && binary.size() == 2 * bits;
    ok = ok && redundancy(single) == 1;
    ++checked;
  }
  std::snprintf(buf, sizeof(buf),
                "p in [2,64] (%d values): binary & single-node pass the pair-condition checker, E "
                "= 2*ceil(log2 p), single-node kappa = 1",
                checked);
  record(9, "design correctness", ok, buf);
}

// --- criterion 10: packing generator ----------------------------------------

void criterion_10() {
  auto pack = vg_packing(8, 2, 112);
  bool ok = pack.complete && pack.matrices.size() >= 2;
  long min_dist = 1'000'000;
  for (const Matrix& h : pack.matrices)
    for (int i = 0; i < 8; ++i) {
      int nnz = 0;
      for (int j = 0; j < 8; ++j)
        if (h(i, j) != 0.0) ++nnz;
      ok = ok && nnz == 2;
    }
  for (std::size_t a = 0; a < pack.matrices.size(); ++a)
    for (std::size_t b = a + 1; b < pack.matrices.size(); ++b)
      min_dist = std::min(min_dist, matrix_hamming_distance(pack.matrices[a], pack.matrices[b]));
  ok = ok && min_dist >= 8;
  std::snprintf(buf, sizeof(buf),
                "m=8, d=2: %zu matrices, rows 2-sparse, min pairwise Hamming distance %ld (>= 8)",
                pack.matrices.size(), min_dist);
  record(10, "packing generator", ok, buf);
}

// --- criterion 11: robustness to missing experiments ------------------------

void criterion_11() {
  BenchConfig cfg;
  cfg.graph = GraphKind::random_regular;
  cfg.p = 10;
  cfg.d = 2;
  cfg.eta = 0.5;
  cfg.sweep = SweepAxis::drop;
  cfg.sweep_values = {0, 1, 2};
  cfg.n = 8000;
  cfg.repetitions = 16;
  cfg.seed = 741'852;
  cfg.estimators = {"llc", "init", "loc"};
  cfg.grid_size = 12;
  cfg.record_timings = false;
  cfg.admm.max_iter = 2000;  // single-node systems need a larger budget at tol 1e-5
  BenchResult res = run_benchmark(cfg);

  int admm_runs = 0, admm_failed = 0;
  for (const RunRecord& r : res.records) {
    if (r.estimator != "init") continue;
    ++admm_runs;
    if (r.flags.rfind("converged", 0) != 0) ++admm_failed;
  }
  const double fail_frac = admm_runs > 0 ? static_cast<double>(admm_failed) / admm_runs : 1.0;

  const double llc0 = BenchResult::median(res.errors(0, "llc"));
  const double llc2 = BenchResult::median(res.errors(2, "llc"));
  const double loc0 = BenchResult::median(res.errors(0, "loc"));
  const double loc2 = BenchResult::median(res.errors(2, "loc"));
  const double factor_llc = llc2 / llc0;
  const double factor_mle = loc2 / loc0;

  if (fail_frac > 0.10) {
    std::snprintf(buf, sizeof(buf),
                  "REPORT ONLY (ADMM non-converged on %.0f%% of runs): degradation llc x%.2f vs "
                  "mle x%.2f",
                  100.0 * fail_frac, factor_llc, factor_mle);
    record(11, "robustness to dropped experiments", true, buf);
    return;
  }

  const bool ok = res.failure_count == 0 && factor_mle < factor_llc;
  std::snprintf(buf, sizeof(buf),
                "drop r=2 of 10 single-node experiments: llc degrades x%.2f, mle(loc) x%.2f (mle "
                "< llc); ADMM non-convergence %.0f%%",
                factor_llc, factor_mle, 100.0 * fail_frac);
  record(11, "robustness to dropped experiments", ok, buf);
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

  auto want = [&](int n) { return only == 0 || only == n; };
  const auto t0 = clock_type::now();

  if (want(1)) criterion_1();

  if (want(2) || want(3) || want(12)) {
    double bench_seconds = 0.0;
    BenchResult rate = criterion_2(&bench_seconds);
    if (want(3)) criterion_3(rate);
    if (want(12)) criterion_12(rate);
  }

  if (want(4)) criterion_4();
  if (want(5)) criterion_5();
  if (want(6)) criterion_6();
  if (want(7)) criterion_7();
  if (want(8)) criterion_8();
  if (want(9)) criterion_9();
  if (want(10)) criterion_10();
  if (want(11)) criterion_11();

  int failures = 0;
  for (const auto& c : g_results)
    if (!c.pass) ++failures;
  std::printf("----\n%zu criteria run, %d failed (%.0f s total)\n", g_results.size(), failures,
              seconds_since(t0));
  return failures;
}

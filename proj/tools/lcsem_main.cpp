// Command-line workbench: intervention design, dataset sampling, LLC and
// two-step MLE estimation, identifiability diagnostics, and benchmarks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcsem/lcsem.hpp"

namespace {

using namespace lcsem;

std::vector<double> parse_lambda_spec(const std::string& spec, int grid_size) {
  // a single float, "sweep" (default grid), or "path:<lo>:<hi>:<count>"
  if (spec == "sweep") return log_spaced_grid(1e-4, 1e1, grid_size);
  if (spec.rfind("path:", 0) == 0) {
    double lo = 0, hi = 0;
    int count = 0;
    if (std::sscanf(spec.c_str(), "path:%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1 ||
        lo <= 0 || hi < lo)
      throw invalid_input("bad lambda path spec '" + spec + "' (want path:<lo>:<hi>:<count>)");
    return log_spaced_grid(lo, hi, count);
  }
  char* end = nullptr;
  const double v = std::strtod(spec.c_str(), &end);
  if (end == spec.c_str() || *end != '\0' || v < 0)
    throw invalid_input("bad lambda spec '" + spec + "'");
  return {v};
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot open " + path);
  f << content;
}

int cmd_design(int p, const std::string& kind, int k, const std::string& out) {
  ExperimentSystem sys;
  if (kind == "single")
    sys = design_single_node(p);
  else if (kind == "binary")
    sys = design_binary(p);
  else if (kind == "bounded")
    sys = design_bounded(p, k);
  else
    throw invalid_input("unknown design kind '" + kind + "' (single|binary|bounded)");
  write_system_json(out, sys);
  auto check = is_completely_separating(sys);
  std::printf("p=%d kind=%s E=%d completely_separating=%s redundancy=%d -> %s\n", p, kind.c_str(),
              sys.size(), check.separating ? "yes" : "no", redundancy(sys), out.c_str());
  return 0;
}

int cmd_sample(const std::string& truth_path, const std::string& system_path, long n,
               std::uint64_t seed, const std::string& out, bool covariances_only) {
  StructureMatrix truth(read_matrix_csv(truth_path));
  ExperimentSystem sys = read_system_json(system_path);
  auto bundle = sample_dataset(truth, sys, n, seed, !covariances_only);
  write_dataset_dir(out, bundle);
  std::printf("sampled n=%ld over E=%d experiments (seed=%llu) -> %s\n", bundle.total_samples(),
              sys.size(), static_cast<unsigned long long>(seed), out.c_str());
  return 0;
}

std::string llc_report_csv(const LlcReport& rep) {
  std::string out = "node,sweeps,kkt_residual,converged,no_rows\n";
  char buf[160];
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%ld,%.17g,%d,%d\n", r.node, r.sweeps, r.kkt_residual,
                  r.converged ? 1 : 0, r.no_rows ? 1 : 0);
    out += buf;
  }
  return out;
}

int cmd_estimate_llc(const std::string& data_dir, const std::string& lambda_spec,
                     const std::string& truth_path, int grid_size, const std::string& out,
                     std::string report_path) {
  DatasetBundle bundle = read_dataset_dir(data_dir);
  std::vector<double> grid = parse_lambda_spec(lambda_spec, grid_size);
  if (report_path.empty()) report_path = out + ".report.csv";

  if (grid.size() == 1) {
    auto [est, rep] = estimate_llc(bundle, grid[0]);
    if (!rep.warning.empty()) std::fprintf(stderr, "warning: %s\n", rep.warning.c_str());
    write_matrix_csv(out, est.matrix());
    write_text(report_path, llc_report_csv(rep));
    std::printf("llc lambda=%g -> %s (report %s)\n", grid[0], out.c_str(), report_path.c_str());
    return 0;
  }

  require(!truth_path.empty(), "a lambda path needs --truth for the oracle choice");
  StructureMatrix truth(read_matrix_csv(truth_path));
  auto path = lambda_path(bundle.covariances, bundle.system, grid);
  std::vector<std::pair<double, StructureMatrix>> cands;
  for (auto& entry : path) cands.emplace_back(entry.lambda, entry.estimate);
  auto choice = oracle_select(cands, truth);
  write_matrix_csv(out, choice.estimate.matrix());
  write_text(report_path, llc_report_csv(path[choice.index].report));
  std::printf("llc oracle lambda=%g sq_error=%g -> %s\n", choice.lambda, choice.sq_error,
              out.c_str());
  return 0;
}

int cmd_estimate_mle(const std::string& data_dir, const std::string& lambda_init_spec,
                     const std::string& lambda_loc_spec, const std::string& radius_spec,
                     const std::string& truth_path, bool fast_likelihood, int grid_size,
                     const std::string& out, std::string report_path) {
  DatasetBundle bundle = read_dataset_dir(data_dir);
  const auto& covs = bundle.covariances;
  const auto& sys = bundle.system;
  if (report_path.empty()) report_path = out + ".report";

  std::optional<StructureMatrix> truth;
  if (!truth_path.empty()) truth = StructureMatrix(read_matrix_csv(truth_path));

  // stage 1: ADMM initialization (warm-started lambda sweep when requested)
  std::vector<double> init_grid = parse_lambda_spec(lambda_init_spec, grid_size);
  require(init_grid.size() == 1 || truth.has_value(),
          "a lambda-init sweep needs --truth for the oracle choice");
  AdmmOptions admm_opts;
  std::vector<std::pair<double, StructureMatrix>> init_cands;
  std::vector<SolverReport> init_reports;
  AdmmState warm;
  bool have_warm = false;
  for (double lambda : init_grid) {
    AdmmResult r = admm_init(covs, sys, lambda, admm_opts, have_warm ? &warm : nullptr);
    warm = std::move(r.state);
    have_warm = true;
    init_cands.emplace_back(lambda, std::move(r.b_init));
    init_reports.push_back(std::move(r.report));
  }
  std::size_t init_idx = 0;
  double init_lambda = init_grid[0];
  if (truth && init_grid.size() > 1) {
    auto choice = oracle_select(init_cands, *truth);
    init_idx = choice.index;
    init_lambda = choice.lambda;
  }
  const StructureMatrix b_init = init_cands[init_idx].second;
  write_text(report_path + ".init.csv", init_reports[init_idx].to_csv());

  // radius: explicit value or the oracle rule 2 ||B_init - B*||_F
  double radius = 0.0;
  if (radius_spec == "oracle") {
    require(truth.has_value(), "--radius oracle needs --truth");
    radius = 2.0 * std::sqrt(frobenius_error(b_init, *truth));
  } else {
    char* end = nullptr;
    radius = std::strtod(radius_spec.c_str(), &end);
    require(end != radius_spec.c_str() && *end == '\0' && radius >= 0,
            "bad --radius '" + radius_spec + "'");
  }

  // stage 2: ALM refinement
  std::vector<double> loc_grid = parse_lambda_spec(lambda_loc_spec, grid_size);
  require(loc_grid.size() == 1 || truth.has_value(),
          "a lambda-loc sweep needs --truth for the oracle choice");
  AlmOptions alm_opts;
  std::vector<std::pair<double, StructureMatrix>> loc_cands;
  std::vector<SolverReport> loc_reports;
  for (double lambda : loc_grid) {
    AlmResult r = alm_refine(covs, sys, b_init, radius, lambda, alm_opts);
    loc_cands.emplace_back(lambda, std::move(r.b_loc));
    loc_reports.push_back(std::move(r.report));
  }
  std::size_t loc_idx = 0;
  double loc_lambda = loc_grid[0];
  if (truth && loc_grid.size() > 1) {
    auto choice = oracle_select(loc_cands, *truth);
    loc_idx = choice.index;
    loc_lambda = choice.lambda;
  }
  write_text(report_path + ".loc.csv", loc_reports[loc_idx].to_csv());
  write_matrix_csv(out, loc_cands[loc_idx].second.matrix());

  const double nll = neg_log_likelihood(loc_cands[loc_idx].second, covs, sys, fast_likelihood);
  std::printf("mle lambda_init=%g lambda_loc=%g radius=%g nll=%.6f -> %s\n", init_lambda,
              loc_lambda, radius, nll, out.c_str());

  // reference-only theoretical scalings (unit constants, delta = 0.1)
  const long n_total = bundle.total_samples();
  if (n_total > 0) {
    const double p_nodes = sys.p;
    const double num_e = sys.size();
    const double log_term = std::log(std::exp(1.0) * p_nodes * num_e / 0.1);
    std::printf("  reference scalings (unit constants, eta=0.5): lambda_init ~ %g, "
                "lambda_loc ~ %g, radius ~ %g\n",
                std::sqrt(num_e * log_term / n_total),
                std::sqrt(num_e * num_e * log_term / n_total),
                std::min({1.0 / std::sqrt(num_e), 0.5, 1.0 / std::sqrt(p_nodes)}));
  }
  if (truth) {
    std::printf("  sq_error(init)=%g sq_error(loc)=%g\n",
                frobenius_error(b_init, *truth),
                frobenius_error(loc_cands[loc_idx].second, *truth));
  }
  return 0;
}

int cmd_diagnose(const std::string& system_path, int p, int d, double eta, std::uint64_t seed,
                 double tol, const std::string& sv_path) {
  ExperimentSystem sys = read_system_json(system_path);
  require(p == 0 || p == sys.p, "--p disagrees with the system descriptor");
  const int dd = std::min(d, sys.p - 1);
  StructureMatrix b = gen_random_regular(sys.p, dd, eta, seed);
  auto rep = identifiability_rank(b, sys, tol);
  std::printf("%s", rep.to_text().c_str());
  std::printf("generic_draw_seed = %llu (d=%d, eta=%g)\n",
              static_cast<unsigned long long>(seed), dd, eta);
  if (!sv_path.empty()) {
    std::string csv = "index,singular_value\n";
    char buf[64];
    for (std::size_t i = 0; i < rep.singular_values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, rep.singular_values[i]);
      csv += buf;
    }
    write_text(sv_path, csv);
  }
  return rep.verdict == IdentifiabilityVerdict::identifiable_locally ? 0 : 1;
}

int cmd_bench(const std::string& config_path, std::string out_dir) {
  BenchConfig cfg = parse_bench_config_file(config_path);
  if (out_dir.empty()) out_dir = ".";
  std::filesystem::create_directories(out_dir);
  auto res = run_benchmark(cfg);
  write_text(out_dir + "/results.csv", res.results_csv());
  write_text(out_dir + "/summary.csv", res.summary_csv());
  for (const std::string& msg : res.failure_messages)
    std::fprintf(stderr, "bench repetition failed: %s\n", msg.c_str());
  std::printf("bench: %zu records, %d failed repetitions -> %s/results.csv\n", res.records.size(),
              res.failure_count, out_dir.c_str());
  return res.failure_count == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse linear cyclic SEM estimation from interventional data"};
  app.require_subcommand(1);

  // design
  auto* design = app.add_subcommand("design", "construct a completely separating system");
  int d_p = 0, d_k = 1;
  std::string d_kind = "binary", d_out;
  design->add_option("--p", d_p, "node count")->required();
  design->add_option("--kind", d_kind, "single|binary|bounded")->required();
  design->add_option("--k", d_k, "size bound for the bounded design");
  design->add_option("--out", d_out, "output descriptor path")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "draw interventional Gaussian data");
  std::string s_truth, s_system, s_out;
  long s_n = 0;
  std::uint64_t s_seed = 1;
  bool s_cov_only = false;
  sample->add_option("--truth", s_truth, "ground-truth B csv")->required();
  sample->add_option("--system", s_system, "system descriptor")->required();
  sample->add_option("--n", s_n, "total sample count")->required();
  sample->add_option("--seed", s_seed, "rng seed");
  sample->add_option("--out", s_out, "output dataset directory")->required();
  sample->add_flag("--covariances-only", s_cov_only, "store only the empirical covariances");

  // estimate llc / estimate mle
  auto* estimate = app.add_subcommand("estimate", "run an estimator on a dataset directory");
  estimate->require_subcommand(1);
  auto* llc = estimate->add_subcommand("llc", "moment estimator with l1 penalty");
  std::string l_data, l_lambda = "0.01", l_truth, l_out, l_report;
  int l_grid = 20;
  llc->add_option("--data", l_data, "dataset directory")->required();
  llc->add_option("--lambda", l_lambda, "float, 'sweep', or path:<lo>:<hi>:<count>");
  llc->add_option("--truth", l_truth, "ground truth csv (enables the oracle choice)");
  llc->add_option("--grid-size", l_grid, "grid size for 'sweep'");
  llc->add_option("--out", l_out, "output estimate csv")->required();
  llc->add_option("--report", l_report, "row diagnostics csv (default <out>.report.csv)");

  auto* mle = estimate->add_subcommand("mle", "two-step penalized maximum likelihood");
  std::string m_data, m_li = "0.01", m_ll = "0.01", m_radius = "oracle", m_truth, m_out, m_report;
  int m_grid = 20;
  bool m_fast = false;
  mle->add_option("--data", m_data, "dataset directory")->required();
  mle->add_option("--lambda-init", m_li, "float, 'sweep', or path:<lo>:<hi>:<count>");
  mle->add_option("--lambda-loc", m_ll, "float, 'sweep', or path:<lo>:<hi>:<count>");
  mle->add_option("--radius", m_radius, "float or 'oracle'");
  mle->add_option("--truth", m_truth, "ground truth csv (oracle tuning)");
  mle->add_option("--grid-size", m_grid, "grid size for 'sweep'");
  mle->add_flag("--fast-likelihood", m_fast, "low-rank likelihood path for the final value");
  mle->add_option("--out", m_out, "output estimate csv")->required();
  mle->add_option("--report", m_report, "report prefix (default <out>.report)");

  // diagnose identifiability
  auto* diagnose = app.add_subcommand("diagnose", "model diagnostics");
  diagnose->require_subcommand(1);
  auto* ident = diagnose->add_subcommand("identifiability", "local rank test for a system");
  std::string i_system, i_sv;
  int i_p = 0, i_d = 2;
  double i_eta = 0.5, i_tol = 1e-8;
  std::uint64_t i_seed = 1;
  ident->add_option("--system", i_system, "system descriptor")->required();
  ident->add_option("--p", i_p, "node count (checked against the descriptor)");
  ident->add_option("--d", i_d, "in-degree of the generic draw");
  ident->add_option("--eta", i_eta, "spectral margin of the generic draw");
  ident->add_option("--seed", i_seed, "seed of the generic draw");
  ident->add_option("--tol", i_tol, "relative rank tolerance");
  ident->add_option("--singular-values", i_sv, "optional csv of singular values");

  // bench
  auto* bench = app.add_subcommand("bench", "run a benchmark config");
  std::string b_config, b_out;
  bench->add_option("--config", b_config, "plain-text config file")->required();
  bench->add_option("--out-dir", b_out, "output directory (default .)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (design->parsed()) return cmd_design(d_p, d_kind, d_k, d_out);
    if (sample->parsed()) return cmd_sample(s_truth, s_system, s_n, s_seed, s_out, s_cov_only);
    if (estimate->parsed()) {
      if (llc->parsed()) return cmd_estimate_llc(l_data, l_lambda, l_truth, l_grid, l_out, l_report);
      if (mle->parsed())
        return cmd_estimate_mle(m_data, m_li, m_ll, m_radius, m_truth, m_fast, m_grid, m_out,
                                m_report);
    }
    if (diagnose->parsed() && ident->parsed())
      return cmd_diagnose(i_system, i_p, i_d, i_eta, i_seed, i_tol, i_sv);
    if (bench->parsed()) return cmd_bench(b_config, b_out);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}

#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lcsem/bench.hpp"

using namespace lcsem;

TEST_CASE("gen_random_regular") {
  SECTION("members of the class with the exact operator norm") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto b = gen_random_regular(20, 3, 0.5, seed);
      REQUIRE(validate_membership(b, MatrixClassSpec{20, 3, 0.5}).member);
      Eigen::JacobiSVD<Matrix> svd(b.matrix());  // independent norm oracle
      REQUIRE(svd.singularValues()(0) == Approx(0.5).margin(1e-9));
    }
  }

  SECTION("d = p - 1 fills every off-diagonal entry") {
    auto b = gen_random_regular(5, 4, 0.5, 3);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) REQUIRE(b(i, j) != 0.0);
  }
}

TEST_CASE("gen_disconnected_cliques") {
  SECTION("d = 1 gives the zero matrix") {
    auto b = gen_disconnected_cliques(5, 1, 0.5, 7);
    REQUIRE(b.matrix().isZero(0.0));
  }

  SECTION("p = 6, d = 3 gives two cliques with twelve edges") {
    auto b = gen_disconnected_cliques(6, 3, 0.5, 11);
    int nnz = 0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (b(i, j) != 0.0) ++nnz;
    REQUIRE(nnz == 12);
    // no cross-clique edges
    for (int i = 0; i < 3; ++i)
      for (int j = 3; j < 6; ++j) {
        REQUIRE(b(i, j) == 0.0);
        REQUIRE(b(j, i) == 0.0);
      }
  }

  SECTION("support pattern is symmetric") {
    auto b = gen_disconnected_cliques(7, 3, 0.5, 13);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j)
        REQUIRE((b(i, j) != 0.0) == (b(j, i) != 0.0));
  }
}

TEST_CASE("load_adjacency_csv") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "lcsem_bench_test";
  fs::create_directories(dir);

  SECTION("zero matrix file loads as the zero truth") {
    write_matrix_csv((dir / "zero.csv").string(), Matrix::Zero(4, 4));
    auto b = load_adjacency_csv((dir / "zero.csv").string(), 0.5, 1);
    REQUIRE(b.matrix().isZero(0.0));
  }

  SECTION("binary pattern reproduces a class member") {
    auto src = gen_random_regular(6, 2, 0.5, 17);
    Matrix pattern = (src.matrix().array() != 0.0).cast<double>();
    write_matrix_csv((dir / "pattern.csv").string(), pattern);
    auto b = load_adjacency_csv((dir / "pattern.csv").string(), 0.5, 19);
    REQUIRE(validate_membership(b, MatrixClassSpec{6, 2, 0.5}).member);
  }

  SECTION("a 39-node file with in-degree 3 passes membership") {
    Rng rng(23);
    Matrix adj = Matrix::Zero(39, 39);
    std::vector<int> pool;
    for (int i = 0; i < 39; ++i) {
      pool.clear();
      for (int j = 0; j < 39; ++j)
        if (j != i) pool.push_back(j);
      for (int j : rng.choose_without_replacement(pool, 3)) adj(i, j) = 1.0;
    }
    write_matrix_csv((dir / "gene39.csv").string(), adj);
    auto b = load_adjacency_csv((dir / "gene39.csv").string(), 0.5, 29);
    REQUIRE(validate_membership(b, MatrixClassSpec{39, 3, 0.5}).member);
  }

  SECTION("weighted file is normalized only") {
    Matrix w = Matrix::Zero(3, 3);
    w(0, 1) = 2.0;
    w(1, 2) = -1.0;
    write_matrix_csv((dir / "weighted.csv").string(), w);
    auto b = load_adjacency_csv((dir / "weighted.csv").string(), 0.5, 31);
    // support preserved, norm scaled to 0.5
    REQUIRE(b(0, 1) != 0.0);
    REQUIRE(b(1, 2) != 0.0);
    REQUIRE(operator_norm(b.matrix()) == Approx(0.5).margin(1e-9));
    // ratio of entries preserved by pure scaling
    REQUIRE(b(0, 1) / b(1, 2) == Approx(-2.0).epsilon(1e-12));
  }

  SECTION("bad files rejected") {
    write_matrix_csv((dir / "nonsquare.csv").string(), Matrix::Zero(2, 3));
    REQUIRE_THROWS_AS(load_adjacency_csv((dir / "nonsquare.csv").string(), 0.5, 1), invalid_input);
    Matrix diag = Matrix::Identity(3, 3);
    write_matrix_csv((dir / "diag.csv").string(), diag);
    REQUIRE_THROWS_AS(load_adjacency_csv((dir / "diag.csv").string(), 0.5, 1), invalid_input);
  }

  fs::remove_all(dir);
}

TEST_CASE("oracle_select") {
  StructureMatrix truth = StructureMatrix::zeros(2);
  Matrix one = Matrix::Zero(2, 2);
  one(0, 1) = 1.0;

  SECTION("single candidate returns itself") {
    std::vector<std::pair<double, StructureMatrix>> cands{{0.5, StructureMatrix(one)}};
    auto choice = oracle_select(cands, truth);
    REQUIRE(choice.lambda == 0.5);
    REQUIRE(choice.sq_error == 1.0);
  }

  SECTION("exact candidate wins with zero error") {
    std::vector<std::pair<double, StructureMatrix>> cands{
        {0.5, StructureMatrix(one)}, {0.2, truth}, {0.1, StructureMatrix(one)}};
    auto choice = oracle_select(cands, truth);
    REQUIRE(choice.sq_error == 0.0);
    REQUIRE(choice.lambda == 0.2);
  }

  SECTION("ties break toward the smaller lambda") {
    std::vector<std::pair<double, StructureMatrix>> cands{{0.5, StructureMatrix(one)},
                                                          {0.1, StructureMatrix(one)}};
    auto choice = oracle_select(cands, truth);
    REQUIRE(choice.lambda == 0.1);
  }

  SECTION("oracle error is a lower bound over candidates") {
    Rng rng(37);
    std::vector<std::pair<double, StructureMatrix>> cands;
    for (int k = 0; k < 6; ++k) {
      Matrix b = Matrix::Zero(2, 2);
      b(0, 1) = rng.normal();
      b(1, 0) = rng.normal();
      cands.emplace_back(0.1 * (k + 1), StructureMatrix(b));
    }
    auto choice = oracle_select(cands, truth);
    for (const auto& [lambda, est] : cands)
      REQUIRE(choice.sq_error <= frobenius_error(est, truth));
  }
}

TEST_CASE("frobenius_error") {
  auto truth = gen_random_regular(4, 2, 0.5, 41);
  REQUIRE(frobenius_error(truth, truth) == 0.0);

  Matrix bumped = truth.matrix();
  bumped(0, 1) += 1.0;  // unit bump in one entry
  REQUIRE(frobenius_error(StructureMatrix(bumped), truth) == Approx(1.0).margin(1e-12));

  // invariance under joint permutation
  Matrix pm = Matrix::Zero(4, 4);
  pm(1, 0) = pm(2, 1) = pm(3, 2) = pm(0, 3) = 1.0;
  StructureMatrix tp(pm * truth.matrix() * pm.transpose());
  StructureMatrix bp(pm * bumped * pm.transpose());
  REQUIRE(frobenius_error(bp, tp) == Approx(frobenius_error(StructureMatrix(bumped), truth)).epsilon(1e-12));
}

TEST_CASE("vg_packing") {
  SECTION("m = 8, d = 2 yields pairwise Hamming distance at least 8") {
    auto pack = vg_packing(8, 2, 5);
    REQUIRE(pack.matrices.size() >= 2);
    for (const Matrix& h : pack.matrices)
      for (int i = 0; i < 8; ++i) {
        int nnz = 0;
        for (int j = 0; j < 8; ++j)
          if (h(i, j) != 0.0) ++nnz;
        REQUIRE(nnz == 2);
      }
    for (std::size_t a = 0; a < pack.matrices.size(); ++a)
      for (std::size_t b = a + 1; b < pack.matrices.size(); ++b)
        REQUIRE(matrix_hamming_distance(pack.matrices[a], pack.matrices[b]) >= 8);
  }

  SECTION("family size follows the packing exponent") {
    // (md/16) log(1 + m/(2d)) >= log 2 ensures M >= 2
    auto pack = vg_packing(8, 2, 9);
    REQUIRE(pack.matrices.size() >= 2);
  }

  SECTION("invalid d rejected") {
    REQUIRE_THROWS_AS(vg_packing(8, 5, 1), invalid_input);
  }
}

TEST_CASE("benchmark runs are deterministic") {
  BenchConfig cfg;
  cfg.p = 5;
  cfg.d = 2;
  cfg.sweep = SweepAxis::n;
  cfg.sweep_values = {400, 1600};
  cfg.repetitions = 2;
  cfg.estimators = {"llc"};
  cfg.grid_size = 5;
  cfg.seed = 77;
  cfg.record_timings = false;
  cfg.threads = 2;

  auto r1 = run_benchmark(cfg);
  auto r2 = run_benchmark(cfg);
  REQUIRE(r1.failure_count == 0);
  REQUIRE(r1.results_csv() == r2.results_csv());
  REQUIRE(r1.summary_csv() == r2.summary_csv());
}

TEST_CASE("llc benchmark error shrinks with n") {
  BenchConfig cfg;
  cfg.p = 5;
  cfg.d = 2;
  cfg.sweep = SweepAxis::n;
  cfg.sweep_values = {500, 4000, 32000};
  cfg.repetitions = 16;
  cfg.estimators = {"llc"};
  cfg.grid_size = 8;
  cfg.seed = 99;
  cfg.record_timings = false;

  auto res = run_benchmark(cfg);
  REQUIRE(res.failure_count == 0);
  double prev = kInf;
  for (double n : cfg.sweep_values) {
    const double med = BenchResult::median(res.errors(n, "llc"));
    REQUIRE(med <= prev);
    prev = med;
  }
}

TEST_CASE("all three estimators are consistent at huge n") {
  BenchConfig cfg;
  cfg.p = 5;
  cfg.d = 2;
  cfg.sweep = SweepAxis::n;
  cfg.sweep_values = {1000000};
  cfg.repetitions = 1;
  cfg.estimators = {"llc", "init", "loc"};
  cfg.grid_size = 6;
  cfg.seed = 2024;
  cfg.record_timings = false;

  auto res = run_benchmark(cfg);
  REQUIRE(res.failure_count == 0);
  for (const std::string est : {"llc", "init", "loc"}) {
    auto errs = res.errors(1000000, est);
    REQUIRE(errs.size() == 1);
    REQUIRE(errs[0] < 1e-2);
  }
}

TEST_CASE("llc error grows as single-node experiments are dropped") {
  BenchConfig cfg;
  cfg.p = 10;
  cfg.d = 2;
  cfg.sweep = SweepAxis::drop;
  cfg.sweep_values = {0, 1, 2};
  cfg.n = 8000;
  cfg.repetitions = 8;
  cfg.estimators = {"llc"};
  cfg.grid_size = 8;
  cfg.seed = 31337;
  cfg.record_timings = false;

  auto res = run_benchmark(cfg);
  REQUIRE(res.failure_count == 0);
  const double m0 = BenchResult::median(res.errors(0, "llc"));
  const double m1 = BenchResult::median(res.errors(1, "llc"));
  const double m2 = BenchResult::median(res.errors(2, "llc"));
  REQUIRE(m0 <= m1);
  REQUIRE(m1 <= m2);
}

TEST_CASE("bench config parsing") {
  std::istringstream in(R"(
# comment line
graph = random_regular
p = 7
d = 3
eta = 0.4
design = binary
sweep = n
sweep_values = 100, 200
repetitions = 3
seed = 5
estimators = llc, loc
grid_size = 4
timing = off
)");
  auto cfg = parse_bench_config(in);
  REQUIRE(cfg.p == 7);
  REQUIRE(cfg.d == 3);
  REQUIRE(cfg.eta == Approx(0.4));
  REQUIRE(cfg.sweep_values == std::vector<double>{100, 200});
  REQUIRE(cfg.repetitions == 3);
  REQUIRE(cfg.estimators == std::vector<std::string>{"llc", "loc"});
  REQUIRE_FALSE(cfg.record_timings);

  std::istringstream bad("nonsense = 1\n");
  REQUIRE_THROWS_AS(parse_bench_config(bad), invalid_input);
}

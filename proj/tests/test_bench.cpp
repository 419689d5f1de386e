#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aspus/bench.hpp"
#include "aspus/csv.hpp"
#include "aspus/errors.hpp"
#include "aspus/memtrack.hpp"
#include "aspus/numeric.hpp"
#include "aspus/types.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace aspus;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
using testutil::TempDir;

namespace {

Scenario small_null_scenario(Index n, Index snps) {
  Scenario sc;
  sc.n = n;
  sc.gene.n_snps = snps;
  sc.gene.n_causal = 0;
  sc.effect_a = 0.0;
  sc.maf_min = 0.05;  // common variants keep tiny-n columns non-degenerate
  sc.maf_max = 0.40;
  sc.tau = 2.25;  // preset bound skips per-cell calibration
  return sc;
}

RunConfig small_config(Index replicates, Index b_total, Index b_init,
                       std::uint64_t seed) {
  RunConfig cfg;
  cfg.replicates = replicates;
  cfg.plan.b_total = b_total;
  cfg.plan.b_init = b_init;
  cfg.plan.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("scenario unit covers the simulated gene", "[bench]") {
  Scenario sc = small_null_scenario(80, 6);
  sc.seed = 11;
  const SimOutput out = build_scenario(sc);
  const TestUnit unit = scenario_unit(out);
  REQUIRE(unit.id == "gene1");
  REQUIRE_FALSE(unit.pathway);
  REQUIRE(unit.cols.size() == 6);
  for (Index j = 0; j < 6; ++j) REQUIRE(unit.cols[static_cast<std::size_t>(j)] == j);
  REQUIRE(unit.snp_weights.size() == 6);
  REQUIRE(unit.snp_weights.minCoeff() == 1.0);
  REQUIRE(unit.snp_weights.maxCoeff() == 1.0);
  REQUIRE(unit.gene_sizes.empty());
}

TEST_CASE("scenario unit flattens pathways and skips emptied genes",
          "[bench]") {
  SimOutput out;
  out.pathway_id = "pathway1";
  out.gene_ids = {"gene01", "gene02", "gene03"};
  out.gene_cols = {{0, 1}, {}, {2, 3, 4}};
  const TestUnit unit = scenario_unit(out);
  REQUIRE(unit.id == "pathway1");
  REQUIRE(unit.pathway);
  REQUIRE(unit.cols == std::vector<Index>{0, 1, 2, 3, 4});
  REQUIRE(unit.gene_sizes == std::vector<Index>{2, 3});
  REQUIRE(unit.gene_weights.size() == 2);
  REQUIRE(unit.snp_weights.size() == 5);

  SimOutput empty_gene;
  empty_gene.gene_ids = {"gene1"};
  empty_gene.gene_cols = {{}};
  REQUIRE_THROWS_MATCHES(scenario_unit(empty_gene), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring(
                             "no SNP columns to test")));
}

TEST_CASE("run configuration rejects out-of-range settings", "[bench]") {
  RunConfig cfg;
  cfg.replicates = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.alpha = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg.alpha = 1.0001;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg.alpha = 1.0;
  REQUIRE_NOTHROW(cfg.validate());
  cfg = RunConfig{};
  cfg.ci_level = 1.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.workers = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.plan.theta = 0.0;  // plan problems surface through the same gate
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("cell replication reports consistent rejection accounting",
          "[bench]") {
  Cell cell{"null_smoke", small_null_scenario(150, 8)};
  const RunConfig cfg = small_config(10, 60, 20, 42);
  const CellResult res = run_cell(cell, cfg);

  REQUIRE(res.cell_id == "null_smoke");
  REQUIRE(res.replicates == 10);
  REQUIRE(res.pvalues.size() == 10);
  Index hits = 0;
  for (double p : res.pvalues) {
    REQUIRE(p >= 0.0);
    REQUIRE(p <= 1.0);
    hits += (p <= cfg.alpha);
  }
  REQUIRE(res.rejections == hits);
  REQUIRE(res.rate == Approx(static_cast<double>(hits) / 10.0).epsilon(0.0));
  REQUIRE(res.ci.lo >= 0.0);
  REQUIRE(res.ci.lo <= res.rate);
  REQUIRE(res.ci.hi >= res.rate);
  REQUIRE(res.ci.hi <= 1.0);
  REQUIRE(res.mean_test_ms > 0.0);

  Cell unnamed{"", small_null_scenario(150, 8)};
  REQUIRE_THROWS_MATCHES(run_cell(unnamed, cfg), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("empty id")));
}

TEST_CASE("cell replication is reproducible for any worker count",
          "[bench]") {
  Cell cell{"repro", small_null_scenario(120, 6)};
  RunConfig cfg = small_config(6, 40, 20, 7);
  const CellResult one = run_cell(cell, cfg);
  cfg.workers = 3;
  const CellResult three = run_cell(cell, cfg);
  const CellResult again = run_cell(cell, cfg);

  REQUIRE(one.pvalues == three.pvalues);
  REQUIRE(one.pvalues == again.pvalues);
  REQUIRE(one.rejections == three.rejections);
  REQUIRE(one.rate == three.rate);
  REQUIRE(one.ci.lo == three.ci.lo);
  REQUIRE(one.ci.hi == three.ci.hi);
}

TEST_CASE("alpha of one rejects every replicate", "[bench]") {
  Cell cell{"always", small_null_scenario(100, 5)};
  RunConfig cfg = small_config(5, 40, 20, 3);
  cfg.alpha = 1.0;
  const CellResult res = run_cell(cell, cfg);
  REQUIRE(res.rejections == 5);
  REQUIRE(res.rate == 1.0);
}

TEST_CASE("type-one experiments accept only null cells", "[bench]") {
  const RunConfig cfg = small_config(3, 40, 20, 9);
  Cell null_a{"cell_a", small_null_scenario(100, 5)};
  Cell null_b{"cell_b", small_null_scenario(100, 5)};
  Cell effect{"cell_c", small_null_scenario(100, 5)};
  effect.scenario.effect_a = 0.4;
  effect.scenario.gene.n_causal = 2;

  REQUIRE_THROWS_MATCHES(
      run_type1({null_a, effect}, cfg), ConfigError,
      Catch::Matchers::MessageMatches(ContainsSubstring("cell_c")));

  const std::vector<CellResult> res = run_type1({null_a, null_b}, cfg);
  REQUIRE(res.size() == 2);
  REQUIRE(res[0].cell_id == "cell_a");
  REQUIRE(res[1].cell_id == "cell_b");
  REQUIRE(res[0].pvalues != res[1].pvalues);  // cell id feeds the stream
}

TEST_CASE("power experiments require an effect and favor it", "[bench]") {
  const RunConfig cfg = small_config(10, 80, 20, 13);
  Cell null_cell{"null", small_null_scenario(150, 6)};
  REQUIRE_THROWS_MATCHES(run_power({null_cell}, cfg), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring(
                             "positive effect")));

  Cell strong{"strong", small_null_scenario(150, 6)};
  strong.scenario.effect_a = 0.8;
  strong.scenario.gene.n_causal = 3;
  const std::vector<CellResult> res = run_power({null_cell, strong}, cfg);
  REQUIRE(res.size() == 2);
  REQUIRE(res[1].rejections >= res[0].rejections);
  REQUIRE(res[1].rejections >= 5);  // a = 0.8 on half the SNPs at n = 150
}

TEST_CASE("null cells reject near the nominal level", "[bench]") {
  Cell cell{"null_level", small_null_scenario(150, 8)};
  const RunConfig cfg = small_config(100, 60, 20, 2026);
  const CellResult res = run_cell(cell, cfg);
  // Binomial(100, 0.05) stays below 15 rejections far beyond any reasonable
  // failure probability; a broken permutation scheme lands well outside.
  REQUIRE(res.rejections <= 15);
  double mean_p = 0.0;
  for (double p : res.pvalues) mean_p += p;
  mean_p /= 100.0;
  REQUIRE(mean_p > 0.35);
  REQUIRE(mean_p < 0.65);
}

TEST_CASE("one-sided proportion test orders and bounds correctly",
          "[bench]") {
  const double strong = one_sided_proportion_pvalue(30, 100, 10, 100);
  REQUIRE(strong < 0.001);
  const double reversed = one_sided_proportion_pvalue(10, 100, 30, 100);
  REQUIRE(reversed > 0.999);
  REQUIRE(strong + reversed == Approx(1.0).epsilon(1e-12));
  REQUIRE(one_sided_proportion_pvalue(40, 100, 10, 100) < strong);

  REQUIRE(one_sided_proportion_pvalue(0, 50, 0, 60) == 0.5);
  REQUIRE(one_sided_proportion_pvalue(50, 50, 40, 40) == 0.5);
  REQUIRE(one_sided_proportion_pvalue(50, 100, 50, 100) == 0.5);

  REQUIRE_THROWS_AS(one_sided_proportion_pvalue(-1, 10, 0, 10), ConfigError);
  REQUIRE_THROWS_AS(one_sided_proportion_pvalue(11, 10, 0, 10), ConfigError);
  REQUIRE_THROWS_AS(one_sided_proportion_pvalue(0, 0, 0, 10), ConfigError);
}

TEST_CASE("binomial interval matches the exact tail equations", "[bench]") {
  const Interval ci = binomial_ci(5, 50, 0.95);
  REQUIRE(ci.lo > 0.0);
  REQUIRE(ci.lo < 0.1);
  REQUIRE(ci.hi > 0.1);
  REQUIRE(ci.hi < 1.0);
  // Clopper-Pearson endpoints put alpha/2 mass at or beyond the count.
  REQUIRE(oracle::binomial_cdf(5, 50, ci.hi) == Approx(0.025).margin(1e-6));
  REQUIRE(oracle::binomial_cdf(4, 50, ci.lo) == Approx(0.975).margin(1e-6));

  const Interval tight = binomial_ci(20, 200, 0.95);
  REQUIRE(tight.hi - tight.lo < ci.hi - ci.lo);
  REQUIRE(oracle::binomial_cdf(20, 200, tight.hi) ==
          Approx(0.025).margin(1e-6));
  REQUIRE(oracle::binomial_cdf(19, 200, tight.lo) ==
          Approx(0.975).margin(1e-6));

  REQUIRE(binomial_ci(0, 30, 0.95).lo == 0.0);
  REQUIRE(binomial_ci(30, 30, 0.95).hi == 1.0);
}

TEST_CASE("cell results round-trip through the summary file", "[bench]") {
  CellResult a;
  a.cell_id = "cell_a";
  a.replicates = 200;
  a.rejections = 11;
  a.rate = 0.055;
  a.ci = {0.0277, 0.0964};
  a.mean_test_ms = 12.375;
  CellResult b;
  b.cell_id = "cell_b";
  b.replicates = 100;
  b.rejections = 0;
  b.rate = 0.0;
  b.ci = {0.0, 0.0362};
  b.mean_test_ms = 0.5;

  RunConfig cfg;
  cfg.alpha = 0.05;
  TempDir dir;
  const std::string path = dir.file("cells.csv");
  write_cell_results_csv(path, {a, b}, cfg);

  const csv::Table table = csv::read(path);
  REQUIRE(table.header ==
          std::vector<std::string>{"cell_id", "replicates", "rejections",
                                   "rate", "ci_lo", "ci_hi", "alpha",
                                   "mean_test_ms"});
  REQUIRE(table.rows.size() == 2);
  REQUIRE(table.rows[0][0] == "cell_a");
  REQUIRE(table.rows[0][1] == "200");
  REQUIRE(table.rows[0][2] == "11");
  REQUIRE(csv::parse_real(table.rows[0][3], "rate") == 0.055);
  REQUIRE(csv::parse_real(table.rows[0][4], "ci_lo") == 0.0277);
  REQUIRE(csv::parse_real(table.rows[0][5], "ci_hi") == 0.0964);
  REQUIRE(csv::parse_real(table.rows[0][6], "alpha") == 0.05);
  REQUIRE(csv::parse_real(table.rows[0][7], "ms") == 12.375);
  REQUIRE(table.rows[1][0] == "cell_b");
  REQUIRE(csv::parse_real(table.rows[1][3], "rate") == 0.0);

  REQUIRE_THROWS_AS(
      write_cell_results_csv(dir.str() + "/missing/cells.csv", {a}, cfg),
      Error);
}

TEST_CASE("quantile file clamps zero p-values at the resolution floor",
          "[bench]") {
  CellResult res;
  res.cell_id = "qq";
  res.pvalues = {0.5, 0.1, 1.0, 0.0};
  PermPlan plan;
  plan.b_total = 19;  // floor at 0.5 / 20

  TempDir dir;
  const std::string path = dir.file("qq.csv");
  write_qq_csv(path, {res}, plan);

  const csv::Table table = csv::read(path);
  REQUIRE(table.header ==
          std::vector<std::string>{"cell_id", "rank", "p_observed",
                                   "neglog10_expected", "neglog10_observed"});
  REQUIRE(table.rows.size() == 4);
  const std::vector<double> sorted{0.0, 0.1, 0.5, 1.0};
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(table.rows[i][0] == "qq");
    REQUIRE(table.rows[i][1] == std::to_string(i + 1));
    REQUIRE(csv::parse_real(table.rows[i][2], "p") == sorted[i]);
    const double expected = (static_cast<double>(i) + 0.5) / 4.0;
    REQUIRE(csv::parse_real(table.rows[i][3], "e") ==
            Approx(-std::log10(expected)).epsilon(1e-12));
    const double clamped = std::max(sorted[i], 0.5 / 20.0);
    REQUIRE(csv::parse_real(table.rows[i][4], "o") ==
            Approx(-std::log10(clamped)).epsilon(1e-12));
  }
}

TEST_CASE("allocation gauge sees matrix and container buffers", "[bench]") {
  memtrack::reset_high_water();
  const std::size_t c0 = memtrack::current();
  std::size_t with_matrix = 0;
  std::size_t high_matrix = 0;
  {
    Matrix big = Matrix::Zero(512, 256);  // one mebibyte of doubles
    big(0, 0) = 1.0;
    with_matrix = memtrack::current();
    high_matrix = memtrack::high_water();
  }
  const std::size_t after_matrix = memtrack::current();

  REQUIRE(with_matrix >= c0 + (512u * 256u * sizeof(double)));
  REQUIRE(high_matrix >= with_matrix);
  REQUIRE(after_matrix < with_matrix);
  REQUIRE(memtrack::high_water() >= high_matrix);

  std::size_t with_vector = 0;
  {
    std::vector<double> bulk(100000, 1.0);
    bulk[0] = 2.0;
    with_vector = memtrack::current();
  }
  REQUIRE(with_vector >= after_matrix + 100000 * sizeof(double));
  REQUIRE(memtrack::reset_high_water() == memtrack::current());
  REQUIRE(memtrack::high_water() == memtrack::current());
}

TEST_CASE("timing run keeps the permutation pass lean", "[bench]") {
  TimingConfig cfg;
  cfg.n = 2000;
  cfg.snps = 80;
  cfg.covariates = 2;
  cfg.replicates = 4;
  cfg.b_total = 500;
  cfg.b_init = 40;
  cfg.theta = 0.1;
  cfg.seed = 7;
  const TimingResult res = run_timing(cfg);

  REQUIRE(res.build_ms_mean > 0.0);
  REQUIRE(res.full_run_ms_mean > 0.0);
  // Permutation cost is linear in the count, and the table build sits
  // outside the timed region, so doubling B roughly doubles the time.
  REQUIRE(res.scaling_ratio > 1.6);
  REQUIRE(res.scaling_ratio < 2.4);
  // Null data stops at the initial batch almost always, so the dynamic run
  // costs a fraction of the full one (40 of 500 permutations).
  REQUIRE(res.dynamic_over_full_median > 0.0);
  REQUIRE(res.dynamic_over_full_median < 0.25);

  const std::size_t expect_bytes =
      (2000u * 80u + 2000u * 2u + 2000u) * sizeof(double) +
      2000u * sizeof(int);
  REQUIRE(res.dataset_bytes == expect_bytes);
  REQUIRE(res.table_bytes > res.dataset_bytes);  // cached omega regime
  REQUIRE(res.peak_extra_bytes > 0);
  // The permutation pass reuses one coefficient vector per draw; even a
  // single materialized genotype copy would blow this bound.
  REQUIRE(res.peak_extra_bytes < res.dataset_bytes / 4);
  REQUIRE_FALSE(res.permuted_matrix_materialized);

  TimingConfig bad = cfg;
  bad.replicates = 0;
  REQUIRE_THROWS_MATCHES(run_timing(bad), ConfigError,
                         Catch::Matchers::MessageMatches(ContainsSubstring(
                             "timing replicate")));
}

TEST_CASE("timing metrics round-trip through the report file", "[bench]") {
  TimingResult res;
  res.build_ms_mean = 41.5;
  res.full_run_ms_mean = 812.25;
  res.scaling_ratio = 1.97;
  res.dynamic_over_full_median = 0.11;
  res.dataset_bytes = 1336000;
  res.table_bytes = 19456128;
  res.peak_extra_bytes = 65536;
  res.permuted_matrix_materialized = false;

  TempDir dir;
  const std::string path = dir.file("timing.csv");
  write_timing_csv(path, res);

  const csv::Table table = csv::read(path);
  REQUIRE(table.header == std::vector<std::string>{"metric", "value"});
  REQUIRE(table.rows.size() == 8);
  REQUIRE(table.rows[0][0] == "build_ms_mean");
  REQUIRE(csv::parse_real(table.rows[0][1], "v") == 41.5);
  REQUIRE(table.rows[1][0] == "full_run_ms_mean");
  REQUIRE(csv::parse_real(table.rows[1][1], "v") == 812.25);
  REQUIRE(table.rows[2][0] == "scaling_ratio_b80_b40");
  REQUIRE(csv::parse_real(table.rows[2][1], "v") == 1.97);
  REQUIRE(table.rows[3][0] == "dynamic_over_full_median");
  REQUIRE(csv::parse_real(table.rows[3][1], "v") == 0.11);
  REQUIRE(table.rows[4][0] == "dataset_bytes");
  REQUIRE(table.rows[4][1] == "1336000");
  REQUIRE(table.rows[5][0] == "table_bytes");
  REQUIRE(table.rows[5][1] == "19456128");
  REQUIRE(table.rows[6][0] == "peak_extra_bytes");
  REQUIRE(table.rows[6][1] == "65536");
  REQUIRE(table.rows[7][0] == "permuted_matrix_materialized");
  REQUIRE(table.rows[7][1] == "0");
}

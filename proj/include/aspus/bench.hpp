#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aspus/coxnull.hpp"
#include "aspus/numeric.hpp"
#include "aspus/simgen.hpp"
#include "aspus/spu.hpp"
#include "aspus/types.hpp"

namespace aspus {

/// One experiment cell: a named scenario to replicate.
struct Cell {
  std::string id;
  Scenario scenario;
};

struct RunConfig {
  Index replicates = 200;
  double alpha = 0.05;
  double ci_level = 0.95;
  PermPlan plan;  // plan.seed is the master seed for the whole experiment
  FitOptions fit;
  int workers = 1;

  void validate() const;
};

struct CellResult {
  std::string cell_id;
  Index replicates = 0;
  Index rejections = 0;
  double rate = 0.0;
  Interval ci;
  double mean_test_ms = 0.0;  // weight-table build plus adaptive test
  std::vector<double> pvalues;  // adaptive p per replicate, replicate order
};

/// The scenario's single test unit: the one gene for gene layouts, the one
/// pathway (skipping genes emptied by causal-column removal) for pathway
/// layouts. All weights are 1.
TestUnit scenario_unit(const SimOutput& out);

/// Replicates one cell: per replicate, generate data, fit the null, build the
/// weight table, and run the adaptive test; the censoring bound is calibrated
/// once per cell so every replicate shares it. Deterministic in
/// (cell.id, plan.seed) for any worker count.
CellResult run_cell(const Cell& cell, const RunConfig& config);

/// run_cell over cells whose effect size is zero; throws otherwise.
std::vector<CellResult> run_type1(const std::vector<Cell>& cells,
                                  const RunConfig& config);

/// run_cell over cells, at least one with a positive effect size.
std::vector<CellResult> run_power(const std::vector<Cell>& cells,
                                  const RunConfig& config);

/// Pooled one-sided two-proportion z-test of rate_a > rate_b.
double one_sided_proportion_pvalue(Index hits_a, Index n_a, Index hits_b,
                                   Index n_b);

/// cell_id,replicates,rejections,rate,ci_lo,ci_hi,alpha,mean_test_ms
void write_cell_results_csv(const std::string& path,
                            const std::vector<CellResult>& results,
                            const RunConfig& config);

/// Per-cell sorted observed p-values against uniform expectations on the
/// -log10 scale; zero p-values are clamped at 0.5/(B+1) before the log.
void write_qq_csv(const std::string& path,
                  const std::vector<CellResult>& results,
                  const PermPlan& plan);

struct TimingConfig {
  Index n = 2000;
  Index snps = 80;
  Index covariates = 2;
  Index replicates = 10;
  Index b_total = 500;
  Index b_init = 40;
  double theta = 0.1;
  std::uint64_t seed = 0;
};

struct TimingResult {
  double build_ms_mean = 0.0;     // weight-table construction
  double full_run_ms_mean = 0.0;  // theta = 1 at the full permutation count
  double scaling_ratio = 0.0;     // total time at B=80 over B=40, theta = 1
  double dynamic_over_full_median = 0.0;  // per-replicate theta vs theta=1
  std::size_t dataset_bytes = 0;  // numeric payload of one dataset copy
  std::size_t table_bytes = 0;
  std::size_t peak_extra_bytes = 0;  // allocation high-water during the run
  bool permuted_matrix_materialized = false;
};

/// Single-threaded wall-clock and allocator measurements on null-gene
/// datasets of the configured size.
TimingResult run_timing(const TimingConfig& config);

/// metric,value rows.
void write_timing_csv(const std::string& path, const TimingResult& result);

}  // namespace aspus

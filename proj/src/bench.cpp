#include "aspus/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "aspus/csv.hpp"
#include "aspus/errors.hpp"
#include "aspus/memtrack.hpp"
#include "aspus/rng.hpp"
#include "aspus/score_engine.hpp"
#include "aspus/threads.hpp"

namespace aspus {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

GammaGrid grid_for(const Scenario& sc) {
  return sc.is_pathway ? GammaGrid::pathway_defaults()
                       : GammaGrid::gene_defaults();
}

std::size_t numeric_payload_bytes(const SurvivalDataset& ds) {
  return static_cast<std::size_t>(ds.geno.size() + ds.covar.size() +
                                  ds.time.size()) *
             sizeof(double) +
         static_cast<std::size_t>(ds.status.size()) * sizeof(int);
}

}  // namespace

void RunConfig::validate() const {
  if (replicates < 1) throw ConfigError("need at least one replicate");
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (!(ci_level > 0.0) || !(ci_level < 1.0)) {
    throw ConfigError("confidence level must lie in (0, 1)");
  }
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  plan.validate();
}

TestUnit scenario_unit(const SimOutput& out) {
  TestUnit unit;
  if (out.pathway_id.empty()) {
    unit.id = out.gene_ids.at(0);
    unit.cols = out.gene_cols.at(0);
    if (unit.cols.empty()) {
      throw ConfigError("scenario left no SNP columns to test");
    }
    unit.snp_weights = Vector::Ones(static_cast<Index>(unit.cols.size()));
    unit.validate();
    return unit;
  }
  unit.id = out.pathway_id;
  unit.pathway = true;
  for (std::size_t g = 0; g < out.gene_cols.size(); ++g) {
    if (out.gene_cols[g].empty()) continue;
    unit.cols.insert(unit.cols.end(), out.gene_cols[g].begin(),
                     out.gene_cols[g].end());
    unit.gene_sizes.push_back(static_cast<Index>(out.gene_cols[g].size()));
  }
  if (unit.cols.empty()) {
    throw ConfigError("scenario left no SNP columns to test");
  }
  unit.snp_weights = Vector::Ones(static_cast<Index>(unit.cols.size()));
  unit.gene_weights = Vector::Ones(static_cast<Index>(unit.gene_sizes.size()));
  unit.validate();
  return unit;
}

CellResult run_cell(const Cell& cell, const RunConfig& config) {
  config.validate();
  if (cell.id.empty()) throw ConfigError("experiment cell has an empty id");
  Scenario base = cell.scenario;
  base.validate();
  base.seed = substream(config.plan.seed, fnv1a64(cell.id), 0);
  if (!base.tau) base.tau = calibrate_tau(base);

  CellResult res;
  res.cell_id = cell.id;
  res.replicates = config.replicates;
  res.pvalues.assign(static_cast<std::size_t>(config.replicates), 1.0);
  std::vector<double> test_ms(static_cast<std::size_t>(config.replicates));

  parallel_for(config.replicates, config.workers, [&](Index r) {
    Scenario sc = base;
    sc.seed = substream(config.plan.seed, fnv1a64(cell.id),
                        static_cast<std::uint64_t>(r) + 1);
    const SimOutput out = build_scenario(sc);
    const NullModel null = fit_null(out.dataset, config.fit);
    const auto start = Clock::now();
    const WeightTable wt = build_weight_table(out.dataset, null);
    const TestUnit unit = scenario_unit(out);
    PermPlan plan = config.plan;
    plan.seed = sc.seed;
    const SpuResult sr =
        run_adaptive_test(out.dataset, wt, unit, grid_for(sc), plan);
    test_ms[static_cast<std::size_t>(r)] = ms_since(start);
    res.pvalues[static_cast<std::size_t>(r)] = sr.p_aspus;
  });

  for (double p : res.pvalues) res.rejections += (p <= config.alpha);
  res.rate = static_cast<double>(res.rejections) /
             static_cast<double>(res.replicates);
  res.ci = binomial_ci(res.rejections, res.replicates, config.ci_level);
  double total_ms = 0.0;
  for (double t : test_ms) total_ms += t;
  res.mean_test_ms = total_ms / static_cast<double>(config.replicates);
  return res;
}

std::vector<CellResult> run_type1(const std::vector<Cell>& cells,
                                  const RunConfig& config) {
  for (const Cell& cell : cells) {
    if (cell.scenario.effect_a != 0.0) {
      throw ConfigError("cell '" + cell.id +
                        "' has a nonzero effect size in a type-I experiment");
    }
  }
  std::vector<CellResult> out;
  out.reserve(cells.size());
  for (const Cell& cell : cells) out.push_back(run_cell(cell, config));
  return out;
}

std::vector<CellResult> run_power(const std::vector<Cell>& cells,
                                  const RunConfig& config) {
  bool any_effect = false;
  for (const Cell& cell : cells) any_effect |= cell.scenario.effect_a > 0.0;
  if (!any_effect) {
    throw ConfigError("power experiment needs a cell with a positive effect");
  }
  std::vector<CellResult> out;
  out.reserve(cells.size());
  for (const Cell& cell : cells) out.push_back(run_cell(cell, config));
  return out;
}

double one_sided_proportion_pvalue(Index hits_a, Index n_a, Index hits_b,
                                   Index n_b) {
  if (n_a < 1 || n_b < 1 || hits_a < 0 || hits_b < 0 || hits_a > n_a ||
      hits_b > n_b) {
    throw ConfigError("proportion test needs 0 <= hits <= n on both sides");
  }
  const double pa = static_cast<double>(hits_a) / static_cast<double>(n_a);
  const double pb = static_cast<double>(hits_b) / static_cast<double>(n_b);
  const double pooled = static_cast<double>(hits_a + hits_b) /
                        static_cast<double>(n_a + n_b);
  const double variance = pooled * (1.0 - pooled) *
                          (1.0 / static_cast<double>(n_a) +
                           1.0 / static_cast<double>(n_b));
  if (variance <= 0.0) return 0.5;  // both rates equal at a boundary
  const double z = (pa - pb) / std::sqrt(variance);
  return 1.0 - normal_cdf(z);
}

void write_cell_results_csv(const std::string& path,
                            const std::vector<CellResult>& results,
                            const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "cell_id,replicates,rejections,rate,ci_lo,ci_hi,alpha,mean_test_ms\n";
  for (const CellResult& r : results) {
    out << r.cell_id << ',' << r.replicates << ',' << r.rejections << ','
        << csv::format_real(r.rate) << ',' << csv::format_real(r.ci.lo) << ','
        << csv::format_real(r.ci.hi) << ',' << csv::format_real(config.alpha)
        << ',' << csv::format_real(r.mean_test_ms) << '\n';
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

void write_qq_csv(const std::string& path,
                  const std::vector<CellResult>& results,
                  const PermPlan& plan) {
  const double floor =
      0.5 / static_cast<double>(plan.b_total + 1);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "cell_id,rank,p_observed,neglog10_expected,neglog10_observed\n";
  for (const CellResult& r : results) {
    std::vector<double> sorted = r.pvalues;
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double expected =
          (static_cast<double>(i) + 0.5) / m;
      const double observed = std::max(sorted[i], floor);
      out << r.cell_id << ',' << (i + 1) << ','
          << csv::format_real(sorted[i]) << ','
          << csv::format_real(-std::log10(expected)) << ','
          << csv::format_real(-std::log10(observed)) << '\n';
    }
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

TimingResult run_timing(const TimingConfig& config) {
  if (config.replicates < 1) {
    throw ConfigError("need at least one timing replicate");
  }
  Scenario sc;
  sc.n = config.n;
  sc.covariates = config.covariates;
  sc.gene.n_snps = config.snps;
  sc.gene.n_causal = 0;
  sc.effect_a = 0.0;
  sc.seed = substream(config.seed, fnv1a64("timing"), 0);
  sc.tau = calibrate_tau(sc);
  const GammaGrid grid = GammaGrid::gene_defaults();

  TimingResult res;
  double build_ms = 0.0;
  double full_ms = 0.0;
  double t40_ms = 0.0;
  double t80_ms = 0.0;
  std::vector<double> dyn_ratios;
  std::size_t peak_extra = 0;

  for (Index r = 0; r < config.replicates; ++r) {
    sc.seed = substream(config.seed, fnv1a64("timing"),
                        static_cast<std::uint64_t>(r) + 1);
    const SimOutput out = build_scenario(sc);
    const NullModel null = fit_null(out.dataset);

    auto start = Clock::now();
    const WeightTable wt = build_weight_table(out.dataset, null);
    build_ms += ms_since(start);
    if (r == 0) {
      res.dataset_bytes = numeric_payload_bytes(out.dataset);
      res.table_bytes = wt.memory_bytes();
    }
    const TestUnit unit = scenario_unit(out);

    PermPlan full;
    full.b_total = config.b_total;
    full.b_init = config.b_init;
    full.theta = 1.0;
    full.seed = sc.seed;

    memtrack::reset_high_water();
    const std::size_t mem_before = memtrack::current();
    start = Clock::now();
    run_adaptive_test(out.dataset, wt, unit, grid, full);
    const double t_full = ms_since(start);
    full_ms += t_full;
    const std::size_t high = memtrack::high_water();
    if (high > mem_before) {
      peak_extra = std::max(peak_extra, high - mem_before);
    }

    PermPlan dynamic = full;
    dynamic.theta = config.theta;
    start = Clock::now();
    run_adaptive_test(out.dataset, wt, unit, grid, dynamic);
    dyn_ratios.push_back(ms_since(start) / t_full);

    PermPlan p40 = full;
    p40.b_total = 40;
    p40.b_init = 40;
    start = Clock::now();
    run_adaptive_test(out.dataset, wt, unit, grid, p40);
    t40_ms += ms_since(start);

    PermPlan p80 = full;
    p80.b_total = 80;
    p80.b_init = 40;
    start = Clock::now();
    run_adaptive_test(out.dataset, wt, unit, grid, p80);
    t80_ms += ms_since(start);
  }

  const double reps = static_cast<double>(config.replicates);
  res.build_ms_mean = build_ms / reps;
  res.full_run_ms_mean = full_ms / reps;
  res.scaling_ratio = t80_ms / t40_ms;
  std::sort(dyn_ratios.begin(), dyn_ratios.end());
  const std::size_t mid = dyn_ratios.size() / 2;
  res.dynamic_over_full_median =
      dyn_ratios.size() % 2 == 1
          ? dyn_ratios[mid]
          : 0.5 * (dyn_ratios[mid - 1] + dyn_ratios[mid]);
  res.peak_extra_bytes = peak_extra;
  res.permuted_matrix_materialized = false;
  return res;
}

void write_timing_csv(const std::string& path, const TimingResult& result) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "metric,value\n";
  out << "build_ms_mean," << csv::format_real(result.build_ms_mean) << '\n';
  out << "full_run_ms_mean," << csv::format_real(result.full_run_ms_mean)
      << '\n';
  out << "scaling_ratio_b80_b40," << csv::format_real(result.scaling_ratio)
      << '\n';
  out << "dynamic_over_full_median,"
      << csv::format_real(result.dynamic_over_full_median) << '\n';
  out << "dataset_bytes," << result.dataset_bytes << '\n';
  out << "table_bytes," << result.table_bytes << '\n';
  out << "peak_extra_bytes," << result.peak_extra_bytes << '\n';
  out << "permuted_matrix_materialized,"
      << (result.permuted_matrix_materialized ? 1 : 0) << '\n';
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace aspus

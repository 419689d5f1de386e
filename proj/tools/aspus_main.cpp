#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aspus/bench.hpp"
#include "aspus/coxnull.hpp"
#include "aspus/errors.hpp"
#include "aspus/score_engine.hpp"
#include "aspus/simgen.hpp"
#include "aspus/spu.hpp"
#include "aspus/survdata.hpp"
#include "json.hpp"

namespace {

using aspus::Index;

std::vector<double> parse_gammas(const std::string& text) {
  std::vector<double> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item == "inf" || item == "Inf" || item == "INF") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    std::size_t used = 0;
    const double value = std::stod(item, &used);
    if (used != item.size()) {
      throw aspus::ConfigError("cannot parse exponent '" + item + "'");
    }
    out.push_back(value);
  }
  if (out.empty()) {
    throw aspus::ConfigError("exponent list is empty");
  }
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) {
    std::cerr << "warning: " << w << '\n';
  }
}

struct TestArgs {
  std::string geno;
  std::string pheno;
  std::string covar;
  std::string genemap;
  std::string pathway;
  std::string out = "results.csv";
  std::string pathway_out = "pathway_results.csv";
  std::string gammas = "1,2,4,8,inf";
  std::string pathway_snp_gammas = "1,2,4,8";
  std::string pathway_gene_gammas = "1,2,4,8";
  aspus::PermPlan plan;
  aspus::FitOptions fit;
  bool allow_unconverged = false;
  int threads = 1;
};

int run_test(const TestArgs& args) {
  const aspus::SurvivalDataset ds =
      aspus::load_dataset(args.geno, args.pheno, args.covar);
  std::cout << "loaded " << ds.n() << " subjects, " << ds.snp_count()
            << " SNPs, " << ds.covar_count() << " covariates, "
            << ds.event_count() << " events\n";

  const aspus::NullModel null = aspus::fit_null(ds, args.fit);
  if (!null.converged && !args.allow_unconverged) {
    throw aspus::ConvergenceError(
        "null model did not converge after " +
        std::to_string(null.iterations) +
        " iterations; raise --max-iter or pass --allow-unconverged");
  }
  aspus::WeightTableOptions wt_opts;
  wt_opts.allow_unconverged = args.allow_unconverged;
  const aspus::WeightTable wt = aspus::build_weight_table(ds, null, wt_opts);

  const aspus::GeneMap genemap = aspus::load_genemap(args.genemap, ds);
  print_warnings(genemap.warnings);
  if (genemap.size() == 0) {
    throw aspus::ValidationError("gene map matched no SNPs in the dataset");
  }

  aspus::GammaGrid gene_grid;
  gene_grid.snp_gammas = parse_gammas(args.gammas);
  std::vector<aspus::TestUnit> gene_units;
  for (Index g = 0; g < genemap.size(); ++g) {
    gene_units.push_back(aspus::make_gene_unit(genemap, g));
  }
  const std::vector<aspus::SpuResult> gene_results = aspus::run_units(
      ds, wt, gene_units, gene_grid, args.plan, args.threads);
  aspus::write_results_csv(args.out, gene_results, gene_grid);
  std::cout << "wrote " << gene_results.size() << " gene results to "
            << args.out << '\n';

  if (args.pathway.empty()) return 0;
  const aspus::PathwayMap pathways =
      aspus::load_pathwaymap(args.pathway, genemap);
  print_warnings(pathways.warnings);
  if (pathways.size() == 0) {
    throw aspus::ValidationError("pathway map matched no genes");
  }
  aspus::GammaGrid pw_grid;
  pw_grid.snp_gammas = parse_gammas(args.pathway_snp_gammas);
  pw_grid.gene_gammas = parse_gammas(args.pathway_gene_gammas);
  std::vector<aspus::TestUnit> pw_units;
  for (Index p = 0; p < pathways.size(); ++p) {
    pw_units.push_back(aspus::make_pathway_unit(genemap, pathways, p));
  }
  const std::vector<aspus::SpuResult> pw_results =
      aspus::run_units(ds, wt, pw_units, pw_grid, args.plan, args.threads);
  aspus::write_results_csv(args.pathway_out, pw_results, pw_grid);
  std::cout << "wrote " << pw_results.size() << " pathway results to "
            << args.pathway_out << '\n';
  return 0;
}

nlohmann::json scenario_json(const aspus::Scenario& sc) {
  nlohmann::json j;
  j["n"] = sc.n;
  j["covariates"] = sc.covariates;
  j["covar_beta"] = sc.covar_beta;
  j["correlated"] = sc.correlated;
  j["lambda0"] = sc.lambda0;
  j["is_pathway"] = sc.is_pathway;
  if (sc.is_pathway) {
    j["genes"] = sc.pathway.genes;
    j["snps_per_gene_min"] = sc.pathway.snps_per_gene_min;
    j["snps_per_gene_max"] = sc.pathway.snps_per_gene_max;
    j["causal_genes"] = sc.pathway.causal_genes;
  } else {
    j["snps"] = sc.gene.n_snps;
    j["causal_snps"] = sc.gene.n_causal;
  }
  j["effect_a"] = sc.effect_a;
  j["maf_min"] = sc.maf_min;
  j["maf_max"] = sc.maf_max;
  j["event_target"] = sc.event_target;
  j["background_prevalence"] = sc.background_prevalence;
  j["drop_causal"] = sc.drop_causal;
  if (sc.tau) j["tau"] = *sc.tau;
  j["seed"] = sc.seed;
  return j;
}

int run_simulate(const aspus::Scenario& scenario, const std::string& out_dir) {
  const aspus::SimOutput out = aspus::build_scenario(scenario);
  aspus::write_sim_output(out, out_dir);

  nlohmann::json j = scenario_json(scenario);
  j["tau"] = out.truth.tau;
  j["realized_event_rate"] = out.truth.event_rate;
  j["total_snps"] = out.truth.snp_ids.size();
  j["retained_snps"] = out.dataset.snp_ids.size();
  const auto json_path =
      (std::filesystem::path(out_dir) / "scenario.json").string();
  std::ofstream json_file(json_path);
  if (!json_file) {
    throw aspus::Error("cannot open '" + json_path + "' for writing");
  }
  json_file << j.dump(2) << '\n';

  std::cout << "wrote " << out.dataset.n() << " subjects, "
            << out.dataset.snp_count() << " SNPs to " << out_dir
            << " (event rate " << out.truth.event_rate << ", tau "
            << out.truth.tau << ")\n";
  return 0;
}

struct BenchArgs {
  std::string out_dir = "bench";
  aspus::RunConfig config;
  Index n = 1000;
  std::vector<Index> snp_counts = {10, 50};
  std::vector<std::string> ld_modes = {"independent", "correlated"};
  std::vector<double> effects = {0.2, 0.4, 0.6};
  std::vector<Index> causal_counts = {3};
  bool pathway = false;
  Index genes = 20;
  Index snps_per_gene = 10;
  Index covariates = 2;
  double covar_beta = 0.1;
};

aspus::Scenario base_scenario(const BenchArgs& args) {
  aspus::Scenario sc;
  sc.n = args.n;
  sc.covariates = args.covariates;
  sc.covar_beta = args.covar_beta;
  return sc;
}

std::vector<aspus::Cell> type1_cells(const BenchArgs& args) {
  std::vector<aspus::Cell> cells;
  for (const std::string& ld : args.ld_modes) {
    if (ld != "independent" && ld != "correlated") {
      throw aspus::ConfigError("LD mode must be independent or correlated");
    }
    if (args.pathway) {
      aspus::Scenario sc = base_scenario(args);
      sc.is_pathway = true;
      sc.correlated = ld == "correlated";
      sc.pathway.genes = args.genes;
      sc.pathway.snps_per_gene_min = args.snps_per_gene;
      sc.pathway.snps_per_gene_max = args.snps_per_gene;
      cells.push_back({"pathway_" + ld + "_g" + std::to_string(args.genes) +
                           "_s" + std::to_string(args.snps_per_gene),
                       sc});
      continue;
    }
    for (Index snps : args.snp_counts) {
      aspus::Scenario sc = base_scenario(args);
      sc.correlated = ld == "correlated";
      sc.gene.n_snps = snps;
      cells.push_back({"gene_" + ld + "_p" + std::to_string(snps), sc});
    }
  }
  return cells;
}

std::vector<aspus::Cell> power_cells(const BenchArgs& args) {
  std::vector<aspus::Cell> cells;
  for (const std::string& ld : args.ld_modes) {
    if (ld != "independent" && ld != "correlated") {
      throw aspus::ConfigError("LD mode must be independent or correlated");
    }
    for (Index snps : args.snp_counts) {
      for (Index causal : args.causal_counts) {
        for (double a : args.effects) {
          aspus::Scenario sc = base_scenario(args);
          sc.correlated = ld == "correlated";
          sc.gene.n_snps = snps;
          sc.gene.n_causal = causal;
          sc.effect_a = a;
          std::ostringstream id;
          id << "gene_" << ld << "_p" << snps << "_c" << causal << "_a" << a;
          cells.push_back({id.str(), sc});
        }
      }
    }
  }
  return cells;
}

int run_bench(const std::vector<aspus::Cell>& cells,
              const aspus::RunConfig& config, const std::string& out_dir,
              bool type1) {
  std::filesystem::create_directories(out_dir);
  const std::vector<aspus::CellResult> results =
      type1 ? aspus::run_type1(cells, config)
            : aspus::run_power(cells, config);
  const auto join = [&out_dir](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };
  aspus::write_cell_results_csv(join("results.csv"), results, config);
  aspus::write_qq_csv(join("qq.csv"), results, config.plan);
  for (const aspus::CellResult& r : results) {
    std::cout << r.cell_id << ": rate " << r.rate << " [" << r.ci.lo << ", "
              << r.ci.hi << "] over " << r.replicates << " replicates, mean "
              << r.mean_test_ms << " ms/test\n";
  }
  std::cout << "wrote " << join("results.csv") << " and " << join("qq.csv")
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Adaptive powered-score association tests for censored survival "
      "outcomes"};
  app.require_subcommand(1);

  TestArgs test_args;
  CLI::App* test = app.add_subcommand(
      "test", "Scan genes (and optionally pathways) in a dataset");
  test->add_option("--geno", test_args.geno, "Genotype CSV")->required();
  test->add_option("--pheno", test_args.pheno, "Phenotype CSV")->required();
  test->add_option("--covar", test_args.covar, "Covariate CSV");
  test->add_option("--genemap", test_args.genemap, "SNP-to-gene CSV")
      ->required();
  test->add_option("--pathway", test_args.pathway, "Gene-to-pathway CSV");
  test->add_option("--out", test_args.out, "Gene results CSV");
  test->add_option("--pathway-out", test_args.pathway_out,
                   "Pathway results CSV");
  test->add_option("--b", test_args.plan.b_total, "Total permutations");
  test->add_option("--b-init", test_args.plan.b_init,
                   "Initial permutation batch");
  test->add_option("--theta", test_args.plan.theta,
                   "Continue past the initial batch only when p < theta");
  test->add_option("--seed", test_args.plan.seed, "Master RNG seed");
  test->add_flag("--plus-one", test_args.plan.plus_one,
                 "Report (1+count)/(B+1) adaptive p-values");
  test->add_option("--gammas", test_args.gammas,
                   "Gene exponents, comma-separated (inf allowed)");
  test->add_option("--pathway-snp-gammas", test_args.pathway_snp_gammas,
                   "Pathway SNP-level exponents");
  test->add_option("--pathway-gene-gammas", test_args.pathway_gene_gammas,
                   "Pathway gene-level exponents");
  test->add_option("--tol", test_args.fit.tol, "Null-fit gradient tolerance");
  test->add_option("--max-iter", test_args.fit.max_iter,
                   "Null-fit Newton iteration cap");
  test->add_flag("--allow-unconverged", test_args.allow_unconverged,
                 "Proceed even when the null fit is flagged unconverged");
  test->add_option("--threads", test_args.threads, "Worker threads");

  aspus::Scenario scenario;
  std::string sim_out_dir = "simdata";
  double sim_tau = 0.0;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--n", scenario.n, "Subjects");
  simulate->add_option("--covariates", scenario.covariates,
                       "Covariate count");
  simulate->add_option("--covar-beta", scenario.covar_beta,
                       "Coefficient shared by all covariates");
  simulate->add_flag("--correlated", scenario.correlated,
                     "Draw an LD correlation structure");
  simulate->add_option("--lambda0", scenario.lambda0,
                       "Wishart scale diagonal");
  simulate->add_flag("--pathway", scenario.is_pathway,
                     "Pathway layout instead of a single gene");
  simulate->add_option("--snps", scenario.gene.n_snps, "SNPs in the gene");
  simulate->add_option("--causal", scenario.gene.n_causal,
                       "Causal SNPs in the gene");
  simulate->add_option("--genes", scenario.pathway.genes, "Pathway genes");
  simulate->add_option("--snps-per-gene-min",
                       scenario.pathway.snps_per_gene_min,
                       "Smallest gene size");
  simulate->add_option("--snps-per-gene-max",
                       scenario.pathway.snps_per_gene_max,
                       "Largest gene size");
  simulate->add_option("--causal-genes", scenario.pathway.causal_genes,
                       "Causal genes in the pathway");
  simulate->add_option("--a", scenario.effect_a, "Mean causal effect size");
  simulate->add_option("--maf-min", scenario.maf_min,
                       "Lower allele-frequency bound");
  simulate->add_option("--maf-max", scenario.maf_max,
                       "Upper allele-frequency bound");
  simulate->add_option("--event-target", scenario.event_target,
                       "Calibrated event rate");
  simulate->add_flag("--drop-causal", scenario.drop_causal,
                     "Remove causal columns after survival is drawn");
  CLI::Option* tau_opt = simulate->add_option(
      "--tau", sim_tau, "Fixed censoring bound (skips calibration)");
  simulate->add_option("--seed", scenario.seed, "RNG seed");
  simulate->add_option("--out-dir", sim_out_dir, "Output directory");

  BenchArgs bench_args;
  const auto add_bench_common = [&bench_args](CLI::App* cmd) {
    cmd->add_option("--n", bench_args.n, "Subjects per replicate");
    cmd->add_option("--replicates", bench_args.config.replicates,
                    "Replicates per cell");
    cmd->add_option("--alpha", bench_args.config.alpha, "Nominal level");
    cmd->add_option("--b", bench_args.config.plan.b_total,
                    "Total permutations");
    cmd->add_option("--b-init", bench_args.config.plan.b_init,
                    "Initial permutation batch");
    cmd->add_option("--theta", bench_args.config.plan.theta,
                    "Early-stop threshold");
    cmd->add_option("--seed", bench_args.config.plan.seed, "Master seed");
    cmd->add_option("--workers", bench_args.config.workers,
                    "Replicate worker threads");
    cmd->add_option("--covariates", bench_args.covariates, "Covariate count");
    cmd->add_option("--covar-beta", bench_args.covar_beta,
                    "Covariate coefficient");
    cmd->add_option("--out-dir", bench_args.out_dir, "Output directory");
    cmd->add_option("--snps", bench_args.snp_counts,
                    "Gene sizes to test (repeatable)");
    cmd->add_option("--ld", bench_args.ld_modes,
                    "LD modes: independent and/or correlated");
  };

  CLI::App* type1 = app.add_subcommand(
      "bench-type1", "Null rejection rates over simulated replicates");
  add_bench_common(type1);
  type1->add_flag("--pathway", bench_args.pathway, "Pathway cells");
  type1->add_option("--genes", bench_args.genes, "Genes per pathway");
  type1->add_option("--snps-per-gene", bench_args.snps_per_gene,
                    "SNPs per gene");

  CLI::App* power = app.add_subcommand(
      "bench-power", "Rejection rates under signal over simulated replicates");
  add_bench_common(power);
  power->add_option("--a", bench_args.effects, "Effect sizes (repeatable)");
  power->add_option("--causal", bench_args.causal_counts,
                    "Causal SNP counts (repeatable)");

  aspus::TimingConfig timing;
  std::string timing_out_dir = "bench";
  CLI::App* bench_timing = app.add_subcommand(
      "bench-timing", "Single-thread runtime and allocation measurements");
  bench_timing->add_option("--n", timing.n, "Subjects");
  bench_timing->add_option("--snps", timing.snps, "SNPs");
  bench_timing->add_option("--replicates", timing.replicates, "Replicates");
  bench_timing->add_option("--b", timing.b_total, "Total permutations");
  bench_timing->add_option("--b-init", timing.b_init,
                           "Initial permutation batch");
  bench_timing->add_option("--theta", timing.theta, "Early-stop threshold");
  bench_timing->add_option("--seed", timing.seed, "Master seed");
  bench_timing->add_option("--out-dir", timing_out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (test->parsed()) return run_test(test_args);
    if (simulate->parsed()) {
      if (tau_opt->count() > 0) scenario.tau = sim_tau;
      return run_simulate(scenario, sim_out_dir);
    }
    if (type1->parsed()) {
      return run_bench(type1_cells(bench_args), bench_args.config,
                       bench_args.out_dir, true);
    }
    if (power->parsed()) {
      if (power->count("--ld") == 0) bench_args.ld_modes = {"correlated"};
      return run_bench(power_cells(bench_args), bench_args.config,
                       bench_args.out_dir, false);
    }
    if (bench_timing->parsed()) {
      std::filesystem::create_directories(timing_out_dir);
      const aspus::TimingResult result = aspus::run_timing(timing);
      const auto path =
          (std::filesystem::path(timing_out_dir) / "timing.csv").string();
      aspus::write_timing_csv(path, result);
      std::cout << "build " << result.build_ms_mean << " ms, full run "
                << result.full_run_ms_mean << " ms, B-scaling "
                << result.scaling_ratio << ", dynamic/full median "
                << result.dynamic_over_full_median << ", peak extra "
                << result.peak_extra_bytes << " bytes\nwrote " << path << '\n';
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aspus/rng.hpp"
#include "aspus/survdata.hpp"
#include "aspus/types.hpp"

namespace aspus {

/// One gene holding n_snps SNPs, n_causal of them carrying an effect.
struct GeneLayout {
  Index n_snps = 10;
  Index n_causal = 0;
};

/// A pathway of `genes` genes whose sizes are drawn uniformly from
/// [snps_per_gene_min, snps_per_gene_max]; every SNP inside a causal gene
/// carries an effect.
struct PathwayLayout {
  Index genes = 20;
  Index snps_per_gene_min = 2;
  Index snps_per_gene_max = 20;
  Index causal_genes = 0;
};

struct Scenario {
  Index n = 1000;
  Index covariates = 2;
  double covar_beta = 0.1;  // every covariate's coefficient, 0 or 0.1
  bool correlated = false;  // independent SNPs unless set
  double lambda0 = 0.8;     // Wishart scale diagonal for the LD draw
  bool is_pathway = false;
  GeneLayout gene;
  PathwayLayout pathway;
  double effect_a = 0.0;  // causal |beta| ~ Uniform(0.5a, 1.5a), random sign
  double maf_min = 0.001;
  double maf_max = 0.05;
  double event_target = 0.6;
  double background_prevalence = 0.05;  // recorded; enters no equation
  bool drop_causal = false;  // delete causal columns after survival is drawn
  std::optional<double> tau;  // censoring bound; unset means calibrate
  std::uint64_t seed = 0;

  void validate() const;
};

/// Wishart(df = P, diag(lambda0)) draw via the Bartlett factorization, turned
/// into a correlation matrix: unit diagonal, symmetric, positive definite
/// (eigenvalues clipped at 1e-10 and the diagonal renormalized in the rare
/// numerically degenerate case).
Matrix sample_ld_correlation(Index p, double lambda0, Rng& rng);

/// Two latent N(0, phi) haplotype draws per subject; dosage is the count of
/// haplotypes exceeding the per-SNP threshold placed so that the exceedance
/// probability equals the minor allele frequency.
Matrix sample_genotypes(Index n, const Matrix& phi, const Vector& maf,
                        Rng& rng);

/// Per-SNP effects: zero outside causal_cols, magnitude Uniform(0.5a, 1.5a)
/// with an independent fair sign inside.
Vector sample_effects(Index total_snps, const std::vector<Index>& causal_cols,
                      double a, Rng& rng);

/// Event times under cumulative baseline hazard H0(t) = t:
/// T = -log(U) * exp(-z.beta).
Vector sample_survival(const Matrix& z, const Vector& beta, Rng& rng);

struct Censored {
  Vector time;       // X = min(T, C)
  IntVector status;  // 1 when the event was observed (T <= C)
};

/// Uniform(0, tau) censoring applied to latent event times.
Censored apply_censoring(const Vector& t, double tau, Rng& rng);

/// Bisection on the censoring bound until the Monte-Carlo event rate over
/// 50000 pilot subjects (10 blocks, each with fresh LD, effects, genotypes
/// and times) is within 0.01 of scenario.event_target. Uses its own RNG
/// substream of scenario.seed, so a later build_scenario with the returned
/// value fixed sees exactly the data it would have seen anyway.
double calibrate_tau(const Scenario& scenario);

struct SimTruth {
  std::vector<std::string> snp_ids;  // every simulated SNP, pre-drop order
  Vector beta;
  std::vector<unsigned char> causal;
  std::vector<unsigned char> dropped;
  Vector covar_beta;
  double tau = 0.0;
  double event_rate = 0.0;  // realized share of status = 1
};

struct SimOutput {
  SurvivalDataset dataset;  // retained columns only
  std::vector<std::string> gene_ids;
  std::vector<std::vector<Index>> gene_cols;  // post-drop column indices
  std::string pathway_id;  // empty for gene scenarios
  SimTruth truth;
};

/// Full generative pipeline. Deterministic in (scenario, seed): layout and
/// LD, effects, genotypes, covariates and survival each consume their own
/// substream, so fixing tau up front changes nothing else.
SimOutput build_scenario(const Scenario& scenario);

/// Writes geno/pheno/covar CSVs plus genemap.csv, pathway.csv (pathway
/// scenarios only) and truth.csv into `dir`.
void write_sim_output(const SimOutput& out, const std::string& dir);

}  // namespace aspus

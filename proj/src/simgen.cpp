#include "aspus/simgen.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "aspus/csv.hpp"
#include "aspus/errors.hpp"
#include "aspus/numeric.hpp"

namespace aspus {

namespace {

void check_positive(double value, const char* what) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw ConfigError(std::string(what) + " must be positive and finite");
  }
}

std::string padded_id(const char* prefix, Index index_one_based, Index count) {
  std::string digits = std::to_string(index_one_based);
  const std::size_t width = std::to_string(count).size();
  if (digits.size() < width) {
    digits.insert(0, width - digits.size(), '0');
  }
  return prefix + digits;
}

}  // namespace

void Scenario::validate() const {
  if (n < 2) throw ConfigError("scenario needs at least two subjects");
  if (covariates < 0) throw ConfigError("covariate count cannot be negative");
  if (!std::isfinite(covar_beta)) {
    throw ConfigError("covariate coefficient must be finite");
  }
  check_positive(lambda0, "LD scale");
  if (is_pathway) {
    if (pathway.genes < 1) throw ConfigError("pathway needs at least one gene");
    if (pathway.snps_per_gene_min < 1 ||
        pathway.snps_per_gene_max < pathway.snps_per_gene_min) {
      throw ConfigError("SNPs-per-gene range must satisfy 1 <= min <= max");
    }
    if (pathway.causal_genes < 0 || pathway.causal_genes > pathway.genes) {
      throw ConfigError("causal gene count must lie in [0, genes]");
    }
  } else {
    if (gene.n_snps < 1) throw ConfigError("gene needs at least one SNP");
    if (gene.n_causal < 0 || gene.n_causal > gene.n_snps) {
      throw ConfigError("causal SNP count must lie in [0, SNP count]");
    }
  }
  if (!std::isfinite(effect_a) || effect_a < 0.0) {
    throw ConfigError("effect size must be nonnegative and finite");
  }
  if (!(maf_min > 0.0) || maf_min > maf_max || !(maf_max < 0.5)) {
    throw ConfigError("allele frequency bounds must satisfy 0 < min <= max < 0.5");
  }
  if (!(event_target > 0.0) || !(event_target < 1.0)) {
    throw ConfigError("event-rate target must lie in (0, 1)");
  }
  if (tau) check_positive(*tau, "censoring bound");
}

namespace {

// Unit-diagonal repair used when a drawn correlation matrix fails a Cholesky
// factorization: clip eigenvalues, renormalize, and as a last resort shrink
// toward the identity.
Matrix clip_to_correlation(const Matrix& phi) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(phi);
  const Vector d = es.eigenvalues().cwiseMax(1e-10);
  Matrix m = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  const Vector s = m.diagonal().cwiseSqrt();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) /= s[i] * s[j];
    }
    m(i, i) = 1.0;
  }
  return m;
}

Matrix correlation_cholesky(const Matrix& phi) {
  Eigen::LLT<Matrix> llt(phi);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Matrix repaired = clip_to_correlation(phi);
  llt.compute(repaired);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  repaired = 0.999 * repaired + 0.001 * Matrix::Identity(phi.rows(), phi.cols());
  llt.compute(repaired);
  if (llt.info() != Eigen::Success) {
    throw Error("correlation matrix could not be factorized");
  }
  return llt.matrixL();
}

}  // namespace

Matrix sample_ld_correlation(Index p, double lambda0, Rng& rng) {
  if (p < 1) throw ConfigError("correlation dimension must be at least 1");
  check_positive(lambda0, "LD scale");
  Matrix a = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
    a(i, i) = std::sqrt(rng.chisq(static_cast<double>(p - i)));
  }
  Matrix w = lambda0 * (a * a.transpose());
  Matrix phi(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      phi(i, j) = w(i, j) / std::sqrt(w(i, i) * w(j, j));
    }
    phi(i, i) = 1.0;
  }
  Eigen::LLT<Matrix> llt(phi);
  if (llt.info() != Eigen::Success) phi = clip_to_correlation(phi);
  return phi;
}

Matrix sample_genotypes(Index n, const Matrix& phi, const Vector& maf,
                        Rng& rng) {
  const Index p = maf.size();
  if (p < 1) throw ConfigError("need at least one SNP");
  const bool correlated = phi.size() > 0;
  if (correlated && (phi.rows() != p || phi.cols() != p)) {
    throw ConfigError("correlation matrix does not match the SNP count");
  }
  Vector threshold(p);
  for (Index j = 0; j < p; ++j) {
    if (!(maf[j] > 0.0) || !(maf[j] <= 0.5)) {
      throw ConfigError("allele frequencies must lie in (0, 0.5]");
    }
    // Exceedance orientation: P(psi > threshold) equals the allele frequency.
    threshold[j] = normal_quantile(1.0 - maf[j]);
  }
  Matrix chol;
  if (correlated) chol = correlation_cholesky(phi);

  Matrix geno(n, p);
  Vector g(p);
  Vector psi(p);
  for (Index i = 0; i < n; ++i) {
    geno.row(i).setZero();
    for (int hap = 0; hap < 2; ++hap) {
      for (Index j = 0; j < p; ++j) g[j] = rng.normal();
      if (correlated) {
        psi.noalias() = chol * g;
      } else {
        psi = g;
      }
      for (Index j = 0; j < p; ++j) {
        geno(i, j) += (psi[j] > threshold[j]) ? 1.0 : 0.0;
      }
    }
  }
  return geno;
}

Vector sample_effects(Index total_snps, const std::vector<Index>& causal_cols,
                      double a, Rng& rng) {
  if (!std::isfinite(a) || a < 0.0) {
    throw ConfigError("effect size must be nonnegative and finite");
  }
  Vector beta = Vector::Zero(total_snps);
  for (Index col : causal_cols) {
    if (col < 0 || col >= total_snps) {
      throw ConfigError("causal column index out of range");
    }
    const double magnitude = 0.5 * a + rng.uniform() * a;
    const int sign = rng.rademacher();
    beta[col] = magnitude == 0.0 ? 0.0 : sign * magnitude;
  }
  return beta;
}

namespace {

Vector survival_from_eta(const Vector& eta, Rng& rng) {
  Vector t(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    if (!std::isfinite(eta[i])) {
      throw ConfigError("linear predictor must be finite");
    }
    t[i] = -std::log(rng.uniform_pos()) * std::exp(-eta[i]);
  }
  return t;
}

}  // namespace

Vector sample_survival(const Matrix& z, const Vector& beta, Rng& rng) {
  if (z.cols() != beta.size()) {
    throw ConfigError("coefficient length does not match the design matrix");
  }
  const Vector eta = z * beta;
  return survival_from_eta(eta, rng);
}

Censored apply_censoring(const Vector& t, double tau, Rng& rng) {
  check_positive(tau, "censoring bound");
  Censored out;
  out.time.resize(t.size());
  out.status.resize(t.size());
  for (Index i = 0; i < t.size(); ++i) {
    const double c = tau * rng.uniform_pos();
    out.status[i] = t[i] <= c ? 1 : 0;
    out.time[i] = std::min(t[i], c);
  }
  return out;
}

namespace {

// Everything about a replicate's design that is random but not per-subject:
// gene sizes, causal columns, allele frequencies, and the LD draw.
struct Structure {
  std::vector<Index> gene_sizes;
  Index total = 0;
  std::vector<Index> causal_cols;  // ascending
  Vector maf;
  Matrix phi;  // empty when independent
};

Structure draw_structure(const Scenario& sc, Rng& rng) {
  Structure st;
  if (sc.is_pathway) {
    const Index span =
        sc.pathway.snps_per_gene_max - sc.pathway.snps_per_gene_min + 1;
    std::vector<Index> offsets;
    for (Index g = 0; g < sc.pathway.genes; ++g) {
      const Index size =
          sc.pathway.snps_per_gene_min +
          static_cast<Index>(rng.below(static_cast<std::uint64_t>(span)));
      offsets.push_back(st.total);
      st.gene_sizes.push_back(size);
      st.total += size;
    }
    const std::vector<Index> causal_genes =
        sample_subset(sc.pathway.genes, sc.pathway.causal_genes, rng);
    for (Index g : causal_genes) {
      const Index off = offsets[static_cast<std::size_t>(g)];
      for (Index j = 0; j < st.gene_sizes[static_cast<std::size_t>(g)]; ++j) {
        st.causal_cols.push_back(off + j);
      }
    }
  } else {
    st.gene_sizes = {sc.gene.n_snps};
    st.total = sc.gene.n_snps;
    st.causal_cols = sample_subset(st.total, sc.gene.n_causal, rng);
  }
  st.maf.resize(st.total);
  for (Index j = 0; j < st.total; ++j) {
    st.maf[j] = sc.maf_min + rng.uniform() * (sc.maf_max - sc.maf_min);
  }
  if (sc.correlated) {
    st.phi = sample_ld_correlation(st.total, sc.lambda0, rng);
  }
  return st;
}

Matrix draw_covariates(Index n, Index k, Rng& rng) {
  Matrix covar(n, k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) covar(i, j) = rng.normal();
  }
  return covar;
}

std::uint64_t tag(const char* name) { return fnv1a64(name); }

}  // namespace

double calibrate_tau(const Scenario& scenario) {
  scenario.validate();
  constexpr Index kBlocks = 10;
  constexpr Index kBlockSize = 5000;
  std::vector<double> latent;
  latent.reserve(static_cast<std::size_t>(kBlocks * kBlockSize));
  for (Index block = 0; block < kBlocks; ++block) {
    Rng rng(substream(scenario.seed, tag("tau"),
                      static_cast<std::uint64_t>(block)));
    const Structure st = draw_structure(scenario, rng);
    const Vector beta_snp =
        sample_effects(st.total, st.causal_cols, scenario.effect_a, rng);
    const Matrix geno = sample_genotypes(kBlockSize, st.phi, st.maf, rng);
    const Matrix covar = draw_covariates(kBlockSize, scenario.covariates, rng);
    Vector eta = geno * beta_snp;
    if (scenario.covariates > 0) {
      eta += covar * Vector::Constant(scenario.covariates, scenario.covar_beta);
    }
    const Vector t = survival_from_eta(eta, rng);
    for (Index i = 0; i < t.size(); ++i) latent.push_back(t[i]);
  }

  // P(event | T = t) with Uniform(0, tau) censoring is max(0, 1 - t/tau),
  // nondecreasing in tau, so the Monte-Carlo event rate can be bisected.
  const auto rate = [&latent](double tau) {
    double sum = 0.0;
    for (double t : latent) sum += std::max(0.0, 1.0 - t / tau);
    return sum / static_cast<double>(latent.size());
  };

  const double target = scenario.event_target;
  constexpr double kTol = 0.01;
  double lo = 0.0;
  double hi = 1.0;
  while (rate(hi) < target) {
    hi *= 2.0;
    if (hi > 1e15) {
      throw Error("event-rate target " + csv::format_real(target) +
                  " is unattainable; achievable range is (0, " +
                  csv::format_real(rate(1e15)) + ")");
    }
  }
  double mid = hi;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double r = rate(mid);
    if (std::abs(r - target) < kTol) return mid;
    if (r < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

SimOutput build_scenario(const Scenario& scenario) {
  scenario.validate();
  const std::uint64_t seed = scenario.seed;

  Rng rng_structure(substream(seed, tag("structure"), 0));
  const Structure st = draw_structure(scenario, rng_structure);

  Rng rng_effects(substream(seed, tag("effects"), 0));
  const Vector beta_snp =
      sample_effects(st.total, st.causal_cols, scenario.effect_a, rng_effects);

  Rng rng_geno(substream(seed, tag("geno"), 0));
  const Matrix geno = sample_genotypes(scenario.n, st.phi, st.maf, rng_geno);

  Rng rng_covar(substream(seed, tag("covar"), 0));
  const Matrix covar = draw_covariates(scenario.n, scenario.covariates,
                                       rng_covar);
  const Vector beta_covar =
      Vector::Constant(scenario.covariates, scenario.covar_beta);

  const double tau = scenario.tau ? *scenario.tau : calibrate_tau(scenario);

  Rng rng_surv(substream(seed, tag("surv"), 0));
  Vector eta = geno * beta_snp;
  if (scenario.covariates > 0) eta += covar * beta_covar;
  const Vector t = survival_from_eta(eta, rng_surv);
  const Censored cen = apply_censoring(t, tau, rng_surv);

  SimOutput out;
  out.truth.snp_ids.reserve(static_cast<std::size_t>(st.total));
  for (Index j = 0; j < st.total; ++j) {
    out.truth.snp_ids.push_back(padded_id("snp", j + 1, st.total));
  }
  out.truth.beta = beta_snp;
  out.truth.causal.assign(static_cast<std::size_t>(st.total), 0);
  for (Index col : st.causal_cols) {
    out.truth.causal[static_cast<std::size_t>(col)] = 1;
  }
  out.truth.dropped.assign(static_cast<std::size_t>(st.total), 0);
  if (scenario.drop_causal) {
    for (Index col : st.causal_cols) {
      out.truth.dropped[static_cast<std::size_t>(col)] = 1;
    }
  }
  out.truth.covar_beta = beta_covar;
  out.truth.tau = tau;
  out.truth.event_rate = cen.status.cast<double>().mean();

  std::vector<Index> retained;
  std::vector<Index> new_col(static_cast<std::size_t>(st.total), -1);
  for (Index j = 0; j < st.total; ++j) {
    if (out.truth.dropped[static_cast<std::size_t>(j)]) continue;
    new_col[static_cast<std::size_t>(j)] = static_cast<Index>(retained.size());
    retained.push_back(j);
  }

  SurvivalDataset& ds = out.dataset;
  ds.subject_ids.reserve(static_cast<std::size_t>(scenario.n));
  for (Index i = 0; i < scenario.n; ++i) {
    ds.subject_ids.push_back(padded_id("S", i + 1, scenario.n));
  }
  ds.geno.resize(scenario.n, static_cast<Index>(retained.size()));
  for (std::size_t r = 0; r < retained.size(); ++r) {
    ds.geno.col(static_cast<Index>(r)) = geno.col(retained[r]);
    ds.snp_ids.push_back(out.truth.snp_ids[static_cast<std::size_t>(retained[r])]);
  }
  ds.covar = covar;
  for (Index k = 0; k < scenario.covariates; ++k) {
    ds.covar_ids.push_back(padded_id("covar", k + 1, scenario.covariates));
  }
  ds.time = cen.time;
  ds.status = cen.status;
  ds.validate();

  const Index gene_count = static_cast<Index>(st.gene_sizes.size());
  Index offset = 0;
  for (Index g = 0; g < gene_count; ++g) {
    out.gene_ids.push_back(scenario.is_pathway
                               ? padded_id("gene", g + 1, gene_count)
                               : std::string("gene1"));
    std::vector<Index> cols;
    for (Index j = 0; j < st.gene_sizes[static_cast<std::size_t>(g)]; ++j) {
      const Index mapped = new_col[static_cast<std::size_t>(offset + j)];
      if (mapped >= 0) cols.push_back(mapped);
    }
    out.gene_cols.push_back(std::move(cols));
    offset += st.gene_sizes[static_cast<std::size_t>(g)];
  }
  if (scenario.is_pathway) out.pathway_id = "pathway1";
  return out;
}

void write_sim_output(const SimOutput& out, const std::string& dir) {
  save_dataset(out.dataset, dir);
  const auto join = [&dir](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };

  {
    std::ofstream file(join("genemap.csv"));
    if (!file) throw Error("cannot open genemap.csv for writing");
    file << "snp_id,gene_id\n";
    for (std::size_t g = 0; g < out.gene_cols.size(); ++g) {
      for (Index col : out.gene_cols[g]) {
        file << out.dataset.snp_ids[static_cast<std::size_t>(col)] << ','
             << out.gene_ids[g] << '\n';
      }
    }
    if (!file) throw Error("write failed for genemap.csv");
  }

  if (!out.pathway_id.empty()) {
    std::ofstream file(join("pathway.csv"));
    if (!file) throw Error("cannot open pathway.csv for writing");
    file << "gene_id,pathway_id\n";
    for (std::size_t g = 0; g < out.gene_cols.size(); ++g) {
      if (out.gene_cols[g].empty()) continue;
      file << out.gene_ids[g] << ',' << out.pathway_id << '\n';
    }
    if (!file) throw Error("write failed for pathway.csv");
  }

  {
    std::ofstream file(join("truth.csv"));
    if (!file) throw Error("cannot open truth.csv for writing");
    file << "snp_id,true_beta,causal,dropped\n";
    for (std::size_t j = 0; j < out.truth.snp_ids.size(); ++j) {
      file << out.truth.snp_ids[j] << ','
           << csv::format_real(out.truth.beta[static_cast<Index>(j)]) << ','
           << static_cast<int>(out.truth.causal[j]) << ','
           << static_cast<int>(out.truth.dropped[j]) << '\n';
    }
    if (!file) throw Error("write failed for truth.csv");
  }
}

}  // namespace aspus

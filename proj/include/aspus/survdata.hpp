#pragma once

#include <string>
#include <vector>

#include "aspus/types.hpp"

namespace aspus {

/// Aligned per-subject data for one analysis: allele dosages, real-valued
/// covariates, observed follow-up times, and event indicators. Row order is
/// the phenotype-file order and is the canonical subject order everywhere
/// downstream (including tie-breaking among equal times).
struct SurvivalDataset {
  std::vector<std::string> subject_ids;
  std::vector<std::string> snp_ids;
  std::vector<std::string> covar_ids;
  Matrix geno;       // n x P, dosages in [0,2]
  Matrix covar;      // n x K
  Vector time;       // n, strictly positive
  IntVector status;  // n, 0 censored / 1 event

  Index n() const { return static_cast<Index>(subject_ids.size()); }
  Index snp_count() const { return geno.cols(); }
  Index covar_count() const { return covar.cols(); }
  Index event_count() const;

  /// Throws ValidationError on any shape or range violation.
  void validate() const;
};

/// Loads and aligns the three input files. The covariate path may be empty,
/// giving K = 0. All three files must cover exactly the same subject set;
/// order is canonicalized to the phenotype file.
SurvivalDataset load_dataset(const std::string& geno_path,
                             const std::string& pheno_path,
                             const std::string& covar_path = "");

/// Writes geno.csv / pheno.csv / covar.csv into `dir` with enough decimal
/// precision that load_dataset reproduces the dataset bit-exactly.
void save_dataset(const SurvivalDataset& ds, const std::string& dir);

/// Gene -> SNP column membership with optional per-SNP weights (default 1).
/// A SNP may belong to several genes; each membership is kept separately.
struct GeneMap {
  struct Gene {
    std::string id;
    std::vector<Index> cols;  // columns into SurvivalDataset::geno
    Vector weights;           // v_s, aligned with cols
  };
  std::vector<Gene> genes;            // file order of first appearance
  std::vector<std::string> warnings;  // unknown SNPs, dropped genes

  Index size() const { return static_cast<Index>(genes.size()); }
  Index find(const std::string& gene_id) const;  // -1 when absent
};

GeneMap load_genemap(const std::string& path, const SurvivalDataset& ds);

/// Pathway -> gene membership with optional per-gene weights (default 1).
struct PathwayMap {
  struct Pathway {
    std::string id;
    std::vector<Index> gene_idx;  // indices into GeneMap::genes
    Vector weights;               // q_g, aligned with gene_idx
  };
  std::vector<Pathway> pathways;
  std::vector<std::string> warnings;

  Index size() const { return static_cast<Index>(pathways.size()); }
};

PathwayMap load_pathwaymap(const std::string& path, const GeneMap& genemap);

}  // namespace aspus

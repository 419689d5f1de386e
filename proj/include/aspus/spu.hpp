#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aspus/score_engine.hpp"
#include "aspus/survdata.hpp"
#include "aspus/types.hpp"

namespace aspus {

/// Exponent grid for the sum-of-powered-score family. snp_gammas is the
/// per-SNP exponent list (infinity allowed, meaning the max of |U| terms);
/// gene_gammas is the outer pathway exponent list and stays empty for gene
/// tests. Exponents must be >= 1 and strictly increasing; pathway grids must
/// be finite on both levels.
struct GammaGrid {
  std::vector<double> snp_gammas;
  std::vector<double> gene_gammas;

  static GammaGrid gene_defaults();     // {1, 2, 4, 8, inf}
  static GammaGrid pathway_defaults();  // {1, 2, 4, 8} x {1, 2, 4, 8}

  void validate(bool for_pathway) const;
  Index combo_count(bool for_pathway) const;
};

/// Labels in result-column order: "1", "2", ... for gene grids, or
/// "1_1", "1_2", ... (snp gamma first, outer gamma second) for pathway grids.
std::vector<std::string> combo_labels(const GammaGrid& grid, bool for_pathway);

struct PermPlan {
  Index b_total = 500;   // B
  Index b_init = 40;     // B', size of the initial batch
  double theta = 0.1;    // continue past B' only when the initial p < theta
  std::uint64_t seed = 0;
  bool plus_one = false;  // report (1 + count) / (B + 1) for the adaptive p

  void validate() const;
};

/// One gene or pathway to score: genotype columns (grouped by gene for
/// pathways), per-SNP weights v, and for pathways the per-gene sizes k_g and
/// weights q_g.
struct TestUnit {
  std::string id;
  bool pathway = false;
  std::vector<Index> cols;
  Vector snp_weights;             // aligned with cols
  std::vector<Index> gene_sizes;  // pathway only, sums to cols.size()
  Vector gene_weights;            // pathway only, aligned with gene_sizes

  void validate() const;
};

TestUnit make_gene_unit(const GeneMap& genemap, Index gene);
TestUnit make_pathway_unit(const GeneMap& genemap, const PathwayMap& pathways,
                           Index pathway);

/// (sum_j (v_j |u_j|)^gamma)^(1/gamma); gamma = infinity gives max_j v_j|u_j|.
/// An empty `weights` means all ones.
double spu_gene_stat(const Vector& u, const Vector& weights, double gamma);

/// sum_g (q_g (sum_{s in g} (v_s |u_s|)^gamma / k_g)^(1/gamma))^gamma_g,
/// with u aligned to unit.cols. No outer root is taken; every p-value is
/// rank-based, so any monotone rescaling of the statistic is immaterial.
double spu_pathway_stat(const Vector& u, const TestUnit& unit, double gamma,
                        double gamma_g);

/// All grid statistics for one score vector, in combo_labels order.
Vector spu_stats(const Vector& u, const TestUnit& unit, const GammaGrid& grid);

/// Self-inclusive empirical p-values from a (B+1) x n_combo statistic matrix
/// whose row 0 is observed: p(b, c) = #{b': stat(b',c) >= stat(b,c)} / (B+1),
/// and p_min(b) = min over c.
struct EmpiricalPvalues {
  Matrix p;
  Vector p_min;
};

EmpiricalPvalues empirical_pvalues(const Matrix& stats);

/// Adaptive p-value from the p_min column (entry 0 observed): the fraction of
/// permutations whose minimal p-value is at least as extreme (as small) as
/// the observed one, #{b >= 1: p_min[b] <= p_min[0]} / (B+1). Without
/// plus_one this is 0 when the observed minimum is strictly smallest;
/// plus_one counts the observed replicate itself, keeping the result
/// positive.
double aspus_pvalue(const Vector& p_min, bool plus_one = false);

/// The b-th permutation of 0..n-1 for a unit: a pure function of (seed,
/// unit_id, b), so results depend on neither scan order nor worker count and
/// permutations 1..B' can be reused exactly when a run continues past the
/// initial batch.
std::vector<Index> unit_permutation(std::uint64_t seed,
                                    const std::string& unit_id, Index b,
                                    Index n);

struct SpuResult {
  std::string unit_id;
  bool pathway = false;
  Index n_snps = 0;
  Vector stat_obs;            // per combo
  std::vector<double> p_spu;  // per combo, observed
  double p_min = 1.0;         // observed minimum over the grid
  double p_aspus = 1.0;
  Index perms_used = 0;
  bool early_stopped = false;
};

/// Runs b_init permutations, stops there when the initial adaptive p-value
/// is >= theta, and otherwise continues to b_total reusing the initial
/// statistics unchanged.
SpuResult run_adaptive_test(const SurvivalDataset& ds, const WeightTable& wt,
                            const TestUnit& unit, const GammaGrid& grid,
                            const PermPlan& plan);

/// Scores every unit, spreading units across `workers` threads. Results come
/// back in unit order and are identical for any worker count.
std::vector<SpuResult> run_units(const SurvivalDataset& ds,
                                 const WeightTable& wt,
                                 const std::vector<TestUnit>& units,
                                 const GammaGrid& grid, const PermPlan& plan,
                                 int workers = 1);

/// unit_id,unit_type,n_snps,p_aspus,perms_used,early_stopped,p_spu_<label>...
/// All results must share one unit type matching the grid.
void write_results_csv(const std::string& path,
                       const std::vector<SpuResult>& results,
                       const GammaGrid& grid);

}  // namespace aspus

#pragma once

#include <cstddef>
#include <vector>

#include "aspus/coxnull.hpp"
#include "aspus/survdata.hpp"
#include "aspus/types.hpp"

namespace aspus {

/// Event-by-subject at-risk membership: member(e, j) = 1 iff subject j is
/// still under observation at the e-th event time. Rows are ordered by
/// ascending event time, so memberships are weakly nested from row to row.
struct RiskIndicator {
  std::vector<Index> event_rows;
  ByteMatrix member;  // E x n

  Index event_count() const { return static_cast<Index>(event_rows.size()); }
};

RiskIndicator build_risk_indicator(const Vector& time, const IntVector& status);

struct WeightTableOptions {
  bool allow_unconverged = false;
  // Dense per-event weight rows are cached only while E * n stays within this
  // budget; beyond it rows are regenerated from mu and the sorted risk sets.
  Index max_stored_entries = 50'000'000;
};

/// Per-event weights omega_j(X_i) = mu_j I(X_j >= X_i) / sum_l mu_l I(X_l >=
/// X_i) and everything scoring needs, computed once per dataset. The table
/// never reads genotype values except to fill the observed per-event weighted
/// means (zbar), so it is unchanged by any permutation of genotype rows.
///
/// score_coef collapses the whole per-event sum: with c_j = delta_j - mu_j *
/// sum over events whose risk set contains j of 1/denom_e, the score of any
/// genotype column z is simply z . c. Permutations only reorder c, so each
/// permutation pass costs one gather plus one matrix-vector product.
struct WeightTable {
  Index n = 0;
  std::vector<Index> sorted_rows;  // all subjects, ascending time, stable
  std::vector<Index> event_rows;   // event subjects, ascending time, stable
  std::vector<Index> risk_start;   // per event: first at-risk sorted position
  Vector event_time;               // E
  Vector denom;                    // E, sum of mu over the risk set
  Vector mu;                       // n
  Vector score_coef;               // n, the collapsed coefficients c
  Matrix omega;                    // E x n when cached, otherwise 0 x 0
  Matrix zbar;                     // E x P observed weighted means

  Index event_count() const { return static_cast<Index>(event_rows.size()); }
  bool omega_cached() const { return omega.size() > 0; }
  Vector weight_row(Index e) const;  // omega_.(X_e), length n
  std::size_t memory_bytes() const;
};

/// Throws ValidationError "no events; score undefined" when every subject is
/// censored, and ConvergenceError when the null fit is flagged unconverged
/// and allow_unconverged is not set.
WeightTable build_weight_table(const SurvivalDataset& ds,
                               const NullModel& null,
                               const WeightTableOptions& opts = {});

struct ScoreVector {
  Vector u;           // P
  Index perm_id = 0;  // 0 for observed, b >= 1 for permutation b
};

ScoreVector score_observed(const SurvivalDataset& ds, const WeightTable& wt);

/// Score with genotype rows re-indexed by `perm` (permuted row j reads
/// original row perm[j]); times, statuses, covariates and the weight table
/// stay fixed and no permuted matrix is materialized. Throws ValidationError
/// when perm is not a bijection on 0..n-1.
ScoreVector score_permuted(const SurvivalDataset& ds, const WeightTable& wt,
                           const std::vector<Index>& perm, Index perm_id = 0);

/// Re-indexed coefficients d with d[perm[j]] = c[j]; geno^T * d equals the
/// permuted score.
Vector permuted_coef(const Vector& score_coef, const std::vector<Index>& perm);

/// out[k] = geno.col(cols[k]) . coef, the column-restricted score kernel the
/// adaptive driver runs once per permutation.
void score_columns(const Matrix& geno, const std::vector<Index>& cols,
                   const Vector& coef, Vector& out);

}  // namespace aspus

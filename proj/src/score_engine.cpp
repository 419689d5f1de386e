#include "aspus/score_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aspus/errors.hpp"

namespace aspus {

namespace {

std::vector<Index> order_by_time_ascending(const Vector& time) {
  std::vector<Index> ord(static_cast<std::size_t>(time.size()));
  std::iota(ord.begin(), ord.end(), Index{0});
  std::stable_sort(ord.begin(), ord.end(),
                   [&time](Index a, Index b) { return time[a] < time[b]; });
  return ord;
}

std::vector<Index> events_in_time_order(const std::vector<Index>& sorted_rows,
                                        const IntVector& status) {
  std::vector<Index> out;
  for (Index row : sorted_rows) {
    if (status[row] == 1) out.push_back(row);
  }
  return out;
}

}  // namespace

RiskIndicator build_risk_indicator(const Vector& time,
                                   const IntVector& status) {
  if (time.size() != status.size()) {
    throw ValidationError("times and statuses disagree on length");
  }
  RiskIndicator ri;
  const std::vector<Index> sorted = order_by_time_ascending(time);
  ri.event_rows = events_in_time_order(sorted, status);
  const Index e_count = static_cast<Index>(ri.event_rows.size());
  ri.member.resize(e_count, time.size());
  for (Index e = 0; e < e_count; ++e) {
    const double t = time[ri.event_rows[static_cast<std::size_t>(e)]];
    for (Index j = 0; j < time.size(); ++j) {
      ri.member(e, j) = static_cast<unsigned char>(time[j] >= t);
    }
  }
  return ri;
}

Vector WeightTable::weight_row(Index e) const {
  if (e < 0 || e >= event_count()) {
    throw ValidationError("event index out of range");
  }
  if (omega_cached()) return omega.row(e);
  Vector row = Vector::Zero(n);
  const double d = denom[e];
  for (std::size_t p = static_cast<std::size_t>(
           risk_start[static_cast<std::size_t>(e)]);
       p < sorted_rows.size(); ++p) {
    row[sorted_rows[p]] = mu[sorted_rows[p]] / d;
  }
  return row;
}

std::size_t WeightTable::memory_bytes() const {
  const std::size_t idx =
      (sorted_rows.size() + event_rows.size() + risk_start.size()) *
      sizeof(Index);
  const std::size_t reals =
      static_cast<std::size_t>(event_time.size() + denom.size() + mu.size() +
                               score_coef.size() + omega.size() +
                               zbar.size()) *
      sizeof(double);
  return idx + reals;
}

WeightTable build_weight_table(const SurvivalDataset& ds,
                               const NullModel& null,
                               const WeightTableOptions& opts) {
  const Index n = ds.n();
  if (null.mu.size() != n) {
    throw ValidationError("null model was fitted on a different subject count");
  }
  if (!null.converged && !opts.allow_unconverged) {
    throw ConvergenceError(
        "null model is not converged; refit or allow unconverged fits");
  }
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(null.mu[i]) || null.mu[i] <= 0.0) {
      throw ValidationError("relative hazards must be positive and finite");
    }
  }

  WeightTable wt;
  wt.n = n;
  wt.mu = null.mu;
  wt.sorted_rows = order_by_time_ascending(ds.time);
  wt.event_rows = events_in_time_order(wt.sorted_rows, ds.status);
  const Index e_count = wt.event_count();
  if (e_count == 0) {
    throw ValidationError("no events; score undefined");
  }

  // Suffix sums of mu over the ascending-time order give every risk-set
  // denominator; the risk set of an event is the tail of sorted_rows from the
  // first subject sharing its time.
  Vector suffix(n + 1);
  suffix[n] = 0.0;
  for (Index p = n - 1; p >= 0; --p) {
    suffix[p] = suffix[p + 1] + wt.mu[wt.sorted_rows[static_cast<std::size_t>(p)]];
  }
  std::vector<Index> group_start(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) {
    const bool new_time =
        p == 0 || ds.time[wt.sorted_rows[static_cast<std::size_t>(p)]] !=
                      ds.time[wt.sorted_rows[static_cast<std::size_t>(p - 1)]];
    group_start[static_cast<std::size_t>(p)] =
        new_time ? p : group_start[static_cast<std::size_t>(p - 1)];
  }

  wt.risk_start.resize(static_cast<std::size_t>(e_count));
  wt.event_time.resize(e_count);
  wt.denom.resize(e_count);
  {
    std::size_t e = 0;
    for (Index p = 0; p < n; ++p) {
      const Index row = wt.sorted_rows[static_cast<std::size_t>(p)];
      if (ds.status[row] != 1) continue;
      wt.risk_start[e] = group_start[static_cast<std::size_t>(p)];
      wt.event_time[static_cast<Index>(e)] = ds.time[row];
      wt.denom[static_cast<Index>(e)] = suffix[wt.risk_start[e]];
      ++e;
    }
  }

  // c_j = delta_j - mu_j * sum of 1/denom over events whose risk set holds j.
  // risk_start is nondecreasing over events, so that inner sum is a prefix of
  // 1/denom read off while walking sorted positions.
  wt.score_coef.resize(n);
  {
    double hazard_sum = 0.0;
    std::size_t e = 0;
    for (Index p = 0; p < n; ++p) {
      while (e < wt.risk_start.size() && wt.risk_start[e] <= p) {
        hazard_sum += 1.0 / wt.denom[static_cast<Index>(e)];
        ++e;
      }
      const Index row = wt.sorted_rows[static_cast<std::size_t>(p)];
      wt.score_coef[row] =
          static_cast<double>(ds.status[row]) - wt.mu[row] * hazard_sum;
    }
  }

  if (e_count * n <= opts.max_stored_entries) {
    wt.omega.setZero(e_count, n);
    for (Index e = 0; e < e_count; ++e) {
      const double d = wt.denom[e];
      for (std::size_t p = static_cast<std::size_t>(
               wt.risk_start[static_cast<std::size_t>(e)]);
           p < wt.sorted_rows.size(); ++p) {
        wt.omega(e, wt.sorted_rows[p]) = wt.mu[wt.sorted_rows[p]] / d;
      }
    }
  }

  if (wt.omega_cached()) {
    wt.zbar.noalias() = wt.omega * ds.geno;
  } else {
    wt.zbar.setZero(e_count, ds.geno.cols());
    for (Index e = 0; e < e_count; ++e) {
      const double d = wt.denom[e];
      for (std::size_t p = static_cast<std::size_t>(
               wt.risk_start[static_cast<std::size_t>(e)]);
           p < wt.sorted_rows.size(); ++p) {
        const Index row = wt.sorted_rows[p];
        wt.zbar.row(e) += (wt.mu[row] / d) * ds.geno.row(row);
      }
    }
  }
  return wt;
}

namespace {

void check_table(const SurvivalDataset& ds, const WeightTable& wt) {
  if (wt.n != ds.n() || wt.score_coef.size() != ds.n()) {
    throw ValidationError("weight table was built for a different dataset");
  }
}

Vector score_all_columns(const Matrix& geno, const Vector& coef) {
  return geno.transpose() * coef;
}

}  // namespace

ScoreVector score_observed(const SurvivalDataset& ds, const WeightTable& wt) {
  check_table(ds, wt);
  return {score_all_columns(ds.geno, wt.score_coef), 0};
}

Vector permuted_coef(const Vector& score_coef,
                     const std::vector<Index>& perm) {
  const Index n = score_coef.size();
  if (static_cast<Index>(perm.size()) != n) {
    throw ValidationError("permutation length does not match subject count");
  }
  Vector out(n);
  std::vector<bool> hit(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < n; ++j) {
    const Index target = perm[static_cast<std::size_t>(j)];
    if (target < 0 || target >= n || hit[static_cast<std::size_t>(target)]) {
      throw ValidationError("permutation is not a bijection on subjects");
    }
    hit[static_cast<std::size_t>(target)] = true;
    out[target] = score_coef[j];
  }
  return out;
}

ScoreVector score_permuted(const SurvivalDataset& ds, const WeightTable& wt,
                           const std::vector<Index>& perm, Index perm_id) {
  check_table(ds, wt);
  const Vector coef = permuted_coef(wt.score_coef, perm);
  return {score_all_columns(ds.geno, coef), perm_id};
}

void score_columns(const Matrix& geno, const std::vector<Index>& cols,
                   const Vector& coef, Vector& out) {
  out.resize(static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out[static_cast<Index>(k)] = geno.col(cols[k]).dot(coef);
  }
}

}  // namespace aspus

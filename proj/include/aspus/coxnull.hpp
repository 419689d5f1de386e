#pragma once

#include <string>
#include <vector>

#include "aspus/survdata.hpp"
#include "aspus/types.hpp"

namespace aspus {

struct FitOptions {
  double tol = 1e-9;      // max-norm of the score vector at convergence
  int max_iter = 25;      // Newton iterations
  int max_halvings = 10;  // step halvings per iteration before giving up
};

/// Breslow partial log-likelihood with its gradient and observed information,
/// evaluated in one sweep over subjects ordered by decreasing follow-up time.
/// Tied event times share one risk set. Linear predictors are shifted by the
/// running risk-set maximum before exponentiation, so arbitrarily large |beta|
/// stays finite.
struct LoglikResult {
  double loglik = 0.0;
  Vector grad;  // K
  Matrix info;  // K x K, positive semidefinite
};

LoglikResult partial_loglik(const Matrix& covar, const Vector& time,
                            const IntVector& status, const Vector& beta);

/// Covariates-only proportional hazards fit used as the permutation null.
struct NullModel {
  Vector beta;   // K, empty when there are no covariates
  Vector mu;     // n, exp(covar * beta) rescaled so the largest entry is 1
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_path;  // value after each accepted step
};

/// Newton's method with step halving. Throws RankDeficiencyError when the
/// information matrix at beta = 0 has a near-null direction (collinear or
/// risk-set-constant covariates), naming the columns that load on it. A fit
/// that stalls or exhausts max_iter is returned with converged = false rather
/// than thrown, so callers can decide whether to proceed.
NullModel fit_null(const Matrix& covar, const Vector& time,
                   const IntVector& status, const FitOptions& opts = {},
                   const std::vector<std::string>& covar_names = {});

NullModel fit_null(const SurvivalDataset& ds, const FitOptions& opts = {});

}  // namespace aspus

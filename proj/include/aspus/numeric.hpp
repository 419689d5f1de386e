#pragma once

#include "aspus/types.hpp"

namespace aspus {

/// Standard normal CDF.
Real normal_cdf(Real x);

/// Standard normal quantile. Acklam's rational approximation polished with
/// one Halley step against the erfc-based CDF; absolute error ~1e-15 on
/// (1e-300, 1-1e-16).
Real normal_quantile(Real p);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
Real incomplete_beta(Real a, Real b, Real x);

/// Quantile of the Beta(a, b) distribution (bisection on incomplete_beta).
Real beta_quantile(Real p, Real a, Real b);

struct Interval {
  Real lo = 0.0;
  Real hi = 1.0;
};

/// Clopper-Pearson exact binomial confidence interval for k successes out of
/// n at the given two-sided confidence level.
Interval binomial_ci(long k, long n, Real level);

}  // namespace aspus

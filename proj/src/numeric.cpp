#include "aspus/numeric.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "aspus/errors.hpp"

namespace aspus {

Real normal_cdf(Real x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace {

// Acklam's inverse-normal rational approximation (abs error ~1.15e-9).
Real acklam(Real p) {
  static const Real a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                           -2.759285104469687e+02, 1.383577518672690e+02,
                           -3.066479806614716e+01, 2.506628277459239e+00};
  static const Real b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                           -1.556989798598866e+02, 6.680131188771972e+01,
                           -1.328068155288572e+01};
  static const Real c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                           -2.400758277161838e+00, -2.549732539343734e+00,
                           4.374664141464968e+00,  2.938163982698783e+00};
  static const Real d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr Real p_low = 0.02425;

  if (p < p_low) {
    const Real q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const Real q = p - 0.5;
    const Real r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const Real q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

Real normal_quantile(Real p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<Real>::infinity();
    if (p == 1.0) return std::numeric_limits<Real>::infinity();
    throw ConfigError("normal_quantile: p must lie in [0,1]");
  }
  Real x = acklam(p);
  // One Halley step: e and the update stay well-conditioned because acklam()
  // is already within ~1e-9.
  const Real e = normal_cdf(x) - p;
  const Real u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
Real beta_cf(Real a, Real b, Real x) {
  constexpr int kMaxIter = 400;
  constexpr Real kEps = 3e-16;
  constexpr Real kTiny = 1e-300;

  const Real qab = a + b;
  const Real qap = a + 1.0;
  const Real qam = a - 1.0;
  Real c = 1.0;
  Real d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  Real h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const Real m2 = 2.0 * m;
    Real aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const Real del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

Real incomplete_beta(Real a, Real b, Real x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ConfigError("incomplete_beta: a and b must be positive");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const Real ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(x) + b * std::log1p(-x);
  const Real front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

Real beta_quantile(Real p, Real a, Real b) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  Real lo = 0.0;
  Real hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const Real mid = 0.5 * (lo + hi);
    if (incomplete_beta(a, b, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

Interval binomial_ci(long k, long n, Real level) {
  if (n <= 0 || k < 0 || k > n) {
    throw ConfigError("binomial_ci: need 0 <= k <= n, n > 0");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("binomial_ci: level must lie in (0,1)");
  }
  const Real alpha2 = 0.5 * (1.0 - level);
  Interval ci;
  ci.lo = (k == 0) ? 0.0
                   : beta_quantile(alpha2, static_cast<Real>(k),
                                   static_cast<Real>(n - k + 1));
  ci.hi = (k == n) ? 1.0
                   : beta_quantile(1.0 - alpha2, static_cast<Real>(k + 1),
                                   static_cast<Real>(n - k));
  return ci;
}

}  // namespace aspus

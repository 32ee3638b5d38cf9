#pragma once

// Standard normal CDF and quantile. Both sit inside safety-critical
// inequalities, so accuracy has to dominate Monte Carlo noise: the CDF is
// computed from erfc (correct to ~1 ulp) and the quantile by a rational
// initial guess polished with bracketed Newton iterations on the CDF.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace safex {

inline double normal_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) {
  if (!std::isfinite(z)) throw std::domain_error("normal_cdf: non-finite argument");
  static const double inv_sqrt2 = 0.7071067811865475244008444;
  return 0.5 * std::erfc(-z * inv_sqrt2);
}

namespace detail {

// Acklam's rational approximation of the normal quantile, good to ~1e-9;
// used only as the Newton starting point.
inline double norm_quantile_guess(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

inline double normal_cdf_inv(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::domain_error("normal_cdf_inv: argument must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  double x = detail::norm_quantile_guess(q);
  if (!(x > lo && x < hi)) x = 0.0;
  for (int it = 0; it < 100; ++it) {
    double f = normal_cdf(x) - q;
    if (f > 0.0) hi = x; else lo = x;
    if (std::abs(f) <= 1e-15) break;
    double deriv = normal_pdf(x);
    double step = deriv > 0.0 ? f / deriv : 0.0;
    double next = x - step;
    if (!(next > lo && next < hi) || step == 0.0) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
  }
  return x;
}

}  // namespace safex

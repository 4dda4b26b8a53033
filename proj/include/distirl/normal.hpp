#pragma once

#include <cmath>
#include <stdexcept>

namespace distirl {

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;
inline constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Standard normal density.
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

/// Standard normal CDF via erfc.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

namespace detail {

/// Truncated asymptotic series for Phi(-t) * t / phi(t) with t = -x >> 0:
/// 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8.
inline double lower_tail_series(double x) {
  const double inv2 = 1.0 / (x * x);
  return 1.0 -
         inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
}

}  // namespace detail

/// log of the standard normal CDF, stable far into the lower tail.
inline double log_norm_cdf(double x) {
  if (x > -20.0) {
    return std::log(0.5 * std::erfc(-x / kSqrt2));
  }
  return -0.5 * x * x - 0.5 * kLog2Pi - std::log(-x) +
         std::log(detail::lower_tail_series(x));
}

/// Inverse Mills ratio phi(x)/Phi(x); stable for very negative x.
inline double mills_ratio_inv(double x) {
  if (x > -12.0) {
    return norm_pdf(x) / norm_cdf(x);
  }
  return -x / detail::lower_tail_series(x);
}

/// Inverse of the standard normal CDF. Rational initial guess (Acklam)
/// followed by one Halley correction against erfc; absolute error is far
/// below the 1e-9 needed by the Wang distortion.
inline double norm_inv_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("norm_inv_cdf: p must lie in (0, 1)");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double err = norm_cdf(x) - p;
  const double u = err * kSqrt2Pi * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace distirl

// Regularized incomplete beta function and its inverse.
#pragma once

#include <cmath>
#include <stdexcept>

namespace cafht {

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the incomplete beta (Lentz's method).
inline double ibeta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 3e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

// I_x(a, b) for a, b > 0 and x in [0, 1].
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("ibeta: shape parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lfront = a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(lfront) * detail::ibeta_cf(a, b, x) / a;
  return 1.0 - std::exp(lfront) * detail::ibeta_cf(b, a, 1.0 - x) / b;
}

// Beta(a, b) density, used as the Newton derivative.
inline double beta_pdf(double a, double b, double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - detail::log_beta(a, b));
}

// x with I_x(a, b) = p, solved by bracketed bisection with Newton steps.
// The result satisfies |I_x(a, b) - p| <= 1e-10.
inline double inverse_beta_cdf(double p, double a, double b) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_beta_cdf: p must lie in (0, 1)");
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("inverse_beta_cdf: shape parameters must be positive");

  double lo = 0.0;
  double hi = 1.0;
  double x = a / (a + b);
  double f = regularized_incomplete_beta(a, b, x) - p;
  for (int it = 0; it < 300; ++it) {
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    if (std::fabs(f) <= 1e-12 || hi - lo <= 1e-15) return x;
    const double pdf = beta_pdf(a, b, x);
    double next = pdf > 0.0 ? x - f / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
    f = regularized_incomplete_beta(a, b, x) - p;
  }
  if (std::fabs(f) <= 1e-10) return x;
  throw std::runtime_error("inverse_beta_cdf did not converge");
}

}  // namespace cafht

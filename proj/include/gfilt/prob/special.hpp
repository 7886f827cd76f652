#pragma once

// Special functions used by the Dirichlet machinery.
//
// digamma/trigamma: upward recurrence to x >= 10, then the asymptotic
// Bernoulli series. inverse_digamma: Newton from the usual initializer.
// reg_incomplete_beta: continued fraction (modified Lentz).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gfilt {

inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;

/// log Gamma for positive arguments without touching the global signgam.
inline double log_gamma(double x)
{
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline double digamma(double x)
{
  if (!(x > 0.0)) throw std::domain_error("digamma: argument must be positive, got " + std::to_string(x));
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  // -sum B_2k / (2k x^2k), k = 1..7
  const double series =
      f * (-1.0 / 12 +
           f * (1.0 / 120 +
                f * (-1.0 / 252 + f * (1.0 / 240 + f * (-1.0 / 132 + f * (691.0 / 32760 + f * (-1.0 / 12)))))));
  return acc + std::log(x) - 0.5 / x + series;
}

inline double trigamma(double x)
{
  if (!(x > 0.0)) throw std::domain_error("trigamma: argument must be positive, got " + std::to_string(x));
  double acc = 0.0;
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double f = inv * inv;
  // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
  const double series =
      inv * (1.0 + inv * 0.5 +
             f * (1.0 / 6 +
                  f * (-1.0 / 30 +
                       f * (1.0 / 42 + f * (-1.0 / 30 + f * (5.0 / 66 + f * (-691.0 / 2730 + f * (7.0 / 6))))))));
  return acc + series;
}

/// x > 0 with digamma(x) = v.
inline double inverse_digamma(double v)
{
  if (std::isnan(v)) throw std::domain_error("inverse_digamma: NaN argument");
  double x = v >= -2.22 ? std::exp(v) + 0.5 : -1.0 / (v + euler_gamma);
  if (!std::isfinite(x)) return x;
  for (int it = 0; it < 50; ++it) {
    const double r = digamma(x) - v;
    if (std::abs(r) <= 1e-14 * std::max(1.0, std::abs(v))) break;
    double next = x - r / trigamma(x);
    if (!(next > 0.0)) next = 0.5 * x;  // stay in the domain
    if (next == x) break;
    x = next;
  }
  return x;
}

namespace detail {

// Continued fraction for I(z; a, b), valid for z < (a + 1) / (a + b + 2).
inline double beta_cf(double z, double a, double b)
{
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * z / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 100000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * z / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= eps) return h;
  }
  throw std::runtime_error("reg_incomplete_beta: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I(z; a, b).
inline double reg_incomplete_beta(double z, double a, double b)
{
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("reg_incomplete_beta: shape parameters must be positive");
  if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("reg_incomplete_beta: z outside [0, 1]");
  if (z == 0.0) return 0.0;
  if (z == 1.0) return 1.0;
  const double log_front =
      log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(z) + b * std::log1p(-z);
  const double front = std::exp(log_front);
  if (z < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(z, a, b) / a;
  return 1.0 - front * detail::beta_cf(1.0 - z, b, a) / b;
}

}  // namespace gfilt

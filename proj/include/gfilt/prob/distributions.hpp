#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "gfilt/prob/rng.hpp"
#include "gfilt/prob/special.hpp"

namespace gfilt {

/// Point of the open 3-simplex, i.e. a categorical distribution over four
/// labels with no zero entry.
///
/// All four coordinates are stored. The fourth is the fill-up coordinate
/// 1 - (y1 + y2 + y3); keeping it explicitly avoids the cancellation that
/// would send tiny fill-up values to exactly zero.
class Simplex3 {
 public:
  Simplex3() : y_{0.25, 0.25, 0.25, 0.25} {}

  /// From the three free coordinates.
  Simplex3(double y1, double y2, double y3) : y_{y1, y2, y3, 1.0 - (y1 + y2 + y3)} { check(); }

  /// From all four coordinates. They are renormalized to sum to one.
  static Simplex3 from_array(const std::array<double, 4>& p)
  {
    const double s = p[0] + p[1] + p[2] + p[3];
    if (!(s > 0.0) || !std::isfinite(s)) throw std::domain_error("Simplex3: coordinates must have positive finite sum");
    Simplex3 out;
    for (int i = 0; i < 4; ++i) out.y_[i] = p[i] / s;
    out.check();
    return out;
  }

  double operator[](std::size_t i) const { return y_[i]; }
  const std::array<double, 4>& values() const noexcept { return y_; }

  bool interior() const noexcept
  {
    return y_[0] > 0.0 && y_[1] > 0.0 && y_[2] > 0.0 && y_[3] > 0.0;
  }

  bool operator==(const Simplex3&) const = default;

 private:
  void check() const
  {
    for (double v : y_)
      if (!(v > 0.0) || v > 1.0)
        throw std::domain_error("Simplex3: point outside the open simplex");
  }

  std::array<double, 4> y_;
};

/// Concentration parameters of a Dirichlet on the 3-simplex.
class DirichletParams {
 public:
  DirichletParams() : a_{1.0, 1.0, 1.0, 1.0} {}
  DirichletParams(double a1, double a2, double a3, double a4) : a_{a1, a2, a3, a4} { check(); }
  explicit DirichletParams(const std::array<double, 4>& a) : a_(a) { check(); }

  double operator[](std::size_t i) const { return a_[i]; }
  const std::array<double, 4>& values() const noexcept { return a_; }
  double sum() const noexcept { return a_[0] + a_[1] + a_[2] + a_[3]; }

  /// Normalized means a_i / sum.
  std::array<double, 4> mean() const noexcept
  {
    const double s = sum();
    return {a_[0] / s, a_[1] / s, a_[2] / s, a_[3] / s};
  }

  bool operator==(const DirichletParams&) const = default;

 private:
  void check() const
  {
    for (double v : a_)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::domain_error("DirichletParams: concentrations must be positive and finite");
  }

  std::array<double, 4> a_;
};

/// Probabilities over a finite label set.
class CategoricalDist {
 public:
  CategoricalDist() = default;
  explicit CategoricalDist(std::vector<double> p) : p_(std::move(p))
  {
    double s = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0)) throw std::domain_error("CategoricalDist: negative or NaN entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::domain_error("CategoricalDist: entries sum to " + std::to_string(s));
  }

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> probabilities() const noexcept { return p_; }

 private:
  std::vector<double> p_;
};

/// Diagonal Gaussian. Variances are in squared units of the mean.
struct GaussianSpec {
  std::vector<double> mean;
  std::vector<double> variance;
};

using Counts4 = std::array<int, 4>;

// ---------------------------------------------------------------------------
// Samplers

inline double normal_sample(double mean, double variance, Rng& rng)
{
  if (!(variance > 0.0)) throw std::domain_error("normal_sample: variance must be positive");
  boost::random::normal_distribution<double> n(mean, std::sqrt(variance));
  return n(rng);
}

inline std::vector<double> gaussian_sample(const GaussianSpec& g, Rng& rng)
{
  if (g.mean.size() != g.variance.size()) throw std::domain_error("gaussian_sample: mean/variance size mismatch");
  std::vector<double> out(g.mean.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal_sample(g.mean[i], g.variance[i], rng);
  return out;
}

/// Index drawn with probability proportional to p (p need not be normalized).
inline std::size_t categorical_sample(std::span<const double> p, Rng& rng)
{
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::domain_error("categorical_sample: invalid probability");
    total += v;
  }
  if (!(total > 0.0)) throw std::domain_error("categorical_sample: probabilities sum to zero");
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    if (u < p[i]) return i;
    u -= p[i];
  }
  return last;
}

inline std::size_t categorical_sample(const CategoricalDist& d, Rng& rng)
{
  return categorical_sample(d.probabilities(), rng);
}

/// Sequential-binomial multinomial draw.
inline std::vector<int> multinomial_sample(int m, std::span<const double> p, Rng& rng)
{
  if (m < 0) throw std::domain_error("multinomial_sample: negative draw count");
  double rest = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::domain_error("multinomial_sample: invalid probability");
    rest += v;
  }
  if (!(rest > 0.0)) throw std::domain_error("multinomial_sample: probabilities sum to zero");
  std::vector<int> out(p.size(), 0);
  int left = m;
  for (std::size_t i = 0; i + 1 < p.size() && left > 0; ++i) {
    const double q = std::clamp(p[i] / rest, 0.0, 1.0);
    boost::random::binomial_distribution<int, double> b(left, q);
    out[i] = b(rng);
    left -= out[i];
    rest -= p[i];
    if (rest <= 0.0) break;
  }
  out.back() += left;
  return out;
}

inline Counts4 multinomial_sample(int m, const Simplex3& p, Rng& rng)
{
  auto v = multinomial_sample(m, std::span<const double>(p.values()), rng);
  return {v[0], v[1], v[2], v[3]};
}

/// Smallest coordinate produced by the samplers. Keeps draws in the open
/// simplex when concentrations are far below one.
inline constexpr double simplex_floor = 1e-300;

inline Simplex3 dirichlet_sample(const DirichletParams& d, Rng& rng)
{
  // Gamma(a) = Gamma(a + 1) * U^(1/a); done in logs so small shapes do not
  // underflow before normalization.
  std::array<double, 4> lg{};
  for (int i = 0; i < 4; ++i) {
    const double a = d[i];
    if (a >= 1.0) {
      boost::random::gamma_distribution<double> g(a, 1.0);
      lg[i] = std::log(std::max(g(rng), std::numeric_limits<double>::min()));
    } else {
      boost::random::gamma_distribution<double> g(a + 1.0, 1.0);
      lg[i] = std::log(std::max(g(rng), std::numeric_limits<double>::min())) + std::log(rng.uniform_pos()) / a;
    }
  }
  const double mx = *std::max_element(lg.begin(), lg.end());
  std::array<double, 4> y{};
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    y[i] = std::exp(lg[i] - mx);
    s += y[i];
  }
  for (auto& v : y) v = std::max(v / s, simplex_floor);
  return Simplex3::from_array(y);
}

// ---------------------------------------------------------------------------
// Densities

/// log Dir(d)(y). Boundary points: -inf when some coordinate is zero with
/// exponent a_i - 1 > 0, +inf when the exponent is negative. A mix of both
/// counts as undefined and returns -inf (density 0).
inline double log_dirichlet_density(const DirichletParams& d, const std::array<double, 4>& y)
{
  double out = log_gamma(d.sum());
  bool zero = false, inf = false;
  for (int i = 0; i < 4; ++i) {
    out -= log_gamma(d[i]);
    const double e = d[i] - 1.0;
    if (y[i] <= 0.0) {
      if (e > 0.0) zero = true;
      else if (e < 0.0) inf = true;
      continue;
    }
    out += e * std::log(y[i]);
  }
  if (zero) return -std::numeric_limits<double>::infinity();
  if (inf) return std::numeric_limits<double>::infinity();
  return out;
}

inline double log_dirichlet_density(const DirichletParams& d, const Simplex3& y)
{
  return log_dirichlet_density(d, y.values());
}

inline double dirichlet_density(const DirichletParams& d, const Simplex3& y)
{
  return std::exp(log_dirichlet_density(d, y));
}

inline double log_multinomial_density(int m, const std::array<double, 4>& p, const Counts4& o)
{
  int total = 0;
  for (int c : o) {
    if (c < 0) throw std::domain_error("multinomial_density: negative count");
    total += c;
  }
  if (total != m) throw std::domain_error("multinomial_density: counts sum to " + std::to_string(total) + ", expected " + std::to_string(m));
  double out = log_gamma(m + 1.0);
  for (int i = 0; i < 4; ++i) {
    out -= log_gamma(o[i] + 1.0);
    if (o[i] > 0) {
      if (p[i] <= 0.0) return -std::numeric_limits<double>::infinity();
      out += o[i] * std::log(p[i]);
    }
  }
  return out;
}

inline double multinomial_density(int m, const Simplex3& p, const Counts4& o)
{
  return std::exp(log_multinomial_density(m, p.values(), o));
}

/// E|c - y_j| for y ~ Dir(d). Closed form through the regularized
/// incomplete beta function of the Beta(a_j, a_0 - a_j) marginal.
inline double dirichlet_mean_abs_dev(const DirichletParams& d, std::size_t j, double c)
{
  if (j >= 4) throw std::domain_error("dirichlet_mean_abs_dev: component index out of range");
  if (!(c >= 0.0 && c <= 1.0)) throw std::domain_error("dirichlet_mean_abs_dev: c outside [0, 1]");
  const double a0 = d.sum();
  const double aj = d[j];
  const double rest = a0 - aj;
  const double mean = aj / a0;
  const double v = 2.0 * (c * reg_incomplete_beta(c, aj, rest) - mean * reg_incomplete_beta(c, aj + 1.0, rest)) + mean - c;
  return std::max(v, 0.0);
}

}  // namespace gfilt

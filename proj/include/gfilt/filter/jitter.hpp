#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gfilt/prob/distributions.hpp"

namespace gfilt {

/// Gaussian jitter with covariance max(a r^n, b) * diag(D).
struct JitterSchedule {
  double a = 1.0, b = 1.0, r = 1.0;
  std::vector<double> D;

  static JitterSchedule constant(std::vector<double> D) { return {1.0, 1.0, 1.0, std::move(D)}; }

  void validate() const
  {
    if (!(b > 0.0) || !(a >= b)) throw std::domain_error("JitterSchedule: need a >= b > 0");
    if (!(r > 0.0 && r <= 1.0)) throw std::domain_error("JitterSchedule: need 0 < r <= 1");
    for (double d : D)
      if (!(d >= 0.0) || !std::isfinite(d)) throw std::domain_error("JitterSchedule: diagonal entries must be >= 0");
  }

  double scale(std::size_t n) const { return std::max(a * std::pow(r, static_cast<double>(n)), b); }

  std::vector<double> variance(std::size_t n) const
  {
    const double s = scale(n);
    std::vector<double> v(D.size());
    for (std::size_t i = 0; i < D.size(); ++i) v[i] = s * D[i];
    return v;
  }
};

/// Axis-aligned parameter domain. Infinite bounds mean unconstrained.
struct ParamBox {
  std::vector<double> lo, hi;

  static ParamBox unbounded(std::size_t d)
  {
    return {std::vector<double>(d, -std::numeric_limits<double>::infinity()),
            std::vector<double>(d, std::numeric_limits<double>::infinity())};
  }
  static ParamBox unit(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

  bool contains(const std::vector<double>& x) const
  {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    return true;
  }
};

/// x + N(0, diag(var)) restricted to the box: redraw up to `tries` times,
/// then clamp the last draw.
inline std::vector<double> jitter(const std::vector<double>& x, const std::vector<double>& var, const ParamBox& box,
                                  Rng& rng, int tries = 100)
{
  if (var.size() != x.size() || box.lo.size() != x.size() || box.hi.size() != x.size())
    throw std::domain_error("jitter: dimension mismatch");
  std::vector<double> out(x.size());
  boost::random::normal_distribution<double> n01;
  for (int t = 0; t < tries; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = var[i] > 0.0 ? x[i] + std::sqrt(var[i]) * n01(rng) : x[i];
    if (box.contains(out)) return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(out[i], box.lo[i], box.hi[i]);
  return out;
}

}  // namespace gfilt

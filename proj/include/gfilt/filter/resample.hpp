#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gfilt/prob/rng.hpp"

namespace gfilt {

enum class ResampleScheme { Multinomial, Systematic };

/// Indices of n_out draws from the categorical distribution w, returned in
/// increasing order. Multinomial draws use sorted uniforms built from
/// exponential spacings, so the cost is linear.
inline std::vector<std::size_t> resample_indices(std::span<const double> w, std::size_t n_out, Rng& rng,
                                                 ResampleScheme scheme = ResampleScheme::Multinomial)
{
  if (w.empty()) throw std::domain_error("resample: empty weight vector");
  double total = 0.0;
  for (double v : w) {
    if (std::isnan(v)) throw std::domain_error("resample: NaN weight");
    if (v < 0.0) throw std::domain_error("resample: negative weight");
    total += v;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw std::domain_error("resample: weights do not sum to a positive value");

  std::vector<double> u(n_out);
  if (scheme == ResampleScheme::Systematic) {
    const double u0 = rng.uniform();
    for (std::size_t i = 0; i < n_out; ++i) u[i] = (u0 + static_cast<double>(i)) / static_cast<double>(n_out);
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_out; ++i) u[i] = acc += -std::log(rng.uniform_pos());
    acc += -std::log(rng.uniform_pos());
    for (auto& v : u) v /= acc;
  }

  std::vector<std::size_t> out(n_out);
  std::size_t j = 0;
  double cum = w[0] / total;
  std::size_t last_pos = 0;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w[k] > 0.0) last_pos = k;
  for (std::size_t i = 0; i < n_out; ++i) {
    while (u[i] >= cum && j < last_pos) cum += w[++j] / total;
    while (w[j] <= 0.0 && j < last_pos) cum += w[++j] / total;
    out[i] = j;
  }
  return out;
}

template <class T>
std::vector<T> resample(std::span<const double> w, const std::vector<T>& items, Rng& rng,
                        ResampleScheme scheme = ResampleScheme::Multinomial)
{
  if (w.size() != items.size()) throw std::domain_error("resample: weights and items differ in length");
  const auto idx = resample_indices(w, items.size(), rng, scheme);
  std::vector<T> out;
  out.reserve(items.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace gfilt

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <spdlog/spdlog.h>

namespace gfilt {

/// Every candidate state has zero likelihood under the observation.
class DegenerateObservation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// log((1/n) sum exp(v_i)); -inf for an empty or all -inf input.
inline double log_mean_exp(std::span<const double> v)
{
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  if (std::isnan(mx)) throw std::domain_error("log_mean_exp: NaN input");
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  if (mx == std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s / static_cast<double>(v.size()));
}

struct NormalizedWeights {
  std::vector<double> w;
  bool degenerate = false;  // all log-weights were -inf; w is uniform
};

/// exp(log_w) normalized to sum to one. An all-zero family falls back to
/// uniform weights with a warning; NaN is rejected.
inline NormalizedWeights normalize_log_weights(std::span<const double> log_w, std::string_view who = "particle filter")
{
  NormalizedWeights out;
  out.w.resize(log_w.size());
  if (log_w.empty()) return out;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : log_w) {
    if (std::isnan(v)) throw std::domain_error(std::string(who) + ": NaN weight");
    mx = std::max(mx, v);
  }
  if (mx == -std::numeric_limits<double>::infinity()) {
    spdlog::warn("{}: all weights are zero, resampling uniformly", who);
    std::fill(out.w.begin(), out.w.end(), 1.0 / static_cast<double>(log_w.size()));
    out.degenerate = true;
    return out;
  }
  if (mx == std::numeric_limits<double>::infinity()) {
    // Point masses: share the weight among the infinite entries.
    std::size_t cnt = 0;
    for (double v : log_w) cnt += v == mx;
    for (std::size_t i = 0; i < log_w.size(); ++i) out.w[i] = log_w[i] == mx ? 1.0 / static_cast<double>(cnt) : 0.0;
    return out;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) s += out.w[i] = std::exp(log_w[i] - mx);
  for (auto& v : out.w) v /= s;
  return out;
}

}  // namespace gfilt

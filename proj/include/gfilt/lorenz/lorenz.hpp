#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "gfilt/prob/rng.hpp"

namespace gfilt {

using LorenzState = std::array<double, 3>;
/// Observed coordinates (first and third state component, scaled).
using LorenzObs = std::array<double, 2>;

/// Reference initial state of the stochastic Lorenz benchmark.
inline constexpr LorenzState lorenz_reference_state{-5.91652, -5.52332, 24.5723};

struct LorenzParams {
  double theta1 = 10.0, theta2 = 28.0, theta3 = 8.0 / 3.0, theta4 = 0.8;
  double dt = 0.001;
  int obs_stride = 40;
  double obs_variance = 0.1;

  void validate() const
  {
    if (!(dt > 0.0)) throw std::domain_error("LorenzParams: dt must be positive");
    if (obs_stride < 1) throw std::domain_error("LorenzParams: obs_stride must be >= 1");
    if (!(obs_variance > 0.0)) throw std::domain_error("LorenzParams: obs_variance must be positive");
  }

  bool observed_at(std::size_t n) const noexcept { return n > 0 && n % static_cast<std::size_t>(obs_stride) == 0; }
};

/// Euler drift: the mean of the next state.
inline LorenzState lorenz_transition_mean(const LorenzParams& p, const LorenzState& y) noexcept
{
  return {y[0] - p.dt * p.theta1 * (y[0] - y[1]), y[1] + p.dt * (p.theta2 * y[0] - y[1] - y[0] * y[2]),
          y[2] + p.dt * (y[0] * y[1] - p.theta3 * y[2])};
}

/// Drift plus independent N(0, dt) noise per component.
inline LorenzState lorenz_transition_sample(const LorenzParams& p, const LorenzState& y, Rng& rng)
{
  boost::random::normal_distribution<double> n01;
  const double sd = std::sqrt(p.dt);
  auto m = lorenz_transition_mean(p, y);
  for (auto& v : m) v += sd * n01(rng);
  return m;
}

inline double lorenz_obs_log_density(const LorenzParams& p, const LorenzState& y, const LorenzObs& o) noexcept
{
  const double d1 = o[0] - p.theta4 * y[0];
  const double d3 = o[1] - p.theta4 * y[2];
  return -std::log(2.0 * std::numbers::pi * p.obs_variance) - (d1 * d1 + d3 * d3) / (2.0 * p.obs_variance);
}

/// Density of the observation made at step n; steps between observations
/// carry none and are rejected.
inline double lorenz_obs_log_density(const LorenzParams& p, std::size_t n, const LorenzState& y, const LorenzObs& o)
{
  if (!p.observed_at(n))
    throw std::domain_error("lorenz observation requested at step " + std::to_string(n) + ", stride is " +
                            std::to_string(p.obs_stride));
  return lorenz_obs_log_density(p, y, o);
}

inline double lorenz_obs_density(const LorenzParams& p, std::size_t n, const LorenzState& y, const LorenzObs& o)
{
  return std::exp(lorenz_obs_log_density(p, n, y, o));
}

inline LorenzObs lorenz_obs_sample(const LorenzParams& p, const LorenzState& y, Rng& rng)
{
  boost::random::normal_distribution<double> n01;
  const double sd = std::sqrt(p.obs_variance);
  return {p.theta4 * y[0] + sd * n01(rng), p.theta4 * y[2] + sd * n01(rng)};
}

/// Ground-truth trajectory generator with observations every obs_stride
/// steps. Step n uses the stream (seed, tag, n).
class LorenzSimulator {
 public:
  LorenzSimulator(LorenzParams p, LorenzState y0, std::uint64_t seed) : p_(p), y_(y0), seed_(seed) { p_.validate(); }

  void step()
  {
    ++n_;
    Rng rng = Rng::keyed({seed_, 0x6c6f72656eULL, n_});
    y_ = lorenz_transition_sample(p_, y_, rng);
    has_obs_ = p_.observed_at(n_);
    if (has_obs_) obs_ = lorenz_obs_sample(p_, y_, rng);
  }

  std::size_t time() const noexcept { return n_; }
  const LorenzState& state() const noexcept { return y_; }
  bool has_observation() const noexcept { return has_obs_; }
  const LorenzObs& observation() const noexcept { return obs_; }
  const LorenzParams& params() const noexcept { return p_; }

 private:
  LorenzParams p_;
  LorenzState y_;
  std::uint64_t seed_;
  std::size_t n_ = 0;
  bool has_obs_ = false;
  LorenzObs obs_{};
};

}  // namespace gfilt

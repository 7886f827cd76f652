#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <tbb/parallel_for.h>

#include "gfilt/filter/resample.hpp"
#include "gfilt/filter/weights.hpp"
#include "gfilt/prob/rng.hpp"

namespace gfilt {

/// How a particle is drawn from the equally weighted transition mixture
/// (1/N) sum_i tau(y_i): pick a uniform ancestor per draw, or use each
/// component once (draw i propagates particle i).
enum class MixtureSampling { Ancestor, Stratified };

struct ParticleOptions {
  ResampleScheme resample = ResampleScheme::Multinomial;
  MixtureSampling mixture = MixtureSampling::Ancestor;
};

/// Particle family with optional weights (empty = uniform).
template <class S>
struct ParticleFamily {
  std::vector<S> particles;
  std::vector<double> weights;

  std::size_t size() const noexcept { return particles.size(); }
};

namespace detail {
inline constexpr std::uint64_t propagate_tag = 0;
inline constexpr std::uint64_t resample_tag = 1;
inline constexpr std::uint64_t weight_tag = 2;
}  // namespace detail

/// One particle filter step on an unweighted family.
///
/// propagate(y, rng) samples from tau(y); log_lik(y) is log xi(y)(o).
/// Draw i uses stream (key, 0, i) for its ancestor choice and transition;
/// resampling uses stream (key, 1, 0), where key is taken from `rng`. This
/// is the layout of a one-cluster factored family.
template <class S, class Propagate, class LogLik>
std::vector<S> standard_particle_filter_step(const std::vector<S>& family, Propagate&& propagate, LogLik&& log_lik,
                                             Rng& rng, const ParticleOptions& opt = {})
{
  const std::size_t N = family.size();
  if (N == 0) throw std::domain_error("standard_particle_filter_step: empty particle family");
  const std::uint64_t key = rng.next_key();
  std::vector<S> moved(N);
  std::vector<double> logw(N);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, N, 16), [&](const auto& r) {
    for (std::size_t i = r.begin(); i < r.end(); ++i) {
      Rng ri = Rng::keyed({key, detail::propagate_tag, i});
      const std::size_t a = opt.mixture == MixtureSampling::Ancestor ? ri.below(N) : i;
      moved[i] = propagate(family[a], ri);
      logw[i] = log_lik(moved[i]);
    }
  });
  const auto w = normalize_log_weights(logw, "standard particle filter");
  Rng rr = Rng::keyed({key, detail::resample_tag, 0});
  const auto idx = resample_indices(w.w, N, rr, opt.resample);
  std::vector<S> out;
  out.reserve(N);
  for (auto i : idx) out.push_back(moved[i]);
  return out;
}

/// Stream handed to parameter particle i by the conditional filters.
inline Rng conditional_stream(std::uint64_t key, std::size_t i) { return Rng::keyed({key, i}); }

/// Conditional particle filter step.
///
/// params[i] is the new parameter particle, lineage[i] the index of the
/// previous-step particle it descends from; its state family seeds the
/// transition. propagate(x, y, rng) samples tau(x, y); log_lik(x, y) is
/// log xi(x, y)(o). Parameter particle i runs a standard particle filter
/// step with stream conditional_stream(key, i).
template <class X, class S, class Propagate, class LogLik>
std::vector<std::vector<S>> conditional_particle_filter_step(const std::vector<X>& params,
                                                             std::span<const std::size_t> lineage,
                                                             const std::vector<std::vector<S>>& families,
                                                             Propagate&& propagate, LogLik&& log_lik, Rng& rng,
                                                             const ParticleOptions& opt = {})
{
  if (lineage.size() != params.size()) throw std::domain_error("conditional_particle_filter_step: lineage size mismatch");
  for (auto a : lineage)
    if (a >= families.size()) throw std::domain_error("conditional_particle_filter_step: lineage index out of range");
  const std::uint64_t key = rng.next_key();
  std::vector<std::vector<S>> out(params.size());
  tbb::parallel_for(std::size_t{0}, params.size(), [&](std::size_t i) {
    Rng ri = conditional_stream(key, i);
    const X& x = params[i];
    out[i] = standard_particle_filter_step(
        families[lineage[i]], [&](const S& y, Rng& r) { return propagate(x, y, r); },
        [&](const S& y) { return log_lik(x, y); }, ri, opt);
  });
  return out;
}

}  // namespace gfilt

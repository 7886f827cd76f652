#pragma once

#include <cstddef>
#include <cstdint>
#include <type_traits>
#include <vector>

#include <tbb/parallel_for.h>

#include "gfilt/filter/dense.hpp"
#include "gfilt/filter/jitter.hpp"
#include "gfilt/filter/particle.hpp"

namespace gfilt {

using ParamVec = std::vector<double>;

struct ParameterStep {
  std::vector<ParamVec> params;      // x_n after resampling
  std::vector<std::size_t> lineage;  // index into x_{n-1} that each x_n descends from
  std::vector<double> log_weights;   // unnormalized log weights of the jittered candidates
  std::vector<std::size_t> selected; // candidate index each x_n was resampled from
  bool degenerate = false;
};

/// Parameter particle filter step with jitter.
///
/// Candidate i jitters an ancestor (uniform with replacement, or i itself
/// under stratified sampling) by N(0, Sigma_n), then gets weight
/// exp(log_weight(x_bar, ancestor, rng)); candidates are resampled.
/// log_weight is where the observation model on parameters is synthesized
/// from the state filter. It may also take the candidate index,
/// log_weight(x_bar, ancestor, i, rng), to keep per-candidate results.
template <class LogWeight>
ParameterStep parameter_pf_step(const std::vector<ParamVec>& params, const JitterSchedule& sched, std::size_t n,
                                const ParamBox& box, LogWeight&& log_weight, Rng& rng, const ParticleOptions& opt = {})
{
  const std::size_t N = params.size();
  if (N == 0) throw std::domain_error("parameter_pf_step: empty parameter family");
  sched.validate();
  const auto var = sched.variance(n);
  const std::uint64_t key = rng.next_key();
  std::vector<ParamVec> cand(N);
  std::vector<std::size_t> anc(N);
  std::vector<double> logw(N);
  tbb::parallel_for(std::size_t{0}, N, [&](std::size_t i) {
    Rng ri = Rng::keyed({key, detail::propagate_tag, i});
    anc[i] = opt.mixture == MixtureSampling::Ancestor ? ri.below(N) : i;
    cand[i] = jitter(params[anc[i]], var, box, ri);
    Rng rw = Rng::keyed({key, detail::weight_tag, i});
    if constexpr (std::is_invocable_v<LogWeight&, const ParamVec&, std::size_t, std::size_t, Rng&>)
      logw[i] = log_weight(static_cast<const ParamVec&>(cand[i]), anc[i], i, rw);
    else
      logw[i] = log_weight(static_cast<const ParamVec&>(cand[i]), anc[i], rw);
  });
  const auto w = normalize_log_weights(logw, "parameter particle filter");
  Rng rr = Rng::keyed({key, detail::resample_tag});
  const auto idx = resample_indices(w.w, N, rr, opt.resample);
  ParameterStep out;
  out.params.reserve(N);
  out.lineage.reserve(N);
  for (auto c : idx) {
    out.params.push_back(cand[c]);
    out.lineage.push_back(anc[c]);
  }
  out.selected = idx;
  out.log_weights = std::move(logw);
  out.degenerate = w.degenerate;
  return out;
}

/// Monte Carlo estimate of log E[exp(f)] from `samples` draws of
/// f(rng), each returning a log-likelihood.
template <class F>
double mc_log_weight(std::size_t samples, Rng& rng, F&& f)
{
  if (samples == 0) throw std::domain_error("mc_log_weight: need at least one sample");
  std::vector<double> v(samples);
  for (auto& x : v) x = f(rng);
  return log_mean_exp(v);
}

/// Parameter weight with the state belief held as a particle family:
/// integrate the observation density over (1/M) sum_j tau(x, y_j).
template <class S, class Propagate, class LogLik>
double particle_mixture_log_weight(const ParamVec& x, const std::vector<S>& family, Propagate&& propagate,
                                   LogLik&& log_lik, std::size_t samples, Rng& rng)
{
  if (family.empty()) throw std::domain_error("particle_mixture_log_weight: empty family");
  return mc_log_weight(samples, rng, [&](Rng& r) {
    const S& y = family[r.below(family.size())];
    return log_lik(x, propagate(x, y, r));
  });
}

/// Parameter step whose weights integrate over each ancestor's particle
/// family (families[a] belongs to params[a]).
template <class S, class Propagate, class LogLik>
ParameterStep parameter_pf_step_particles(const std::vector<ParamVec>& params,
                                          const std::vector<std::vector<S>>& families, const JitterSchedule& sched,
                                          std::size_t n, const ParamBox& box, Propagate&& propagate, LogLik&& log_lik,
                                          std::size_t mc_samples, Rng& rng, const ParticleOptions& opt = {})
{
  if (families.size() != params.size()) throw std::domain_error("parameter_pf_step_particles: one family per particle");
  return parameter_pf_step(
      params, sched, n, box,
      [&](const ParamVec& x, std::size_t a, Rng& r) {
        return particle_mixture_log_weight(x, families[a], propagate, log_lik, mc_samples, r);
      },
      rng, opt);
}

/// Uniform mixture of the conditional dense beliefs.
inline DenseBelief marginal_state_belief(const std::vector<DenseBelief>& conditional)
{
  if (conditional.empty()) throw std::domain_error("marginal_state_belief: no parameter particles");
  DenseBelief out(conditional.front().size(), 0.0);
  for (const auto& b : conditional) {
    if (b.size() != out.size()) throw std::domain_error("marginal_state_belief: beliefs differ in size");
    for (std::size_t y = 0; y < out.size(); ++y) out[y] += b[y];
  }
  for (auto& v : out) v /= static_cast<double>(conditional.size());
  return out;
}

/// Uniform mixture of conditional particle families, as one family.
template <class S>
std::vector<S> marginal_state_belief(const std::vector<std::vector<S>>& conditional)
{
  std::vector<S> out;
  for (const auto& f : conditional) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace gfilt

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include <tbb/parallel_for.h>

#include "gfilt/filter/parameter.hpp"

namespace gfilt {

/// One step of an assumed-density filter: transition update, observation
/// update, then projection back into the approximating family. The three
/// stages are supplied by the model; `project` receives whatever the
/// observation stage produces (an unnormalized target and its pieces).
template <class Q, class TransitionUpdate, class ObservationUpdate, class Project>
auto standard_variational_filter_step(const Q& q, TransitionUpdate&& transition, ObservationUpdate&& observe,
                                      Project&& project)
{
  return project(observe(transition(q)));
}

namespace detail {
inline std::uint64_t hash_params(const ParamVec& x)
{
  std::uint64_t h = 0x51ed2701;
  for (double v : x) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}
}  // namespace detail

/// Conditional variational filter over a parameter particle family.
///
/// step(x, q_ancestor, rng) runs the standard variational step at
/// parameter x. The stream is keyed by the ancestor and the parameter
/// value, so duplicate particles get identical beliefs.
template <class Q, class Step>
std::vector<Q> conditional_variational_filter_step(const std::vector<ParamVec>& params,
                                                   std::span<const std::size_t> lineage, const std::vector<Q>& beliefs,
                                                   Step&& step, Rng& rng)
{
  if (lineage.size() != params.size()) throw std::domain_error("conditional_variational_filter_step: lineage size mismatch");
  const std::uint64_t key = rng.next_key();
  std::vector<Q> out(params.size());
  tbb::parallel_for(std::size_t{0}, params.size(), [&](std::size_t i) {
    const auto a = lineage[i];
    if (a >= beliefs.size()) throw std::domain_error("conditional_variational_filter_step: lineage index out of range");
    Rng ri = Rng::keyed({key, a, detail::hash_params(params[i])});
    out[i] = step(params[i], beliefs[a], ri);
  });
  return out;
}

}  // namespace gfilt

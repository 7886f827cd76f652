#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gfilt/filter/weights.hpp"

namespace gfilt {

/// Normalized probability table over states 0..n-1 of a finite space.
using DenseBelief = std::vector<double>;

/// Transition update: out(y) = sum_y' prior(y') tau(y')(y).
///
/// `successors(y', emit)` must call emit(y, p) for every y with
/// tau(y')(y) = p > 0. Sparse emission keeps product-space models cheap.
template <class Successors>
DenseBelief dense_transition_update(const DenseBelief& prior, std::size_t n_states, Successors&& successors)
{
  DenseBelief out(n_states, 0.0);
  for (std::size_t from = 0; from < prior.size(); ++from) {
    const double m = prior[from];
    if (m == 0.0) continue;
    successors(from, [&](std::size_t to, double p) { out[to] += m * p; });
  }
  return out;
}

/// Observation update: multiply by the likelihood and renormalize.
template <class Likelihood>
DenseBelief dense_observation_update(DenseBelief pred, Likelihood&& lik, const std::string& who = "standard filter")
{
  double total = 0.0;
  for (std::size_t y = 0; y < pred.size(); ++y) {
    if (pred[y] == 0.0) continue;
    pred[y] *= lik(y);
    total += pred[y];
  }
  if (!(total > 0.0)) throw DegenerateObservation(who + ": observation has zero probability under the prediction");
  for (auto& v : pred) v /= total;
  return pred;
}

/// One step of the exact filter on a finite space.
template <class Successors, class Likelihood>
DenseBelief standard_filter_step(const DenseBelief& prior, Successors&& successors, Likelihood&& lik)
{
  return dense_observation_update(dense_transition_update(prior, prior.size(), successors), lik);
}

/// Exact conditional filter: one independent standard step per supported
/// parameter value. model_for(x) returns a (successors, likelihood) pair.
template <class X, class ModelFor>
std::vector<DenseBelief> conditional_filter_step(const std::vector<DenseBelief>& beliefs, const std::vector<X>& xs,
                                                 ModelFor&& model_for)
{
  if (beliefs.size() != xs.size()) throw std::domain_error("conditional_filter_step: one belief per parameter required");
  std::vector<DenseBelief> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto [succ, lik] = model_for(xs[i]);
    out.push_back(standard_filter_step(beliefs[i], succ, lik));
  }
  return out;
}

}  // namespace gfilt

#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <tbb/parallel_for.h>

#include "gfilt/epi/observations.hpp"
#include "gfilt/epi/transitions.hpp"
#include "gfilt/factored/factored_filter.hpp"
#include "gfilt/factored/seirs_closed_form.hpp"
#include "gfilt/fcond/subpop.hpp"
#include "gfilt/filter/jitter.hpp"
#include "gfilt/filter/parameter.hpp"

namespace gfilt {

// Parameter vectors are (beta, sigma, gamma, rho) for SEIRS and
// (beta, gamma) for SIS.

inline std::size_t param_dim(EpiKind kind) { return kind == EpiKind::SEIRS ? 4 : 2; }

inline SeirsParams seirs_params_from(const ParamVec& x)
{
  if (x.size() != 4) throw std::domain_error("seirs_params_from: expected 4 parameters, got " + std::to_string(x.size()));
  return {x[0], x[1], x[2], x[3]};
}

inline CompartmentTransition transition_from(const ParamVec& x, EpiKind kind)
{
  if (kind == EpiKind::SEIRS) return CompartmentTransition(seirs_params_from(x));
  if (x.size() != 2) throw std::domain_error("transition_from: SIS expects 2 parameters, got " + std::to_string(x.size()));
  return CompartmentTransition(SisParams{x[0], x[1]});
}

/// Parameter particles with one state belief each. Beliefs are immutable
/// and shared between particles that resampled the same candidate.
template <class B>
struct ConditionalFactoredBelief {
  std::vector<ParamVec> params;
  std::vector<std::shared_ptr<const B>> beliefs;
  std::vector<std::size_t> lineage;  // previous-step index of each particle's ancestor

  std::size_t size() const noexcept { return params.size(); }

  void validate() const
  {
    if (params.empty()) throw std::domain_error("ConditionalFactoredBelief: no parameter particles");
    if (beliefs.size() != params.size()) throw std::domain_error("ConditionalFactoredBelief: one belief per particle required");
    for (const auto& b : beliefs)
      if (!b) throw std::domain_error("ConditionalFactoredBelief: missing belief");
  }

  /// All particles start from the same belief.
  static ConditionalFactoredBelief uniform_start(std::vector<ParamVec> xs, B b0)
  {
    ConditionalFactoredBelief out;
    auto shared = std::make_shared<const B>(std::move(b0));
    out.lineage.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out.lineage[i] = i;
    out.beliefs.assign(xs.size(), shared);
    out.params = std::move(xs);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Conditional state steps

namespace detail {
template <class T>
const T& deref(const T& x) { return x; }
template <class T>
const T& deref(const std::shared_ptr<const T>& x) { return *x; }
}  // namespace detail

/// Conditional factored filter, generic form: particle i runs the factored
/// filter step of model_for(params[i]) from its ancestor's belief.
template <class ModelFor, class Obs>
std::vector<FactoredBelief> fcf_step_generic(const std::vector<ParamVec>& params, std::span<const std::size_t> lineage,
                                             const std::vector<FactoredBelief>& beliefs, ModelFor&& model_for,
                                             const Obs& o)
{
  if (lineage.size() != params.size()) throw std::domain_error("fcf_step_generic: lineage size mismatch");
  std::vector<FactoredBelief> out(params.size());
  tbb::parallel_for(std::size_t{0}, params.size(), [&](std::size_t i) {
    if (lineage[i] >= beliefs.size()) throw std::domain_error("fcf_step_generic: lineage index out of range");
    out[i] = factored_filter_step(beliefs[lineage[i]], model_for(params[i]), o);
  });
  return out;
}

/// Conditional factored filter with the closed-form per-node updates of
/// the compartment model.
inline std::vector<std::shared_ptr<const NodeBeliefs>> fcf_step(const std::vector<ParamVec>& params,
                                                                std::span<const std::size_t> lineage,
                                                                const std::vector<std::shared_ptr<const NodeBeliefs>>& beliefs,
                                                                EpiKind kind, const ContactNetwork& net,
                                                                const TestObsParams& obs, std::span<const TestResult> o)
{
  if (lineage.size() != params.size()) throw std::domain_error("fcf_step: lineage size mismatch");
  std::vector<std::shared_ptr<const NodeBeliefs>> out(params.size());
  tbb::parallel_for(std::size_t{0}, params.size(), [&](std::size_t i) {
    if (lineage[i] >= beliefs.size()) throw std::domain_error("fcf_step: lineage index out of range");
    out[i] = std::make_shared<const NodeBeliefs>(
        seirs_closed_form_step(*beliefs[lineage[i]], transition_from(params[i], kind), net, obs, o));
  });
  return out;
}

/// Monte Carlo estimate of the log parameter weight
/// log int prod_k xi_k(o_k) d(mu (x) tau_x): each sample draws a full state
/// from the product of the node beliefs; given it, the next-step
/// observation density factorizes over nodes and is evaluated exactly.
inline double fcf_log_weight(const NodeBeliefs& mu, const CompartmentTransition& tau, const ContactNetwork& net,
                             const TestObsParams& obs, std::span<const TestResult> o, std::size_t mc_samples, Rng& rng)
{
  if (mu.size() != net.size() || o.size() != net.size()) throw std::domain_error("fcf_log_weight: size mismatch");
  std::vector<Row4> lik(o.size());
  for (std::size_t k = 0; k < o.size(); ++k) lik[k] = test_obs_likelihood(obs, o[k]);
  std::vector<Compartment> s(mu.size());
  return mc_log_weight(mc_samples, rng, [&](Rng& r) {
    for (std::size_t k = 0; k < mu.size(); ++k)
      s[k] = static_cast<Compartment>(categorical_sample(std::span<const double>(mu[k]), r));
    double ll = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const Row4 row = tau.row(s[k], infectious_neighbor_count(net, s, k));
      double z = 0.0;
      for (int c = 0; c < 4; ++c) z += row[c] * lik[k][c];
      ll += std::log(z);
    }
    return ll;
  });
}

/// Log parameter weight under the factored approximation of the
/// intermediate distribution: the sum over nodes of
/// log sum_c pred_k(c) xi(c)(o_k).
inline double fcf_log_weight_factored(const NodeBeliefs& mu, const CompartmentTransition& tau, const ContactNetwork& net,
                                      const TestObsParams& obs, std::span<const TestResult> o)
{
  const auto pred = seirs_transition_update_closed_form(mu, tau, net);
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const Row4 lik = test_obs_likelihood(obs, o[k]);
    double z = 0.0;
    for (int c = 0; c < 4; ++c) z += pred[k][c] * lik[c];
    total += std::log(z);
  }
  return total;
}

/// Conditional factored particle filter (one factored particle family per
/// parameter particle). Particle i runs the factored particle filter step
/// of model_for(params[i]) from its ancestor's family with stream
/// conditional_stream(key, i). Families may be held by value or by
/// shared_ptr.
template <class Families, class ModelFor, class Obs>
std::vector<FactoredParticleFamily> fcpf_step(const std::vector<ParamVec>& params, std::span<const std::size_t> lineage,
                                              const Families& families, ModelFor&& model_for,
                                              const Obs& o, Rng& rng, const ParticleOptions& opt = {})
{
  if (lineage.size() != params.size()) throw std::domain_error("fcpf_step: lineage size mismatch");
  for (auto a : lineage)
    if (a >= families.size()) throw std::domain_error("fcpf_step: lineage index out of range");
  const std::uint64_t key = rng.next_key();
  std::vector<FactoredParticleFamily> out(params.size());
  tbb::parallel_for(std::size_t{0}, params.size(), [&](std::size_t i) {
    Rng ri = conditional_stream(key, i);
    out[i] = factored_particle_filter_step(detail::deref(families[lineage[i]]), model_for(params[i]), o, ri, opt);
  });
  return out;
}

/// Monte Carlo log parameter weight for a factored particle family: each
/// sample assembles the dependency labels of every cluster from one
/// uniformly chosen particle per cluster, and the cluster observation
/// density of the next step is evaluated exactly given them.
inline double fcpf_log_weight(const FactoredParticleFamily& fam, const GraphEpidemicModel& m,
                              std::span<const TestResult> o, std::size_t mc_samples, Rng& rng)
{
  const std::size_t p = m.cluster_count();
  if (fam.size() != p) throw std::domain_error("fcpf_log_weight: one family per cluster required");
  const auto& part = m.partition();
  std::vector<Label> full(m.network().size());
  std::vector<Label> dep;
  return mc_log_weight(mc_samples, rng, [&](Rng& r) {
    for (std::size_t l = 0; l < p; ++l) {
      const auto& y = fam[l][r.below(fam[l].size())];
      const auto& nodes = part.cluster(l);
      for (std::size_t j = 0; j < nodes.size(); ++j) full[nodes[j]] = y[j];
    }
    double ll = 0.0;
    for (std::size_t l = 0; l < p; ++l) {
      const auto& deps = m.deps(l);
      dep.resize(deps.size());
      for (std::size_t j = 0; j < deps.size(); ++j) dep[j] = full[deps[j]];
      const auto rows = m.cluster_rows(l, dep);
      const auto& nodes = part.cluster(l);
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        double z = 0.0;
        for (int c = 0; c < m.n_labels(); ++c)
          z += rows[j][c] * test_obs_density(m.obs_params(), m.compartment(static_cast<Label>(c)), o[nodes[j]]);
        ll += std::log(z);
      }
    }
    return ll;
  });
}

using DirichletBeliefs = std::vector<DirichletParams>;

/// Conditional factored variational filter for subpopulation nodes with
/// multinomial count observations (nullopt = node not observed).
inline std::vector<std::shared_ptr<const DirichletBeliefs>> fcvf_step(
    const std::vector<ParamVec>& params, std::span<const std::size_t> lineage,
    const std::vector<std::shared_ptr<const DirichletBeliefs>>& beliefs, const SubpopParams& sp,
    const ContactNetwork& net, std::span<const std::optional<Counts4>> o)
{
  if (lineage.size() != params.size()) throw std::domain_error("fcvf_step: lineage size mismatch");
  std::vector<std::shared_ptr<const DirichletBeliefs>> out(params.size());
  tbb::parallel_for(std::size_t{0}, params.size(), [&](std::size_t i) {
    if (lineage[i] >= beliefs.size()) throw std::domain_error("fcvf_step: lineage index out of range");
    out[i] = std::make_shared<const DirichletBeliefs>(
        subpop_dirichlet_step(*beliefs[lineage[i]], seirs_params_from(params[i]), sp, net, o));
  });
  return out;
}

/// Log parameter weight for the subpopulation model: sum over observed
/// nodes of the log Dirichlet-multinomial mass under the node's
/// transition update at x. Unobserved nodes contribute nothing.
inline double fcvf_log_weight(const ParamVec& x, const DirichletBeliefs& q, const SubpopParams& sp,
                              const ContactNetwork& net, std::span<const std::optional<Counts4>> o)
{
  if (o.size() != q.size()) throw std::domain_error("fcvf_log_weight: one observation slot per node required");
  const auto pred = subpop_conditional_transition_update(q, seirs_params_from(x), sp, net);
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    if (o[k]) total += log_dirichlet_multinomial(pred[k], *o[k]);
  return total;
}

// ---------------------------------------------------------------------------
// Joint parameter and state steps

enum class ParamWeight {
  FactoredMarginal,  // product of the per-node normalizers of the factored update
  MonteCarlo,        // sample full states from the ancestor's belief
};

struct ConditionalSettings {
  JitterSchedule jitter;
  ParamBox box;
  ParticleOptions options;
  ParamWeight weight = ParamWeight::FactoredMarginal;
  std::size_t mc_samples = 64;
};

/// One step of a conditional factored filter with deterministic inner
/// updates: jitter and weight parameter candidates, resample, and hand each
/// particle the updated belief of the candidate it resampled.
/// evaluate(x, ancestor_belief, rng) returns {log weight, updated belief}.
template <class B, class Evaluate>
ConditionalFactoredBelief<B> conditional_factored_step(const ConditionalFactoredBelief<B>& cur, std::size_t n,
                                                       const ConditionalSettings& cs, Evaluate&& evaluate, Rng& rng)
{
  cur.validate();
  std::vector<std::shared_ptr<const B>> post(cur.size());
  auto step = parameter_pf_step(
      cur.params, cs.jitter, n, cs.box,
      [&](const ParamVec& x, std::size_t a, std::size_t i, Rng& r) {
        auto [lw, b] = evaluate(x, *cur.beliefs[a], r);
        post[i] = std::make_shared<const B>(std::move(b));
        return lw;
      },
      rng, cs.options);
  ConditionalFactoredBelief<B> out;
  out.params = std::move(step.params);
  out.lineage = std::move(step.lineage);
  out.beliefs.reserve(out.params.size());
  for (auto c : step.selected) out.beliefs.push_back(post[c]);
  return out;
}

/// Conditional factored filter with the closed-form node updates, paired
/// with the parameter filter.
inline ConditionalFactoredBelief<NodeBeliefs> fcf_filter_step(const ConditionalFactoredBelief<NodeBeliefs>& cur,
                                                              std::size_t n, const ConditionalSettings& cs,
                                                              EpiKind kind, const ContactNetwork& net,
                                                              const TestObsParams& obs, std::span<const TestResult> o,
                                                              Rng& rng)
{
  return conditional_factored_step(cur, n, cs, [&](const ParamVec& x, const NodeBeliefs& mu, Rng& r) {
    const auto tau = transition_from(x, kind);
    auto pred = seirs_transition_update_closed_form(mu, tau, net);
    double lw = 0.0;
    NodeBeliefs b;
    try {
      b = seirs_observation_update_closed_form(pred, obs, o, &lw);
    } catch (const DegenerateObservation&) {
      // Zero weight; the belief is never selected unless every candidate fails.
      return std::pair{-std::numeric_limits<double>::infinity(), std::move(pred)};
    }
    if (cs.weight == ParamWeight::MonteCarlo) lw = fcf_log_weight(mu, tau, net, obs, o, cs.mc_samples, r);
    return std::pair{lw, std::move(b)};
  }, rng);
}

/// Conditional factored variational filter for subpopulation nodes,
/// paired with the parameter filter. Weights use the closed-form
/// Dirichlet-multinomial masses.
inline ConditionalFactoredBelief<DirichletBeliefs> fcvf_filter_step(const ConditionalFactoredBelief<DirichletBeliefs>& cur,
                                                                    std::size_t n, const ConditionalSettings& cs,
                                                                    const SubpopParams& sp, const ContactNetwork& net,
                                                                    std::span<const std::optional<Counts4>> o, Rng& rng)
{
  return conditional_factored_step(cur, n, cs, [&](const ParamVec& x, const DirichletBeliefs& q, Rng&) {
    double lw = 0.0;
    auto b = subpop_dirichlet_step(q, seirs_params_from(x), sp, net, o, &lw);
    return std::pair{lw, std::move(b)};
  }, rng);
}

/// Conditional factored particle filter paired with the parameter filter:
/// Monte Carlo weights from the ancestors' families, then fcpf_step.
template <class ModelFor>
ConditionalFactoredBelief<FactoredParticleFamily> fcpf_filter_step(
    const ConditionalFactoredBelief<FactoredParticleFamily>& cur, std::size_t n, const ConditionalSettings& cs,
    ModelFor&& model_for, std::span<const TestResult> o, Rng& rng)
{
  cur.validate();
  auto step = parameter_pf_step(
      cur.params, cs.jitter, n, cs.box,
      [&](const ParamVec& x, std::size_t a, Rng& r) {
        return fcpf_log_weight(*cur.beliefs[a], model_for(x), o, cs.mc_samples, r);
      },
      rng, cs.options);
  auto fams = fcpf_step(step.params, step.lineage, cur.beliefs, model_for, o, rng, cs.options);
  ConditionalFactoredBelief<FactoredParticleFamily> out;
  out.params = std::move(step.params);
  out.lineage = std::move(step.lineage);
  for (auto& f : fams) out.beliefs.push_back(std::make_shared<const FactoredParticleFamily>(std::move(f)));
  return out;
}

}  // namespace gfilt

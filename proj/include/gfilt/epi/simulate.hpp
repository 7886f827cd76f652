#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <tbb/parallel_for.h>

#include "gfilt/epi/observations.hpp"
#include "gfilt/epi/transitions.hpp"
#include "gfilt/graph/network.hpp"

namespace gfilt {

namespace detail {
// Stream tags for ground-truth simulation.
inline constexpr std::uint64_t sim_transition_tag = 0x73696d7472ULL;
inline constexpr std::uint64_t sim_observation_tag = 0x73696d6f62ULL;
inline constexpr std::uint64_t sim_init_tag = 0x73696d696eULL;

template <class F>
void for_each_node(std::size_t n, F&& f)
{
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1024), [&](const auto& r) {
    for (std::size_t k = r.begin(); k < r.end(); ++k) f(k);
  });
}
}  // namespace detail

/// All nodes susceptible except one uniformly chosen node in `seed_state`.
inline std::pair<std::vector<Compartment>, NodeId> patient_zero_state(std::size_t L, Compartment seed_state,
                                                                      std::uint64_t seed)
{
  if (L == 0) throw std::domain_error("patient_zero_state: empty network");
  auto rng = Rng::keyed({seed, detail::sim_init_tag});
  const auto k = static_cast<NodeId>(rng.below(L));
  std::vector<Compartment> s(L, Compartment::S);
  s[k] = seed_state;
  return {std::move(s), k};
}

/// Ground-truth simulation on compartment labels with test observations.
///
/// Step n draws every node's next compartment from the step n-1 state, then
/// one test outcome per node. Node k at step n uses its own keyed stream,
/// so output does not depend on the worker count.
class CompartmentSimulator {
 public:
  CompartmentSimulator(CompartmentTransition tau, TestObsParams obs, DynamicNetwork net, std::vector<Compartment> init,
                       std::uint64_t seed)
      : tau_(std::move(tau)), obs_(obs), net_(std::move(net)), state_(std::move(init)), seed_(seed)
  {
    obs_.validate();
    if (state_.size() != net_.size()) throw std::domain_error("CompartmentSimulator: initial state has wrong length");
    next_.resize(state_.size());
    observed_.assign(state_.size(), TestResult::Unknown);
  }

  void step()
  {
    ++n_;
    const ContactNetwork& g = net_.snapshot_at(n_);
    const auto n = static_cast<std::uint64_t>(n_);
    detail::for_each_node(state_.size(), [&](std::size_t k) {
      auto rng = Rng::keyed({seed_, detail::sim_transition_tag, n, k});
      next_[k] = tau_.sample(state_[k], infectious_neighbor_count(g, state_, k), rng);
    });
    state_.swap(next_);
    detail::for_each_node(state_.size(), [&](std::size_t k) {
      auto rng = Rng::keyed({seed_, detail::sim_observation_tag, n, k});
      observed_[k] = sample_test_obs(obs_, state_[k], rng);
    });
  }

  std::size_t time() const noexcept { return n_; }
  const std::vector<Compartment>& state() const noexcept { return state_; }
  /// Outcomes of step time(); all Unknown before the first step.
  const std::vector<TestResult>& observation() const noexcept { return observed_; }
  const DynamicNetwork& network() const noexcept { return net_; }
  const CompartmentTransition& transition() const noexcept { return tau_; }
  const TestObsParams& obs_params() const noexcept { return obs_; }

  /// No exposed or infectious node left.
  bool extinct() const noexcept
  {
    for (Compartment c : state_)
      if (c == Compartment::E || c == Compartment::I) return false;
    return true;
  }

 private:
  CompartmentTransition tau_;
  TestObsParams obs_;
  DynamicNetwork net_;
  std::vector<Compartment> state_, next_;
  std::vector<TestResult> observed_;
  std::uint64_t seed_;
  std::size_t n_ = 0;
};

/// Transition for simplex-labelled nodes: plain Dirichlet neighbourhood
/// pressure or the subpopulation variant.
struct SimplexTransition {
  SeirsParams params;
  SubpopParams subpop;
  bool use_subpop = false;

  DirichletParams node(const ContactNetwork& net, std::span<const Simplex3> s, std::size_t k) const
  {
    return use_subpop ? subpop_node_transition(params, subpop, net, s, k)
                      : dirichlet_node_transition(params, subpop.K, net, s, k);
  }
};

/// Initial simplex state: node `zero` gets `hot`, all others `cold`.
inline std::vector<Simplex3> seeded_simplex_state(std::size_t L, NodeId zero, const Simplex3& hot, const Simplex3& cold)
{
  std::vector<Simplex3> s(L, cold);
  s.at(zero) = hot;
  return s;
}

/// Ground-truth simulation on simplex labels. Observation kind follows the
/// ObsSpaceSpec: Dirichlet and mixture reports fill simplex_observation(),
/// counts fill counts_observation(). Test-outcome observations are not
/// defined for simplex states here.
class SimplexSimulator {
 public:
  SimplexSimulator(SimplexTransition tau, ObsSpaceSpec obs, DynamicNetwork net, std::vector<Simplex3> init,
                   std::uint64_t seed)
      : tau_(std::move(tau)), obs_(std::move(obs)), net_(std::move(net)), state_(std::move(init)), seed_(seed)
  {
    tau_.params.validate();
    tau_.subpop.validate();
    validate(obs_);
    if (std::holds_alternative<TestObsSpec>(obs_))
      throw std::domain_error("SimplexSimulator: test-outcome observations need compartment states");
    if (state_.size() != net_.size()) throw std::domain_error("SimplexSimulator: initial state has wrong length");
    next_.resize(state_.size());
    simplex_obs_.assign(state_.size(), std::nullopt);
    counts_obs_.assign(state_.size(), std::nullopt);
  }

  void step()
  {
    ++n_;
    const ContactNetwork& g = net_.snapshot_at(n_);
    const auto n = static_cast<std::uint64_t>(n_);
    detail::for_each_node(state_.size(), [&](std::size_t k) {
      auto rng = Rng::keyed({seed_, detail::sim_transition_tag, n, k});
      next_[k] = dirichlet_sample(tau_.node(g, state_, k), rng);
    });
    state_.swap(next_);
    detail::for_each_node(state_.size(), [&](std::size_t k) {
      auto rng = Rng::keyed({seed_, detail::sim_observation_tag, n, k});
      observe(k, rng);
    });
  }

  std::size_t time() const noexcept { return n_; }
  const std::vector<Simplex3>& state() const noexcept { return state_; }
  const std::vector<std::optional<Simplex3>>& simplex_observation() const noexcept { return simplex_obs_; }
  const std::vector<std::optional<Counts4>>& counts_observation() const noexcept { return counts_obs_; }
  const DynamicNetwork& network() const noexcept { return net_; }
  const SimplexTransition& transition() const noexcept { return tau_; }
  const ObsSpaceSpec& obs_spec() const noexcept { return obs_; }

  /// Exposed plus infectious mass below `tol` at every node.
  bool extinct(double tol = 1e-4) const noexcept
  {
    for (const auto& s : state_)
      if (s[1] + s[2] >= tol) return false;
    return true;
  }

 private:
  void observe(std::size_t k, Rng& rng)
  {
    const auto& s = state_[k];
    if (const auto* d = std::get_if<DirichletObsSpec>(&obs_)) {
      simplex_obs_[k] = rng.uniform() < d->alpha
                            ? std::optional<Simplex3>(dirichlet_sample(scaled_concentration(d->C, s.values()), rng))
                            : std::nullopt;
    } else if (const auto* m = std::get_if<MixtureObsSpec>(&obs_)) {
      simplex_obs_[k] = m->model.sample(s.values(), rng);
    } else if (const auto* c = std::get_if<CountsObsSpec>(&obs_)) {
      counts_obs_[k] =
          rng.uniform() < c->alpha ? std::optional<Counts4>(multinomial_sample(c->m, s, rng)) : std::nullopt;
    }
  }

  SimplexTransition tau_;
  ObsSpaceSpec obs_;
  DynamicNetwork net_;
  std::vector<Simplex3> state_, next_;
  std::vector<std::optional<Simplex3>> simplex_obs_;
  std::vector<std::optional<Counts4>> counts_obs_;
  std::uint64_t seed_;
  std::size_t n_ = 0;
};

/// Recorded compartment trajectory. states[0] is the initial state;
/// observations[n] belongs to states[n] for n >= 1 (observations[0] is all
/// Unknown).
struct CompartmentTrajectory {
  std::vector<std::vector<Compartment>> states;
  std::vector<std::vector<TestResult>> observations;
};

inline CompartmentTrajectory simulate_epidemic(CompartmentSimulator sim, std::size_t n_steps)
{
  CompartmentTrajectory t;
  t.states.push_back(sim.state());
  t.observations.push_back(sim.observation());
  for (std::size_t n = 0; n < n_steps; ++n) {
    sim.step();
    t.states.push_back(sim.state());
    t.observations.push_back(sim.observation());
  }
  return t;
}

struct SimplexTrajectory {
  std::vector<std::vector<Simplex3>> states;
  std::vector<std::vector<std::optional<Simplex3>>> simplex_observations;
  std::vector<std::vector<std::optional<Counts4>>> counts_observations;
};

inline SimplexTrajectory simulate_epidemic(SimplexSimulator sim, std::size_t n_steps)
{
  SimplexTrajectory t;
  t.states.push_back(sim.state());
  t.simplex_observations.push_back(sim.simplex_observation());
  t.counts_observations.push_back(sim.counts_observation());
  for (std::size_t n = 0; n < n_steps; ++n) {
    sim.step();
    t.states.push_back(sim.state());
    t.simplex_observations.push_back(sim.simplex_observation());
    t.counts_observations.push_back(sim.counts_observation());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Population summaries

/// Fraction of nodes in each compartment.
inline Row4 population_properties(std::span<const Compartment> s)
{
  Row4 out{};
  if (s.empty()) return out;
  std::array<std::size_t, 4> cnt{};
  for (Compartment c : s) ++cnt[idx(c)];
  for (int j = 0; j < 4; ++j) out[j] = static_cast<double>(cnt[j]) / static_cast<double>(s.size());
  return out;
}

/// Mean of each simplex coordinate over nodes.
inline Row4 population_properties(std::span<const Simplex3> s)
{
  Row4 out{};
  if (s.empty()) return out;
  for (const auto& y : s)
    for (int j = 0; j < 4; ++j) out[j] += y[j];
  for (auto& v : out) v /= static_cast<double>(s.size());
  return out;
}

template <class State>
std::vector<Row4> population_properties(const std::vector<std::vector<State>>& states)
{
  std::vector<Row4> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(population_properties(std::span<const State>(s)));
  return out;
}

}  // namespace gfilt

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>
#include <tbb/parallel_for.h>

#include "gfilt/epi/simulate.hpp"
#include "gfilt/factored/dirichlet_projection.hpp"
#include "gfilt/factored/factored_filter.hpp"
#include "gfilt/fcond/conditional.hpp"
#include "gfilt/filter/parameter.hpp"
#include "gfilt/graph/generators.hpp"
#include "gfilt/graph/io.hpp"
#include "gfilt/harness/config.hpp"
#include "gfilt/harness/initial.hpp"
#include "gfilt/harness/metrics.hpp"
#include "gfilt/lorenz/lorenz.hpp"

namespace gfilt {

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

/// Series of one run. Entry n-1 belongs to step n; steps before the filter
/// starts hold NaN.
struct RunResult {
  std::uint64_t seed = 0;
  std::vector<std::string> param_names;
  std::vector<double> state_error;
  std::vector<std::vector<double>> estimate;  // [parameter][step]
  std::vector<std::vector<double>> error;     // [parameter][step]
  std::vector<Row4> population;               // empty for the Lorenz model
  std::vector<double> seconds;                // wall-clock time of each step
  std::size_t start_step = 0;                 // last step before the first filtered one
  bool inconclusive = false;                  // the filter never started

  std::size_t steps() const noexcept { return state_error.size(); }
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunResult> runs;
  std::size_t attempts = 0;   // seeds drawn, including rejected ones
  bool partial = false;       // attempt budget ran out before `runs` survivors
};

inline std::vector<std::string> param_names(const ExperimentConfig& c)
{
  if (!c.has_param_filter()) return {};
  switch (c.model.kind) {
    case ModelKind::SEIRS: return {"beta", "sigma", "gamma", "rho"};
    case ModelKind::SIS: return {"beta", "gamma"};
    case ModelKind::Lorenz: return {"theta1", "theta2", "theta3", "theta4"};
  }
  return {};
}

/// Seed of the j-th candidate run of an experiment.
inline std::uint64_t candidate_seed(std::uint64_t base, std::size_t j)
{
  return Rng::keyed({base, 0x72756e73ULL, j}).next_key();
}

inline std::shared_ptr<const ContactNetwork> build_network(const NetworkConfig& nc)
{
  ContactNetwork net;
  if (nc.source == "synthetic") {
    net = preferential_attachment(nc.nodes, nc.attach, nc.seed);
  } else if (nc.source == "karate") {
    net = karate_club();
  } else if (nc.source == "edge-list") {
    if (nc.path.empty()) throw ConfigError("edge-list network needs a path");
    net = load_edge_list(std::filesystem::path(nc.path)).net;
  } else if (nc.source == "path") {
    net = path_graph(nc.nodes);
  } else if (nc.source == "cycle") {
    net = cycle_graph(nc.nodes);
  } else if (nc.source == "star") {
    if (nc.nodes < 1) throw ConfigError("star network needs at least one node");
    net = star_graph(nc.nodes - 1);
  } else if (nc.source == "none") {
    return nullptr;
  } else {
    throw ConfigError("unknown network source '" + nc.source + "'");
  }
  if (net.size() == 0) throw ConfigError("network has no nodes");
  if (nc.subpop_size > 1) net.set_subpop_sizes(std::vector<int>(net.size(), nc.subpop_size));
  return std::make_shared<const ContactNetwork>(std::move(net));
}

namespace detail {

inline constexpr std::uint64_t filter_tag = 0x66696c74ULL;
inline constexpr std::uint64_t init_tag = 0x696e6974ULL;

inline std::vector<ParamVec> initial_params(const FilterConfig& f, Rng& rng)
{
  std::vector<ParamVec> xs(f.N, ParamVec(f.init_lo.size()));
  for (auto& x : xs)
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = f.init_lo[j] + (f.init_hi[j] - f.init_lo[j]) * rng.uniform();
  return xs;
}

inline ConditionalSettings conditional_settings(const FilterConfig& f)
{
  return {f.jitter, f.box, f.options, f.weight, f.mc_samples};
}

inline RunResult blank_result(const ExperimentConfig& c, std::uint64_t seed)
{
  RunResult r;
  r.seed = seed;
  r.param_names = param_names(c);
  r.state_error.assign(c.steps, nan_value);
  r.estimate.assign(r.param_names.size(), std::vector<double>(c.steps, nan_value));
  r.error = r.estimate;
  r.seconds.assign(c.steps, 0.0);
  return r;
}

inline void record_params(RunResult& r, std::size_t n, const std::vector<ParamVec>& xs, std::span<const double> truth)
{
  const auto pe = param_error_and_estimate(xs, truth);
  for (std::size_t j = 0; j < pe.estimate.size(); ++j) {
    r.estimate[j][n - 1] = pe.estimate[j];
    r.error[j][n - 1] = pe.error[j];
  }
}

inline EpiKind epi_kind(const ExperimentConfig& c) { return c.model.kind == ModelKind::SIS ? EpiKind::SIS : EpiKind::SEIRS; }

// Per-label distribution of a node belief for a model whose labels are
// the SEIRS compartments or (S, I).
inline std::vector<double> label_dist(const Row4& mu, const GraphEpidemicModel& m)
{
  std::vector<double> out(static_cast<std::size_t>(m.n_labels()));
  for (int j = 0; j < m.n_labels(); ++j) out[j] = mu[idx(m.compartment(static_cast<Label>(j)))];
  return out;
}

inline FactoredParticleFamily sample_node_families(const NodeBeliefs& mu, const GraphEpidemicModel& m, std::size_t M,
                                                   Rng& rng)
{
  FactoredParticleFamily fam(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const auto p = label_dist(mu[k], m);
    fam[k].resize(M);
    for (auto& y : fam[k]) y = {static_cast<Label>(categorical_sample(std::span<const double>(p), rng))};
  }
  return fam;
}

inline std::vector<std::vector<Compartment>> sample_joint_states(const NodeBeliefs& mu, std::size_t M, Rng& rng)
{
  std::vector<std::vector<Compartment>> out(M, std::vector<Compartment>(mu.size()));
  for (auto& y : out)
    for (std::size_t k = 0; k < mu.size(); ++k)
      y[k] = static_cast<Compartment>(categorical_sample(std::span<const double>(mu[k]), rng));
  return out;
}

// ---------------------------------------------------------------------------
// Filters on compartment-labelled ground truth. step() consumes the
// observation of the filter's t-th step (t counted from its start).

class CompartmentFilter {
 public:
  virtual ~CompartmentFilter() = default;
  virtual void step(std::size_t t, std::span<const TestResult> o) = 0;
  virtual double error(std::span<const Compartment> truth) const = 0;
  virtual const std::vector<ParamVec>* params() const { return nullptr; }
};

class ExactFilter final : public CompartmentFilter {
 public:
  ExactFilter(const ContactNetwork& net, const CompartmentTransition& tau, const TestObsParams& obs, const NodeBeliefs& mu0)
      : m_(net, tau, obs, single_cluster_partition(net.size()))
  {
    const LabelCodec codec(m_.n_labels(), net.size());
    q_.resize(codec.states());
    std::vector<Label> lab(net.size());
    for (std::size_t y = 0; y < q_.size(); ++y) {
      codec.decode(y, lab);
      double p = 1.0;
      for (std::size_t k = 0; k < lab.size(); ++k) p *= mu0[k][idx(m_.compartment(lab[k]))];
      q_[y] = p;
    }
  }
  void step(std::size_t, std::span<const TestResult> o) override { q_ = exact_joint_filter_step(q_, m_, o); }
  double error(std::span<const Compartment> truth) const override { return state_error(truth, FactoredBelief{q_}, m_); }

 private:
  GraphEpidemicModel m_;
  DenseBelief q_;
};

class FactoredFilter final : public CompartmentFilter {
 public:
  FactoredFilter(const ContactNetwork& net, CompartmentTransition tau, const TestObsParams& obs, NodeBeliefs mu0)
      : net_(net), tau_(std::move(tau)), obs_(obs), mu_(std::move(mu0))
  {
  }
  void step(std::size_t, std::span<const TestResult> o) override { mu_ = seirs_closed_form_step(mu_, tau_, net_, obs_, o); }
  double error(std::span<const Compartment> truth) const override { return state_error(truth, mu_); }

 private:
  const ContactNetwork& net_;
  CompartmentTransition tau_;
  TestObsParams obs_;
  NodeBeliefs mu_;
};

class FactoredParticleFilter final : public CompartmentFilter {
 public:
  FactoredParticleFilter(const ContactNetwork& net, const CompartmentTransition& tau, const TestObsParams& obs,
                         const NodeBeliefs& mu0, std::size_t M, const ParticleOptions& opt, Rng rng)
      : m_(net, tau, obs, singleton_partition(net.size())), opt_(opt), rng_(rng)
  {
    fam_ = sample_node_families(mu0, m_, M, rng_);
  }
  void step(std::size_t, std::span<const TestResult> o) override
  {
    fam_ = factored_particle_filter_step(fam_, m_, o, rng_, opt_);
  }
  double error(std::span<const Compartment> truth) const override { return state_error(truth, fam_, m_); }

 private:
  GraphEpidemicModel m_;
  ParticleOptions opt_;
  Rng rng_;
  FactoredParticleFamily fam_;
};

class FcfFilter final : public CompartmentFilter {
 public:
  FcfFilter(const ContactNetwork& net, EpiKind kind, const TestObsParams& obs, const NodeBeliefs& mu0,
            const FilterConfig& f, Rng rng)
      : net_(net), kind_(kind), obs_(obs), cs_(conditional_settings(f)), rng_(rng)
  {
    cur_ = ConditionalFactoredBelief<NodeBeliefs>::uniform_start(initial_params(f, rng_), mu0);
  }
  void step(std::size_t t, std::span<const TestResult> o) override
  {
    cur_ = fcf_filter_step(cur_, t, cs_, kind_, net_, obs_, o, rng_);
  }
  double error(std::span<const Compartment> truth) const override { return mixture_state_error(truth, cur_.beliefs); }
  const std::vector<ParamVec>* params() const override { return &cur_.params; }

 private:
  const ContactNetwork& net_;
  EpiKind kind_;
  TestObsParams obs_;
  ConditionalSettings cs_;
  Rng rng_;
  ConditionalFactoredBelief<NodeBeliefs> cur_;
};

class FcpfFilter final : public CompartmentFilter {
 public:
  FcpfFilter(const ContactNetwork& net, EpiKind kind, const TestObsParams& obs, const NodeBeliefs& mu0,
             const FilterConfig& f, Rng rng)
      : net_(net), kind_(kind), obs_(obs), cs_(conditional_settings(f)), rng_(rng),
        ref_(net, transition_from(std::vector<double>(param_dim(kind), 0.0), kind), obs, singleton_partition(net.size()))
  {
    auto xs = initial_params(f, rng_);
    cur_ = ConditionalFactoredBelief<FactoredParticleFamily>::uniform_start(std::move(xs),
                                                                            sample_node_families(mu0, ref_, f.M, rng_));
  }
  void step(std::size_t t, std::span<const TestResult> o) override
  {
    auto model_for = [&](const ParamVec& x) {
      return GraphEpidemicModel(net_, transition_from(x, kind_), obs_, singleton_partition(net_.size()));
    };
    cur_ = fcpf_filter_step(cur_, t, cs_, model_for, o, rng_);
  }
  double error(std::span<const Compartment> truth) const override
  {
    return mixture_state_error(truth, cur_.beliefs, ref_);
  }
  const std::vector<ParamVec>* params() const override { return &cur_.params; }

 private:
  const ContactNetwork& net_;
  EpiKind kind_;
  TestObsParams obs_;
  ConditionalSettings cs_;
  Rng rng_;
  GraphEpidemicModel ref_;  // label layout only
  ConditionalFactoredBelief<FactoredParticleFamily> cur_;
};

/// Conditional particle filter over joint compartment states: the
/// parameter step weights candidates by the observation density averaged
/// over one-step moves of the ancestor's particles, then each particle
/// runs a standard particle filter step.
class CpfFilter final : public CompartmentFilter {
 public:
  using State = std::vector<Compartment>;

  CpfFilter(const ContactNetwork& net, EpiKind kind, const TestObsParams& obs, const NodeBeliefs& mu0,
            const FilterConfig& f, Rng rng)
      : net_(net), kind_(kind), obs_(obs), f_(f), rng_(rng)
  {
    params_ = initial_params(f, rng_);
    families_.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) families_.push_back(sample_joint_states(mu0, f.M, rng_));
  }

  void step(std::size_t t, std::span<const TestResult> o) override
  {
    auto propagate = [&](const ParamVec& x, const State& y, Rng& r) {
      const auto tau = transition_from(x, kind_);
      State out(y.size());
      for (std::size_t k = 0; k < y.size(); ++k) {
        int d = 0;
        for (NodeId l : net_.neighbors(k)) d += y[l] == Compartment::I;
        out[k] = tau.sample(y[k], d, r);
      }
      return out;
    };
    auto log_lik = [&](const ParamVec&, const State& y) {
      double s = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) s += std::log(test_obs_density(obs_, y[k], o[k]));
      return s;
    };
    auto ps = parameter_pf_step_particles(params_, families_, f_.jitter, t, f_.box, propagate, log_lik, f_.mc_samples,
                                          rng_, f_.options);
    families_ = conditional_particle_filter_step(ps.params, std::span<const std::size_t>(ps.lineage), families_, propagate,
                                                 log_lik, rng_, f_.options);
    params_ = std::move(ps.params);
  }

  double error(std::span<const Compartment> truth) const override
  {
    double s = 0.0;
    for (const auto& fam : families_) s += state_error(truth, fam);
    return s / static_cast<double>(families_.size());
  }
  const std::vector<ParamVec>* params() const override { return &params_; }

 private:
  const ContactNetwork& net_;
  EpiKind kind_;
  TestObsParams obs_;
  FilterConfig f_;
  Rng rng_;
  std::vector<ParamVec> params_;
  std::vector<std::vector<State>> families_;
};

inline std::unique_ptr<CompartmentFilter> make_compartment_filter(const ExperimentConfig& c, const ContactNetwork& net,
                                                                  const NodeBeliefs& mu0, Rng rng)
{
  const auto kind = epi_kind(c);
  const auto tau = transition_from(c.model.params, kind);
  const auto& obs = c.model.tests;
  switch (c.filter.algorithm) {
    case FilterKind::Exact: return std::make_unique<ExactFilter>(net, tau, obs, mu0);
    case FilterKind::Factored: return std::make_unique<FactoredFilter>(net, tau, obs, mu0);
    case FilterKind::FactoredParticle:
      return std::make_unique<FactoredParticleFilter>(net, tau, obs, mu0, c.filter.M, c.filter.options, rng);
    case FilterKind::Fcf: return std::make_unique<FcfFilter>(net, kind, obs, mu0, c.filter, rng);
    case FilterKind::Fcpf: return std::make_unique<FcpfFilter>(net, kind, obs, mu0, c.filter, rng);
    case FilterKind::Cpf: return std::make_unique<CpfFilter>(net, kind, obs, mu0, c.filter, rng);
    default: throw ConfigError("filter does not run on compartment-labelled states");
  }
}

inline CompartmentSimulator compartment_simulator(const ExperimentConfig& c, std::shared_ptr<const ContactNetwork> net,
                                                  std::uint64_t seed, NodeId* zero = nullptr)
{
  const auto kind = epi_kind(c);
  auto [init, k] = patient_zero_state(net->size(), kind == EpiKind::SEIRS ? Compartment::E : Compartment::I, seed);
  if (zero) *zero = k;
  return CompartmentSimulator(transition_from(c.model.params, kind), c.model.tests, DynamicNetwork({std::move(net)}),
                              std::move(init), seed);
}

inline int positive_count(std::span<const TestResult> o)
{
  int n = 0;
  for (auto r : o) n += r == TestResult::Positive;
  return n;
}

// ---------------------------------------------------------------------------
// Simplex-labelled ground truth

inline SimplexSimulator simplex_simulator(const ExperimentConfig& c, std::shared_ptr<const ContactNetwork> net,
                                          std::uint64_t seed, NodeId* zero = nullptr)
{
  const auto k = patient_zero_state(net->size(), Compartment::E, seed).second;
  if (zero) *zero = k;
  const auto hot = Simplex3::from_array({0.01, 0.97, 0.01, 0.01});
  const auto cold = Simplex3::from_array({0.97, 0.01, 0.01, 0.01});
  ObsSpaceSpec spec;
  if (c.model.observation == ObservationKind::Dirichlet)
    spec = DirichletObsSpec{c.model.obs_C, c.model.obs_alpha};
  else
    spec = CountsObsSpec{c.model.obs_m, c.model.obs_alpha};
  const std::size_t L = net->size();
  return SimplexSimulator(SimplexTransition{seirs_params_from(c.model.params), c.model.subpop, c.model.use_subpop}, spec,
                          DynamicNetwork({std::move(net)}), seeded_simplex_state(L, k, hot, cold), seed);
}

}  // namespace detail

/// True when the ground truth of this seed survives the whole horizon (no
/// exposed or infectious mass left at any step counts as dying out) and,
/// for SIS, the test stream starts the filter.
inline bool run_survives(const ExperimentConfig& c, std::shared_ptr<const ContactNetwork> net, std::uint64_t seed)
{
  if (c.model.kind == ModelKind::Lorenz) return true;
  const bool simplex = c.filter.algorithm == FilterKind::FactoredVariational || c.filter.algorithm == FilterKind::Fcvf;
  if (simplex) {
    auto sim = detail::simplex_simulator(c, net, seed);
    for (std::size_t n = 1; n <= c.steps; ++n) {
      sim.step();
      if (sim.extinct(1e-4)) return false;
    }
    return true;
  }
  auto sim = detail::compartment_simulator(c, net, seed);
  bool started = c.model.kind != ModelKind::SIS;
  for (std::size_t n = 1; n <= c.steps; ++n) {
    sim.step();
    if (sim.extinct()) return false;
    if (!started && detail::positive_count(sim.observation()) > c.filter.sis_threshold) started = true;
  }
  return started;
}

/// Simulation and filter in lockstep for one seed.
inline RunResult run_single(const ExperimentConfig& c, std::shared_ptr<const ContactNetwork> net, std::uint64_t seed);

namespace detail {

inline RunResult run_compartment(const ExperimentConfig& c, std::shared_ptr<const ContactNetwork> net, std::uint64_t seed)
{
  using clock = std::chrono::steady_clock;
  RunResult r = blank_result(c, seed);
  r.population.assign(c.steps, Row4{nan_value, nan_value, nan_value, nan_value});
  NodeId zero = 0;
  auto sim = compartment_simulator(c, net, seed, &zero);
  const Rng frng = Rng::keyed({seed, filter_tag});
  std::unique_ptr<CompartmentFilter> filter;
  if (c.model.kind == ModelKind::SEIRS) filter = make_compartment_filter(c, *net, initial_belief_seirs(*net, zero), frng);
  std::size_t t = 0;  // filter steps taken
  for (std::size_t n = 1; n <= c.steps; ++n) {
    const auto t0 = clock::now();
    sim.step();
    const auto& o = sim.observation();
    if (filter) {
      filter->step(++t, o);
    } else {
      const std::vector<std::vector<TestResult>> one{o};
      if (auto start = sis_initialization(one, c.model.tests, c.filter.sis_threshold)) {
        filter = make_compartment_filter(c, *net, start->beliefs, frng);
        r.start_step = n - 1;
      }
    }
    if (filter) {
      r.state_error[n - 1] = filter->error(sim.state());
      if (const auto* xs = filter->params()) record_params(r, n, *xs, c.model.params);
    }
    r.population[n - 1] = population_properties(std::span<const Compartment>(sim.state()));
    r.seconds[n - 1] = std::chrono::duration<double>(clock::now() - t0).count();
  }
  r.inconclusive = !filter;
  return r;
}

inline RunResult run_simplex(const ExperimentConfig& c, std::shared_ptr<const ContactNetwork> net, std::uint64_t seed)
{
  using clock = std::chrono::steady_clock;
  RunResult r = blank_result(c, seed);
  r.population.resize(c.steps);
  NodeId zero = 0;
  auto sim = simplex_simulator(c, net, seed, &zero);
  Rng rng = Rng::keyed({seed, filter_tag});
  const auto q0 = initial_dirichlet_seirs(*net, zero);
  const auto p = seirs_params_from(c.model.params);
  std::vector<DirichletParams> q;
  ConditionalFactoredBelief<DirichletBeliefs> cur;
  const auto cs = conditional_settings(c.filter);
  const bool conditional = c.filter.algorithm == FilterKind::Fcvf;
  if (conditional)
    cur = ConditionalFactoredBelief<DirichletBeliefs>::uniform_start(initial_params(c.filter, rng), q0);
  else
    q = q0;
  for (std::size_t n = 1; n <= c.steps; ++n) {
    const auto t0 = clock::now();
    sim.step();
    const std::span<const Simplex3> truth(sim.state());
    if (conditional) {
      cur = fcvf_filter_step(cur, n, cs, c.model.subpop, *net, sim.counts_observation(), rng);
      r.state_error[n - 1] = mixture_state_error(truth, cur.beliefs);
      record_params(r, n, cur.params, c.model.params);
    } else {
      q = factored_variational_filter_step(q, p, c.filter.variational, *net, sim.simplex_observation(), rng);
      r.state_error[n - 1] = state_error(truth, q);
    }
    r.population[n - 1] = population_properties(truth);
    r.seconds[n - 1] = std::chrono::duration<double>(clock::now() - t0).count();
  }
  return r;
}

inline LorenzParams lorenz_params_from(const LorenzParams& base, const ParamVec& x)
{
  LorenzParams p = base;
  p.theta1 = x[0];
  p.theta2 = x[1];
  p.theta3 = x[2];
  p.theta4 = x[3];
  return p;
}

/// Lorenz driver. Between observations every state particle moves under
/// its own parameter particle. At an observation step the parameter
/// particles are jittered, weighted by the observation density averaged
/// over one-step moves of their ancestor's states, and resampled; then
/// each runs a particle filter step. The jitter index counts
/// observations.
inline RunResult run_lorenz(const ExperimentConfig& c, std::uint64_t seed)
{
  using clock = std::chrono::steady_clock;
  using Family = std::vector<LorenzState>;
  RunResult r = blank_result(c, seed);
  const auto& base = c.model.lorenz;
  const auto truth_p = lorenz_params_from(base, c.model.params);
  const std::array<double, 4> theta{c.model.params[0], c.model.params[1], c.model.params[2], c.model.params[3]};
  LorenzSimulator sim(truth_p, lorenz_reference_state, seed);
  Rng rng = Rng::keyed({seed, filter_tag});
  auto params = initial_params(c.filter, rng);
  std::vector<Family> families(params.size(), Family(c.filter.M));
  {
    boost::random::normal_distribution<double> n01;
    const double sd = std::sqrt(c.filter.lorenz_init_variance);
    for (auto& f : families)
      for (auto& y : f)
        for (int k = 0; k < 3; ++k) y[k] = lorenz_reference_state[k] + sd * n01(rng);
  }
  auto propagate = [&](const ParamVec& x, const LorenzState& y, Rng& rr) {
    return lorenz_transition_sample(lorenz_params_from(base, x), y, rr);
  };
  std::size_t t = 0;
  for (std::size_t n = 1; n <= c.steps; ++n) {
    const auto t0 = clock::now();
    sim.step();
    if (sim.has_observation()) {
      const LorenzObs o = sim.observation();
      auto log_lik = [&](const ParamVec& x, const LorenzState& y) {
        return lorenz_obs_log_density(lorenz_params_from(base, x), y, o);
      };
      auto ps = parameter_pf_step_particles(params, families, c.filter.jitter, ++t, c.filter.box, propagate, log_lik,
                                            c.filter.mc_samples, rng, c.filter.options);
      families = conditional_particle_filter_step(ps.params, std::span<const std::size_t>(ps.lineage), families,
                                                  propagate, log_lik, rng, c.filter.options);
      params = std::move(ps.params);
    } else {
      const std::uint64_t key = rng.next_key();
      tbb::parallel_for(std::size_t{0}, families.size(), [&](std::size_t i) {
        Rng ri = conditional_stream(key, i);
        const auto p = lorenz_params_from(base, params[i]);
        for (auto& y : families[i]) y = lorenz_transition_sample(p, y, ri);
      });
    }
    const auto m = lorenz_metrics(sim.state(), families, params, theta);
    r.state_error[n - 1] = m.distance;
    for (int j = 0; j < 4; ++j) {
      r.estimate[j][n - 1] = m.estimate[j];
      r.error[j][n - 1] = m.error[j];
    }
    r.seconds[n - 1] = std::chrono::duration<double>(clock::now() - t0).count();
  }
  return r;
}

}  // namespace detail

inline RunResult run_single(const ExperimentConfig& c, std::shared_ptr<const ContactNetwork> net, std::uint64_t seed)
{
  c.validate();
  if (c.model.kind == ModelKind::Lorenz) return detail::run_lorenz(c, seed);
  if (!net) throw ConfigError("epidemic models need a network");
  if (c.filter.algorithm == FilterKind::FactoredVariational || c.filter.algorithm == FilterKind::Fcvf)
    return detail::run_simplex(c, std::move(net), seed);
  return detail::run_compartment(c, std::move(net), seed);
}

/// Runs the experiment. With the die-out filter, candidate seeds are drawn
/// in order and kept only if their ground truth survives, until `runs`
/// survivors or the attempt budget is reached. Runs execute in parallel;
/// results are ordered by candidate index.
inline ExperimentResult run_experiment(const ExperimentConfig& c)
{
  c.validate();
  auto net = build_network(c.network);
  ExperimentResult out;
  out.config = c;
  std::vector<std::uint64_t> seeds;
  if (c.die_out_filter) {
    const std::size_t budget = c.attempt_budget();
    while (seeds.size() < c.runs && out.attempts < budget) {
      const auto s = candidate_seed(c.seed, out.attempts++);
      if (run_survives(c, net, s)) seeds.push_back(s);
    }
    out.partial = seeds.size() < c.runs;
    if (out.partial)
      spdlog::warn("{}: only {} of {} runs survived within {} attempts", c.name, seeds.size(), c.runs, budget);
  } else {
    for (std::size_t j = 0; j < c.runs; ++j) seeds.push_back(candidate_seed(c.seed, j));
    out.attempts = c.runs;
  }
  out.runs.resize(seeds.size());
  tbb::parallel_for(std::size_t{0}, seeds.size(), [&](std::size_t i) { out.runs[i] = run_single(c, net, seeds[i]); });
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and output

namespace detail {
inline double finite_mean(std::span<const double> v)
{
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : nan_value;
}

template <class Get>
std::vector<double> mean_series(const std::vector<RunResult>& runs, std::size_t steps, Get&& get)
{
  std::vector<double> out(steps), col(runs.size());
  for (std::size_t n = 0; n < steps; ++n) {
    for (std::size_t i = 0; i < runs.size(); ++i) col[i] = get(runs[i], n);
    out[n] = finite_mean(col);
  }
  return out;
}
}  // namespace detail

/// Per-step arithmetic mean over runs. Entries that are NaN in a run (the
/// filter had not started) are left out of that step's mean.
inline RunResult aggregate(const std::vector<RunResult>& runs)
{
  if (runs.empty()) throw std::domain_error("aggregate: no runs");
  const std::size_t steps = runs.front().steps();
  for (const auto& r : runs)
    if (r.steps() != steps || r.param_names != runs.front().param_names || r.population.size() != runs.front().population.size())
      throw std::domain_error("aggregate: runs differ in shape");
  RunResult out;
  out.param_names = runs.front().param_names;
  out.state_error = detail::mean_series(runs, steps, [](const RunResult& r, std::size_t n) { return r.state_error[n]; });
  for (std::size_t j = 0; j < out.param_names.size(); ++j) {
    out.estimate.push_back(detail::mean_series(runs, steps, [j](const RunResult& r, std::size_t n) { return r.estimate[j][n]; }));
    out.error.push_back(detail::mean_series(runs, steps, [j](const RunResult& r, std::size_t n) { return r.error[j][n]; }));
  }
  if (!runs.front().population.empty()) {
    out.population.resize(steps);
    for (int c = 0; c < 4; ++c) {
      const auto s = detail::mean_series(runs, steps, [c](const RunResult& r, std::size_t n) { return r.population[n][c]; });
      for (std::size_t n = 0; n < steps; ++n) out.population[n][c] = s[n];
    }
  }
  out.seconds = detail::mean_series(runs, steps, [](const RunResult& r, std::size_t n) { return r.seconds[n]; });
  return out;
}

/// Per-step median over runs of one series, skipping NaN entries.
inline std::vector<double> median_series(const std::vector<std::vector<double>>& series)
{
  if (series.empty()) return {};
  std::vector<double> out(series.front().size()), col;
  for (std::size_t n = 0; n < out.size(); ++n) {
    col.clear();
    for (const auto& s : series)
      if (std::isfinite(s.at(n))) col.push_back(s[n]);
    if (col.empty()) {
      out[n] = nan_value;
      continue;
    }
    std::sort(col.begin(), col.end());
    const std::size_t h = col.size() / 2;
    out[n] = col.size() % 2 ? col[h] : 0.5 * (col[h - 1] + col[h]);
  }
  return out;
}

inline std::string format_number(double v)
{
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Columns: step, state_error, est_<p>..., err_<p>..., then pop_S..pop_R
/// when population properties are recorded. Timing is not part of this
/// file so that identical inputs give identical bytes.
inline void write_csv(std::ostream& os, const RunResult& r)
{
  os << "step,state_error";
  for (const auto& p : r.param_names) os << ",est_" << p;
  for (const auto& p : r.param_names) os << ",err_" << p;
  const bool pop = !r.population.empty();
  if (pop) os << ",pop_S,pop_E,pop_I,pop_R";
  os << '\n';
  for (std::size_t n = 0; n < r.steps(); ++n) {
    os << n + 1 << ',' << format_number(r.state_error[n]);
    for (const auto& s : r.estimate) os << ',' << format_number(s[n]);
    for (const auto& s : r.error) os << ',' << format_number(s[n]);
    if (pop)
      for (double v : r.population[n]) os << ',' << format_number(v);
    os << '\n';
  }
}

inline void write_timing_csv(std::ostream& os, const RunResult& r)
{
  os << "step,seconds\n";
  for (std::size_t n = 0; n < r.seconds.size(); ++n) os << n + 1 << ',' << format_number(r.seconds[n]) << '\n';
}

/// Writes run_<i>.csv, run_<i>_timing.csv, aggregate.csv and summary.json
/// into `dir`.
inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& e)
{
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < e.runs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu", i);
    {
      auto f = open(std::string(name) + ".csv");
      write_csv(f, e.runs[i]);
    }
    {
      auto f = open(std::string(name) + "_timing.csv");
      write_timing_csv(f, e.runs[i]);
    }
    runs.push_back({{"file", std::string(name) + ".csv"},
                    {"seed", e.runs[i].seed},
                    {"start_step", e.runs[i].start_step},
                    {"inconclusive", e.runs[i].inconclusive}});
  }
  if (!e.runs.empty()) {
    auto f = open("aggregate.csv");
    write_csv(f, aggregate(e.runs));
  }
  auto f = open("summary.json");
  f << nlohmann::json{{"config", config_to_json(e.config)},
                      {"attempts", e.attempts},
                      {"partial", e.partial},
                      {"runs", runs}}
           .dump(2)
    << '\n';
}

}  // namespace gfilt

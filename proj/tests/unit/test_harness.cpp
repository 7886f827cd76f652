#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <tbb/global_control.h>

#include "gfilt/harness/config.hpp"
#include "gfilt/harness/initial.hpp"
#include "gfilt/harness/metrics.hpp"
#include "gfilt/harness/runner.hpp"
#include "support/synthetic_graphs.hpp"

using namespace gfilt;
using C = Compartment;

namespace {

Row4 random_row(std::mt19937_64& g)
{
  std::exponential_distribution<double> e;
  Row4 r{};
  double s = 0;
  for (auto& v : r) s += v = e(g);
  for (auto& v : r) v /= s;
  return r;
}

// Small SEIRS setup that finishes quickly.
ExperimentConfig small_config(FilterKind kind)
{
  ExperimentConfig c;
  c.name = "small";
  c.network.source = "cycle";
  c.network.nodes = 6;
  c.model.params = {0.6, 0.5, 0.2, 0.05};
  c.model.tests = {0.5, 0.7, 0.9, 0.3, 0.1, 0.1};
  c.filter.algorithm = kind;
  c.filter.N = 8;
  c.filter.M = 16;
  c.filter.init_lo = {0, 0, 0, 0};
  c.filter.init_hi = {0.8, 0.8, 0.8, 0.1};
  c.filter.mc_samples = 4;
  c.steps = 12;
  c.runs = 2;
  c.die_out_filter = false;
  c.seed = 11;
  return c;
}

std::string csv_of(const RunResult& r)
{
  std::ostringstream os;
  write_csv(os, r);
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Initial beliefs

TEST(InitialBelief, ProfileRowsSumToOne)
{
  for (const auto& row : seirs_distance_profile) EXPECT_NEAR(row[0] + row[1] + row[2] + row[3], 1.0, 1e-15);
  EXPECT_EQ(seirs_distance_profile[0], (Row4{0.29, 0.4, 0.3, 0.01}));
}

TEST(InitialBelief, IsolatedPatientZeroLeavesOthersFar)
{
  // node 0 isolated, the rest a path
  const auto net = ContactNetwork::from_edges(5, std::vector<Edge>{{1, 2}, {2, 3}, {3, 4}});
  const auto mu = initial_belief_seirs(net, 0);
  EXPECT_EQ(mu[0], seirs_distance_profile[0]);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_EQ(mu[k], seirs_distance_profile[3]);
}

TEST(InitialBelief, StarLeavesAreOneStepAway)
{
  const auto net = fixtures::star_graph(6);
  const auto mu = initial_belief_seirs(net, 0);
  for (std::size_t k = 1; k < net.size(); ++k) EXPECT_EQ(mu[k], seirs_distance_profile[1]);
  // from a leaf: centre 1, other leaves 2
  const auto from_leaf = initial_belief_seirs(net, 3);
  EXPECT_EQ(from_leaf[0], seirs_distance_profile[1]);
  EXPECT_EQ(from_leaf[1], seirs_distance_profile[2]);
  EXPECT_EQ(from_leaf[3], seirs_distance_profile[0]);
}

TEST(InitialBelief, PathDistances)
{
  const auto mu = initial_belief_seirs(fixtures::path_graph(6), 0);
  EXPECT_EQ(mu[2], seirs_distance_profile[2]);
  EXPECT_EQ(mu[3], seirs_distance_profile[3]);
  EXPECT_EQ(mu[5], seirs_distance_profile[3]);
}

TEST(InitialBelief, DirichletUsesProfileAsConcentrations)
{
  const auto q = initial_dirichlet_seirs(fixtures::path_graph(4), 1);
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(q[1][j], seirs_distance_profile[0][j]);
    EXPECT_EQ(q[0][j], seirs_distance_profile[1][j]);
    EXPECT_EQ(q[3][j], seirs_distance_profile[2][j]);
  }
}

TEST(SisInitialization, FirstStepAboveThreshold)
{
  const TestObsParams obs{0.1, 0, 0.9, 0, 0.1, 0.1};
  using R = TestResult;
  std::vector<std::vector<R>> stream(4, std::vector<R>(10, R::Unknown));
  for (int k = 0; k < 3; ++k) stream[1][k] = R::Positive;  // 3 is not above the threshold
  for (int k = 0; k < 4; ++k) stream[2][k] = R::Positive;
  for (int k = 0; k < 9; ++k) stream[3][k] = R::Positive;
  const auto s = sis_initialization(stream, obs);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->step, 2u);
}

TEST(SisInitialization, NeverCrossedIsInconclusive)
{
  std::vector<std::vector<TestResult>> stream(50, std::vector<TestResult>(10, TestResult::Negative));
  EXPECT_FALSE(sis_initialization(stream, TestObsParams{0.1, 0, 0.9, 0, 0.1, 0.1}));
}

TEST(SisInitialization, PositiveTiltsTowardInfected)
{
  const TestObsParams obs{0.1, 0, 0.9, 0, 0.1, 0.1};
  std::vector<std::vector<TestResult>> stream{std::vector<TestResult>(6, TestResult::Positive)};
  stream[0][5] = TestResult::Unknown;
  const auto s = sis_initialization(stream, obs);
  ASSERT_TRUE(s);
  EXPECT_GT(s->beliefs[0][2], 0.1);
  // S: 0.9 * 0.1 * 0.1, I: 0.1 * 0.9 * 0.9
  EXPECT_NEAR(s->beliefs[0][2], 0.081 / (0.081 + 0.009), 1e-15);
  EXPECT_EQ(s->beliefs[0][1], 0.0);
  EXPECT_EQ(s->beliefs[0][3], 0.0);
  // unknown: S 0.9 * 0.9, I 0.1 * 0.1
  EXPECT_NEAR(s->beliefs[5][2], 0.01 / (0.81 + 0.01), 1e-15);
}

// ---------------------------------------------------------------------------
// Metrics

TEST(StateError, DiracAtTruthIsZero)
{
  const std::vector<C> truth{C::S, C::E, C::I, C::R};
  NodeBeliefs mu(4, Row4{});
  for (std::size_t k = 0; k < 4; ++k) mu[k][idx(truth[k])] = 1.0;
  EXPECT_EQ(state_error(truth, mu), 0.0);
}

TEST(StateError, UniformBeliefIsThreeQuarters)
{
  const std::vector<C> truth{C::S, C::E, C::I, C::R, C::S};
  EXPECT_NEAR(state_error(truth, NodeBeliefs(5, Row4{0.25, 0.25, 0.25, 0.25})), 0.75, 1e-15);
}

TEST(StateError, SizeMismatchThrows)
{
  const std::vector<C> truth{C::S, C::S};
  EXPECT_THROW(state_error(truth, NodeBeliefs(3, Row4{1, 0, 0, 0})), std::domain_error);
}

TEST(StateError, WithinBoundsOnRandomBeliefs)
{
  std::mt19937_64 g(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<C> truth(7);
    NodeBeliefs mu(7);
    std::vector<Simplex3> st(7);
    std::vector<DirichletParams> q;
    for (std::size_t k = 0; k < 7; ++k) {
      truth[k] = static_cast<C>(g() % 4);
      mu[k] = random_row(g);
      st[k] = Simplex3::from_array(random_row(g));
      const auto a = random_row(g);
      q.emplace_back(0.1 + 5 * a[0], 0.1 + 5 * a[1], 0.1 + 5 * a[2], 0.1 + 5 * a[3]);
    }
    const double e = state_error(truth, mu);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
    const double d = state_error(std::span<const Simplex3>(st), q);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(StateError, DirichletMatchesMonteCarlo)
{
  const std::vector<Simplex3> truth{Simplex3::from_array({0.6, 0.1, 0.2, 0.1}), Simplex3::from_array({0.05, 0.05, 0.8, 0.1})};
  const std::vector<DirichletParams> q{DirichletParams(2.0, 0.5, 1.0, 3.0), DirichletParams(0.3, 0.3, 0.9, 0.5)};
  const double exact = state_error(std::span<const Simplex3>(truth), q);
  Rng rng(77);
  const int S = 1000000;
  double s = 0, s2 = 0;
  for (int i = 0; i < S; ++i) {
    double v = 0;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto y = dirichlet_sample(q[k], rng);
      for (int j = 0; j < 4; ++j) v += std::abs(truth[k][j] - y[j]);
    }
    v /= 2.0;
    s += v;
    s2 += v * v;
  }
  const double mean = s / S, se = std::sqrt((s2 / S - mean * mean) / S);
  EXPECT_NEAR(exact, mean, 4 * se);
}

TEST(StateError, ClusterTablesAgreeWithNodeRows)
{
  // Product tables over clusters {0,1} and {2}; the cluster reduction
  // averages the per-cluster node errors.
  const auto net = fixtures::path_graph(3);
  const GraphEpidemicModel m(net, CompartmentTransition(SeirsParams{0.3, 0.2, 0.1, 0.05}), TestObsParams{},
                             Partition({{0, 1}, {2}}));
  std::mt19937_64 g(5);
  const Row4 a = random_row(g), b = random_row(g), c = random_row(g);
  DenseBelief t01(16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t01[i + 4 * j] = a[i] * b[j];
  const FactoredBelief fb{t01, DenseBelief(c.begin(), c.end())};
  const std::vector<C> truth{C::E, C::I, C::R};
  const double expect = 0.5 * (((1 - a[1]) + (1 - b[2])) / 2) + 0.5 * (1 - c[3]);
  EXPECT_NEAR(state_error(truth, fb, m), expect, 1e-15);
}

TEST(StateError, ParticleFamiliesCountMismatches)
{
  const auto net = fixtures::path_graph(2);
  const GraphEpidemicModel m(net, CompartmentTransition(SisParams{0.3, 0.1}), TestObsParams{}, singleton_partition(2));
  // labels: 0 = S, 1 = I
  const FactoredParticleFamily fam{{{0}, {1}, {1}, {0}}, {{1}, {1}}};
  const std::vector<C> truth{C::S, C::I};
  EXPECT_NEAR(state_error(truth, fam, m), 0.5 * 0.5 + 0.5 * 0.0, 1e-15);
  const std::vector<std::vector<C>> joint{{C::S, C::I}, {C::I, C::I}, {C::I, C::S}};
  EXPECT_NEAR(state_error(truth, joint), 3.0 / 6.0, 1e-15);
}

TEST(StateError, MixtureIsMeanOfParts)
{
  const std::vector<C> truth{C::S, C::I};
  std::vector<std::shared_ptr<const NodeBeliefs>> b{std::make_shared<const NodeBeliefs>(NodeBeliefs{{1, 0, 0, 0}, {0, 0, 1, 0}}),
                                                    std::make_shared<const NodeBeliefs>(NodeBeliefs(2, Row4{0.25, 0.25, 0.25, 0.25}))};
  EXPECT_NEAR(mixture_state_error(std::span<const C>(truth), b), 0.375, 1e-15);
}

TEST(ParamError, AllAtTruth)
{
  const std::vector<double> truth{0.2, 0.5};
  const auto pe = param_error_and_estimate(std::vector<ParamVec>(5, truth), truth);
  EXPECT_EQ(pe.estimate, truth);
  EXPECT_EQ(pe.error, (std::vector<double>{0.0, 0.0}));
}

TEST(ParamError, SymmetricAroundTruth)
{
  const std::vector<double> truth{0.2};
  const auto pe = param_error_and_estimate({{0.1}, {0.3}}, truth);
  EXPECT_NEAR(pe.estimate[0], 0.2, 1e-15);
  EXPECT_NEAR(pe.error[0], 0.5, 1e-15);
}

TEST(ParamError, HandFixture)
{
  // est = (0.1 + 0.4 + 0.4) / 3 = 0.3; err = (0.1 + 0.2 + 0.2) / 3 / 0.2
  const std::vector<double> truth{0.2, 1.0};
  const auto pe = param_error_and_estimate({{0.1, 1.0}, {0.4, 2.0}, {0.4, 0.0}}, truth);
  EXPECT_NEAR(pe.estimate[0], 0.3, 1e-15);
  EXPECT_NEAR(pe.error[0], 0.5 / 3.0 / 0.2, 1e-15);
  EXPECT_NEAR(pe.estimate[1], 1.0, 1e-15);
  EXPECT_NEAR(pe.error[1], 2.0 / 3.0, 1e-15);
}

TEST(ParamError, ZeroTruthThrows)
{
  const std::vector<double> truth{0.0};
  EXPECT_THROW(param_error_and_estimate({{0.1}}, truth), std::domain_error);
}

TEST(LorenzMetrics, AllAtTruth)
{
  const LorenzState y{1.0, -2.0, 3.0};
  const std::array<double, 4> th{10, 28, 8.0 / 3.0, 0.8};
  const ParamVec x(th.begin(), th.end());
  const auto m = lorenz_metrics(y, {{y, y}, {y}}, {x, x}, th);
  EXPECT_EQ(m.distance, 0.0);
  for (double e : m.error) EXPECT_EQ(e, 0.0);
}

TEST(LorenzMetrics, DoubledParametersGiveUnitError)
{
  const std::array<double, 4> th{10, 28, 8.0 / 3.0, 0.8};
  const ParamVec x{20, 56, 16.0 / 3.0, 1.6};
  const auto m = lorenz_metrics({0, 0, 0}, {{{0, 0, 0}}}, {x}, th);
  for (double e : m.error) EXPECT_NEAR(e, 1.0, 1e-15);
}

TEST(LorenzMetrics, HandFixture)
{
  // grand mean over (1,0,0), (3,0,0), (2,3,0) is (2,1,0); truth (2,1,4)
  const auto m = lorenz_metrics({2, 1, 4}, {{{1, 0, 0}, {3, 0, 0}}, {{2, 3, 0}}}, {{9, 28, 3, 1}, {11, 28, 2, 0.6}},
                                {10, 28, 2, 0.8});
  EXPECT_NEAR(m.distance, 4.0, 1e-15);
  EXPECT_NEAR(m.estimate[0], 10.0, 1e-15);
  EXPECT_NEAR(m.error[0], 0.0, 1e-15);
  EXPECT_NEAR(m.error[2], 0.25, 1e-15);
  EXPECT_NEAR(m.error[3], 0.0, 1e-15);
}

TEST(ParticleCount, FormulaValues)
{
  EXPECT_NEAR(static_cast<double>(particle_count_formula(34)), 300.0, 0.01 * 300);
  EXPECT_NEAR(static_cast<double>(particle_count_formula(62)), 7600.0, 0.01 * 7600);
  EXPECT_NEAR(static_cast<double>(particle_count_formula(80)), 60000.0, 0.01 * 60000);
  EXPECT_EQ(particle_count_formula(34), 302u);
  EXPECT_THROW(particle_count_formula(0), std::domain_error);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, PresetsValidate)
{
  for (const auto& name : preset_names()) EXPECT_NO_THROW(experiment_preset(name).validate()) << name;
  EXPECT_THROW(experiment_preset("nope"), ConfigError);
}

TEST(Config, PresetValues)
{
  const auto covid = experiment_preset("seirs-covid");
  EXPECT_EQ(covid.model.params, (std::vector<double>{0.2, 1.0 / 3.0, 1.0 / 14.0, 1.0 / 180.0}));
  EXPECT_EQ(covid.model.tests.alpha_E, 0.7);
  EXPECT_EQ(covid.model.tests.lambda_FN, 0.1);
  const auto flu = experiment_preset("seirs-flu");
  EXPECT_EQ(flu.model.params[0], 0.27);
  EXPECT_EQ(flu.model.tests.lambda_FN, 0.3);
  EXPECT_EQ(flu.filter.N, 300u);
  const auto ad = experiment_preset("lorenz-adaptive");
  EXPECT_EQ(ad.filter.jitter.a, 25.0);
  EXPECT_EQ(ad.filter.jitter.b, 0.01);
  EXPECT_EQ(ad.filter.jitter.r, 0.996);
  const auto base = experiment_preset("lorenz-baseline");
  EXPECT_NEAR(base.filter.jitter.variance(7)[0], 60.0 / std::pow(300.0, 1.5), 1e-15);
  const auto sis = experiment_preset("sis-karate");
  EXPECT_EQ(sis.filter.M, 302u);
  EXPECT_EQ(sis.model.tests.alpha_I, 0.9);
}

TEST(Config, JsonRoundTrip)
{
  for (const auto& name : preset_names()) {
    const auto c = experiment_preset(name);
    const auto j = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(j)), j) << name;
  }
}

TEST(Config, OverridesOnTopOfPreset)
{
  const auto c = config_from_json(nlohmann::json::parse(
      R"({"preset": "seirs-flu", "runs": 3, "model": {"tests": "obs-setup"}, "filter": {"N": 7, "jitter": {"a": 0.5}}})"));
  EXPECT_EQ(c.runs, 3u);
  EXPECT_EQ(c.filter.N, 7u);
  EXPECT_EQ(c.filter.jitter.a, 0.5);
  EXPECT_EQ(c.filter.jitter.b, 9e-6);
  EXPECT_EQ(c.model.tests.lambda_FN, 0.1);
  EXPECT_EQ(c.filter.algorithm, FilterKind::Fcf);
}

TEST(Config, RejectsBadInput)
{
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"filter": {"algorithm": "magic"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"steps": "many"})")), ConfigError);
  auto c = small_config(FilterKind::Factored);
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(FilterKind::Fcf);
  c.filter.init_lo = {0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(FilterKind::Factored);
  c.filter.N = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(FilterKind::Lorenz);
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Runner

TEST(Runner, OneRunOneStep)
{
  auto c = small_config(FilterKind::Factored);
  c.runs = 1;
  c.steps = 1;
  const auto e = run_experiment(c);
  ASSERT_EQ(e.runs.size(), 1u);
  EXPECT_EQ(e.runs[0].steps(), 1u);
  const auto csv = csv_of(e.runs[0]);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,state_error,pop_S,pop_E,pop_I,pop_R");
}

TEST(Runner, EveryFilterRuns)
{
  for (auto kind : {FilterKind::Exact, FilterKind::Factored, FilterKind::FactoredParticle, FilterKind::Fcf, FilterKind::Fcpf,
                    FilterKind::Cpf}) {
    const auto c = small_config(kind);
    const auto r = run_single(c, build_network(c.network), 5);
    ASSERT_EQ(r.steps(), c.steps);
    for (double v : r.state_error) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(r.param_names.size(), c.has_param_filter() ? 4u : 0u);
  }
}

TEST(Runner, ParameterColumns)
{
  const auto c = small_config(FilterKind::Fcf);
  const auto csv = csv_of(run_single(c, build_network(c.network), 5));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "step,state_error,est_beta,est_sigma,est_gamma,est_rho,err_beta,err_sigma,err_gamma,err_rho,pop_S,pop_E,pop_I,pop_R");
}

TEST(Runner, ExactAndFactoredAgreeWithoutCoupling)
{
  auto c = small_config(FilterKind::Exact);
  c.model.params[0] = 0.0;
  const auto net = build_network(c.network);
  const auto exact = run_single(c, net, 9);
  c.filter.algorithm = FilterKind::Factored;
  const auto fact = run_single(c, net, 9);
  for (std::size_t n = 0; n < c.steps; ++n) EXPECT_NEAR(exact.state_error[n], fact.state_error[n], 1e-12);
}

TEST(Runner, SimplexFiltersRun)
{
  auto c = experiment_preset("seirs-variational");
  c.network.source = "cycle";
  c.network.nodes = 8;
  c.steps = 5;
  c.filter.variational.samples = 64;
  auto r = run_single(c, build_network(c.network), 3);
  for (double v : r.state_error) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 2.0);
  }
  c = experiment_preset("subpop-fcvf");
  c.network.source = "cycle";
  c.network.nodes = 8;
  c.filter.N = 10;
  c.steps = 5;
  r = run_single(c, build_network(c.network), 3);
  EXPECT_EQ(r.param_names.size(), 4u);
  for (double v : r.state_error) EXPECT_LE(v, 2.0);
}

TEST(Runner, SisStartsAtThreshold)
{
  auto c = experiment_preset("sis-karate");
  c.filter.N = 6;
  c.filter.M = 10;
  c.filter.mc_samples = 2;
  c.steps = 40;
  const auto net = build_network(c.network);
  EXPECT_EQ(net->size(), 34u);
  for (std::uint64_t seed = 1; seed < 6; ++seed) {
    const auto r = run_single(c, net, seed);
    if (r.inconclusive) {
      for (double v : r.state_error) EXPECT_TRUE(std::isnan(v));
      continue;
    }
    for (std::size_t n = 0; n < r.start_step; ++n) EXPECT_TRUE(std::isnan(r.state_error[n]));
    EXPECT_FALSE(std::isnan(r.state_error[r.start_step]));
    // start step has more than three positives in the simulation
    auto sim = detail::compartment_simulator(c, net, seed);
    for (std::size_t n = 0; n <= r.start_step; ++n) sim.step();
    EXPECT_GT(detail::positive_count(sim.observation()), 3);
  }
}

TEST(Runner, LorenzRunsShortHorizon)
{
  auto c = experiment_preset("lorenz-baseline");
  c.filter.N = 5;
  c.filter.M = 10;
  c.filter.mc_samples = 4;
  c.steps = 85;
  const auto r = run_single(c, nullptr, 2);
  EXPECT_EQ(r.param_names.size(), 4u);
  EXPECT_TRUE(r.population.empty());
  for (double v : r.state_error) EXPECT_TRUE(std::isfinite(v));
}

TEST(Runner, SameSeedSameBytes)
{
  const auto c = small_config(FilterKind::Fcpf);
  const auto net = build_network(c.network);
  EXPECT_EQ(csv_of(run_single(c, net, 4)), csv_of(run_single(c, net, 4)));
  EXPECT_NE(csv_of(run_single(c, net, 4)), csv_of(run_single(c, net, 5)));
}

TEST(Runner, ThreadCountDoesNotChangeOutput)
{
  auto c = small_config(FilterKind::Cpf);
  c.runs = 3;
  std::string one, many;
  {
    tbb::global_control gc(tbb::global_control::max_allowed_parallelism, 1);
    const auto e = run_experiment(c);
    for (const auto& r : e.runs) one += csv_of(r);
    one += csv_of(aggregate(e.runs));
  }
  {
    tbb::global_control gc(tbb::global_control::max_allowed_parallelism, 4);
    const auto e = run_experiment(c);
    for (const auto& r : e.runs) many += csv_of(r);
    many += csv_of(aggregate(e.runs));
  }
  EXPECT_EQ(one, many);
}

TEST(Runner, AggregateIsArithmeticMean)
{
  auto c = small_config(FilterKind::Fcf);
  c.runs = 3;
  const auto e = run_experiment(c);
  const auto a = aggregate(e.runs);
  for (std::size_t n = 0; n < c.steps; ++n) {
    EXPECT_NEAR(a.state_error[n], (e.runs[0].state_error[n] + e.runs[1].state_error[n] + e.runs[2].state_error[n]) / 3, 1e-15);
    EXPECT_NEAR(a.error[2][n], (e.runs[0].error[2][n] + e.runs[1].error[2][n] + e.runs[2].error[2][n]) / 3, 1e-15);
  }
}

TEST(Runner, AggregateSkipsRunsThatHaveNotStarted)
{
  RunResult a, b;
  a.state_error = {nan_value, 0.4};
  b.state_error = {0.2, 0.6};
  a.seconds = b.seconds = {0, 0};
  const auto m = aggregate({a, b});
  EXPECT_EQ(m.state_error[0], 0.2);
  EXPECT_NEAR(m.state_error[1], 0.5, 1e-15);
}

TEST(Runner, MedianSeries)
{
  const auto m = median_series({{1, 5}, {3, nan_value}, {2, 1}, {10, 2}});
  EXPECT_EQ(m[0], 2.5);
  EXPECT_EQ(m[1], 2.0);
}

TEST(Runner, DieOutFilterOnlySelectsSeeds)
{
  auto c = small_config(FilterKind::Factored);
  c.model.params = {0.4, 0.5, 0.4, 0.05};  // dies out often
  c.die_out_filter = true;
  c.runs = 3;
  c.steps = 30;
  const auto net = build_network(c.network);
  const auto e = run_experiment(c);
  ASSERT_EQ(e.runs.size(), 3u);
  EXPECT_GT(e.attempts, 3u);  // at least one seed rejected
  std::size_t kept = 0;
  for (std::size_t j = 0; j < e.attempts; ++j) {
    const auto s = candidate_seed(c.seed, j);
    if (!run_survives(c, net, s)) continue;
    ASSERT_LT(kept, e.runs.size());
    EXPECT_EQ(e.runs[kept].seed, s);
    EXPECT_EQ(csv_of(e.runs[kept]), csv_of(run_single(c, net, s)));
    ++kept;
  }
  EXPECT_EQ(kept, 3u);
}

TEST(Runner, BudgetExhaustedIsPartial)
{
  auto c = small_config(FilterKind::Factored);
  c.model.params = {0.0, 0.5, 0.5, 0.0};  // always dies out
  c.die_out_filter = true;
  c.max_attempts = 4;
  const auto e = run_experiment(c);
  EXPECT_TRUE(e.partial);
  EXPECT_TRUE(e.runs.empty());
  EXPECT_EQ(e.attempts, 4u);
}

TEST(Runner, WritesExperimentFiles)
{
  auto c = small_config(FilterKind::Factored);
  const auto dir = std::filesystem::temp_directory_path() / "gfilt_harness_test";
  std::filesystem::remove_all(dir);
  write_experiment(dir, run_experiment(c));
  EXPECT_TRUE(std::filesystem::exists(dir / "run_000.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run_001_timing.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "aggregate.csv"));
  std::ifstream f(dir / "summary.json");
  const auto j = nlohmann::json::parse(f);
  EXPECT_EQ(j.at("attempts"), 2);
  EXPECT_EQ(j.at("runs").size(), 2u);
  std::filesystem::remove_all(dir);
}

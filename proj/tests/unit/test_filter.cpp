#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "gfilt/epi/observations.hpp"
#include "gfilt/epi/transitions.hpp"
#include "gfilt/filter/dense.hpp"
#include "gfilt/filter/history.hpp"
#include "gfilt/filter/parameter.hpp"
#include "gfilt/filter/particle.hpp"
#include "gfilt/filter/resample.hpp"
#include "support/synthetic_graphs.hpp"

using namespace gfilt;
using C = Compartment;

namespace {

std::vector<C> decode(std::size_t code, int L)
{
  std::vector<C> s(L);
  for (int k = 0; k < L; ++k, code /= 4) s[k] = static_cast<C>(code % 4);
  return s;
}

// SEIRS on a small graph as a dense model over 4^L joint states.
struct SmallSeirs {
  ContactNetwork net;
  CompartmentTransition tau;
  TestObsParams obs;
  std::size_t n_states() const { return std::size_t{1} << (2 * net.size()); }

  auto successors() const
  {
    return [this](std::size_t from, auto&& emit) {
      const auto s = decode(from, static_cast<int>(net.size()));
      for (std::size_t to = 0; to < n_states(); ++to) {
        const double p = global_transition_density(tau, net, s, decode(to, static_cast<int>(net.size())));
        if (p > 0) emit(to, p);
      }
    };
  }
  auto likelihood(const std::vector<TestResult>& o) const
  {
    return [this, o](std::size_t y) {
      const auto s = decode(y, static_cast<int>(net.size()));
      double l = 1;
      for (std::size_t k = 0; k < s.size(); ++k) l *= test_obs_density(obs, s[k], o[k]);
      return l;
    };
  }
};

// Brute-force Bayes: full matrix product, then likelihood and normalization.
DenseBelief brute_force(const SmallSeirs& m, const DenseBelief& prior, const std::vector<TestResult>& o)
{
  const auto n = m.n_states();
  const int L = static_cast<int>(m.net.size());
  DenseBelief pred(n, 0.0);
  for (std::size_t to = 0; to < n; ++to)
    for (std::size_t from = 0; from < n; ++from)
      pred[to] += prior[from] * global_transition_density(m.tau, m.net, decode(from, L), decode(to, L));
  double z = 0;
  for (std::size_t y = 0; y < n; ++y) {
    const auto s = decode(y, L);
    for (int k = 0; k < L; ++k) pred[y] *= test_obs_density(m.obs, s[k], o[k]);
    z += pred[y];
  }
  for (auto& v : pred) v /= z;
  return pred;
}

DenseBelief random_belief(std::size_t n, std::mt19937_64& g)
{
  std::exponential_distribution<double> e;
  DenseBelief b(n);
  double s = 0;
  for (auto& v : b) s += v = e(g);
  for (auto& v : b) v /= s;
  return b;
}

std::vector<TestResult> random_obs(std::size_t L, std::mt19937_64& g)
{
  std::vector<TestResult> o(L);
  for (auto& v : o) v = static_cast<TestResult>(g() % 3);
  return o;
}

const TestObsParams kObs{0.2, 0.7, 0.9, 0.05, 0.1, 0.1};

}  // namespace

// ---------------------------------------------------------------------------
// Weights and resampling

TEST(Weights, NormalizeAndDegenerate)
{
  const std::vector<double> lw{std::log(1.0), std::log(3.0), -std::numeric_limits<double>::infinity()};
  auto w = normalize_log_weights(lw);
  EXPECT_NEAR(w.w[0], 0.25, 1e-15);
  EXPECT_NEAR(w.w[1], 0.75, 1e-15);
  EXPECT_EQ(w.w[2], 0.0);
  EXPECT_FALSE(w.degenerate);
  const std::vector<double> none(4, -std::numeric_limits<double>::infinity());
  w = normalize_log_weights(none);
  EXPECT_TRUE(w.degenerate);
  for (double v : w.w) EXPECT_EQ(v, 0.25);
  EXPECT_THROW(normalize_log_weights(std::vector<double>{0.0, std::nan("")}), std::domain_error);
  // Large magnitudes survive the shift.
  w = normalize_log_weights(std::vector<double>{-1e6, -1e6 + std::log(2.0)});
  EXPECT_NEAR(w.w[1], 2.0 / 3, 1e-9);
  EXPECT_NEAR(log_mean_exp(std::vector<double>{std::log(1.0), std::log(3.0)}), std::log(2.0), 1e-15);
}

TEST(Resample, PointMassAndSeeding)
{
  Rng rng(1);
  const std::vector<double> w{0, 0, 1, 0};
  for (auto scheme : {ResampleScheme::Multinomial, ResampleScheme::Systematic}) {
    const auto idx = resample_indices(w, 10, rng, scheme);
    for (auto i : idx) EXPECT_EQ(i, 2u);
  }
  const std::vector<double> u(6, 1.0 / 6);
  Rng a(5), b(5);
  EXPECT_EQ(resample_indices(u, 6, a), resample_indices(u, 6, b));
  EXPECT_THROW(resample_indices(std::vector<double>{0.5, std::nan("")}, 2, a), std::domain_error);
  const std::vector<int> items{10, 20, 30, 40, 50, 60};
  const auto r = resample(u, items, a);
  EXPECT_EQ(r.size(), 6u);
}

TEST(Resample, OffspringCountsAreUnbiased)
{
  const std::vector<double> w{0.05, 0.3, 0.15, 0.0, 0.5};
  const std::size_t N = 5;
  const int trials = 100000;
  for (auto scheme : {ResampleScheme::Multinomial, ResampleScheme::Systematic}) {
    Rng rng(42);
    std::array<double, 5> s{}, s2{};
    for (int t = 0; t < trials; ++t) {
      std::array<int, 5> c{};
      for (auto i : resample_indices(w, N, rng, scheme)) ++c[i];
      for (int i = 0; i < 5; ++i) {
        s[i] += c[i];
        s2[i] += c[i] * c[i];
      }
    }
    for (int i = 0; i < 5; ++i) {
      const double m = s[i] / trials;
      const double se = std::sqrt(std::max(s2[i] / trials - m * m, 1e-12) / trials);
      EXPECT_NEAR(m, N * w[i], 4 * se + 1e-12) << "item " << i;
    }
  }
}

// ---------------------------------------------------------------------------
// Jitter

TEST(Jitter, ScheduleValues)
{
  JitterSchedule adaptive{1e-4, 9e-6, 0.996, {1, 1, 1, 0.09}};
  const auto v1 = adaptive.variance(1);
  EXPECT_NEAR(v1[0], 9.96e-5, 1e-18);
  EXPECT_NEAR(v1[3], 9.96e-5 * 0.09, 1e-18);
  EXPECT_NEAR(adaptive.scale(5000), 9e-6, 1e-20);
  JitterSchedule flat{2.0, 2.0, 0.999999, {1, 3}};
  EXPECT_EQ(flat.variance(0), flat.variance(100000));
  EXPECT_THROW((JitterSchedule{1.0, 2.0, 0.5, {1}}.validate()), std::domain_error);
  EXPECT_THROW((JitterSchedule{1.0, 1.0, 1.5, {1}}.validate()), std::domain_error);
}

TEST(Jitter, StaysInBoxAndClampsWhenStuck)
{
  Rng rng(3);
  const auto box = ParamBox::unit(2);
  for (int i = 0; i < 1000; ++i) {
    const auto x = jitter({0.001, 0.999}, {1e-4, 1e-4}, box, rng);
    EXPECT_TRUE(box.contains(x));
  }
  // Variance so large that rejection practically always fails: clamp.
  const auto y = jitter({0.5}, {1e6}, ParamBox{{0.4}, {0.6}}, rng, 3);
  EXPECT_GE(y[0], 0.4);
  EXPECT_LE(y[0], 0.6);
  // Zero variance leaves the coordinate alone.
  EXPECT_EQ(jitter({0.3, 0.7}, {0.0, 0.0}, box, rng), (std::vector<double>{0.3, 0.7}));
}

// ---------------------------------------------------------------------------
// Exact filter

TEST(StandardFilter, IdentityWithFlatLikelihood)
{
  const DenseBelief b{0.1, 0.2, 0.7};
  const auto out = standard_filter_step(b, [](std::size_t y, auto&& emit) { emit(y, 1.0); }, [](std::size_t) { return 0.5; });
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out[i], b[i], 1e-15);
}

TEST(StandardFilter, TwoStateHandCalculation)
{
  // T = [[0.9, 0.1], [0.3, 0.7]], prior (0.6, 0.4), likelihood (0.2, 0.8).
  const DenseBelief b{0.6, 0.4};
  const double T[2][2] = {{0.9, 0.1}, {0.3, 0.7}};
  const auto out = standard_filter_step(
      b, [&](std::size_t y, auto&& emit) { emit(0, T[y][0]), emit(1, T[y][1]); },
      [](std::size_t y) { return y == 0 ? 0.2 : 0.8; });
  const double p0 = 0.6 * 0.9 + 0.4 * 0.3, p1 = 0.6 * 0.1 + 0.4 * 0.7;
  EXPECT_NEAR(out[0], p0 * 0.2 / (p0 * 0.2 + p1 * 0.8), 1e-15);
  EXPECT_NEAR(out[1], p1 * 0.8 / (p0 * 0.2 + p1 * 0.8), 1e-15);
}

TEST(StandardFilter, SeirsPathMatchesEnumeration)
{
  SmallSeirs m{fixtures::path_graph(3), CompartmentTransition(SeirsParams{0.3, 0.4, 0.2, 0.1}), kObs};
  std::mt19937_64 g(7);
  for (int t = 0; t < 10; ++t) {
    const auto prior = random_belief(64, g);
    const auto o = random_obs(3, g);
    const auto out = standard_filter_step(prior, m.successors(), m.likelihood(o));
    const auto ref = brute_force(m, prior, o);
    double total = 0;
    for (std::size_t y = 0; y < 64; ++y) {
      EXPECT_NEAR(out[y], ref[y], 1e-12);
      total += out[y];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(StandardFilter, TransitionUpdateConservesMass)
{
  SmallSeirs m{fixtures::cycle_graph(4), CompartmentTransition(SeirsParams{0.5, 0.3, 0.2, 0.1}), kObs};
  std::mt19937_64 g(1);
  const auto prior = random_belief(256, g);
  const auto pred = dense_transition_update(prior, 256, m.successors());
  EXPECT_NEAR(std::accumulate(pred.begin(), pred.end(), 0.0), 1.0, 1e-12);
}

TEST(StandardFilter, ZeroLikelihoodRaises)
{
  const DenseBelief b{1.0, 0.0};
  EXPECT_THROW(standard_filter_step(b, [](std::size_t y, auto&& emit) { emit(y, 1.0); },
                                    [](std::size_t y) { return y == 0 ? 0.0 : 1.0; }),
               DegenerateObservation);
}

TEST(ConditionalFilter, PerParameterMatchesStandard)
{
  std::mt19937_64 g(9);
  const auto prior = random_belief(64, g);
  const auto o = random_obs(3, g);
  const std::vector<double> betas{0.1, 0.6};
  std::vector<SmallSeirs> models;
  for (double b : betas)
    models.push_back({fixtures::path_graph(3), CompartmentTransition(SeirsParams{b, 0.4, 0.2, 0.1}), kObs});
  auto model_for = [&](double b) {
    const auto& m = models[b == betas[0] ? 0 : 1];
    return std::make_pair(m.successors(), m.likelihood(o));
  };
  const auto out = conditional_filter_step<double>({prior, prior}, betas, model_for);
  for (int i = 0; i < 2; ++i) {
    const auto ref = brute_force(models[i], prior, o);
    for (std::size_t y = 0; y < 64; ++y) EXPECT_NEAR(out[i][y], ref[y], 1e-12);
  }
  const auto single = conditional_filter_step<double>({prior}, {betas[0]}, model_for);
  EXPECT_EQ(single[0], standard_filter_step(prior, models[0].successors(), models[0].likelihood(o)));
  const auto twin = conditional_filter_step<double>({prior, prior}, {betas[1], betas[1]}, model_for);
  EXPECT_EQ(twin[0], twin[1]);
}

// ---------------------------------------------------------------------------
// Particle filters

TEST(ParticleFilter, DeterministicMoveFlatLikelihood)
{
  std::vector<double> fam{1, 2, 3, 4, 5};
  Rng rng(2);
  const auto out = standard_particle_filter_step(fam, [](double y, Rng&) { return y + 10; }, [](double) { return 0.0; }, rng);
  ASSERT_EQ(out.size(), 5u);
  for (double v : out) {
    EXPECT_GE(v, 11);
    EXPECT_LE(v, 15);
    EXPECT_EQ(v, std::round(v));
  }
  std::vector<double> one{7};
  const auto o1 = standard_particle_filter_step(one, [](double y, Rng&) { return y * 2; }, [](double) { return -5.0; }, rng);
  EXPECT_EQ(o1, (std::vector<double>{14}));
}

TEST(ParticleFilter, LinearGaussianPosteriorMean)
{
  // x0 ~ N(1, 2); x1 = 0.8 x0 + N(0, 0.5); o = x1 + N(0, 0.3), o = 2.1.
  const double m0 = 1, P0 = 2, a = 0.8, q = 0.5, r = 0.3, o = 2.1;
  const double mp = a * m0, Pp = a * a * P0 + q;
  const double K = Pp / (Pp + r);
  const double post_mean = mp + K * (o - mp), post_var = (1 - K) * Pp;
  const std::size_t N = 10000;
  Rng init(11);
  std::vector<double> fam(N);
  for (auto& x : fam) x = normal_sample(m0, P0, init);
  for (auto mix : {MixtureSampling::Ancestor, MixtureSampling::Stratified}) {
    Rng rng(12);
    const auto out = standard_particle_filter_step(
        fam, [&](double x, Rng& g) { return a * x + normal_sample(0, q, g); },
        [&](double x) { return -(o - x) * (o - x) / (2 * r); }, rng, {ResampleScheme::Multinomial, mix});
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / N;
    // Prior sampling, importance weighting and resampling each add about var/N.
    EXPECT_NEAR(mean, post_mean, 3 * std::sqrt(3 * post_var / N));
  }
}

TEST(ParticleFilter, AllZeroWeightsFallBackToUniform)
{
  std::vector<int> fam{1, 2, 3};
  Rng rng(1);
  const auto out = standard_particle_filter_step(
      fam, [](int y, Rng&) { return y; }, [](int) { return -std::numeric_limits<double>::infinity(); }, rng);
  EXPECT_EQ(out.size(), 3u);
}

TEST(ConditionalParticleFilter, SingleParameterReducesToStandard)
{
  Rng init(4);
  std::vector<double> fam(50);
  for (auto& y : fam) y = normal_sample(0, 1, init);
  const std::vector<double> x{0.7};
  auto prop = [](double th, double y, Rng& g) { return th * y + normal_sample(0, 0.2, g); };
  auto ll = [](double, double y) { return -(y - 0.4) * (y - 0.4); };
  const std::vector<std::size_t> lin{0};
  for (auto mix : {MixtureSampling::Ancestor, MixtureSampling::Stratified}) {
    ParticleOptions opt{ResampleScheme::Multinomial, mix};
    Rng r1(99), r2(99);
    std::vector<std::vector<double>> fams{fam};
    auto a = conditional_particle_filter_step(x, lin, fams, prop, ll, r1, opt);
    const auto key = r2.next_key();
    Rng sub = conditional_stream(key, 0);
    auto b = standard_particle_filter_step(
        fam, [&](double y, Rng& g) { return prop(0.7, y, g); }, [&](double y) { return ll(0.7, y); }, sub, opt);
    EXPECT_EQ(a[0], b);
    // Keep going for a few steps.
    for (int n = 0; n < 5; ++n) {
      fams = {a[0]};
      a = conditional_particle_filter_step(x, lin, fams, prop, ll, r1, opt);
      Rng s2 = conditional_stream(r2.next_key(), 0);
      b = standard_particle_filter_step(
          b, [&](double y, Rng& g) { return prop(0.7, y, g); }, [&](double y) { return ll(0.7, y); }, s2, opt);
      EXPECT_EQ(a[0], b);
    }
  }
}

TEST(ConditionalParticleFilter, LineagePermutationIsExchangeable)
{
  Rng init(8);
  std::vector<std::vector<double>> F(4, std::vector<double>(20));
  for (auto& f : F)
    for (auto& y : f) y = normal_sample(0, 1, init);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::vector<double>> G(4);
  for (std::size_t i = 0; i < 4; ++i) G[perm[i]] = F[i];
  const std::vector<double> x(4, 0.5);
  auto prop = [](double th, double y, Rng& g) { return th * y + normal_sample(0, 0.1, g); };
  auto ll = [](double, double y) { return -y * y; };
  Rng r1(3), r2(3);
  const std::vector<std::size_t> id{0, 1, 2, 3};
  const auto a = conditional_particle_filter_step(x, id, F, prop, ll, r1);
  const auto b = conditional_particle_filter_step(x, perm, G, prop, ll, r2);
  EXPECT_EQ(a, b);
}

// ---------------------------------------------------------------------------
// Parameter filters

TEST(ParameterFilter, InformativeObservationSelectsParameter)
{
  std::vector<ParamVec> xs;
  for (int i = 0; i < 9; ++i) xs.push_back({0.1 * (i + 1)});
  const JitterSchedule sched = JitterSchedule::constant({1e-8});
  Rng rng(21);
  auto step = parameter_pf_step(
      xs, sched, 1, ParamBox::unit(1),
      [](const ParamVec& x, std::size_t, Rng&) {
        return std::abs(x[0] - 0.5) < 0.01 ? 0.0 : -std::numeric_limits<double>::infinity();
      },
      rng);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(step.lineage[i], 4u);
    EXPECT_NEAR(step.params[i][0], 0.5, 1e-3);
  }
  // Strong but finite preference: the favoured ancestor dominates.
  Rng rng2(5);
  std::vector<ParamVec> many;
  for (int i = 0; i < 200; ++i) many.push_back({0.1 + 0.8 * i / 199.0});
  step = parameter_pf_step(
      many, sched, 1, ParamBox::unit(1),
      [](const ParamVec& x, std::size_t, Rng&) { return -std::pow((x[0] - 0.3) / 0.01, 2); }, rng2);
  int near = 0;
  for (const auto& x : step.params) near += std::abs(x[0] - 0.3) < 0.03;
  EXPECT_GT(near, 190);
}

TEST(ParameterFilter, ParticleWeightWithSingleDeterministicState)
{
  const std::vector<ParamVec> xs{{0.2}, {0.9}};
  const std::vector<std::vector<double>> fams{{1.0}, {2.0}};
  auto prop = [](const ParamVec& x, double y, Rng&) { return x[0] * y; };
  auto ll = [](const ParamVec&, double y) { return -y; };
  Rng rng(1);
  const auto step = parameter_pf_step_particles(xs, fams, JitterSchedule::constant({0.0}), 0, ParamBox::unit(1), prop,
                                                ll, 8, rng, {ResampleScheme::Multinomial, MixtureSampling::Stratified});
  EXPECT_NEAR(step.log_weights[0], -0.2, 1e-15);
  EXPECT_NEAR(step.log_weights[1], -1.8, 1e-15);
  for (double w : step.log_weights) EXPECT_TRUE(std::isfinite(w));
}

TEST(MarginalBelief, Mixtures)
{
  const DenseBelief a{0.2, 0.8};
  const auto same = marginal_state_belief(std::vector<DenseBelief>{a, a, a});
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(same[i], a[i], 1e-15);
  const auto m = marginal_state_belief(std::vector<DenseBelief>{{1, 0}, {0, 1}});
  EXPECT_EQ(m, (DenseBelief{0.5, 0.5}));
  const auto p = marginal_state_belief(std::vector<std::vector<int>>{{1, 2}, {3, 4}});
  EXPECT_EQ(p, (std::vector<int>{1, 2, 3, 4}));
}

TEST(History, KeepsLastByDefault)
{
  History<int, char> h;
  h.push(1, 'a');
  h.push(2, 'b');
  EXPECT_EQ(h.length(), 2u);
  EXPECT_EQ(h.retained().size(), 1u);
  EXPECT_EQ(h.last_observation(), 'b');
  History<int, char> full(true);
  full.push(1, 'a');
  full.push(2, 'b');
  EXPECT_EQ(full.retained().size(), 2u);
}

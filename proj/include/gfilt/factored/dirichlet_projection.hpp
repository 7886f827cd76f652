#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "gfilt/epi/observations.hpp"
#include "gfilt/epi/simulate.hpp"
#include "gfilt/epi/transitions.hpp"
#include "gfilt/filter/weights.hpp"
#include "gfilt/prob/distributions.hpp"
#include "gfilt/prob/special.hpp"

namespace gfilt {

using Matrix4 = std::array<Row4, 4>;

/// Normalized Dirichlet means of each node, as simplex points.
inline std::vector<Simplex3> dirichlet_means(std::span<const DirichletParams> q)
{
  std::vector<Simplex3> out;
  out.reserve(q.size());
  for (const auto& d : q) out.push_back(Simplex3::from_array(d.mean()));
  return out;
}

/// Direct transition update of fully factored Dirichlet beliefs: the node's
/// next belief is Dir(K beta) where beta moves the current belief mean with
/// escape probability prod_l (1 - beta mean_l(I)) over the neighbours.
inline std::vector<DirichletParams> dirichlet_direct_transition_update(std::span<const DirichletParams> q,
                                                                       const SeirsParams& p, double K,
                                                                       const ContactNetwork& net)
{
  if (q.size() != net.size()) throw std::domain_error("dirichlet_direct_transition_update: belief size differs from node count");
  if (!(K > 0.0)) throw std::domain_error("dirichlet_direct_transition_update: K must be positive");
  std::vector<Row4> means(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) means[k] = q[k].mean();
  std::vector<DirichletParams> out(q.size());
  detail::for_each_node(q.size(), [&](std::size_t k) {
    double e = 1.0;
    for (NodeId l : net.neighbors(k)) e *= 1.0 - p.beta * means[l][2];
    out[k] = detail::scaled_dirichlet(K, detail::seirs_alpha(p, means[k], e));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Equation solver

struct EquationSolution {
  Row4 gamma{};
  double lambda = 0.0;
  double lambda_lo = 0.0;  // final bracket; sum of the inverse digamma terms exceeds K here
  double lambda_hi = 0.0;  // and falls below K here
  int iterations = 0;
  bool widened = false;
};

namespace detail {
inline std::atomic<std::uint64_t> bracket_widenings{0};

inline double inverse_digamma_sum(const Row4& Kj, double K, double lambda)
{
  double s = 0.0;
  for (double k : Kj) s += inverse_digamma((k - lambda) / K);
  return s;
}
}  // namespace detail

/// Number of times the equation solver had to widen its initial bracket.
inline std::uint64_t equation_solver_widenings() { return detail::bracket_widenings.load(); }

/// Solves sum_j psi^-1((K_j - lambda) / K) = K for lambda by bisection and
/// returns gamma_j = psi^-1((K_j - lambda) / K) / K.
///
/// The bracket starts at max K_j - K psi(0.24 K) and min K_j - K psi(0.26 K).
/// If rounding breaks it, it is widened once to 0.2 K / 0.3 K.
inline EquationSolution equation_solver(const Row4& Kj, double K, double eps = 1e-3)
{
  if (!(K > 0.0) || !std::isfinite(K)) throw std::domain_error("equation_solver: K must be positive");
  if (!(eps > 0.0)) throw std::domain_error("equation_solver: eps must be positive");
  for (double k : Kj)
    if (!std::isfinite(k)) throw std::domain_error("equation_solver: non-finite K_j");
  const double kmax = *std::max_element(Kj.begin(), Kj.end());
  const double kmin = *std::min_element(Kj.begin(), Kj.end());
  EquationSolution sol;
  double hi = kmax - K * digamma(0.24 * K);
  double lo = kmin - K * digamma(0.26 * K);
  auto valid = [&] { return detail::inverse_digamma_sum(Kj, K, hi) < K && detail::inverse_digamma_sum(Kj, K, lo) > K; };
  if (!valid()) {
    hi = kmax - K * digamma(0.2 * K);
    lo = kmin - K * digamma(0.3 * K);
    sol.widened = true;
    ++detail::bracket_widenings;
    spdlog::debug("equation_solver: widened bracket for K={}", K);
    if (!valid()) throw std::runtime_error("equation_solver: no valid bracket for K=" + std::to_string(K));
  }
  while (hi - lo >= eps && sol.iterations < 200) {
    const double mid = 0.5 * (hi + lo);
    if (mid == hi || mid == lo) break;
    if (detail::inverse_digamma_sum(Kj, K, mid) > K)
      lo = mid;
    else
      hi = mid;
    ++sol.iterations;
  }
  sol.lambda_lo = lo;
  sol.lambda_hi = hi;
  sol.lambda = 0.5 * (hi + lo);
  for (int j = 0; j < 4; ++j) sol.gamma[j] = inverse_digamma((Kj[j] - sol.lambda) / K) / K;
  return sol;
}

// ---------------------------------------------------------------------------
// KL projection onto Dirichlets with concentration sum K

/// Cross-entropy -E_p[log Dir(a)(y)] given elog_j = E_p[log y_j]. As a
/// function of a it is the KL objective up to a constant.
inline double dirichlet_cross_entropy(const Row4& a, const Row4& elog)
{
  double s = 0.0, out = 0.0;
  for (int j = 0; j < 4; ++j) {
    s += a[j];
    out += log_gamma(a[j]) - (a[j] - 1.0) * elog[j];
  }
  return out - log_gamma(s);
}

/// Hessian of the KL objective in gamma for Dir(K gamma):
/// K^2 [diag psi'(K gamma_j) - psi'(sum_j K gamma_j)].
inline Matrix4 kl_hessian(double K, const Row4& gamma)
{
  double s = 0.0;
  for (double g : gamma) s += K * g;
  const double common = trigamma(s);
  Matrix4 h{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) h[i][j] = K * K * ((i == j ? trigamma(K * gamma[i]) : 0.0) - common);
  return h;
}

/// Determinants of the leading 1x1 .. 4x4 submatrices.
inline Row4 leading_principal_minors(const Matrix4& m)
{
  Row4 out{};
  for (int n = 1; n <= 4; ++n) {
    Matrix4 a = m;
    double det = 1.0;
    for (int c = 0; c < n; ++c) {
      int piv = c;
      for (int r = c + 1; r < n; ++r)
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      if (a[piv][c] == 0.0) {
        det = 0.0;
        break;
      }
      if (piv != c) {
        std::swap(a[piv], a[c]);
        det = -det;
      }
      det *= a[c][c];
      for (int r = c + 1; r < n; ++r) {
        const double f = a[r][c] / a[c][c];
        for (int k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      }
    }
    out[n - 1] = det;
  }
  return out;
}

struct DirichletProjection {
  DirichletParams q;
  Row4 Kj{};       // K psi(K) + N_j / M
  Row4 elog{};     // estimated E_p[log y_j]
  double log_M = 0.0;
  EquationSolution solution;
};

/// Projects p(y) proportional to exp(log_lik(y)) Dir(prior)(y) onto the
/// Dirichlets with concentration sum K, minimizing KL(p || q).
///
/// M and N_j are estimated from `samples` draws of the prior, all four N_j
/// sharing the draws. The solver's gamma is rescaled to sum to one so the
/// result lies in the family.
template <class LogLik>
DirichletProjection kl_project_to_dirichlet(const DirichletParams& prior, LogLik&& log_lik, double K,
                                            std::size_t samples, Rng& rng, double eps = 1e-3)
{
  if (samples == 0) throw std::domain_error("kl_project_to_dirichlet: need at least one sample");
  std::vector<Simplex3> ys;
  ys.reserve(samples);
  std::vector<double> lw(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    ys.push_back(dirichlet_sample(prior, rng));
    lw[s] = log_lik(ys.back());
  }
  DirichletProjection out;
  out.log_M = log_mean_exp(lw);
  if (!std::isfinite(out.log_M))
    throw std::runtime_error("kl_project_to_dirichlet: Monte Carlo estimate of the normalizer is not positive and finite");
  double total = 0.0;
  for (auto& v : lw) total += v = std::exp(v - out.log_M);
  for (std::size_t s = 0; s < samples; ++s)
    for (int j = 0; j < 4; ++j) out.elog[j] += lw[s] * std::log(ys[s][j]);
  for (int j = 0; j < 4; ++j) {
    out.elog[j] /= total;
    out.Kj[j] = K * digamma(K) + K * out.elog[j];
  }
  out.solution = equation_solver(out.Kj, K, eps);
  const auto& g = out.solution.gamma;
  const double gs = g[0] + g[1] + g[2] + g[3];
  out.q = detail::scaled_dirichlet(K, {g[0] / gs, g[1] / gs, g[2] / gs, g[3] / gs});
  return out;
}

/// Projection for the Dirichlet observation model with scale C.
inline DirichletProjection kl_project_to_dirichlet(const DirichletParams& prior, const Simplex3& o, double C, double K,
                                                   std::size_t samples, Rng& rng, double eps = 1e-3)
{
  return kl_project_to_dirichlet(
      prior, [&](const Simplex3& y) { return log_dirichlet_obs_density(C, y, o); }, K, samples, rng, eps);
}

// ---------------------------------------------------------------------------
// Factored variational filter

struct VariationalSettings {
  double K = 10.0;          // concentration sum of the approximating family
  double C = 10.0;          // observation scale
  std::size_t samples = 256;
  double eps = 1e-3;

  void validate() const
  {
    if (!(K > 0.0) || !(C > 0.0)) throw std::domain_error("VariationalSettings: K and C must be positive");
    if (samples == 0) throw std::domain_error("VariationalSettings: samples must be positive");
    if (!(eps > 0.0)) throw std::domain_error("VariationalSettings: eps must be positive");
  }
};

/// Fully factored variational filter step with Dirichlet beliefs: direct
/// transition update, then projection of each observed node's posterior.
/// Unobserved nodes keep the transition update. Node k projects with
/// stream (key, k).
inline std::vector<DirichletParams> factored_variational_filter_step(std::span<const DirichletParams> q,
                                                                     const SeirsParams& p, const VariationalSettings& vs,
                                                                     const ContactNetwork& net,
                                                                     std::span<const std::optional<Simplex3>> o, Rng& rng)
{
  vs.validate();
  if (o.size() != q.size()) throw std::domain_error("factored_variational_filter_step: one observation slot per node required");
  auto pred = dirichlet_direct_transition_update(q, p, vs.K, net);
  const std::uint64_t key = rng.next_key();
  detail::for_each_node(pred.size(), [&](std::size_t k) {
    if (!o[k]) return;
    Rng rk = Rng::keyed({key, k});
    pred[k] = kl_project_to_dirichlet(pred[k], *o[k], vs.C, vs.K, vs.samples, rk, vs.eps).q;
  });
  return pred;
}

}  // namespace gfilt

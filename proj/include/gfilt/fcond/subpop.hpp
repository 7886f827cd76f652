#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gfilt/epi/simulate.hpp"
#include "gfilt/epi/transitions.hpp"
#include "gfilt/factored/dirichlet_projection.hpp"
#include "gfilt/prob/distributions.hpp"
#include "gfilt/prob/special.hpp"

namespace gfilt {

/// Escape probability of a susceptible individual of subpopulation k when
/// each of its M_k - 1 housemates and each of the M_l members of a
/// neighbouring subpopulation is infectious with the belief mean:
/// (1 - beta kappa1 a_k(I))^(M_k - 1) prod_l (1 - beta kappa2 a_l(I))^M_l.
inline double subpop_escape_probability(const std::vector<Row4>& means, double beta, const SubpopParams& sp,
                                        const ContactNetwork& net, std::size_t k)
{
  double e = std::pow(1.0 - beta * sp.kappa1 * means[k][2], net.subpop_size(k) - 1);
  for (NodeId l : net.neighbors(k)) e *= std::pow(1.0 - beta * sp.kappa2 * means[l][2], net.subpop_size(l));
  return e;
}

/// Transition update of per-node Dirichlet beliefs for subpopulation
/// nodes at parameter p: node k becomes Dir(K b) where b moves the belief
/// mean with the subpopulation escape probability.
inline std::vector<DirichletParams> subpop_conditional_transition_update(std::span<const DirichletParams> q,
                                                                         const SeirsParams& p, const SubpopParams& sp,
                                                                         const ContactNetwork& net)
{
  if (q.size() != net.size()) throw std::domain_error("subpop_conditional_transition_update: belief size differs from node count");
  std::vector<Row4> means(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) means[k] = q[k].mean();
  std::vector<DirichletParams> out(q.size());
  detail::for_each_node(q.size(), [&](std::size_t k) {
    const double e = subpop_escape_probability(means, p.beta, sp, net, k);
    out[k] = detail::scaled_dirichlet(sp.K, detail::seirs_alpha(p, means[k], e));
  });
  return out;
}

inline int count_total(const Counts4& o)
{
  int m = 0;
  for (int c : o) {
    if (c < 0) throw std::domain_error("counts must be nonnegative");
    m += c;
  }
  return m;
}

/// Conjugate update of a Dirichlet prior by multinomial counts.
inline DirichletParams multinomial_dirichlet_posterior(const DirichletParams& prior, const Counts4& o)
{
  count_total(o);
  return DirichletParams(prior[0] + o[0], prior[1] + o[1], prior[2] + o[2], prior[3] + o[3]);
}

/// log of the Dirichlet-multinomial mass: the multinomial density of o
/// integrated over y ~ prior.
inline double log_dirichlet_multinomial(const DirichletParams& prior, const Counts4& o)
{
  const int m = count_total(o);
  const double A = prior.sum();
  double out = log_gamma(m + 1.0) + log_gamma(A) - log_gamma(m + A);
  for (int j = 0; j < 4; ++j) out += log_gamma(o[j] + prior[j]) - log_gamma(prior[j]) - log_gamma(o[j] + 1.0);
  return out;
}

/// KL(p || Dir(a)) up to a constant, where p is the posterior of `prior`
/// given counts o.
inline double multinomial_dirichlet_kl_objective(const Row4& a, const DirichletParams& prior, const Counts4& o)
{
  const auto post = multinomial_dirichlet_posterior(prior, o);
  const double ps = digamma(post.sum());
  Row4 elog{};
  for (int j = 0; j < 4; ++j) elog[j] = digamma(post[j]) - ps;
  return dirichlet_cross_entropy(a, elog);
}

/// Gradient of multinomial_dirichlet_kl_objective in a:
/// psi(a_j) - psi(sum a) - (psi(o_j + prior_j) - psi(m + sum prior)).
inline Row4 multinomial_dirichlet_kl_gradient(const Row4& a, const DirichletParams& prior, const Counts4& o)
{
  const auto post = multinomial_dirichlet_posterior(prior, o);
  const double ps = digamma(post.sum());
  const double as = digamma(a[0] + a[1] + a[2] + a[3]);
  Row4 g{};
  for (int j = 0; j < 4; ++j) g[j] = digamma(a[j]) - as - (digamma(post[j]) - ps);
  return g;
}

/// One step of the fully factored Dirichlet filter for subpopulation nodes
/// at parameter p: subpopulation transition update, then the conjugate
/// update at observed nodes. If `log_evidence` is given it receives the sum
/// of the per-node log Dirichlet-multinomial masses.
inline std::vector<DirichletParams> subpop_dirichlet_step(std::span<const DirichletParams> q, const SeirsParams& p,
                                                          const SubpopParams& sp, const ContactNetwork& net,
                                                          std::span<const std::optional<Counts4>> o,
                                                          double* log_evidence = nullptr)
{
  if (o.size() != q.size()) throw std::domain_error("subpop_dirichlet_step: one observation slot per node required");
  auto out = subpop_conditional_transition_update(q, p, sp, net);
  std::vector<double> lz(out.size(), 0.0);
  detail::for_each_node(out.size(), [&](std::size_t k) {
    if (!o[k]) return;
    if (log_evidence) lz[k] = log_dirichlet_multinomial(out[k], *o[k]);
    out[k] = multinomial_dirichlet_posterior(out[k], *o[k]);
  });
  if (log_evidence) {
    double total = 0.0;
    for (double v : lz) total += v;
    *log_evidence = total;
  }
  return out;
}

}  // namespace gfilt

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gfilt/epi/observations.hpp"
#include "gfilt/epi/simulate.hpp"
#include "gfilt/epi/transitions.hpp"
#include "gfilt/filter/weights.hpp"
#include "gfilt/graph/network.hpp"

namespace gfilt {

/// Per-node compartment distributions of a fully factored belief. SIS
/// beliefs keep their mass in the S and I entries.
using NodeBeliefs = std::vector<Row4>;

/// Probability that node k escapes infection from all neighbours when each
/// neighbour is independently infectious with its belief's I mass.
inline double escape_probability(const NodeBeliefs& mu, double beta, const ContactNetwork& net, std::size_t k)
{
  double e = 1.0;
  for (NodeId l : net.neighbors(k)) e *= 1.0 - beta * mu[l][2];
  return e;
}

/// Transition update of a fully factored belief, node by node:
/// S keeps mass mu(S) * e_k + rho mu(R), with e_k the escape probability;
/// the other moves are the fixed compartment rates.
inline NodeBeliefs seirs_transition_update_closed_form(const NodeBeliefs& mu, const CompartmentTransition& tau,
                                                       const ContactNetwork& net)
{
  if (mu.size() != net.size()) throw std::domain_error("seirs_transition_update_closed_form: belief size differs from node count");
  const auto& p = tau.params();
  const bool sis = tau.kind() == EpiKind::SIS;
  NodeBeliefs out(mu.size());
  detail::for_each_node(mu.size(), [&](std::size_t k) {
    const auto& m = mu[k];
    const double e = escape_probability(mu, p.beta, net, k);
    if (sis) {
      out[k] = {m[0] * e + p.gamma * m[2], 0.0, m[0] * (1.0 - e) + (1.0 - p.gamma) * m[2], 0.0};
    } else {
      out[k] = {m[0] * e + p.rho * m[3], m[0] * (1.0 - e) + (1.0 - p.sigma) * m[1], p.sigma * m[1] + (1.0 - p.gamma) * m[2],
                p.gamma * m[2] + (1.0 - p.rho) * m[3]};
    }
  });
  return out;
}

/// Per-node Bayes step with the test likelihood. If `log_evidence` is
/// given it receives sum_k log sum_c pred_k(c) xi(c)(o_k), summed in node
/// order.
inline NodeBeliefs seirs_observation_update_closed_form(const NodeBeliefs& pred, const TestObsParams& obs,
                                                        std::span<const TestResult> o, double* log_evidence = nullptr)
{
  if (o.size() != pred.size()) throw std::domain_error("seirs_observation_update_closed_form: one observation per node required");
  NodeBeliefs out(pred.size());
  std::vector<double> z(pred.size());
  detail::for_each_node(pred.size(), [&](std::size_t k) {
    const Row4 lik = test_obs_likelihood(obs, o[k]);
    double s = 0.0;
    for (int c = 0; c < 4; ++c) s += out[k][c] = pred[k][c] * lik[c];
    z[k] = s;
    if (!(s > 0.0)) return;
    for (auto& v : out[k]) v /= s;
  });
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!(z[k] > 0.0))
      throw DegenerateObservation("closed-form observation update: node " + std::to_string(k) + " observation '" +
                                  to_char(o[k]) + "' has zero probability");
    total += std::log(z[k]);
  }
  if (log_evidence) *log_evidence = total;
  return out;
}

inline NodeBeliefs seirs_closed_form_step(const NodeBeliefs& mu, const CompartmentTransition& tau,
                                          const ContactNetwork& net, const TestObsParams& obs,
                                          std::span<const TestResult> o, double* log_evidence = nullptr)
{
  return seirs_observation_update_closed_form(seirs_transition_update_closed_form(mu, tau, net), obs, o, log_evidence);
}

}  // namespace gfilt

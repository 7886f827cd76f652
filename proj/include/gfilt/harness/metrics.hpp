#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfilt/factored/factored_filter.hpp"
#include "gfilt/factored/seirs_closed_form.hpp"
#include "gfilt/filter/parameter.hpp"
#include "gfilt/lorenz/lorenz.hpp"
#include "gfilt/prob/distributions.hpp"

namespace gfilt {

// State errors are expected distances to the ground truth under the
// belief: the node-averaged discrete metric on compartment labels
// (at most 1) or the summed L1 distance on simplex labels (at most 2).

/// Fully factored categorical beliefs.
inline double state_error(std::span<const Compartment> truth, const NodeBeliefs& mu)
{
  if (truth.size() != mu.size() || truth.empty()) throw std::domain_error("state_error: belief and state sizes differ");
  double s = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) s += 1.0 - mu[k][idx(truth[k])];
  return s / static_cast<double>(truth.size());
}

/// Cluster tables of a factored belief: the average over clusters of the
/// expected fraction of wrong labels in the cluster.
inline double state_error(std::span<const Compartment> truth, const FactoredBelief& fb, const GraphEpidemicModel& m)
{
  if (truth.size() != m.network().size()) throw std::domain_error("state_error: state size differs from node count");
  if (fb.size() != m.cluster_count()) throw std::domain_error("state_error: one table per cluster required");
  double total = 0.0;
  for (std::size_t l = 0; l < fb.size(); ++l) {
    const auto& nodes = m.partition().cluster(l);
    const auto marg = cluster_node_marginals(fb[l], m.n_labels(), nodes.size());
    double s = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) s += 1.0 - marg[j][m.label(truth[nodes[j]])];
    total += s / static_cast<double>(nodes.size());
  }
  return total / static_cast<double>(fb.size());
}

/// Factored particle family: mismatch rate averaged over particles and
/// cluster nodes, then over clusters.
inline double state_error(std::span<const Compartment> truth, const FactoredParticleFamily& fam,
                          const GraphEpidemicModel& m)
{
  if (truth.size() != m.network().size()) throw std::domain_error("state_error: state size differs from node count");
  if (fam.size() != m.cluster_count()) throw std::domain_error("state_error: one family per cluster required");
  double total = 0.0;
  for (std::size_t l = 0; l < fam.size(); ++l) {
    const auto& nodes = m.partition().cluster(l);
    if (fam[l].empty()) throw std::domain_error("state_error: empty cluster family");
    std::size_t wrong = 0;
    for (const auto& y : fam[l])
      for (std::size_t j = 0; j < nodes.size(); ++j) wrong += m.compartment(y[j]) != truth[nodes[j]];
    total += static_cast<double>(wrong) / static_cast<double>(fam[l].size() * nodes.size());
  }
  return total / static_cast<double>(fam.size());
}

/// Joint-state particles with per-node labels given as compartments.
inline double state_error(std::span<const Compartment> truth, const std::vector<std::vector<Compartment>>& particles)
{
  if (particles.empty()) throw std::domain_error("state_error: empty particle family");
  std::size_t wrong = 0;
  for (const auto& y : particles) {
    if (y.size() != truth.size()) throw std::domain_error("state_error: particle and state sizes differ");
    for (std::size_t k = 0; k < y.size(); ++k) wrong += y[k] != truth[k];
  }
  return static_cast<double>(wrong) / static_cast<double>(particles.size() * truth.size());
}

/// Fully factored Dirichlet beliefs on simplex labels:
/// (1/L) sum_k sum_j E|truth_kj - Y_kj|.
inline double state_error(std::span<const Simplex3> truth, const std::vector<DirichletParams>& q)
{
  if (truth.size() != q.size() || truth.empty()) throw std::domain_error("state_error: belief and state sizes differ");
  double s = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k)
    for (std::size_t j = 0; j < 4; ++j) s += dirichlet_mean_abs_dev(q[k], j, truth[k][j]);
  return s / static_cast<double>(truth.size());
}

/// Mixture of conditional beliefs, one per parameter particle with equal
/// weight. The error is linear in the belief, so it is the mean of the
/// per-particle errors.
template <class Truth, class B, class... Extra>
double mixture_state_error(std::span<const Truth> truth, const std::vector<std::shared_ptr<const B>>& beliefs,
                           const Extra&... extra)
{
  if (beliefs.empty()) throw std::domain_error("mixture_state_error: no beliefs");
  double s = 0.0;
  for (const auto& b : beliefs) s += state_error(truth, *b, extra...);
  return s / static_cast<double>(beliefs.size());
}

struct ParamEstimate {
  std::vector<double> estimate;  // particle mean
  std::vector<double> error;     // (1/|truth_j|) mean_i |truth_j - x_ij|
};

/// Per-parameter particle mean and average normalized absolute error.
inline ParamEstimate param_error_and_estimate(const std::vector<ParamVec>& params, std::span<const double> truth)
{
  if (params.empty()) throw std::domain_error("param_error_and_estimate: no parameter particles");
  const std::size_t d = truth.size();
  for (std::size_t j = 0; j < d; ++j)
    if (truth[j] == 0.0) throw std::domain_error("param_error_and_estimate: true parameter " + std::to_string(j) + " is zero");
  ParamEstimate out{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& x : params) {
    if (x.size() != d) throw std::domain_error("param_error_and_estimate: dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) {
      out.estimate[j] += x[j];
      out.error[j] += std::abs(truth[j] - x[j]);
    }
  }
  const auto N = static_cast<double>(params.size());
  for (std::size_t j = 0; j < d; ++j) {
    out.estimate[j] /= N;
    out.error[j] /= N * std::abs(truth[j]);
  }
  return out;
}

struct LorenzMetrics {
  double distance = 0.0;              // |truth - grand mean of the state particles|
  LorenzState state_estimate{};
  std::array<double, 4> estimate{};   // parameter particle mean
  std::array<double, 4> error{};      // |(estimate - theta) / theta|
};

/// Lorenz errors: the state estimate is the mean over every state particle
/// of every parameter particle; the parameter error is the normalized
/// deviation of the parameter mean.
inline LorenzMetrics lorenz_metrics(const LorenzState& truth, const std::vector<std::vector<LorenzState>>& families,
                                    const std::vector<ParamVec>& params, const std::array<double, 4>& theta)
{
  if (families.empty() || params.empty()) throw std::domain_error("lorenz_metrics: empty particle families");
  LorenzMetrics out;
  std::size_t count = 0;
  for (const auto& f : families) {
    for (const auto& y : f)
      for (int c = 0; c < 3; ++c) out.state_estimate[c] += y[c];
    count += f.size();
  }
  if (count == 0) throw std::domain_error("lorenz_metrics: no state particles");
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) {
    out.state_estimate[c] /= static_cast<double>(count);
    const double e = truth[c] - out.state_estimate[c];
    d2 += e * e;
  }
  out.distance = std::sqrt(d2);
  for (const auto& x : params) {
    if (x.size() != 4) throw std::domain_error("lorenz_metrics: parameter particles must have 4 components");
    for (int j = 0; j < 4; ++j) out.estimate[j] += x[j];
  }
  for (int j = 0; j < 4; ++j) {
    out.estimate[j] /= static_cast<double>(params.size());
    if (theta[j] == 0.0) throw std::domain_error("lorenz_metrics: true parameter is zero");
    out.error[j] = std::abs((out.estimate[j] - theta[j]) / theta[j]);
  }
  return out;
}

/// Particle count for a state of dimension d: round(10^(0.05 d + 0.78)).
inline std::size_t particle_count_formula(std::size_t d)
{
  if (d < 1) throw std::domain_error("particle_count_formula: dimension must be >= 1");
  return static_cast<std::size_t>(std::llround(std::pow(10.0, 0.05 * static_cast<double>(d) + 0.78)));
}

}  // namespace gfilt

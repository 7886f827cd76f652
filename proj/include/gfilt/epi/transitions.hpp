#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "gfilt/epi/compartments.hpp"
#include "gfilt/epi/params.hpp"
#include "gfilt/graph/network.hpp"
#include "gfilt/prob/distributions.hpp"

namespace gfilt {

enum class EpiKind { SEIRS, SIS };


/// Per-node compartment transition for SEIRS or SIS dynamics.
///
/// row(c, d) is the distribution of the next compartment of a node that is
/// currently in c and has d infectious neighbours. SIS rows only use the S
/// and I entries; E and R stay zero.
class CompartmentTransition {
 public:
  CompartmentTransition() : CompartmentTransition(SeirsParams{}) {}

  explicit CompartmentTransition(const SeirsParams& p) : kind_(EpiKind::SEIRS), p_(p) { init(); }

  explicit CompartmentTransition(const SisParams& p) : kind_(EpiKind::SIS), p_{p.beta, 0.0, p.gamma, 0.0} { init(); }

  EpiKind kind() const noexcept { return kind_; }
  const SeirsParams& params() const noexcept { return p_; }
  int label_count() const noexcept { return kind_ == EpiKind::SEIRS ? 4 : 2; }

  /// (1 - beta)^d. Exact repeated products for small d, exp/log1p beyond.
  double escape(int d) const noexcept
  {
    if (d < static_cast<int>(escape_.size())) return escape_[d];
    return std::exp(d * log_escape_);
  }

  Row4 row(Compartment c, int d) const noexcept
  {
    const auto& p = p_;
    if (kind_ == EpiKind::SEIRS) {
      switch (c) {
        case Compartment::S: {
          const double e = escape(d);
          return {e, 1.0 - e, 0.0, 0.0};
        }
        case Compartment::E: return {0.0, 1.0 - p.sigma, p.sigma, 0.0};
        case Compartment::I: return {0.0, 0.0, 1.0 - p.gamma, p.gamma};
        case Compartment::R: return {p.rho, 0.0, 0.0, 1.0 - p.rho};
      }
    } else {
      if (c == Compartment::S) {
        const double e = escape(d);
        return {e, 0.0, 1.0 - e, 0.0};
      }
      if (c == Compartment::I) return {p.gamma, 0.0, 1.0 - p.gamma, 0.0};
    }
    return {0.0, 0.0, 0.0, 0.0};
  }

  /// Samples the next compartment from row(c, d) with one uniform draw.
  Compartment sample(Compartment c, int d, Rng& rng) const
  {
    const Row4 r = row(c, d);
    const double u = rng.uniform();
    double acc = 0.0;
    int last = 0;
    for (int j = 0; j < 4; ++j) {
      if (r[j] <= 0.0) continue;
      last = j;
      acc += r[j];
      if (u < acc) return static_cast<Compartment>(j);
    }
    return static_cast<Compartment>(last);
  }

 private:
  void init()
  {
    p_.validate();
    log_escape_ = std::log1p(-p_.beta);
    double e = 1.0;
    for (auto& v : escape_) {
      v = e;
      e *= 1.0 - p_.beta;
    }
  }

  EpiKind kind_;
  SeirsParams p_;
  double log_escape_ = 0.0;
  std::array<double, 32> escape_{};
};

/// Distribution of node k's next compartment under SEIRS dynamics.
inline CategoricalDist seirs_node_transition(const SeirsParams& p, const ContactNetwork& net,
                                             std::span<const Compartment> s, std::size_t k)
{
  const auto r = CompartmentTransition(p).row(s[k], infectious_neighbor_count(net, s, k));
  return CategoricalDist({r.begin(), r.end()});
}

/// Distribution over {S, I} of node k's next compartment under SIS dynamics.
inline CategoricalDist sis_node_transition(const SisParams& p, const ContactNetwork& net, std::span<const Compartment> s,
                                           std::size_t k)
{
  const auto r = CompartmentTransition(p).row(s[k], infectious_neighbor_count(net, s, k));
  return CategoricalDist({r[idx(Compartment::S)], r[idx(Compartment::I)]});
}

/// prod_k tau_k(s)(s'_k).
inline double global_transition_density(const CompartmentTransition& tau, const ContactNetwork& net,
                                        std::span<const Compartment> s, std::span<const Compartment> next)
{
  if (s.size() != net.size() || next.size() != net.size())
    throw std::domain_error("global_transition_density: state length differs from node count");
  double out = 1.0;
  for (std::size_t k = 0; k < s.size(); ++k) out *= tau.row(s[k], infectious_neighbor_count(net, s, k))[idx(next[k])];
  return out;
}

// ---------------------------------------------------------------------------
// Dirichlet-labelled nodes

namespace detail {

inline Row4 seirs_alpha(const SeirsParams& p, const Row4& sk, double escape)
{
  return {p.rho * sk[3] + escape * sk[0], (1.0 - escape) * sk[0] + (1.0 - p.sigma) * sk[1],
          p.sigma * sk[1] + (1.0 - p.gamma) * sk[2], p.gamma * sk[2] + (1.0 - p.rho) * sk[3]};
}

inline DirichletParams scaled_dirichlet(double K, const Row4& a)
{
  // Degenerate rates (e.g. sigma = 1) can zero a component; keep the
  // concentration strictly positive.
  return DirichletParams(std::max(K * a[0], simplex_floor), std::max(K * a[1], simplex_floor),
                         std::max(K * a[2], simplex_floor), std::max(K * a[3], simplex_floor));
}

}  // namespace detail

/// Mean vector alpha of node k's next-state Dirichlet when every node is
/// labelled by a point of the simplex: infection pressure is the summed
/// infectious mass of the neighbours.
inline Row4 dirichlet_transition_mean(const SeirsParams& p, const ContactNetwork& net, std::span<const Simplex3> s,
                                      std::size_t k)
{
  double pressure = 0.0;
  for (NodeId l : net.neighbors(k)) pressure += s[l][2];
  return detail::seirs_alpha(p, s[k].values(), std::pow(1.0 - p.beta, pressure));
}

inline DirichletParams dirichlet_node_transition(const SeirsParams& p, double K, const ContactNetwork& net,
                                                 std::span<const Simplex3> s, std::size_t k)
{
  return detail::scaled_dirichlet(K, dirichlet_transition_mean(p, net, s, k));
}

/// Mean vector for the subpopulation model: exponent i_k + i_N with
/// i_k = (M_k - 1) kappa1 s_k3 and i_N = sum_l M_l kappa2 s_l3.
inline Row4 subpop_transition_mean(const SeirsParams& p, const SubpopParams& sp, const ContactNetwork& net,
                                   std::span<const Simplex3> s, std::size_t k)
{
  const double ik = (net.subpop_size(k) - 1) * sp.kappa1 * s[k][2];
  double in = 0.0;
  for (NodeId l : net.neighbors(k)) in += net.subpop_size(l) * sp.kappa2 * s[l][2];
  return detail::seirs_alpha(p, s[k].values(), std::pow(1.0 - p.beta, ik + in));
}

inline DirichletParams subpop_node_transition(const SeirsParams& p, const SubpopParams& sp, const ContactNetwork& net,
                                              std::span<const Simplex3> s, std::size_t k)
{
  return detail::scaled_dirichlet(sp.K, subpop_transition_mean(p, sp, net, s, k));
}

}  // namespace gfilt

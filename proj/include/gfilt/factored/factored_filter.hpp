#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <tbb/parallel_for.h>

#include "gfilt/factored/product_space.hpp"
#include "gfilt/filter/dense.hpp"
#include "gfilt/filter/particle.hpp"

namespace gfilt {

// A factored model exposes, per cluster l of its partition:
//   deps(l)       sorted nodes read by the cluster transition (contains C_l)
//   touched(l)    clusters intersecting deps(l), ascending
//   cluster_successors(l, dep_labels, emit)
//   cluster_sample(l, dep_labels, rng)
//   cluster_likelihood(l, cluster_labels, obs)
// GraphEpidemicModel is the reference implementation.

/// One dense table per cluster, indexed by LabelCodec over the sorted
/// cluster nodes.
using FactoredBelief = std::vector<DenseBelief>;

using ClusterParticle = std::vector<Label>;
/// One particle family per cluster; family sizes may differ.
using FactoredParticleFamily = std::vector<std::vector<ClusterParticle>>;

namespace detail {

// Where the nodes of cluster t sit inside a dependency set.
struct Overlap {
  std::uint32_t cluster;
  std::vector<std::uint32_t> in_cluster;  // position within C_t
  std::vector<std::uint32_t> in_deps;     // position within deps
  bool whole;
};

template <class Model>
std::vector<Overlap> overlaps(const Model& m, std::size_t l)
{
  const auto& deps = m.deps(l);
  std::vector<Overlap> out;
  for (auto t : m.touched(l)) {
    Overlap ov{t, {}, {}, false};
    const auto& nodes = m.partition().cluster(t);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      auto it = std::lower_bound(deps.begin(), deps.end(), nodes[i]);
      if (it != deps.end() && *it == nodes[i]) {
        ov.in_cluster.push_back(static_cast<std::uint32_t>(i));
        ov.in_deps.push_back(static_cast<std::uint32_t>(it - deps.begin()));
      }
    }
    ov.whole = ov.in_cluster.size() == nodes.size();
    out.push_back(std::move(ov));
  }
  return out;
}

// Marginal of a cluster table on the listed cluster positions, indexed by
// those positions in the given order.
inline DenseBelief cluster_marginal(const DenseBelief& q, int n_labels, std::size_t cluster_size,
                                    const std::vector<std::uint32_t>& keep)
{
  const LabelCodec full(n_labels, cluster_size), sub(n_labels, keep.size());
  DenseBelief out(sub.states(), 0.0);
  std::vector<Label> lab(cluster_size), kept(keep.size());
  for (std::size_t y = 0; y < q.size(); ++y) {
    if (q[y] == 0.0) continue;
    full.decode(y, lab);
    for (std::size_t i = 0; i < keep.size(); ++i) kept[i] = lab[keep[i]];
    out[sub.encode(kept)] += q[y];
  }
  return out;
}

// Product-of-marginals prior on the dependency set of cluster l.
template <class Model>
DenseBelief dependency_prior(const Model& m, std::size_t l, const FactoredBelief& fb)
{
  const auto& deps = m.deps(l);
  if (deps == m.partition().cluster(l)) return fb[l];
  const int nl = m.n_labels();
  const LabelCodec codec(nl, deps.size());
  const auto ovs = overlaps(m, l);
  std::vector<DenseBelief> marg(ovs.size());
  std::vector<const DenseBelief*> table(ovs.size());
  for (std::size_t t = 0; t < ovs.size(); ++t) {
    const auto& ov = ovs[t];
    if (ov.whole) {
      table[t] = &fb[ov.cluster];
    } else {
      marg[t] = cluster_marginal(fb[ov.cluster], nl, m.partition().cluster(ov.cluster).size(), ov.in_cluster);
      table[t] = &marg[t];
    }
  }
  DenseBelief out(codec.states());
  std::vector<Label> lab(deps.size());
  for (std::size_t y = 0; y < out.size(); ++y) {
    codec.decode(y, lab);
    double p = 1.0;
    for (std::size_t t = 0; t < ovs.size() && p != 0.0; ++t) {
      std::size_t sub = 0;
      for (std::size_t i = ovs[t].in_deps.size(); i-- > 0;)
        sub = sub * static_cast<std::size_t>(nl) + lab[ovs[t].in_deps[i]];
      p *= (*table[t])[sub];
    }
    out[y] = p;
  }
  return out;
}

}  // namespace detail

/// Factored filter step. Each cluster's intermediate distribution
/// integrates the transition over the product of the cluster beliefs on
/// its dependency set, then is reweighted by the cluster observation.
/// Clusters read the previous step only, so they update in parallel.
template <class Model, class Obs>
FactoredBelief factored_filter_step(const FactoredBelief& fb, const Model& m, const Obs& o)
{
  const std::size_t p = m.cluster_count();
  if (fb.size() != p) throw std::domain_error("factored_filter_step: one belief per cluster required");
  FactoredBelief out(p);
  tbb::parallel_for(std::size_t{0}, p, [&](std::size_t l) {
    const auto& nodes = m.partition().cluster(l);
    const LabelCodec dc(m.n_labels(), m.deps(l).size()), cc(m.n_labels(), nodes.size());
    if (fb[l].size() != cc.states())
      throw std::domain_error("factored_filter_step: cluster " + std::to_string(l) + " belief has wrong size");
    const DenseBelief prior = detail::dependency_prior(m, l, fb);
    std::vector<Label> buf(dc.nodes());
    auto pred = dense_transition_update(prior, cc.states(), [&](std::size_t from, auto&& emit) {
      dc.decode(from, buf);
      m.cluster_successors(l, buf, emit);
    });
    std::vector<Label> lab(cc.nodes());
    out[l] = dense_observation_update(
        std::move(pred),
        [&](std::size_t y) {
          cc.decode(y, lab);
          return m.cluster_likelihood(l, lab, o);
        },
        "factored filter, cluster " + std::to_string(l));
  });
  return out;
}

/// Per-node marginals of a cluster table; row j is the label distribution
/// of the j-th (sorted) cluster node.
inline std::vector<Row4> cluster_node_marginals(const DenseBelief& q, int n_labels, std::size_t cluster_size)
{
  const LabelCodec codec(n_labels, cluster_size);
  std::vector<Row4> out(cluster_size, Row4{});
  std::vector<Label> lab(cluster_size);
  for (std::size_t y = 0; y < q.size(); ++y) {
    if (q[y] == 0.0) continue;
    codec.decode(y, lab);
    for (std::size_t i = 0; i < cluster_size; ++i) out[i][lab[i]] += q[y];
  }
  return out;
}

/// Factored particle filter step.
///
/// Draw i of cluster l assembles the dependency labels from one uniformly
/// chosen particle of every touched cluster (its own cluster follows
/// opt.mixture), samples the next cluster labels, and weights them by the
/// cluster observation. Each cluster is then resampled on its own.
/// Streams: draw i of cluster l uses (key, 0, offset_l + i), the cluster
/// resample (key, 1, l); one cluster reproduces the standard step.
template <class Model, class Obs>
FactoredParticleFamily factored_particle_filter_step(const FactoredParticleFamily& fam, const Model& m, const Obs& o,
                                                     Rng& rng, const ParticleOptions& opt = {})
{
  const std::size_t p = m.cluster_count();
  if (fam.size() != p) throw std::domain_error("factored_particle_filter_step: one family per cluster required");
  std::vector<std::uint64_t> offset(p + 1, 0);
  for (std::size_t l = 0; l < p; ++l) {
    if (fam[l].empty()) throw std::domain_error("factored_particle_filter_step: empty family for cluster " + std::to_string(l));
    offset[l + 1] = offset[l] + fam[l].size();
  }
  const std::uint64_t key = rng.next_key();
  FactoredParticleFamily out(p);
  tbb::parallel_for(std::size_t{0}, p, [&](std::size_t l) {
    const std::size_t N = fam[l].size();
    const auto ovs = detail::overlaps(m, l);
    std::vector<ClusterParticle> moved(N);
    std::vector<double> logw(N);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, N, 16), [&](const auto& r) {
      std::vector<Label> dep(m.deps(l).size());
      for (std::size_t i = r.begin(); i < r.end(); ++i) {
        Rng ri = Rng::keyed({key, detail::propagate_tag, offset[l] + i});
        for (const auto& ov : ovs) {
          const auto& src = fam[ov.cluster];
          const bool own = ov.cluster == l;
          const std::size_t a = own && opt.mixture == MixtureSampling::Stratified ? i : ri.below(src.size());
          for (std::size_t j = 0; j < ov.in_deps.size(); ++j) dep[ov.in_deps[j]] = src[a][ov.in_cluster[j]];
        }
        moved[i] = m.cluster_sample(l, dep, ri);
        logw[i] = std::log(m.cluster_likelihood(l, moved[i], o));
      }
    });
    const auto w = normalize_log_weights(logw, "factored particle filter, cluster " + std::to_string(l));
    Rng rr = Rng::keyed({key, detail::resample_tag, l});
    const auto idx = resample_indices(w.w, N, rr, opt.resample);
    out[l].reserve(N);
    for (auto i : idx) out[l].push_back(moved[i]);
  });
  return out;
}

}  // namespace gfilt

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfilt/epi/observations.hpp"
#include "gfilt/epi/transitions.hpp"
#include "gfilt/filter/dense.hpp"
#include "gfilt/graph/partition.hpp"

namespace gfilt {

using Label = std::uint8_t;

/// Largest joint table the dense engines will allocate.
inline constexpr std::size_t max_dense_states = std::size_t{1} << 22;

/// Joint index of the labels of an ordered node list: base-n digits, first
/// node least significant.
class LabelCodec {
 public:
  LabelCodec(int n_labels, std::size_t n_nodes) : base_(static_cast<std::size_t>(n_labels)), nodes_(n_nodes)
  {
    if (n_labels < 1) throw std::domain_error("LabelCodec: need at least one label");
    states_ = 1;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      if (states_ > max_dense_states / base_)
        throw std::length_error("LabelCodec: " + std::to_string(n_nodes) + " nodes exceed the dense table limit");
      states_ *= base_;
    }
  }

  std::size_t states() const noexcept { return states_; }
  std::size_t nodes() const noexcept { return nodes_; }

  void decode(std::size_t idx, std::span<Label> out) const noexcept
  {
    for (std::size_t i = 0; i < nodes_; ++i, idx /= base_) out[i] = static_cast<Label>(idx % base_);
  }

  std::size_t encode(std::span<const Label> labels) const noexcept
  {
    std::size_t idx = 0;
    for (std::size_t i = nodes_; i-- > 0;) idx = idx * base_ + labels[i];
    return idx;
  }

 private:
  std::size_t base_;
  std::size_t nodes_;
  std::size_t states_ = 1;
};

/// Calls emit(index, prob) for every joint label vector with positive
/// product probability, where rows[i][j] is the probability that node i
/// takes label j. Indices come out in increasing order.
template <class Emit>
void expand_product(std::span<const Row4> rows, int n_labels, Emit&& emit)
{
  const std::size_t n = rows.size();
  if (n == 0) {
    emit(std::size_t{0}, 1.0);
    return;
  }
  std::vector<std::array<Label, 4>> support(n);
  std::vector<int> width(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < n_labels; ++j)
      if (rows[i][j] > 0.0) support[i][width[i]++] = static_cast<Label>(j);
    if (width[i] == 0) return;
  }
  std::vector<int> pos(n, 0);
  std::vector<std::size_t> place(n, 1);
  for (std::size_t i = 1; i < n; ++i) place[i] = place[i - 1] * static_cast<std::size_t>(n_labels);
  // Odometer with the last node as the slowest digit, so indices increase.
  while (true) {
    double p = 1.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Label j = support[i][pos[i]];
      p *= rows[i][j];
      idx += place[i] * j;
    }
    emit(idx, p);
    std::size_t i = 0;
    while (i < n && ++pos[i] == width[i]) pos[i++] = 0;
    if (i == n) break;
  }
}

/// Compartment epidemic with per-node test observations, viewed as a
/// factored model over a partition of the nodes.
///
/// Labels are SEIRS compartments in order, or (S, I) for SIS. The cluster
/// transition reads the cluster and its neighbours; with beta = 0 nodes are
/// decoupled and the dependency set shrinks to the cluster itself.
class GraphEpidemicModel {
 public:
  GraphEpidemicModel(const ContactNetwork& net, CompartmentTransition tau, TestObsParams obs, Partition part)
      : net_(&net), tau_(std::move(tau)), obs_(obs), part_(std::move(part))
  {
    obs_.validate();
    const auto report = validate(part_, net.size());
    if (!report.ok) throw std::domain_error("GraphEpidemicModel: " + report.describe());
    labels_ = tau_.kind() == EpiKind::SEIRS
                  ? std::vector<Compartment>{Compartment::S, Compartment::E, Compartment::I, Compartment::R}
                  : std::vector<Compartment>{Compartment::S, Compartment::I};
    membership_ = part_.membership(net.size());
    const bool coupled = tau_.params().beta > 0.0;
    clusters_.resize(part_.cluster_count());
    for (std::size_t l = 0; l < clusters_.size(); ++l) {
      auto& c = clusters_[l];
      const auto& nodes = part_.cluster(l);
      c.deps = nodes;
      if (coupled)
        for (NodeId k : nodes)
          for (NodeId j : net.neighbors(k)) c.deps.push_back(j);
      std::sort(c.deps.begin(), c.deps.end());
      c.deps.erase(std::unique(c.deps.begin(), c.deps.end()), c.deps.end());
      auto pos = [&](NodeId k) {
        return static_cast<std::uint32_t>(std::lower_bound(c.deps.begin(), c.deps.end(), k) - c.deps.begin());
      };
      for (NodeId k : nodes) {
        c.self.push_back(pos(k));
        std::vector<std::uint32_t> nb;
        if (coupled)
          for (NodeId j : net.neighbors(k)) nb.push_back(pos(j));
        c.nbrs.push_back(std::move(nb));
      }
      for (NodeId k : c.deps) c.touched.push_back(membership_[k]);
      std::sort(c.touched.begin(), c.touched.end());
      c.touched.erase(std::unique(c.touched.begin(), c.touched.end()), c.touched.end());
    }
  }

  const ContactNetwork& network() const noexcept { return *net_; }
  const CompartmentTransition& transition() const noexcept { return tau_; }
  const TestObsParams& obs_params() const noexcept { return obs_; }
  const Partition& partition() const noexcept { return part_; }
  std::size_t cluster_count() const noexcept { return clusters_.size(); }
  int n_labels() const noexcept { return static_cast<int>(labels_.size()); }
  Compartment compartment(Label j) const { return labels_[j]; }
  Label label(Compartment c) const
  {
    for (std::size_t j = 0; j < labels_.size(); ++j)
      if (labels_[j] == c) return static_cast<Label>(j);
    throw std::domain_error(std::string("GraphEpidemicModel: compartment ") + to_char(c) + " is not a label");
  }

  /// Sorted nodes the cluster transition reads.
  const std::vector<NodeId>& deps(std::size_t l) const { return clusters_[l].deps; }
  /// Clusters that intersect deps(l), ascending.
  const std::vector<std::uint32_t>& touched(std::size_t l) const { return clusters_[l].touched; }
  std::uint32_t cluster_of(NodeId k) const { return membership_[k]; }

  /// Label distribution of every cluster node given the labels of deps(l).
  std::vector<Row4> cluster_rows(std::size_t l, std::span<const Label> dep_labels) const
  {
    const auto& c = clusters_[l];
    std::vector<Row4> rows(c.self.size());
    for (std::size_t i = 0; i < c.self.size(); ++i) {
      int d = 0;
      for (auto j : c.nbrs[i]) d += labels_[dep_labels[j]] == Compartment::I;
      const Row4 r = tau_.row(labels_[dep_labels[c.self[i]]], d);
      Row4 out{};
      for (std::size_t j = 0; j < labels_.size(); ++j) out[j] = r[idx(labels_[j])];
      rows[i] = out;
    }
    return rows;
  }

  /// emit(cluster index, prob) for the successors of a dependency state.
  template <class Emit>
  void cluster_successors(std::size_t l, std::span<const Label> dep_labels, Emit&& emit) const
  {
    const auto rows = cluster_rows(l, dep_labels);
    expand_product(rows, n_labels(), emit);
  }

  /// Samples the next labels of the cluster nodes.
  std::vector<Label> cluster_sample(std::size_t l, std::span<const Label> dep_labels, Rng& rng) const
  {
    const auto rows = cluster_rows(l, dep_labels);
    std::vector<Label> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double u = rng.uniform();
      double acc = 0.0;
      Label last = 0;
      for (int j = 0; j < n_labels(); ++j) {
        if (rows[i][j] <= 0.0) continue;
        last = static_cast<Label>(j);
        acc += rows[i][j];
        if (u < acc) break;
      }
      out[i] = last;
    }
    return out;
  }

  double cluster_likelihood(std::size_t l, std::span<const Label> cluster_labels, std::span<const TestResult> o) const
  {
    const auto& nodes = part_.cluster(l);
    double p = 1.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) p *= test_obs_density(obs_, labels_[cluster_labels[i]], o[nodes[i]]);
    return p;
  }

 private:
  struct Cluster {
    std::vector<NodeId> deps;
    std::vector<std::uint32_t> self;               // position of each cluster node in deps
    std::vector<std::vector<std::uint32_t>> nbrs;  // positions of its neighbours in deps
    std::vector<std::uint32_t> touched;
  };

  const ContactNetwork* net_;
  CompartmentTransition tau_;
  TestObsParams obs_;
  Partition part_;
  std::vector<Compartment> labels_;
  std::vector<std::uint32_t> membership_;
  std::vector<Cluster> clusters_;
};

/// One exact filter step on the joint label space of a single-cluster
/// model.
inline DenseBelief exact_joint_filter_step(const DenseBelief& prior, const GraphEpidemicModel& m,
                                           std::span<const TestResult> o)
{
  if (m.cluster_count() != 1) throw std::domain_error("exact_joint_filter_step: model must have one cluster");
  const LabelCodec codec(m.n_labels(), m.deps(0).size());
  if (prior.size() != codec.states()) throw std::domain_error("exact_joint_filter_step: belief has wrong size");
  std::vector<Label> buf(codec.nodes());
  return standard_filter_step(
      prior,
      [&](std::size_t from, auto&& emit) {
        codec.decode(from, buf);
        m.cluster_successors(0, buf, emit);
      },
      [&](std::size_t y) {
        std::vector<Label> lab(codec.nodes());
        codec.decode(y, lab);
        return m.cluster_likelihood(0, lab, o);
      });
}

}  // namespace gfilt

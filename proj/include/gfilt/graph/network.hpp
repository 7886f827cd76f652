#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gfilt/epi/compartments.hpp"

namespace gfilt {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected contact network stored as compressed adjacency lists.
///
/// Neighbour lists are sorted, symmetric, free of self-loops and duplicates.
/// Optional per-node subpopulation sizes M_k (all >= 1) for the
/// subpopulation models.
class ContactNetwork {
 public:
  ContactNetwork() : offsets_(1, 0) {}

  /// Builds from an arbitrary edge list over nodes [0, n). Self-loops are
  /// dropped and duplicate or reversed edges merged.
  static ContactNetwork from_edges(std::size_t n, std::span<const Edge> edges)
  {
    ContactNetwork g;
    std::vector<std::uint64_t> deg(n + 1, 0);
    for (auto [a, b] : edges) {
      if (a >= n || b >= n) throw std::domain_error("ContactNetwork: edge endpoint out of range");
      if (a == b) {
        ++g.self_loops_;
        continue;
      }
      ++deg[a];
      ++deg[b];
    }
    std::vector<std::uint64_t> off(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) off[k + 1] = off[k] + deg[k];
    std::vector<NodeId> adj(off[n]);
    std::vector<std::uint64_t> pos(off.begin(), off.end() - 1);
    for (auto [a, b] : edges) {
      if (a == b) continue;
      adj[pos[a]++] = b;
      adj[pos[b]++] = a;
    }
    // Sort and deduplicate each list, compacting in place.
    g.offsets_.assign(n + 1, 0);
    std::uint64_t w = 0;
    for (std::size_t k = 0; k < n; ++k) {
      auto first = adj.begin() + static_cast<std::ptrdiff_t>(off[k]);
      auto last = adj.begin() + static_cast<std::ptrdiff_t>(off[k + 1]);
      std::sort(first, last);
      auto end = std::unique(first, last);
      const auto len = static_cast<std::uint64_t>(end - first);
      g.duplicates_ += static_cast<std::uint64_t>(last - end);
      std::move(first, end, adj.begin() + static_cast<std::ptrdiff_t>(w));
      w += len;
      g.offsets_[k + 1] = w;
    }
    adj.resize(w);
    adj.shrink_to_fit();
    g.adj_ = std::move(adj);
    g.duplicates_ /= 2;
    return g;
  }

  static ContactNetwork from_edges(std::size_t n, const std::vector<Edge>& edges)
  {
    return from_edges(n, std::span<const Edge>(edges));
  }

  std::size_t size() const noexcept { return offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return adj_.size() / 2; }

  std::span<const NodeId> neighbors(std::size_t k) const
  {
    return {adj_.data() + offsets_[k], adj_.data() + offsets_[k + 1]};
  }

  std::size_t degree(std::size_t k) const { return offsets_[k + 1] - offsets_[k]; }

  bool has_edge(NodeId a, NodeId b) const
  {
    auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
  }

  /// Self-loops dropped at construction.
  std::uint64_t self_loops_dropped() const noexcept { return self_loops_; }
  /// Duplicate undirected edges merged at construction.
  std::uint64_t duplicates_merged() const noexcept { return duplicates_; }

  bool has_subpop_sizes() const noexcept { return !sizes_.empty(); }

  /// M_k; 1 when no sizes were attached.
  int subpop_size(std::size_t k) const { return sizes_.empty() ? 1 : sizes_[k]; }
  const std::vector<int>& subpop_sizes() const noexcept { return sizes_; }

  void set_subpop_sizes(std::vector<int> m)
  {
    if (m.size() != size()) throw std::domain_error("ContactNetwork: subpopulation size vector has wrong length");
    for (int v : m)
      if (v < 1) throw std::domain_error("ContactNetwork: subpopulation sizes must be >= 1");
    sizes_ = std::move(m);
  }

  std::vector<Edge> edges() const
  {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (std::size_t k = 0; k < size(); ++k)
      for (NodeId l : neighbors(k))
        if (k < l) out.emplace_back(static_cast<NodeId>(k), l);
    return out;
  }

 private:
  std::vector<std::uint64_t> offsets_;
  std::vector<NodeId> adj_;
  std::vector<int> sizes_;
  std::uint64_t self_loops_ = 0;
  std::uint64_t duplicates_ = 0;
};

/// d_k(s): number of neighbours of k in compartment I.
inline int infectious_neighbor_count(const ContactNetwork& net, std::span<const Compartment> s, std::size_t k)
{
  if (s.size() != net.size()) throw std::domain_error("infectious_neighbor_count: state length differs from node count");
  if (k >= net.size()) throw std::domain_error("infectious_neighbor_count: node " + std::to_string(k) + " out of range");
  int d = 0;
  for (NodeId l : net.neighbors(k)) d += s[l] == Compartment::I;
  return d;
}

/// Time-indexed sequence of snapshots over a fixed vertex set.
class DynamicNetwork {
 public:
  DynamicNetwork() = default;
  explicit DynamicNetwork(std::vector<std::shared_ptr<const ContactNetwork>> snaps) : snaps_(std::move(snaps))
  {
    if (snaps_.empty()) throw std::domain_error("DynamicNetwork: no snapshots");
    for (const auto& s : snaps_)
      if (!s || s->size() != snaps_.front()->size())
        throw std::domain_error("DynamicNetwork: snapshots must share the vertex set");
  }

  /// Wraps a static network as a one-snapshot sequence.
  static DynamicNetwork constant(ContactNetwork net)
  {
    return DynamicNetwork({std::make_shared<const ContactNetwork>(std::move(net))});
  }

  std::size_t size() const noexcept { return snaps_.empty() ? 0 : snaps_.front()->size(); }
  std::size_t snapshot_count() const noexcept { return snaps_.size(); }

  /// Snapshot for step n; clamps to the last snapshot.
  const ContactNetwork& snapshot_at(std::size_t n) const
  {
    if (snaps_.empty()) throw std::domain_error("DynamicNetwork: no snapshots");
    return *snaps_[std::min(n, snaps_.size() - 1)];
  }

 private:
  std::vector<std::shared_ptr<const ContactNetwork>> snaps_;
};

/// Nodes grouped by BFS distance from a source; unreachable nodes get -1.
inline std::vector<int> bfs_distances(const ContactNetwork& net, std::size_t src)
{
  std::vector<int> dist(net.size(), -1);
  if (src >= net.size()) throw std::domain_error("bfs_distances: source out of range");
  std::vector<NodeId> frontier{static_cast<NodeId>(src)}, next;
  dist[src] = 0;
  for (int d = 1; !frontier.empty(); ++d) {
    next.clear();
    for (NodeId u : frontier)
      for (NodeId v : net.neighbors(u))
        if (dist[v] < 0) {
          dist[v] = d;
          next.push_back(v);
        }
    frontier.swap(next);
  }
  return dist;
}

}  // namespace gfilt

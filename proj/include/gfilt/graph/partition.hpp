#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfilt/graph/network.hpp"

namespace gfilt {

/// Disjoint clusters C_1..C_p covering the node set.
class Partition {
 public:
  Partition() = default;

  /// Unchecked; call validate() on untrusted input.
  explicit Partition(std::vector<std::vector<NodeId>> clusters) : clusters_(std::move(clusters))
  {
    for (auto& c : clusters_) std::sort(c.begin(), c.end());
  }

  std::size_t cluster_count() const noexcept { return clusters_.size(); }
  const std::vector<NodeId>& cluster(std::size_t l) const { return clusters_[l]; }
  const std::vector<std::vector<NodeId>>& clusters() const noexcept { return clusters_; }

  /// Node -> cluster index. Requires a valid partition of [0, n).
  std::vector<std::uint32_t> membership(std::size_t n) const
  {
    std::vector<std::uint32_t> m(n, 0);
    for (std::size_t l = 0; l < clusters_.size(); ++l)
      for (NodeId k : clusters_[l]) m[k] = static_cast<std::uint32_t>(l);
    return m;
  }

  bool is_singletons() const noexcept
  {
    return std::all_of(clusters_.begin(), clusters_.end(), [](const auto& c) { return c.size() == 1; });
  }

 private:
  std::vector<std::vector<NodeId>> clusters_;
};

/// The finest partition {{0}, ..., {L-1}}.
inline Partition singleton_partition(std::size_t L)
{
  std::vector<std::vector<NodeId>> c(L);
  for (std::size_t k = 0; k < L; ++k) c[k] = {static_cast<NodeId>(k)};
  return Partition(std::move(c));
}

/// The coarsest partition {{0, ..., L-1}}.
inline Partition single_cluster_partition(std::size_t L)
{
  std::vector<NodeId> all(L);
  for (std::size_t k = 0; k < L; ++k) all[k] = static_cast<NodeId>(k);
  return Partition({std::move(all)});
}

struct PartitionReport {
  bool ok = true;
  bool empty = false;                // no clusters, or an empty cluster
  std::vector<NodeId> overlaps;      // nodes in more than one cluster
  std::vector<NodeId> gaps;          // nodes in no cluster
  std::vector<std::uint64_t> out_of_range;

  std::string describe() const
  {
    if (ok) return "ok";
    std::string s;
    auto list = [&](const char* what, const auto& v) {
      if (v.empty()) return;
      s += what;
      for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += " " + std::to_string(v[i]);
      if (v.size() > 20) s += " ...";
      s += "; ";
    };
    if (empty) s += "empty cluster; ";
    list("overlap at", overlaps);
    list("gap at", gaps);
    list("out of range", out_of_range);
    return s;
  }
};

inline PartitionReport validate(const Partition& p, std::size_t L)
{
  PartitionReport r;
  std::vector<std::uint32_t> seen(L, 0);
  if (p.cluster_count() == 0) r.empty = true;
  for (const auto& c : p.clusters()) {
    if (c.empty()) r.empty = true;
    for (NodeId k : c) {
      if (k >= L) {
        r.out_of_range.push_back(k);
        continue;
      }
      if (++seen[k] == 2) r.overlaps.push_back(k);
    }
  }
  for (std::size_t k = 0; k < L; ++k)
    if (seen[k] == 0) r.gaps.push_back(static_cast<NodeId>(k));
  r.ok = !r.empty && r.overlaps.empty() && r.gaps.empty() && r.out_of_range.empty();
  return r;
}

/// True when every cluster of `fine` lies inside one cluster of `coarse`.
/// Both must be valid partitions of [0, L).
inline bool refines(const Partition& fine, const Partition& coarse, std::size_t L)
{
  const auto m = coarse.membership(L);
  for (const auto& c : fine.clusters())
    for (NodeId k : c)
      if (m[k] != m[c.front()]) return false;
  return true;
}

}  // namespace gfilt

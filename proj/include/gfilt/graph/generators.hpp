#pragma once

// Deterministic synthetic contact networks. Preferential attachment gives
// the heavy-tailed degree profile of air-route and social graphs at a
// chosen size.

#include <algorithm>
#include <vector>

#include "gfilt/graph/network.hpp"
#include "gfilt/prob/rng.hpp"

namespace gfilt {

/// Barabasi-Albert style graph: each new node attaches to m distinct
/// existing nodes chosen proportionally to degree. Seeded by a clique of
/// m + 1 nodes.
inline ContactNetwork preferential_attachment(std::size_t n, std::size_t m, std::uint64_t seed)
{
  Rng rng = Rng::keyed({0x9a7f, seed});
  std::vector<Edge> edges;
  std::vector<NodeId> ends;  // each endpoint once per incident edge
  edges.reserve(n * m);
  ends.reserve(2 * n * m);
  const std::size_t core = std::min(n, m + 1);
  for (std::size_t a = 0; a < core; ++a)
    for (std::size_t b = a + 1; b < core; ++b) {
      edges.emplace_back(a, b);
      ends.push_back(static_cast<NodeId>(a));
      ends.push_back(static_cast<NodeId>(b));
    }
  std::vector<NodeId> picked;
  for (std::size_t v = core; v < n; ++v) {
    picked.clear();
    while (picked.size() < m) {
      const NodeId u = ends[rng.below(ends.size())];
      if (std::find(picked.begin(), picked.end(), u) == picked.end()) picked.push_back(u);
    }
    for (NodeId u : picked) {
      edges.emplace_back(static_cast<NodeId>(v), u);
      ends.push_back(static_cast<NodeId>(v));
      ends.push_back(u);
    }
  }
  return ContactNetwork::from_edges(n, edges);
}

/// 2,905 nodes, about 15.6k edges (OpenFlights scale).
inline ContactNetwork openflights_scale(std::uint64_t seed = 1) { return preferential_attachment(2905, 5, seed); }

/// 1.1M nodes, about 3.4M edges (Youtube scale).
inline ContactNetwork youtube_scale(std::uint64_t seed = 1) { return preferential_attachment(1100000, 3, seed); }

/// Erdos-Renyi G(n, p) for small randomized unit tests.
inline ContactNetwork random_graph(std::size_t n, double p, Rng& rng)
{
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (rng.uniform() < p) edges.emplace_back(a, b);
  return ContactNetwork::from_edges(n, edges);
}

inline ContactNetwork path_graph(std::size_t n)
{
  std::vector<Edge> e;
  for (std::size_t k = 0; k + 1 < n; ++k) e.emplace_back(k, k + 1);
  return ContactNetwork::from_edges(n, e);
}

inline ContactNetwork cycle_graph(std::size_t n)
{
  std::vector<Edge> e;
  for (std::size_t k = 0; k < n; ++k) e.emplace_back(k, (k + 1) % n);
  return ContactNetwork::from_edges(n, e);
}

inline ContactNetwork star_graph(std::size_t leaves)
{
  std::vector<Edge> e;
  for (std::size_t k = 1; k <= leaves; ++k) e.emplace_back(0, k);
  return ContactNetwork::from_edges(leaves + 1, e);
}

/// Zachary's karate club: 34 members, 78 friendships.
inline ContactNetwork karate_club()
{
  static const std::vector<Edge> edges{
      {0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}, {0, 7}, {0, 8}, {0, 10}, {0, 11}, {0, 12}, {0, 13},
      {0, 17}, {0, 19}, {0, 21}, {0, 31}, {1, 2}, {1, 3}, {1, 7}, {1, 13}, {1, 17}, {1, 19}, {1, 21},
      {1, 30}, {2, 3}, {2, 7}, {2, 8}, {2, 9}, {2, 13}, {2, 27}, {2, 28}, {2, 32}, {3, 7}, {3, 12},
      {3, 13}, {4, 6}, {4, 10}, {5, 6}, {5, 10}, {5, 16}, {6, 16}, {8, 30}, {8, 32}, {8, 33}, {9, 33},
      {13, 33}, {14, 32}, {14, 33}, {15, 32}, {15, 33}, {18, 32}, {18, 33}, {19, 33}, {20, 32}, {20, 33},
      {22, 32}, {22, 33}, {23, 25}, {23, 27}, {23, 29}, {23, 32}, {23, 33}, {24, 25}, {24, 27}, {24, 31},
      {25, 31}, {26, 29}, {26, 33}, {27, 33}, {28, 31}, {28, 33}, {29, 32}, {29, 33}, {30, 32}, {30, 33},
      {31, 32}, {31, 33}, {32, 33}};
  return ContactNetwork::from_edges(34, edges);
}

}  // namespace gfilt

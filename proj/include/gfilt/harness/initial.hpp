#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gfilt/epi/observations.hpp"
#include "gfilt/factored/seirs_closed_form.hpp"
#include "gfilt/graph/network.hpp"
#include "gfilt/prob/distributions.hpp"

namespace gfilt {

/// Compartment distributions by distance from patient zero: index 0 is
/// patient zero, 1 and 2 the nodes that many steps away, 3 everything
/// further or unreachable.
using DistanceProfile = std::array<Row4, 4>;

inline constexpr DistanceProfile seirs_distance_profile{{
    {0.29, 0.4, 0.3, 0.01},
    {0.49, 0.3, 0.2, 0.01},
    {0.69, 0.2, 0.1, 0.01},
    {0.97, 0.01, 0.01, 0.01},
}};

inline std::vector<std::size_t> distance_classes(const ContactNetwork& net, NodeId patient_zero)
{
  const auto dist = bfs_distances(net, patient_zero);
  std::vector<std::size_t> out(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) out[k] = dist[k] < 0 || dist[k] > 2 ? 3 : static_cast<std::size_t>(dist[k]);
  return out;
}

/// Categorical node beliefs assigned by distance from patient zero.
inline NodeBeliefs initial_belief_seirs(const ContactNetwork& net, NodeId patient_zero,
                                       const DistanceProfile& profile = seirs_distance_profile)
{
  const auto cls = distance_classes(net, patient_zero);
  NodeBeliefs out(cls.size());
  for (std::size_t k = 0; k < cls.size(); ++k) out[k] = profile[cls[k]];
  return out;
}

/// Dirichlet node beliefs whose concentrations are the profile vectors.
inline std::vector<DirichletParams> initial_dirichlet_seirs(const ContactNetwork& net, NodeId patient_zero,
                                                            const DistanceProfile& profile = seirs_distance_profile)
{
  const auto cls = distance_classes(net, patient_zero);
  std::vector<DirichletParams> out;
  out.reserve(cls.size());
  for (auto c : cls) out.emplace_back(profile[c]);
  return out;
}

struct SisStart {
  std::size_t step = 0;  // first step whose positive count exceeds the threshold
  NodeBeliefs beliefs;   // S and I mass in slots 0 and 2
};

/// Starting point of an SIS filter from the test stream: the first step
/// with more than `threshold` positive tests, and the prior (S, I)
/// updated by that step's outcomes. observations[n] holds the outcomes of
/// step n. nullopt when the threshold is never crossed.
inline std::optional<SisStart> sis_initialization(std::span<const std::vector<TestResult>> observations,
                                                  const TestObsParams& obs, int threshold = 3,
                                                  std::array<double, 2> prior = {0.9, 0.1})
{
  for (std::size_t n = 0; n < observations.size(); ++n) {
    const auto& o = observations[n];
    int positives = 0;
    for (auto r : o) positives += r == TestResult::Positive;
    if (positives <= threshold) continue;
    const NodeBeliefs pred(o.size(), Row4{prior[0], 0.0, prior[1], 0.0});
    return SisStart{n, seirs_observation_update_closed_form(pred, obs, o)};
  }
  return std::nullopt;
}

}  // namespace gfilt

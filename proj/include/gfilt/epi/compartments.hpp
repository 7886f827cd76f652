#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gfilt {

/// Epidemic compartment label. SIS models use the {S, I} restriction.
enum class Compartment : std::uint8_t { S = 0, E = 1, I = 2, R = 3 };

inline constexpr int n_compartments = 4;

/// Per-compartment values (probabilities, likelihoods, simplex coordinates).
using Row4 = std::array<double, 4>;

inline constexpr int idx(Compartment c) noexcept { return static_cast<int>(c); }

inline constexpr std::array<Compartment, 4> all_compartments{Compartment::S, Compartment::E, Compartment::I,
                                                             Compartment::R};

inline char to_char(Compartment c) noexcept { return "SEIR"[idx(c)]; }

inline Compartment compartment_from_char(char ch)
{
  switch (ch) {
    case 'S': return Compartment::S;
    case 'E': return Compartment::E;
    case 'I': return Compartment::I;
    case 'R': return Compartment::R;
  }
  throw std::domain_error(std::string("unknown compartment '") + ch + "'");
}

}  // namespace gfilt

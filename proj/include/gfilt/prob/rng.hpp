#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace gfilt {

/// SplitMix64 finalizer. Used to derive stream keys and to seed Rng state.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ generator with keyed stream derivation.
///
/// Streams are addressed by a sequence of integer ids (seed, run, step,
/// particle, ...). Two generators built from the same key sequence produce
/// the same numbers regardless of which thread uses them, which is what
/// keeps experiment output independent of the worker count.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  static Rng keyed(std::initializer_list<std::uint64_t> ids)
  {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto id : ids) h = mix64(h ^ mix64(id + 0x2545f4914f6cdd1dULL));
    return Rng(h);
  }

  /// Independent child stream. Does not advance this generator.
  [[nodiscard]] Rng child(std::uint64_t id) const
  {
    std::uint64_t h = mix64(s_[0] ^ mix64(id));
    h = mix64(h ^ s_[1]);
    h = mix64(h ^ s_[2] ^ (s_[3] << 1));
    return Rng(h);
  }

  /// Draw a fresh key from this stream (advances it). Children built from
  /// the key are independent of the parent's subsequent output.
  [[nodiscard]] std::uint64_t next_key() { return mix64((*this)()); }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept
  {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1).
  double uniform_pos() noexcept
  {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform index in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept
  {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t thresh = (0 - n) % n;
      while (lo < thresh) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool operator==(const Rng& o) const noexcept { return s_ == o.s_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
  {
    return (x << k) | (x >> (64 - k));
  }

  void reseed(std::uint64_t seed) noexcept
  {
    std::uint64_t z = seed;
    for (auto& w : s_) {
      z += 0x9e3779b97f4a7c15ULL;
      w = mix64(z);
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace gfilt

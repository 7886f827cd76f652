#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "gfilt/epi/compartments.hpp"
#include "gfilt/epi/params.hpp"
#include "gfilt/prob/distributions.hpp"

namespace gfilt {

enum class TestResult : std::uint8_t { Positive = 0, Negative = 1, Unknown = 2 };

inline char to_char(TestResult o)
{
  return o == TestResult::Positive ? '+' : o == TestResult::Negative ? '-' : '?';
}

// ---------------------------------------------------------------------------
// Test outcomes on compartment labels

/// (P(+), P(-), P(?)) for a node in compartment c.
inline std::array<double, 3> test_obs_row(const TestObsParams& p, Compartment c)
{
  switch (c) {
    case Compartment::S: return {p.alpha_S * p.lambda_FP, p.alpha_S * (1.0 - p.lambda_FP), 1.0 - p.alpha_S};
    case Compartment::E: return {p.alpha_E * (1.0 - p.lambda_FN), p.alpha_E * p.lambda_FN, 1.0 - p.alpha_E};
    case Compartment::I: return {p.alpha_I * (1.0 - p.lambda_FN), p.alpha_I * p.lambda_FN, 1.0 - p.alpha_I};
    case Compartment::R: return {p.alpha_R * p.lambda_FP, p.alpha_R * (1.0 - p.lambda_FP), 1.0 - p.alpha_R};
  }
  return {0.0, 0.0, 1.0};
}

inline double test_obs_density(const TestObsParams& p, Compartment c, TestResult o)
{
  return test_obs_row(p, c)[static_cast<int>(o)];
}

/// Likelihood of outcome o as a function of the compartment.
inline Row4 test_obs_likelihood(const TestObsParams& p, TestResult o)
{
  Row4 out{};
  for (Compartment c : all_compartments) out[idx(c)] = test_obs_density(p, c, o);
  return out;
}

/// Test outcome distribution for a node labelled by a categorical
/// distribution y over compartments: sum_c y_c P(o | c).
inline double test_obs_density_simplex(const TestObsParams& p, const Row4& y, TestResult o)
{
  double out = 0.0;
  for (Compartment c : all_compartments) out += y[idx(c)] * test_obs_density(p, c, o);
  return out;
}

inline double test_obs_density_simplex(const TestObsParams& p, const Simplex3& y, TestResult o)
{
  return test_obs_density_simplex(p, y.values(), o);
}

inline TestResult sample_test_obs(const TestObsParams& p, Compartment c, Rng& rng)
{
  const auto r = test_obs_row(p, c);
  const double u = rng.uniform();
  if (u < r[0]) return TestResult::Positive;
  if (u < r[0] + r[1]) return TestResult::Negative;
  return TestResult::Unknown;
}

// ---------------------------------------------------------------------------
// Simplex-valued observations

inline DirichletParams scaled_concentration(double C, const Row4& s)
{
  if (!(C > 0.0)) throw std::domain_error("observation scale C must be positive");
  return DirichletParams(C * s[0], C * s[1], C * s[2], C * s[3]);
}

/// Dir(C s)(o).
inline double log_dirichlet_obs_density(double C, const Simplex3& s, const Simplex3& o)
{
  return log_dirichlet_density(scaled_concentration(C, s.values()), o);
}

inline double dirichlet_obs_density(double C, const Simplex3& s, const Simplex3& o)
{
  return std::exp(log_dirichlet_obs_density(C, s, o));
}

/// Linear observation-mixing model. Row p gives the probabilities that a
/// node in compartment p is reported as compartment q (q < 4) or as
/// unknown (q = 4). The reported proportions are Dirichlet distributed
/// around the mixed vector with scale C.
class MixtureObsModel {
 public:
  using Matrix = std::array<std::array<double, 5>, 4>;

  MixtureObsModel(const Matrix& lambda, double C) : lambda_(lambda), C_(C)
  {
    if (!(C > 0.0)) throw std::domain_error("MixtureObsModel: C must be positive");
    for (int p = 0; p < 4; ++p) {
      double s = 0.0;
      for (double v : lambda_[p]) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("MixtureObsModel: lambda entries must lie in [0, 1]");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw std::domain_error("MixtureObsModel: lambda row " + std::to_string(p) + " sums to " + std::to_string(s));
    }
  }

  const Matrix& lambda() const noexcept { return lambda_; }
  double scale() const noexcept { return C_; }

  /// beta_q = sum_p lambda_pq s_p for q = 1..5.
  std::array<double, 5> mixed(const Row4& s) const noexcept
  {
    std::array<double, 5> b{};
    for (int q = 0; q < 5; ++q)
      for (int p = 0; p < 4; ++p) b[q] += lambda_[p][q] * s[p];
    return b;
  }

  /// Density at a reported proportion vector o, or at '?' when o is empty.
  /// A zero mixed component on the simplex branch leaves the Dirichlet
  /// undefined and throws.
  double density(const Row4& s, const std::optional<Simplex3>& o) const
  {
    const auto b = mixed(s);
    if (!o) return b[4];
    const double known = b[0] + b[1] + b[2] + b[3];
    if (known <= 0.0) return 0.0;
    return known * dirichlet_density(DirichletParams(C_ * b[0], C_ * b[1], C_ * b[2], C_ * b[3]), *o);
  }

  std::optional<Simplex3> sample(const Row4& s, Rng& rng) const
  {
    const auto b = mixed(s);
    if (rng.uniform() < b[4]) return std::nullopt;
    return dirichlet_sample(DirichletParams(C_ * b[0], C_ * b[1], C_ * b[2], C_ * b[3]), rng);
  }

 private:
  Matrix lambda_;
  double C_;
};

// ---------------------------------------------------------------------------
// Count observations

/// Mult(m, s)(o).
inline double counts_obs_density(int m, const Simplex3& s, const Counts4& o)
{
  return multinomial_density(m, s, o);
}

// ---------------------------------------------------------------------------
// Observation space selection

struct TestObsSpec {
  TestObsParams params;
};

/// Dirichlet observations, present at each node with probability alpha.
struct DirichletObsSpec {
  double C = 10.0;
  double alpha = 1.0;
};

struct MixtureObsSpec {
  MixtureObsModel model;
};

/// Multinomial counts of m draws, present with probability alpha.
struct CountsObsSpec {
  int m = 5;
  double alpha = 1.0;
};

using ObsSpaceSpec = std::variant<TestObsSpec, DirichletObsSpec, MixtureObsSpec, CountsObsSpec>;

inline void validate(const ObsSpaceSpec& spec)
{
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TestObsSpec>) s.params.validate();
        if constexpr (std::is_same_v<T, DirichletObsSpec>) {
          if (!(s.C > 0.0)) throw std::domain_error("Dirichlet observation scale C must be positive");
          detail::check_prob(s.alpha, "alpha");
        }
        if constexpr (std::is_same_v<T, CountsObsSpec>) {
          if (s.m < 0) throw std::domain_error("count observations need m >= 0");
          detail::check_prob(s.alpha, "alpha");
        }
      },
      spec);
}

}  // namespace gfilt

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace gfilt {

namespace detail {
inline void check_prob(double v, const char* what)
{
  if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(what) + " must lie in [0, 1], got " + std::to_string(v));
}
}  // namespace detail

/// SEIRS rates: transmission per infectious contact, E->I, I->R, R->S,
/// each a probability per time step.
struct SeirsParams {
  double beta = 0, sigma = 0, gamma = 0, rho = 0;

  void validate() const
  {
    detail::check_prob(beta, "beta");
    detail::check_prob(sigma, "sigma");
    detail::check_prob(gamma, "gamma");
    detail::check_prob(rho, "rho");
  }
};

/// SIS rates: transmission per infectious contact and I->S recovery.
struct SisParams {
  double beta = 0, gamma = 0;

  void validate() const
  {
    detail::check_prob(beta, "beta");
    detail::check_prob(gamma, "gamma");
  }
};

/// Testing model: fraction of each compartment tested per step and the
/// false positive / false negative rates of the test.
struct TestObsParams {
  double alpha_S = 0, alpha_E = 0, alpha_I = 0, alpha_R = 0;
  double lambda_FP = 0, lambda_FN = 0;

  void validate() const
  {
    detail::check_prob(alpha_S, "alpha_S");
    detail::check_prob(alpha_E, "alpha_E");
    detail::check_prob(alpha_I, "alpha_I");
    detail::check_prob(alpha_R, "alpha_R");
    detail::check_prob(lambda_FP, "lambda_FP");
    detail::check_prob(lambda_FN, "lambda_FN");
  }
};

/// Subpopulation contact model: within-node and between-node contact
/// probabilities and the Dirichlet concentration scale K.
struct SubpopParams {
  double kappa1 = 1, kappa2 = 1, K = 1;

  void validate() const
  {
    detail::check_prob(kappa1, "kappa1");
    detail::check_prob(kappa2, "kappa2");
    if (!(K > 0.0) || !std::isfinite(K)) throw std::domain_error("K must be positive");
  }
};

}  // namespace gfilt

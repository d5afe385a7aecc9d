#pragma once

#include <cstdint>
#include <vector>

#include "lgnb/model.hpp"
#include "lgnb/rng.hpp"

namespace lgnb {

/// Maximum likelihood fit of a Poisson or NB log-linear regression.
/// For NB the mean is exp(x^T beta) and Var = mu + phi_disp mu^2.
struct MleFit {
  Vector beta;
  double phi_disp = 0.0;     ///< inverse dispersion 1/r; 0 for Poisson
  bool converged = false;
  bool boundary = false;     ///< NB fit collapsed to the Poisson limit
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  double log_likelihood = 0.0;

  double r() const;  ///< 1/phi_disp, infinite on the Poisson boundary
};

double poisson_log_likelihood(const Dataset& data, const Vector& beta);
Vector poisson_score(const Dataset& data, const Vector& beta);

/// NB log-likelihood in the (mean, inverse dispersion) parameterization.
double nb_log_likelihood(const Dataset& data, const Vector& beta, double phi_disp);

/// Newton-Raphson with step halving. Rank-deficient X throws DomainError.
MleFit fit_poisson_mle(const Dataset& data, double tol = 1e-9, std::size_t max_iter = 100);

/// Joint Newton-Raphson on (beta, ln phi_disp), started from the Poisson fit.
/// When the phi-score at the Poisson fit is non-positive (no overdispersion)
/// the Poisson fit is returned with phi_disp = 0 and `boundary` set.
MleFit fit_nb_mle(const Dataset& data, double tol = 1e-8, std::size_t max_iter = 200);

/// beta-only Newton fit with the dispersion held at r.
MleFit fit_nb_fixed_r(const Dataset& data, double r, double tol = 1e-9,
                      std::size_t max_iter = 100);

/// Point estimate of r for a univariate sample; `boundary` flags the
/// r -> infinity (Poisson) limit, in which case r is +infinity.
struct DispersionEstimate {
  double r = 0.0;
  bool boundary = false;
};

/// mean^2 / (variance - mean). Throws DomainError when variance <= mean.
double estimate_r_mme(const UnivariateSample& sample);

/// NB log-likelihood with p profiled out at p(r) = mean / (r + mean).
double nb_profile_log_likelihood(const UnivariateSample& sample, double r);

/// Root of the profile score in ln r, bracketed and solved with TOMS 748.
DispersionEstimate estimate_r_mle_univariate(const UnivariateSample& sample);

/// Root in r of sum (y_i - ybar)^2 / (ybar (1 + ybar / r)) = N - 1.
DispersionEstimate estimate_r_mqle(const UnivariateSample& sample);

struct UnivariateGibbsConfig {
  std::size_t iterations = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 5;
  std::uint64_t seed = 0;
  double r_init = 1.0;
};

struct UnivariateTrace {
  std::vector<double> r;
  std::vector<double> p;
};

/// y_i ~ NB(r, p), r ~ Gamma(a0, 1/b0), p ~ Beta(beta_a, beta_b). Alternates
/// L_i | r, then r | L, p, then p | r (Beta(a + sum y, b + N r)).
UnivariateTrace univariate_gibbs(const UnivariateSample& sample, const Hyperparameters& hyper,
                                 const UnivariateGibbsConfig& config, RngStream& rng);

struct UnivariateVbConfig {
  std::size_t max_sweeps = 1000;
  double tolerance = 1e-12;
  double r_init = 1.0;
};

struct UnivariateVbResult {
  double a_tilde = 0.0, h_tilde = 0.0;         ///< Q_r = Gamma(shape, rate)
  double alpha_tilde = 0.0, beta_tilde = 0.0;  ///< Q_p = Beta
  std::vector<double> elbo;
  std::size_t sweeps = 0;
  bool converged = false;

  double e_r() const { return a_tilde / h_tilde; }
};

/// Closed-form coordinate ascent for the univariate model; the bound is
/// evaluated exactly each sweep.
UnivariateVbResult univariate_vb(const UnivariateSample& sample, const Hyperparameters& hyper,
                                 const UnivariateVbConfig& config);

}  // namespace lgnb

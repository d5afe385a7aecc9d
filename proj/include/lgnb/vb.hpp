#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "lgnb/crt_tables.hpp"
#include "lgnb/model.hpp"
#include "lgnb/rng.hpp"

namespace lgnb {

/// Mean-field factors of the LGNB posterior. Gamma factors are (shape, rate).
/// Q_omega has no analytic parameters; only <omega_i> is kept.
struct VbPosterior {
  double a_tilde = 1.0, h_tilde = 1.0;  ///< Q_r
  double b_tilde = 1.0, g_tilde = 1.0;  ///< Q_h
  double e_tilde = 1.0, f_tilde = 1.0;  ///< Q_phi
  Vector c_tilde, d_tilde;              ///< Q_alpha_p
  Vector mu_tilde, sigma_tilde;         ///< Q_psi, diagonal variances
  Vector mu_beta;                       ///< Q_beta mean
  Matrix sigma_beta;                    ///< Q_beta covariance
  std::optional<double> fixed_r;        ///< point mass for r when held fixed

  // Expectations cached by the last sweep.
  Vector e_omega;        ///< <omega_i>
  Vector e_table;        ///< <L_i>
  Vector e_log1p_exp;    ///< <ln(1 + e^psi_i)>
  Vector e_tanh_ratio;   ///< <tanh(psi_i/2) / (2 psi_i)>

  double e_r() const;
  double e_log_r() const;
  /// exp(<ln r>), the value the table distribution is evaluated at.
  double r_tilde() const { return std::exp(e_log_r()); }
  double e_h() const { return b_tilde / g_tilde; }
  double e_log_h() const;
  double e_phi() const { return e_tilde / f_tilde; }
  double e_log_phi() const;
  /// <1/phi> = <sigma^2>; infinite when e_tilde <= 1.
  double e_sigma2() const;
  Vector e_alpha() const { return c_tilde.cwiseQuotient(d_tilde); }
};

struct VbConfig {
  std::size_t max_sweeps = 500;
  double tolerance = 1e-6;
  std::size_t smoothing_window = 5;
  std::size_t n_mc = 1000;
  std::uint64_t seed = 0;
  double r_init = 100.0;
  /// Reuse the same base normals for the MC expectations every sweep, which
  /// turns the iteration into a deterministic fixed-point map.
  bool common_random_numbers = true;
  std::optional<double> fixed_r;

  void validate() const;
};

struct PsiExpectations {
  double log1p_exp = 0.0;    ///< <ln(1 + e^psi)>
  double tanh_ratio = 0.0;   ///< <tanh(psi/2) / (2 psi)>
  double log1p_exp_se = 0.0;
  double tanh_ratio_se = 0.0;
};

/// Monte Carlo averages under psi ~ N(mu, sigma2) using antithetic pairs
/// (psi, 2 mu - psi). sigma2 = 0 gives the point-mass values exactly.
PsiExpectations mc_psi_expectations(double mu, double sigma2, std::size_t n_mc, RngStream& rng);

/// Starting factors: <r> = r_init, <phi> = <h> = <alpha_p> = 1,
/// Q_psi = N(0, 1), Q_beta = N(0, I).
VbPosterior initial_posterior(const Dataset& data, const VbConfig& config);

/// One coordinate-ascent pass: <L>, Q_r, <omega>, Q_psi, Q_beta, Q_h, Q_phi, Q_alpha.
/// `table` must be built at post.r_tilde() (ignored when r is fixed).
/// Per-observation MC streams are derived from `mc_base`.
void vb_sweep(VbPosterior& post, const Dataset& data, const Hyperparameters& hyper,
              const RrTable* table, const VbConfig& config, const RngStream& mc_base);

struct ElboEstimate {
  double value = 0.0;
  double mc_se = 0.0;  ///< standard error of the Monte Carlo terms
};

/// Lower bound on ln p(y) for the current factors, with the NB likelihood
/// kept in collapsed form. lgamma(y + r) - lgamma(r) and ln(1 + e^psi) are
/// averaged by MC; everything else is closed form (see docs/elbo.md).
ElboEstimate elbo(const VbPosterior& post, const Dataset& data, const Hyperparameters& hyper,
                  std::size_t n_mc, const RngStream& mc_base);

struct VbResult {
  VbPosterior posterior;
  std::vector<double> elbo;           ///< per-sweep estimates
  std::vector<double> elbo_se;        ///< per-sweep MC standard errors
  std::vector<double> elbo_smoothed;  ///< trailing window means
  std::size_t sweeps = 0;
  bool converged = false;
};

/// Iterates vb_sweep until the relative change of the smoothed bound is at
/// most `tolerance` or max_sweeps is hit. Non-convergence is flagged.
VbResult run_vb(const Dataset& data, const Hyperparameters& hyper, const VbConfig& config);

/// Draws from the fitted factors, used for posterior summaries.
struct VbSamples {
  std::vector<double> r, sigma2, kappa;
  Matrix beta;
};
VbSamples sample_vb_posterior(const VbPosterior& post, std::size_t count, RngStream& rng);

}  // namespace lgnb

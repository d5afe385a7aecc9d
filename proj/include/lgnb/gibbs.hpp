#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lgnb/crt_tables.hpp"
#include "lgnb/model.hpp"
#include "lgnb/rng.hpp"
#include "lgnb/stat_kernels.hpp"

namespace lgnb {

/// One full assignment of the latent variables of the LGNB model.
/// The lognormal random effect is folded into psi_i = x_i^T beta + ln eps_i.
struct GibbsState {
  double r = 100.0;          ///< NB dispersion
  double h = 1.0;            ///< gamma rate hyper of r
  double phi = 1.0;          ///< lognormal precision, sigma^2 = 1/phi
  Vector beta;               ///< P+1 coefficients
  Vector alpha;              ///< P+1 coefficient precisions
  Vector psi;                ///< N logits of p_i
  Vector omega;              ///< N Polya-Gamma auxiliaries
  Counts L;                  ///< N table counts, 0 <= L_i <= y_i
};

struct GibbsConfig {
  std::size_t iterations = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 5;
  std::uint64_t seed = 0;
  int pg_truncation = kDefaultPgTruncation;
  double r_init = 100.0;
  /// Hold r at this value and skip the L and r updates (r -> infinity proxy
  /// for the lognormal-Poisson limit).
  std::optional<double> fixed_r;

  void validate() const;
  std::size_t retained() const;
};

/// Post burn-in, thinned draws. Row k of `beta`/`alpha` is draw k.
struct GibbsTrace {
  std::vector<double> r, h, phi, sigma2, kappa;
  Matrix beta;
  Matrix alpha;
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 0;
  std::uint64_t seed = 0;
  std::optional<double> fixed_r;

  std::size_t size() const { return r.size(); }
};

/// r = r_init (or fixed_r), h = phi = alpha_p = 1, beta_p ~ N(0, 1), psi = X beta,
/// omega from one PG(y_i + r, psi_i) draw, L = 0.
GibbsState initial_state(const Dataset& data, const GibbsConfig& config, RngStream& rng);

/// L_i from row y_i of the table (built at the current r).
void update_table_counts(GibbsState& state, const Dataset& data, const RrTable& table,
                         RngStream& rng);
/// omega_i ~ PG(y_i + r, psi_i) at the current r and psi.
void update_pg_auxiliaries(GibbsState& state, const Dataset& data, int pg_truncation,
                           RngStream& rng);
/// update_table_counts then update_pg_auxiliaries. `table` may be null when
/// r is held fixed; then L is left untouched.
void update_augmentation(GibbsState& state, const Dataset& data, const RrTable* table,
                         int pg_truncation, RngStream& rng);

/// r | L, psi, h (skipped when `hold_r`), then h | r, then phi | psi, beta.
void update_structural(GibbsState& state, const Dataset& data, const Hyperparameters& hyper,
                       RngStream& rng, bool hold_r = false);

/// psi | omega, r, phi, beta. The posterior covariance (phi I + Omega)^-1 is
/// diagonal, so each psi_i is an independent normal draw.
void sample_psi(GibbsState& state, const Dataset& data, RngStream& rng);
/// beta | psi, phi, alpha through a Cholesky factor of phi X^T X + diag(alpha).
void sample_beta(GibbsState& state, const Dataset& data, RngStream& rng);
/// alpha_p | beta_p.
void sample_alpha(GibbsState& state, const Hyperparameters& hyper, RngStream& rng);

/// sample_psi, sample_beta, sample_alpha in that order.
void update_regression(GibbsState& state, const Dataset& data, const Hyperparameters& hyper,
                       RngStream& rng);

/// Full sampler. Per iteration: L, then r, h, phi, then omega, then psi,
/// beta, alpha. The r draw integrates omega out, so omega is refreshed at
/// the new r before psi uses it.
GibbsTrace run_gibbs(const Dataset& data, const Hyperparameters& hyper, const GibbsConfig& config,
                     RngStream& rng);
GibbsTrace run_gibbs(const Dataset& data, const Hyperparameters& hyper, const GibbsConfig& config);

/// k independent chains on streams derived from config.seed, run concurrently.
std::vector<GibbsTrace> run_gibbs_chains(const Dataset& data, const Hyperparameters& hyper,
                                         const GibbsConfig& config, std::size_t chains);

/// Concatenates traces (pooled summaries across chains).
GibbsTrace pool_traces(const std::vector<GibbsTrace>& traces);

}  // namespace lgnb

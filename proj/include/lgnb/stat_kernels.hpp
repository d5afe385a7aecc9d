#pragma once

#include <cstdint>

#include "lgnb/rng.hpp"

namespace lgnb {

/// Default number of terms kept in the Polya-Gamma infinite gamma sum.
inline constexpr int kDefaultPgTruncation = 2000;

/// Parameters of a truncated Polya-Gamma draw PG(b, c).
struct PgParams {
  double b = 1.0;   ///< shape, y_i + r in the regression model
  double c = 0.0;   ///< exponential tilt, psi_i in the regression model
  int truncation = kDefaultPgTruncation;
};

/// ln(1 + e^x) without overflow for large x or cancellation for very negative x.
double log1p_exp(double x);

/// Logistic function 1 / (1 + e^-x).
double logistic(double x);

/// tanh(x/2) / (2x), with the removable singularity at 0 filled in as 1/4.
double pg_tilt_ratio(double x);

/// log NB(y; r, p) = lgamma(r+y) - lgamma(r) - lgamma(y+1) + r ln(1-p) + y ln p.
double nb_log_pmf(std::uint64_t y, double r, double p);

/// Same pmf with p expressed through its logit psi; never forms p itself.
double nb_log_pmf_logit(std::uint64_t y, double r, double psi);

/// Logarithmic distribution Log(p), pmf -p^k / (k ln(1-p)), k >= 1.
/// Inverse-CDF with the pmf recursion f(k+1) = f(k) p k / (k+1).
std::uint64_t sample_logarithmic(double p, RngStream& rng);

/// Truncated Polya-Gamma draw
///   omega = 1/(2 pi^2) sum_{k=1..K} g_k / ((k - 1/2)^2 + c^2/(4 pi^2)),
/// g_k iid Gamma(b, 1). Valid for non-integer b.
double sample_polya_gamma(const PgParams& params, RngStream& rng);

/// Exact mean of PG(b, c): b/(2c) tanh(c/2), b/4 at c = 0.
double polya_gamma_mean(double b, double c);

/// NB(r, p) draw via the gamma-Poisson mixture, p given by its logit psi.
std::uint64_t sample_negative_binomial(double r, double psi, RngStream& rng);

double digamma(double x);
double trigamma(double x);

}  // namespace lgnb

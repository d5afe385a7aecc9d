#include "lgnb/stat_kernels.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "lgnb/errors.hpp"

namespace lgnb {

double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double pg_tilt_ratio(double x) {
  if (std::abs(x) < 1e-8) return 0.25;
  return std::tanh(0.5 * x) / (2.0 * x);
}

double nb_log_pmf(std::uint64_t y, double r, double p) {
  if (!std::isfinite(r) || !std::isfinite(p) || r <= 0.0 || !(p > 0.0 && p < 1.0)) {
    throw DomainError("nb_log_pmf: need r > 0 and 0 < p < 1 (r=" + std::to_string(r) +
                      ", p=" + std::to_string(p) + ")");
  }
  const double yd = static_cast<double>(y);
  double out = std::lgamma(r + yd) - std::lgamma(r) - std::lgamma(yd + 1.0) + r * std::log1p(-p);
  if (y > 0) out += yd * std::log(p);
  return out;
}

double nb_log_pmf_logit(std::uint64_t y, double r, double psi) {
  if (!std::isfinite(r) || !std::isfinite(psi) || r <= 0.0) {
    throw DomainError("nb_log_pmf_logit: need finite psi and r > 0");
  }
  const double yd = static_cast<double>(y);
  return std::lgamma(r + yd) - std::lgamma(r) - std::lgamma(yd + 1.0) + yd * psi -
         (yd + r) * log1p_exp(psi);
}

std::uint64_t sample_logarithmic(double p, RngStream& rng) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("sample_logarithmic: p must lie in (0, 1), got " + std::to_string(p));
  }
  const double u = rng.uniform();
  double pmf = -p / std::log1p(-p);
  double cdf = pmf;
  std::uint64_t k = 1;
  // pmf decays geometrically, so the scan terminates; the guard handles
  // cdf saturating below u through rounding.
  while (u > cdf) {
    pmf *= p * static_cast<double>(k) / static_cast<double>(k + 1);
    if (pmf <= 0.0) break;
    cdf += pmf;
    ++k;
  }
  return k;
}

double sample_polya_gamma(const PgParams& params, RngStream& rng) {
  if (!(params.b > 0.0) || !std::isfinite(params.b)) {
    throw DomainError("sample_polya_gamma: shape b must be positive, got " +
                      std::to_string(params.b));
  }
  if (params.truncation < 1) throw DomainError("sample_polya_gamma: truncation must be >= 1");
  if (!std::isfinite(params.c)) throw DomainError("sample_polya_gamma: tilt must be finite");

  constexpr double kPi = std::numbers::pi;
  const double tilt = params.c * params.c / (4.0 * kPi * kPi);
  std::gamma_distribution<double> gamma(params.b, 1.0);
  double sum = 0.0;
  for (int k = 1; k <= params.truncation; ++k) {
    const double d = k - 0.5;
    sum += gamma(rng.engine()) / (d * d + tilt);
  }
  return sum / (2.0 * kPi * kPi);
}

double polya_gamma_mean(double b, double c) { return b * pg_tilt_ratio(c); }

std::uint64_t sample_negative_binomial(double r, double psi, RngStream& rng) {
  if (!(r > 0.0) || !std::isfinite(psi)) throw DomainError("sample_negative_binomial: bad parameters");
  // lambda ~ Gamma(r, scale p/(1-p) = e^psi)
  const double lambda = rng.gamma(r, std::exp(psi));
  if (lambda <= 0.0) return 0;
  return rng.poisson(lambda);
}

double digamma(double x) { return boost::math::digamma(x); }
double trigamma(double x) { return boost::math::trigamma(x); }

}  // namespace lgnb

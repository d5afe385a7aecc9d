#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lgnb/model.hpp"

namespace lgnb {

enum class ModelFamily { Poisson, NegativeBinomial, LognormalPoisson, Lgnb };

std::string to_string(ModelFamily family);
ModelFamily parse_family(const std::string& name);

/// Point parameters of a fitted count regression. Fields a family does not
/// use are ignored: sigma2 for Poisson/NB, r for Poisson/LN-Poisson,
/// phi_disp for everything except NB.
struct FitParameters {
  ModelFamily family = ModelFamily::Poisson;
  Vector beta;
  double sigma2 = 0.0;
  double r = 1.0;
  double phi_disp = 0.0;
};

/// Conditional mean E[y | x] for the family:
///   Poisson, NB: exp(x^T beta); LN-Poisson: exp(x^T beta + sigma2/2);
///   LGNB: exp(x^T beta + sigma2/2 + ln r).
double model_mean(const Vector& x, const FitParameters& fit);

/// Coefficient kappa of mu^2 in Var[y | x] = mu + kappa mu^2.
/// NB uses phi_disp; pass r = +infinity for the LGNB lognormal-Poisson limit.
double quasi_dispersion(ModelFamily family, double sigma2, double r, double phi_disp);
double quasi_dispersion(const FitParameters& fit);

struct DiagnosticsReport {
  std::string model;
  std::vector<double> fitted_mean;
  double kappa = 0.0;
  double pearson = 0.0;
  std::vector<double> residuals;
};

/// E = sum e_i^2, e_i = (y_i - mu_i) / sqrt(mu_i (1 + kappa mu_i)).
DiagnosticsReport pearson_statistic(const FitParameters& fit, const Dataset& data);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 edges
  std::vector<std::size_t> counts;
};

/// Freedman-Diaconis bin width unless `bins` is given.
Histogram histogram(std::span<const double> values, std::size_t bins = 0);

struct ScalarSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::map<double, double> quantiles;      ///< probability -> value
  std::map<std::size_t, double> autocorr;  ///< lag -> value; empty when degenerate
  bool degenerate = false;                 ///< zero variance: autocorrelation undefined
  Histogram hist;
};

/// Named scalar traces with per-parameter summaries.
struct TraceSummary {
  std::map<std::string, ScalarSummary> parameters;
};

double autocorrelation(std::span<const double> values, std::size_t lag);

ScalarSummary summarize_scalar(std::span<const double> values, std::span<const std::size_t> lags,
                               std::size_t bins = 0);

/// Summaries of every named trace. Throws DomainError on an empty trace.
TraceSummary trace_summary(const std::map<std::string, std::vector<double>>& traces,
                           std::span<const std::size_t> lags, std::size_t bins = 0);

/// D^-1/2 Sigma D^-1/2. Throws DomainError unless Sigma is symmetric positive definite.
Matrix beta_correlation(const Matrix& sigma_beta);

/// Sample covariance of the rows of `draws`.
Matrix sample_covariance(const Matrix& draws);

}  // namespace lgnb

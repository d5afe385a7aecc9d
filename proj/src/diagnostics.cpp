#include "lgnb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgnb/errors.hpp"

namespace lgnb {

std::string to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::Poisson: return "poisson";
    case ModelFamily::NegativeBinomial: return "nb";
    case ModelFamily::LognormalPoisson: return "lognormal-poisson";
    case ModelFamily::Lgnb: return "lgnb";
  }
  return "unknown";
}

ModelFamily parse_family(const std::string& name) {
  if (name == "poisson") return ModelFamily::Poisson;
  if (name == "nb") return ModelFamily::NegativeBinomial;
  if (name == "lognormal-poisson") return ModelFamily::LognormalPoisson;
  if (name == "lgnb") return ModelFamily::Lgnb;
  throw DomainError("unknown model family '" + name + "'");
}

double model_mean(const Vector& x, const FitParameters& fit) {
  if (x.size() != fit.beta.size()) throw DomainError("model_mean: covariate length mismatch");
  const double eta = x.dot(fit.beta);
  switch (fit.family) {
    case ModelFamily::Poisson:
    case ModelFamily::NegativeBinomial: return std::exp(eta);
    case ModelFamily::LognormalPoisson: return std::exp(eta + 0.5 * fit.sigma2);
    case ModelFamily::Lgnb:
      if (!(fit.r > 0.0)) throw DomainError("model_mean: LGNB needs r > 0");
      return std::exp(eta + 0.5 * fit.sigma2 + std::log(fit.r));
  }
  throw DomainError("model_mean: unknown family");
}

double quasi_dispersion(ModelFamily family, double sigma2, double r, double phi_disp) {
  if (sigma2 < 0.0 || std::isnan(sigma2)) throw DomainError("quasi_dispersion: sigma2 must be >= 0");
  switch (family) {
    case ModelFamily::Poisson: return 0.0;
    case ModelFamily::NegativeBinomial:
      if (phi_disp > 0.0) return phi_disp;
      if (!(r > 0.0)) throw DomainError("quasi_dispersion: NB needs r > 0 or phi_disp > 0");
      return std::isinf(r) ? 0.0 : 1.0 / r;
    case ModelFamily::LognormalPoisson: return std::expm1(sigma2);
    case ModelFamily::Lgnb: {
      if (!(r > 0.0)) throw DomainError("quasi_dispersion: LGNB needs r > 0");
      const double inv_r = std::isinf(r) ? 0.0 : 1.0 / r;
      // e^s (1 + 1/r) - 1 written to keep precision as s -> 0
      return std::expm1(sigma2) * (1.0 + inv_r) + inv_r;
    }
  }
  throw DomainError("quasi_dispersion: unknown family");
}

double quasi_dispersion(const FitParameters& fit) {
  return quasi_dispersion(fit.family, fit.sigma2, fit.r, fit.phi_disp);
}

DiagnosticsReport pearson_statistic(const FitParameters& fit, const Dataset& data) {
  DiagnosticsReport report;
  report.model = to_string(fit.family);
  report.kappa = quasi_dispersion(fit);
  report.fitted_mean.reserve(data.n());
  report.residuals.reserve(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Vector x = data.X.row(static_cast<Eigen::Index>(i)).transpose();
    const double mu = model_mean(x, fit);
    if (!(mu > 0.0) || !std::isfinite(mu)) {
      throw NumericalFault("pearson_statistic: fitted mean is not positive at row " +
                           std::to_string(i));
    }
    const double e = (static_cast<double>(data.y[i]) - mu) / std::sqrt(mu * (1.0 + report.kappa * mu));
    report.fitted_mean.push_back(mu);
    report.residuals.push_back(e);
    report.pearson += e * e;
  }
  return report;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  // linear interpolation between order statistics
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw DomainError("histogram: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (bins == 0) {
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
    bins = width > 0.0 ? static_cast<std::size_t>(std::ceil((hi - lo) / width)) : 1;
    bins = std::clamp<std::size_t>(bins, 1, 1000);
  }
  Histogram h;
  h.counts.assign(bins, 0);
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t b = 0; b <= bins; ++b) {
    h.edges.push_back(lo + span * static_cast<double>(b) / static_cast<double>(bins));
  }
  for (double v : sorted) {
    auto b = static_cast<std::size_t>((v - lo) / span * static_cast<double>(bins));
    h.counts[std::min(b, bins - 1)] += 1;
  }
  return h;
}

double autocorrelation(std::span<const double> values, std::size_t lag) {
  const std::size_t n = values.size();
  if (n == 0 || lag >= n) throw DomainError("autocorrelation: lag must be below the trace length");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (double v : values) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) return std::nan("");
  double num = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) num += (values[t] - mean) * (values[t + lag] - mean);
  return num / denom;
}

ScalarSummary summarize_scalar(std::span<const double> values, std::span<const std::size_t> lags,
                               std::size_t bins) {
  if (values.empty()) throw DomainError("trace_summary: empty trace");
  ScalarSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (double p : {0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975}) s.quantiles[p] = quantile_sorted(sorted, p);
  s.degenerate = !(ss > 0.0);
  if (!s.degenerate) {
    for (auto lag : lags) {
      if (lag < values.size()) s.autocorr[lag] = autocorrelation(values, lag);
    }
  }
  s.hist = histogram(values, bins);
  return s;
}

TraceSummary trace_summary(const std::map<std::string, std::vector<double>>& traces,
                           std::span<const std::size_t> lags, std::size_t bins) {
  TraceSummary out;
  for (const auto& [name, values] : traces) {
    out.parameters[name] = summarize_scalar(values, lags, bins);
  }
  return out;
}

Matrix beta_correlation(const Matrix& sigma_beta) {
  if (sigma_beta.rows() != sigma_beta.cols() || sigma_beta.rows() == 0) {
    throw DomainError("beta_correlation: need a non-empty square matrix");
  }
  if ((sigma_beta - sigma_beta.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * sigma_beta.cwiseAbs().maxCoeff()) {
    throw DomainError("beta_correlation: matrix is not symmetric");
  }
  Eigen::LLT<Matrix> chol(sigma_beta);
  if (chol.info() != Eigen::Success) throw DomainError("beta_correlation: matrix is not SPD");
  const Vector inv_sd = sigma_beta.diagonal().array().rsqrt().matrix();
  Matrix corr = inv_sd.asDiagonal() * sigma_beta * inv_sd.asDiagonal();
  corr.diagonal().setOnes();
  return corr;
}

Matrix sample_covariance(const Matrix& draws) {
  if (draws.rows() < 2) throw DomainError("sample_covariance: need at least two draws");
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(draws.rows() - 1);
}

}  // namespace lgnb

#include "lgnb/baselines.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "lgnb/crt_tables.hpp"
#include "lgnb/errors.hpp"
#include "lgnb/stat_kernels.hpp"

namespace lgnb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_full_rank(const Dataset& data) {
  data.validate();
  if (data.n() < data.n_coef()) throw DomainError("mle: fewer observations than coefficients");
  Eigen::ColPivHouseholderQR<Matrix> qr(data.X);
  if (qr.rank() < data.X.cols()) throw DomainError("mle: design matrix is rank deficient");
}

// Root of f on [lo, hi] given a sign change.
template <typename F>
double solve_bracketed(F f, double lo, double hi) {
  boost::uintmax_t max_iter = 200;
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
  return 0.5 * (a + b);
}

// Gradient and Hessian of the NB log-likelihood in (beta, tau = ln phi_disp).
struct NbDerivs {
  double loglik = 0.0;
  Vector grad;
  Matrix hess;
};

NbDerivs nb_derivatives(const Dataset& data, const Vector& beta, double tau, bool with_tau) {
  const auto k = data.X.cols();
  const Eigen::Index dim = with_tau ? k + 1 : k;
  NbDerivs d;
  d.grad = Vector::Zero(dim);
  d.hess = Matrix::Zero(dim, dim);
  const double theta = std::exp(-tau);
  const Vector eta = data.X * beta;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double y = static_cast<double>(data.y[i]);
    const double mu = std::exp(eta[ii]);
    const double tm = theta + mu;
    d.loglik += std::lgamma(y + theta) - std::lgamma(theta) - std::lgamma(y + 1.0) +
                theta * std::log(theta / tm) + y * (eta[ii] - std::log(tm));
    const double g_eta = theta * (y - mu) / tm;
    const double h_eta = -(theta + y) * mu * theta / (tm * tm);
    const auto x = data.X.row(ii).transpose();
    d.grad.head(k) += g_eta * x;
    d.hess.topLeftCorner(k, k) += h_eta * (x * x.transpose());
    if (with_tau) {
      const double g_theta = digamma(y + theta) - digamma(theta) + std::log(theta / tm) + 1.0 -
                             (theta + y) / tm;
      const double h_theta = trigamma(y + theta) - trigamma(theta) + 1.0 / theta - 2.0 / tm +
                             (theta + y) / (tm * tm);
      const double h_eta_theta = (y - mu) * mu / (tm * tm);
      // theta = e^-tau
      d.grad[k] += -theta * g_theta;
      d.hess(k, k) += theta * theta * h_theta + theta * g_theta;
      d.hess.col(k).head(k) += -theta * h_eta_theta * x;
    }
  }
  if (with_tau) d.hess.row(k).head(k) = d.hess.col(k).head(k).transpose();
  return d;
}

// Damped Newton ascent: solve (-H + lambda I) step = g, growing lambda until
// the system is positive definite, then halve the step until the
// log-likelihood does not decrease.
template <typename Eval>
MleFit newton_ascent(Vector params, Eval eval, double tol, std::size_t max_iter,
                     double max_tau_step) {
  MleFit fit;
  auto cur = eval(params);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    fit.iterations = it;
    fit.gradient_norm = cur.grad.norm();
    if (fit.gradient_norm < tol) {
      fit.converged = true;
      break;
    }
    Matrix neg = -cur.hess;
    double lambda = 0.0;
    Vector step;
    for (int tries = 0; tries < 60; ++tries) {
      Matrix sys = neg;
      sys.diagonal().array() += lambda;
      Eigen::LLT<Matrix> chol(sys);
      if (chol.info() == Eigen::Success) {
        step = chol.solve(cur.grad);
        break;
      }
      lambda = lambda == 0.0 ? 1e-6 * (1.0 + neg.diagonal().cwiseAbs().maxCoeff()) : lambda * 10.0;
    }
    if (step.size() == 0) throw NumericalFault("mle: could not form a Newton step");
    if (max_tau_step > 0.0 && step.size() > 0) {
      double& last = step[step.size() - 1];
      last = std::clamp(last, -max_tau_step, max_tau_step);
    }
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      const Vector trial = params + scale * step;
      auto next = eval(trial);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)) {
        params = trial;
        cur = std::move(next);
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) {
      fit.gradient_norm = cur.grad.norm();
      fit.converged = fit.gradient_norm < std::sqrt(tol);
      break;
    }
  }
  fit.gradient_norm = cur.grad.norm();
  if (fit.gradient_norm < tol) fit.converged = true;
  fit.log_likelihood = cur.loglik;
  fit.beta = params;
  return fit;
}

}  // namespace

double MleFit::r() const { return phi_disp > 0.0 ? 1.0 / phi_disp : kInf; }

double poisson_log_likelihood(const Dataset& data, const Vector& beta) {
  const Vector eta = data.X * beta;
  double ll = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double y = static_cast<double>(data.y[i]);
    ll += y * eta[ii] - std::exp(eta[ii]) - std::lgamma(y + 1.0);
  }
  return ll;
}

Vector poisson_score(const Dataset& data, const Vector& beta) {
  const Vector mu = (data.X * beta).array().exp().matrix();
  return data.X.transpose() * (data.y_as_vector() - mu);
}

double nb_log_likelihood(const Dataset& data, const Vector& beta, double phi_disp) {
  if (!(phi_disp > 0.0)) throw DomainError("nb_log_likelihood: phi_disp must be positive");
  return nb_derivatives(data, beta, std::log(phi_disp), false).loglik;
}

MleFit fit_poisson_mle(const Dataset& data, double tol, std::size_t max_iter) {
  require_full_rank(data);
  struct Eval {
    double loglik;
    Vector grad;
    Matrix hess;
  };
  auto eval = [&](const Vector& beta) {
    const Vector mu = (data.X * beta).array().exp().matrix();
    Eval e{poisson_log_likelihood(data, beta),
           data.X.transpose() * (data.y_as_vector() - mu),
           -(data.X.transpose() * mu.asDiagonal() * data.X)};
    return e;
  };
  Vector start = Vector::Zero(data.X.cols());
  const double ybar = data.y_as_vector().mean();
  start[0] = std::log(std::max(ybar, 1e-8));
  MleFit fit = newton_ascent(start, eval, tol, max_iter, 0.0);
  fit.phi_disp = 0.0;
  return fit;
}

MleFit fit_nb_fixed_r(const Dataset& data, double r, double tol, std::size_t max_iter) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("fit_nb_fixed_r: r must be positive");
  require_full_rank(data);
  const double tau = -std::log(r);
  auto eval = [&](const Vector& beta) { return nb_derivatives(data, beta, tau, false); };
  const MleFit start = fit_poisson_mle(data, tol, max_iter);
  MleFit fit = newton_ascent(start.beta, eval, tol, max_iter, 0.0);
  fit.phi_disp = 1.0 / r;
  return fit;
}

MleFit fit_nb_mle(const Dataset& data, double tol, std::size_t max_iter) {
  MleFit poisson = fit_poisson_mle(data, tol, max_iter);
  const Vector mu = (data.X * poisson.beta).array().exp().matrix();
  const Vector y = data.y_as_vector();
  // d loglik / d phi at phi = 0+ is 1/2 sum((y - mu)^2 - y).
  const double edge_score = 0.5 * ((y - mu).array().square() - y.array()).sum();
  if (edge_score <= 0.0) {
    poisson.boundary = true;
    return poisson;
  }
  double phi0 = ((y - mu).array().square() - mu.array()).sum() / mu.array().square().sum();
  if (!(phi0 > 1e-4)) phi0 = 1e-2;

  const auto k = data.X.cols();
  Vector params(k + 1);
  params.head(k) = poisson.beta;
  params[k] = std::log(phi0);
  auto eval = [&](const Vector& p) { return nb_derivatives(data, p.head(k), p[k], true); };
  MleFit joint = newton_ascent(params, eval, tol, max_iter, 2.0);
  const double tau = joint.beta[k];
  MleFit fit;
  fit.converged = joint.converged;
  fit.iterations = joint.iterations;
  fit.gradient_norm = joint.gradient_norm;
  fit.log_likelihood = joint.log_likelihood;
  if (tau < std::log(1e-8)) {
    poisson.boundary = true;
    return poisson;
  }
  fit.beta = joint.beta.head(k);
  fit.phi_disp = std::exp(tau);
  return fit;
}

double estimate_r_mme(const UnivariateSample& sample) {
  const double m = sample.mean();
  const double v = sample.variance();
  if (!(v > m)) {
    throw DomainError("estimate_r_mme: sample is not overdispersed (variance " + std::to_string(v) +
                      " <= mean " + std::to_string(m) + ")");
  }
  return m * m / (v - m);
}

double nb_profile_log_likelihood(const UnivariateSample& sample, double r) {
  if (!(r > 0.0)) throw DomainError("nb_profile_log_likelihood: r must be positive");
  const double m = sample.mean();
  const double n = static_cast<double>(sample.n());
  double ll = n * r * std::log(r / (r + m));
  if (m > 0.0) ll += sample.sum() * std::log(m / (r + m));
  for (auto yi : sample.y) {
    const double y = static_cast<double>(yi);
    ll += std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0);
  }
  return ll;
}

DispersionEstimate estimate_r_mle_univariate(const UnivariateSample& sample) {
  const double m = sample.mean();
  const double n = static_cast<double>(sample.n());
  if (!(m > 0.0)) return {kInf, true};
  // d/dr of the profile log-likelihood, as a function of t = ln r.
  auto score = [&](double t) {
    const double r = std::exp(t);
    double s = n * std::log(r / (r + m));
    for (auto yi : sample.y) {
      if (yi > 0) s += digamma(static_cast<double>(yi) + r) - digamma(r);
    }
    return s;
  };
  const double lo = std::log(1e-8);
  const double hi_limit = std::log(1e8);
  if (!(score(lo) > 0.0)) return {std::exp(lo), true};
  double hi = std::log(std::max(10.0 * m, 1.0));
  while (score(hi) > 0.0) {
    if (hi >= hi_limit) return {kInf, true};
    hi = std::min(hi + 2.0, hi_limit);
  }
  return {std::exp(solve_bracketed(score, lo, hi)), false};
}

DispersionEstimate estimate_r_mqle(const UnivariateSample& sample) {
  const double m = sample.mean();
  const double n = static_cast<double>(sample.n());
  if (!(m > 0.0) || sample.n() < 2) return {kInf, true};
  double ss = 0.0;
  for (auto yi : sample.y) {
    const double d = static_cast<double>(yi) - m;
    ss += d * d;
  }
  auto pearson_gap = [&](double t) {
    const double r = std::exp(t);
    return ss / (m * (1.0 + m / r)) - (n - 1.0);
  };
  const double lo = std::log(1e-8);
  const double hi = std::log(1e8);
  const double f_lo = pearson_gap(lo);
  const double f_hi = pearson_gap(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0)) return {kInf, true};
  return {std::exp(solve_bracketed(pearson_gap, lo, hi)), false};
}

UnivariateTrace univariate_gibbs(const UnivariateSample& sample, const Hyperparameters& hyper,
                                 const UnivariateGibbsConfig& config, RngStream& rng) {
  hyper.validate();
  if (config.thin == 0 || config.iterations <= config.burn_in) {
    throw ConfigError("univariate_gibbs: need iterations > burn-in and thin >= 1");
  }
  const double n = static_cast<double>(sample.n());
  const double total = sample.sum();
  const std::size_t m_max = std::max<std::uint64_t>(sample.max_count(), 1);
  double r = config.r_init;
  double psi = 0.0;  // logit p
  UnivariateTrace trace;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const RrTable table(m_max, r);
    double total_l = 0.0;
    for (auto yi : sample.y) total_l += static_cast<double>(sample_table_count(yi, table, rng));
    const double rate = hyper.b0 + n * log1p_exp(psi);
    // Small gamma shapes can underflow to exactly zero; keep draws representable.
    r = std::max(rng.gamma(hyper.a0 + total_l, 1.0 / rate), std::numeric_limits<double>::min());
    if (!std::isfinite(r)) {
      throw NumericalFault("univariate_gibbs: r draw is not finite at iteration " +
                           std::to_string(it));
    }
    psi = rng.beta_logit(hyper.beta_a + total, hyper.beta_b + n * r);
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      trace.r.push_back(r);
      trace.p.push_back(logistic(psi));
    }
  }
  return trace;
}

UnivariateVbResult univariate_vb(const UnivariateSample& sample, const Hyperparameters& hyper,
                                 const UnivariateVbConfig& config) {
  hyper.validate();
  if (!(config.r_init > 0.0)) throw ConfigError("univariate_vb: r_init must be positive");
  const double n = static_cast<double>(sample.n());
  const double total = sample.sum();
  const std::size_t m_max = std::max<std::uint64_t>(sample.max_count(), 1);
  const FTable f(m_max);

  UnivariateVbResult out;
  out.a_tilde = 1.0;
  out.h_tilde = 1.0 / config.r_init;
  out.alpha_tilde = hyper.beta_a + total;
  out.beta_tilde = hyper.beta_b + n * config.r_init;

  double previous = 0.0;
  for (std::size_t sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    const double log_r = digamma(out.a_tilde) - std::log(out.h_tilde);
    const RrTable table(m_max, std::exp(log_r));
    double total_l = 0.0;
    // sum_i E[ln F(y_i, L_i)] + H[Q_L_i]
    double table_terms = 0.0;
    for (auto yi : sample.y) {
      total_l += expected_table_count(yi, table);
      if (yi == 0) continue;
      const auto row = table.row(yi);
      for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > 0.0 && f(yi, j) > 0.0) table_terms += row[j] * (std::log(f(yi, j)) - std::log(row[j]));
      }
    }
    const double log_1m_p = digamma(out.beta_tilde) - digamma(out.alpha_tilde + out.beta_tilde);
    out.a_tilde = hyper.a0 + total_l;
    out.h_tilde = hyper.b0 - n * log_1m_p;
    const double r_mean = out.e_r();
    out.alpha_tilde = hyper.beta_a + total;
    out.beta_tilde = hyper.beta_b + n * r_mean;

    // Exact bound at the updated factors (Q_L is at its optimum for the old
    // Q_r; the table terms above were evaluated under it).
    const double e_log_r = digamma(out.a_tilde) - std::log(out.h_tilde);
    const double e_log_p = digamma(out.alpha_tilde) - digamma(out.alpha_tilde + out.beta_tilde);
    const double e_log_q = digamma(out.beta_tilde) - digamma(out.alpha_tilde + out.beta_tilde);
    double bound = table_terms + total_l * e_log_r + total * e_log_p + n * r_mean * e_log_q;
    bound += hyper.a0 * std::log(hyper.b0) - std::lgamma(hyper.a0) + (hyper.a0 - 1.0) * e_log_r -
             hyper.b0 * r_mean;
    bound += -std::log(boost::math::beta(hyper.beta_a, hyper.beta_b)) +
             (hyper.beta_a - 1.0) * e_log_p + (hyper.beta_b - 1.0) * e_log_q;
    bound += out.a_tilde - std::log(out.h_tilde) + std::lgamma(out.a_tilde) +
             (1.0 - out.a_tilde) * digamma(out.a_tilde);
    bound += std::lgamma(out.alpha_tilde) + std::lgamma(out.beta_tilde) -
             std::lgamma(out.alpha_tilde + out.beta_tilde) -
             (out.alpha_tilde - 1.0) * digamma(out.alpha_tilde) -
             (out.beta_tilde - 1.0) * digamma(out.beta_tilde) +
             (out.alpha_tilde + out.beta_tilde - 2.0) * digamma(out.alpha_tilde + out.beta_tilde);
    out.elbo.push_back(bound);
    out.sweeps = sweep;
    if (sweep > 1 && std::abs(bound - previous) <= config.tolerance * std::abs(previous)) {
      out.converged = true;
      break;
    }
    previous = bound;
  }
  return out;
}

}  // namespace lgnb

#include "lgnb/vb.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "lgnb/errors.hpp"
#include "lgnb/stat_kernels.hpp"

namespace lgnb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Entropy of Gamma(shape, rate).
double gamma_entropy(double shape, double rate) {
  return shape - std::log(rate) + std::lgamma(shape) + (1.0 - shape) * digamma(shape);
}

// E_Q[ln Gamma(x; shape0, rate0)] where Q has E[x] = mean, E[ln x] = log_mean.
double gamma_cross(double shape0, double rate0, double mean, double log_mean) {
  return shape0 * std::log(rate0) - std::lgamma(shape0) + (shape0 - 1.0) * log_mean -
         rate0 * mean;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe summarize(double sum, double sum_sq, std::size_t count) {
  MeanSe out;
  const double n = static_cast<double>(count);
  out.mean = sum / n;
  if (count > 1) {
    const double var = std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1.0));
    out.se = std::sqrt(var / n);
  }
  return out;
}

}  // namespace

double VbPosterior::e_r() const { return fixed_r ? *fixed_r : a_tilde / h_tilde; }

double VbPosterior::e_log_r() const {
  return fixed_r ? std::log(*fixed_r) : digamma(a_tilde) - std::log(h_tilde);
}

double VbPosterior::e_log_h() const { return digamma(b_tilde) - std::log(g_tilde); }

double VbPosterior::e_log_phi() const { return digamma(e_tilde) - std::log(f_tilde); }

double VbPosterior::e_sigma2() const {
  return e_tilde > 1.0 ? f_tilde / (e_tilde - 1.0) : std::numeric_limits<double>::infinity();
}

void VbConfig::validate() const {
  if (max_sweeps == 0) throw ConfigError("vb: max sweeps must be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("vb: tolerance must be non-negative");
  if (smoothing_window == 0) throw ConfigError("vb: smoothing window must be >= 1");
  if (n_mc == 0) throw ConfigError("vb: MC sample count must be >= 1");
  if (!(r_init > 0.0)) throw ConfigError("vb: initial r must be positive");
  if (fixed_r && !(*fixed_r > 0.0 && std::isfinite(*fixed_r))) {
    throw ConfigError("vb: fixed r must be positive and finite");
  }
}

PsiExpectations mc_psi_expectations(double mu, double sigma2, std::size_t n_mc, RngStream& rng) {
  if (!(sigma2 >= 0.0)) throw DomainError("mc_psi_expectations: variance must be non-negative");
  const std::size_t pairs = std::max<std::size_t>(1, n_mc / 2);
  const double sd = std::sqrt(sigma2);
  double s1 = 0.0, s1_sq = 0.0, s2 = 0.0, s2_sq = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const double z = sd > 0.0 ? rng.normal() : 0.0;
    const double up = mu + sd * z;
    const double down = mu - sd * z;
    const double l = 0.5 * (log1p_exp(up) + log1p_exp(down));
    const double t = 0.5 * (pg_tilt_ratio(up) + pg_tilt_ratio(down));
    s1 += l;
    s1_sq += l * l;
    s2 += t;
    s2_sq += t * t;
  }
  const MeanSe l = summarize(s1, s1_sq, pairs);
  const MeanSe t = summarize(s2, s2_sq, pairs);
  return {l.mean, t.mean, l.se, t.se};
}

VbPosterior initial_posterior(const Dataset& data, const VbConfig& config) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto k = static_cast<Eigen::Index>(data.n_coef());
  VbPosterior post;
  post.fixed_r = config.fixed_r;
  post.a_tilde = config.r_init;
  post.h_tilde = 1.0;
  post.c_tilde = Vector::Ones(k);
  post.d_tilde = Vector::Ones(k);
  post.mu_tilde = Vector::Zero(n);
  post.sigma_tilde = Vector::Ones(n);
  post.mu_beta = Vector::Zero(k);
  post.sigma_beta = Matrix::Identity(k, k);
  post.e_omega = Vector::Zero(n);
  post.e_table = Vector::Zero(n);
  post.e_log1p_exp = Vector::Zero(n);
  post.e_tanh_ratio = Vector::Zero(n);
  return post;
}

void vb_sweep(VbPosterior& post, const Dataset& data, const Hyperparameters& hyper,
              const RrTable* table, const VbConfig& config, const RngStream& mc_base) {
  const std::size_t n = data.n();
  const bool hold_r = post.fixed_r.has_value();
  if (!hold_r && table == nullptr && n > 0) {
    throw DomainError("vb_sweep: a table built at r~ is required unless r is fixed");
  }

  // MC expectations under the current Q_psi, one stream per observation.
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    RngStream rng = mc_base.derive(i);
    const auto ex = mc_psi_expectations(post.mu_tilde[ii], post.sigma_tilde[ii], config.n_mc, rng);
    post.e_log1p_exp[ii] = ex.log1p_exp;
    post.e_tanh_ratio[ii] = ex.tanh_ratio;
  }

  // (1)-(2) table counts and Q_r
  if (!hold_r) {
    double total_l = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l = expected_table_count(data.y[i], *table);
      post.e_table[static_cast<Eigen::Index>(i)] = l;
      total_l += l;
    }
    post.a_tilde = hyper.a0 + total_l;
    post.h_tilde = post.e_h() + post.e_log1p_exp.sum();
  }
  const double r_mean = post.e_r();

  // (3) <omega_i> from the PG mean
  const Vector y = data.y_as_vector();
  post.e_omega = (y.array() + r_mean) * post.e_tanh_ratio.array();

  // (4) Q_psi
  const double phi = post.e_phi();
  const Vector linear = data.X * post.mu_beta;
  post.sigma_tilde = (phi + post.e_omega.array()).inverse();
  post.mu_tilde = post.sigma_tilde.array() * (0.5 * (y.array() - r_mean) + phi * linear.array());

  // (5) Q_beta
  const Matrix xtx = data.X.transpose() * data.X;
  Matrix precision = phi * xtx;
  precision.diagonal() += post.e_alpha();
  Eigen::LLT<Matrix> chol(precision);
  if (chol.info() != Eigen::Success) {
    throw NumericalFault("vb: Q_beta precision is not positive definite");
  }
  const auto k = precision.rows();
  Matrix cov = chol.solve(Matrix::Identity(k, k));
  post.sigma_beta = 0.5 * (cov + cov.transpose());
  post.mu_beta = phi * (post.sigma_beta * (data.X.transpose() * post.mu_tilde));

  // (6) Q_h and Q_phi
  post.b_tilde = hyper.a0 + hyper.b0;
  post.g_tilde = r_mean + hyper.g0;
  post.e_tilde = hyper.e0 + 0.5 * static_cast<double>(n);
  const Matrix second_beta = post.mu_beta * post.mu_beta.transpose() + post.sigma_beta;
  const double psi_sq = post.mu_tilde.squaredNorm() + post.sigma_tilde.sum();
  const double cross = post.mu_tilde.dot(data.X * post.mu_beta);
  const double quad = (xtx.array() * second_beta.array()).sum();
  post.f_tilde = hyper.f0 + 0.5 * psi_sq - cross + 0.5 * quad;

  // (7) Q_alpha
  post.c_tilde = Vector::Constant(k, hyper.c0 + 0.5);
  post.d_tilde = (hyper.d0 + 0.5 * (post.mu_beta.array().square() +
                                    post.sigma_beta.diagonal().array()))
                     .matrix();
}

ElboEstimate elbo(const VbPosterior& post, const Dataset& data, const Hyperparameters& hyper,
                  std::size_t n_mc, const RngStream& mc_base) {
  const std::size_t n = data.n();
  const bool hold_r = post.fixed_r.has_value();
  const double r_mean = post.e_r();
  double value = 0.0;
  double var = 0.0;

  // <sum_i lgamma(y_i + r) - lgamma(r)> under Q_r.
  {
    double s = 0.0, s_sq = 0.0;
    const std::size_t draws = hold_r ? 1 : n_mc;
    RngStream rng = mc_base.derive(0);
    for (std::size_t d = 0; d < draws; ++d) {
      const double r = hold_r ? *post.fixed_r
                              : boost::math::gamma_p_inv(post.a_tilde, rng.uniform()) / post.h_tilde;
      double t = 0.0;
      if (r > 0.0) {
        for (auto yi : data.y) {
          if (yi > 0) t += std::lgamma(static_cast<double>(yi) + r) - std::lgamma(r);
        }
      }
      s += t;
      s_sq += t * t;
    }
    const MeanSe m = summarize(s, s_sq, draws);
    value += m.mean;
    var += m.se * m.se;
  }

  // Collapsed NB likelihood in psi.
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double yi = static_cast<double>(data.y[i]);
    RngStream rng = mc_base.derive(i + 1);
    const auto ex = mc_psi_expectations(post.mu_tilde[ii], post.sigma_tilde[ii], n_mc, rng);
    value += -std::lgamma(yi + 1.0) + yi * post.mu_tilde[ii] - (yi + r_mean) * ex.log1p_exp;
    var += (yi + r_mean) * (yi + r_mean) * ex.log1p_exp_se * ex.log1p_exp_se;
  }

  // psi | beta, phi
  const double phi = post.e_phi();
  const double log_phi = post.e_log_phi();
  const Matrix xtx = data.X.transpose() * data.X;
  const Matrix second_beta = post.mu_beta * post.mu_beta.transpose() + post.sigma_beta;
  const double resid_sq = post.mu_tilde.squaredNorm() + post.sigma_tilde.sum() -
                          2.0 * post.mu_tilde.dot(data.X * post.mu_beta) +
                          (xtx.array() * second_beta.array()).sum();
  value += 0.5 * static_cast<double>(n) * (log_phi - kLog2Pi) - 0.5 * phi * resid_sq;

  // beta | alpha and alpha
  const auto k = post.mu_beta.size();
  for (Eigen::Index p = 0; p < k; ++p) {
    const double a_mean = post.c_tilde[p] / post.d_tilde[p];
    const double a_log = digamma(post.c_tilde[p]) - std::log(post.d_tilde[p]);
    const double beta_sq = second_beta(p, p);
    value += 0.5 * (a_log - kLog2Pi) - 0.5 * a_mean * beta_sq;
    value += gamma_cross(hyper.c0, hyper.d0, a_mean, a_log);
    value += gamma_entropy(post.c_tilde[p], post.d_tilde[p]);
  }

  // phi
  value += gamma_cross(hyper.e0, hyper.f0, phi, log_phi);
  value += gamma_entropy(post.e_tilde, post.f_tilde);

  // r and h
  if (!hold_r) {
    const double h_mean = post.e_h();
    const double h_log = post.e_log_h();
    value += hyper.a0 * h_log - std::lgamma(hyper.a0) + (hyper.a0 - 1.0) * post.e_log_r() -
             h_mean * r_mean;
    value += gamma_cross(hyper.b0, hyper.g0, h_mean, h_log);
    value += gamma_entropy(post.a_tilde, post.h_tilde);
    value += gamma_entropy(post.b_tilde, post.g_tilde);
  }

  // Gaussian entropies
  value += 0.5 * (post.sigma_tilde.array().log() + 1.0 + kLog2Pi).sum();
  Eigen::LLT<Matrix> chol(post.sigma_beta);
  if (chol.info() == Eigen::Success) {
    const double logdet = 2.0 * chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
    value += 0.5 * (logdet + static_cast<double>(k) * (1.0 + kLog2Pi));
  } else {
    throw NumericalFault("vb: Q_beta covariance lost positive definiteness");
  }

  return {value, std::sqrt(var)};
}

VbResult run_vb(const Dataset& data, const Hyperparameters& hyper, const VbConfig& config) {
  data.validate();
  hyper.validate();
  config.validate();

  VbResult result;
  result.posterior = initial_posterior(data, config);
  VbPosterior& post = result.posterior;

  const RngStream root(config.seed);
  const RngStream sweep_root = root.derive(1);
  const RngStream elbo_base = root.derive(2);
  const std::size_t m_max = std::max<std::uint64_t>(data.max_count(), 1);
  const bool hold_r = config.fixed_r.has_value();

  double previous = 0.0;
  for (std::size_t sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    const RngStream sweep_base = config.common_random_numbers ? sweep_root : sweep_root.derive(sweep);
    if (hold_r) {
      vb_sweep(post, data, hyper, nullptr, config, sweep_base);
    } else {
      const RrTable table(m_max, post.r_tilde());
      vb_sweep(post, data, hyper, &table, config, sweep_base);
    }
    const RngStream bound_base =
        config.common_random_numbers ? elbo_base : elbo_base.derive(sweep);
    const ElboEstimate bound = elbo(post, data, hyper, config.n_mc, bound_base);
    if (!std::isfinite(bound.value)) {
      throw NumericalFault("vb: non-finite lower bound at sweep " + std::to_string(sweep));
    }
    result.elbo.push_back(bound.value);
    result.elbo_se.push_back(bound.mc_se);

    const std::size_t w = std::min(config.smoothing_window, result.elbo.size());
    double smoothed = 0.0;
    for (std::size_t j = result.elbo.size() - w; j < result.elbo.size(); ++j) {
      smoothed += result.elbo[j];
    }
    smoothed /= static_cast<double>(w);
    result.elbo_smoothed.push_back(smoothed);
    result.sweeps = sweep;

    const double rel = sweep == 1 ? std::numeric_limits<double>::infinity()
                                  : std::abs(smoothed - previous) /
                                        std::max(std::abs(previous), 1e-300);
    previous = smoothed;
    if (rel <= config.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

VbSamples sample_vb_posterior(const VbPosterior& post, std::size_t count, RngStream& rng) {
  VbSamples out;
  const auto k = post.mu_beta.size();
  out.beta.resize(static_cast<Eigen::Index>(count), k);
  Eigen::LLT<Matrix> chol(post.sigma_beta);
  if (chol.info() != Eigen::Success) throw NumericalFault("vb: Q_beta covariance not SPD");
  const Matrix lower = chol.matrixL();
  for (std::size_t s = 0; s < count; ++s) {
    const double r = post.fixed_r ? *post.fixed_r : rng.gamma(post.a_tilde, 1.0 / post.h_tilde);
    const double phi = rng.gamma(post.e_tilde, 1.0 / post.f_tilde);
    const double sigma2 = 1.0 / phi;
    out.r.push_back(r);
    out.sigma2.push_back(sigma2);
    out.kappa.push_back(std::exp(sigma2) * (1.0 + 1.0 / r) - 1.0);
    Vector z(k);
    for (Eigen::Index p = 0; p < k; ++p) z[p] = rng.normal();
    out.beta.row(static_cast<Eigen::Index>(s)) = (post.mu_beta + lower * z).transpose();
  }
  return out;
}

}  // namespace lgnb

#include "lgnb/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <exception>
#include <string>
#include <thread>

#include "lgnb/errors.hpp"

namespace lgnb {

namespace {

double checked_scale(double denominator, const char* what) {
  if (!(denominator > 0.0) || !std::isfinite(denominator)) {
    throw NumericalFault(std::string("gibbs: non-positive rate in the ") + what + " conditional");
  }
  return 1.0 / denominator;
}

bool state_is_finite(const GibbsState& s) {
  return std::isfinite(s.r) && std::isfinite(s.h) && std::isfinite(s.phi) && s.r > 0.0 &&
         s.h > 0.0 && s.phi > 0.0 && s.beta.allFinite() && s.alpha.allFinite() &&
         s.psi.allFinite() && s.omega.allFinite();
}

// Small gamma shapes can underflow to exactly zero; keep draws representable.
double floor_positive(double x) { return std::max(x, std::numeric_limits<double>::min()); }

double kappa_of(double sigma2, double r) { return std::exp(sigma2) * (1.0 + 1.0 / r) - 1.0; }

}  // namespace

void GibbsConfig::validate() const {
  if (thin == 0) throw ConfigError("gibbs: thin must be >= 1");
  if (iterations <= burn_in) throw ConfigError("gibbs: iterations must exceed burn-in");
  if (retained() == 0) throw ConfigError("gibbs: configuration retains no draws");
  if (pg_truncation < 1) throw ConfigError("gibbs: PG truncation must be >= 1");
  if (!(r_init > 0.0)) throw ConfigError("gibbs: initial r must be positive");
  if (fixed_r && !(*fixed_r > 0.0 && std::isfinite(*fixed_r))) {
    throw ConfigError("gibbs: fixed r must be positive and finite");
  }
}

std::size_t GibbsConfig::retained() const {
  return iterations > burn_in && thin > 0 ? (iterations - burn_in) / thin : 0;
}

GibbsState initial_state(const Dataset& data, const GibbsConfig& config, RngStream& rng) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto k = static_cast<Eigen::Index>(data.n_coef());
  GibbsState s;
  s.r = config.fixed_r.value_or(config.r_init);
  s.h = 1.0;
  s.phi = 1.0;
  s.alpha = Vector::Ones(k);
  s.beta.resize(k);
  for (Eigen::Index p = 0; p < k; ++p) s.beta[p] = rng.normal();
  s.psi = data.X * s.beta;
  s.omega.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.omega[i] = sample_polya_gamma(
        {static_cast<double>(data.y[static_cast<std::size_t>(i)]) + s.r, s.psi[i],
         config.pg_truncation},
        rng);
  }
  s.L.assign(data.n(), 0);
  return s;
}

void update_table_counts(GibbsState& state, const Dataset& data, const RrTable& table,
                         RngStream& rng) {
  for (std::size_t i = 0; i < data.n(); ++i) state.L[i] = sample_table_count(data.y[i], table, rng);
}

void update_pg_auxiliaries(GibbsState& state, const Dataset& data, int pg_truncation,
                           RngStream& rng) {
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    state.omega[ii] = sample_polya_gamma(
        {static_cast<double>(data.y[i]) + state.r, state.psi[ii], pg_truncation}, rng);
  }
}

void update_augmentation(GibbsState& state, const Dataset& data, const RrTable* table,
                         int pg_truncation, RngStream& rng) {
  if (table != nullptr) update_table_counts(state, data, *table, rng);
  update_pg_auxiliaries(state, data, pg_truncation, rng);
}

void update_structural(GibbsState& state, const Dataset& data, const Hyperparameters& hyper,
                       RngStream& rng, bool hold_r) {
  if (!hold_r) {
    double total_l = 0.0;
    double rate = state.h;
    for (std::size_t i = 0; i < data.n(); ++i) {
      total_l += static_cast<double>(state.L[i]);
      // -ln(1 - p_i) = ln(1 + e^psi_i)
      rate += log1p_exp(state.psi[static_cast<Eigen::Index>(i)]);
    }
    state.r = floor_positive(rng.gamma(hyper.a0 + total_l, checked_scale(rate, "r")));
  }
  state.h = floor_positive(rng.gamma(hyper.a0 + hyper.b0, checked_scale(hyper.g0 + state.r, "h")));

  const Vector resid = state.psi - data.X * state.beta;
  const double half_n = 0.5 * static_cast<double>(data.n());
  state.phi = rng.gamma(hyper.e0 + half_n,
                        checked_scale(hyper.f0 + 0.5 * resid.squaredNorm(), "lognormal precision"));
}

void sample_psi(GibbsState& state, const Dataset& data, RngStream& rng) {
  const Vector linear = data.X * state.beta;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double precision = state.phi + state.omega[ii];
    const double mean =
        (0.5 * (static_cast<double>(data.y[i]) - state.r) + state.phi * linear[ii]) / precision;
    state.psi[ii] = rng.normal(mean, 1.0 / std::sqrt(precision));
  }
}

void sample_beta(GibbsState& state, const Dataset& data, RngStream& rng) {
  const auto k = static_cast<Eigen::Index>(data.n_coef());
  Matrix precision = state.phi * (data.X.transpose() * data.X);
  precision.diagonal() += state.alpha;
  Eigen::LLT<Matrix> chol(precision);
  if (chol.info() != Eigen::Success) {
    throw NumericalFault(
        "gibbs: beta precision phi X^T X + diag(alpha) is not positive definite; the design is "
        "rank deficient and alpha is near zero");
  }
  const Vector mean = chol.solve(state.phi * (data.X.transpose() * state.psi));
  Vector z(k);
  for (Eigen::Index p = 0; p < k; ++p) z[p] = rng.normal();
  // precision = U^T U, so U^-1 z has covariance precision^-1.
  state.beta = mean + chol.matrixU().solve(z);
}

void sample_alpha(GibbsState& state, const Hyperparameters& hyper, RngStream& rng) {
  for (Eigen::Index p = 0; p < state.alpha.size(); ++p) {
    const double b = state.beta[p];
    state.alpha[p] =
        floor_positive(rng.gamma(hyper.c0 + 0.5, checked_scale(hyper.d0 + 0.5 * b * b, "alpha")));
  }
}

void update_regression(GibbsState& state, const Dataset& data, const Hyperparameters& hyper,
                       RngStream& rng) {
  sample_psi(state, data, rng);
  sample_beta(state, data, rng);
  sample_alpha(state, hyper, rng);
}

GibbsTrace run_gibbs(const Dataset& data, const Hyperparameters& hyper, const GibbsConfig& config,
                     RngStream& rng) {
  data.validate();
  hyper.validate();
  config.validate();

  GibbsState state = initial_state(data, config, rng);
  const bool hold_r = config.fixed_r.has_value();
  const std::size_t m_max = std::max<std::uint64_t>(data.max_count(), 1);
  const std::size_t keep = config.retained();
  const auto k = static_cast<Eigen::Index>(data.n_coef());

  GibbsTrace trace;
  trace.iterations = config.iterations;
  trace.burn_in = config.burn_in;
  trace.thin = config.thin;
  trace.seed = config.seed;
  trace.fixed_r = config.fixed_r;
  trace.beta.resize(static_cast<Eigen::Index>(keep), k);
  trace.alpha.resize(static_cast<Eigen::Index>(keep), k);
  for (auto* v : {&trace.r, &trace.h, &trace.phi, &trace.sigma2, &trace.kappa}) v->reserve(keep);

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    try {
      if (!hold_r) {
        const RrTable table(m_max, state.r);
        update_table_counts(state, data, table, rng);
      }
      update_structural(state, data, hyper, rng, hold_r);
      update_pg_auxiliaries(state, data, config.pg_truncation, rng);
      update_regression(state, data, hyper, rng);
    } catch (const NumericalFault& e) {
      throw NumericalFault(std::string(e.what()) + " at iteration " + std::to_string(it) +
                           " (r = " + std::to_string(state.r) + ")");
    }

    if (!state_is_finite(state)) {
      throw NumericalFault("gibbs: non-finite or non-positive state at iteration " +
                           std::to_string(it));
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      const auto row = static_cast<Eigen::Index>(trace.r.size());
      const double sigma2 = 1.0 / state.phi;
      trace.r.push_back(state.r);
      trace.h.push_back(state.h);
      trace.phi.push_back(state.phi);
      trace.sigma2.push_back(sigma2);
      trace.kappa.push_back(kappa_of(sigma2, state.r));
      trace.beta.row(row) = state.beta.transpose();
      trace.alpha.row(row) = state.alpha.transpose();
    }
  }
  return trace;
}

GibbsTrace run_gibbs(const Dataset& data, const Hyperparameters& hyper, const GibbsConfig& config) {
  RngStream rng(config.seed);
  return run_gibbs(data, hyper, config, rng);
}

std::vector<GibbsTrace> run_gibbs_chains(const Dataset& data, const Hyperparameters& hyper,
                                         const GibbsConfig& config, std::size_t chains) {
  if (chains == 0) throw ConfigError("gibbs: need at least one chain");
  if (chains == 1) return {run_gibbs(data, hyper, config)};

  std::vector<GibbsTrace> traces(chains);
  std::vector<std::exception_ptr> errors(chains);
  std::vector<std::thread> workers;
  const RngStream root(config.seed);
  for (std::size_t c = 0; c < chains; ++c) {
    workers.emplace_back([&, c] {
      try {
        RngStream rng = root.derive(c);
        traces[c] = run_gibbs(data, hyper, config, rng);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return traces;
}

GibbsTrace pool_traces(const std::vector<GibbsTrace>& traces) {
  if (traces.empty()) throw DomainError("pool_traces: no traces");
  GibbsTrace out = traces.front();
  Eigen::Index rows = 0;
  for (const auto& t : traces) rows += t.beta.rows();
  out.beta.resize(rows, traces.front().beta.cols());
  out.alpha.resize(rows, traces.front().alpha.cols());
  out.r.clear();
  out.h.clear();
  out.phi.clear();
  out.sigma2.clear();
  out.kappa.clear();
  Eigen::Index at = 0;
  for (const auto& t : traces) {
    out.r.insert(out.r.end(), t.r.begin(), t.r.end());
    out.h.insert(out.h.end(), t.h.begin(), t.h.end());
    out.phi.insert(out.phi.end(), t.phi.begin(), t.phi.end());
    out.sigma2.insert(out.sigma2.end(), t.sigma2.begin(), t.sigma2.end());
    out.kappa.insert(out.kappa.end(), t.kappa.begin(), t.kappa.end());
    out.beta.middleRows(at, t.beta.rows()) = t.beta;
    out.alpha.middleRows(at, t.alpha.rows()) = t.alpha;
    at += t.beta.rows();
  }
  return out;
}

}  // namespace lgnb

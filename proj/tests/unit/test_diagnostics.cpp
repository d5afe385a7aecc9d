#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "lgnb/diagnostics.hpp"
#include "lgnb/errors.hpp"
#include "lgnb/rng.hpp"
#include "oracles.hpp"

using namespace lgnb;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FitParameters fit_of(ModelFamily family, Vector beta, double sigma2 = 0.0, double r = 1.0,
                     double phi_disp = 0.0) {
  FitParameters f;
  f.family = family;
  f.beta = std::move(beta);
  f.sigma2 = sigma2;
  f.r = r;
  f.phi_disp = phi_disp;
  return f;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

void check_variance(const std::vector<double>& draws, double mean, double kappa) {
  const auto m = oracle::moments(draws);
  CHECK(std::abs(m.mean - mean) < 3.0 * m.mean_se);
  CHECK(std::abs(m.variance - (mean + kappa * mean * mean)) < 3.0 * m.variance_se);
}

}  // namespace

TEST_CASE("model means by family") {
  const Vector x = vec({1.0, 0.5});
  const Vector beta = vec({0.3, -0.8});
  const double lin = 0.3 - 0.4;
  CHECK(model_mean(x, fit_of(ModelFamily::Lgnb, beta, 0.0, 1.0)) ==
        doctest::Approx(std::exp(lin)).epsilon(1e-15));
  CHECK(model_mean(vec({1.0}), fit_of(ModelFamily::Lgnb, vec({0.0}), 0.0289, 6.0420)) ==
        doctest::Approx(6.130).epsilon(2e-4));
  CHECK(model_mean(vec({1.0}), fit_of(ModelFamily::Poisson, vec({std::log(2.0)}))) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(model_mean(x, fit_of(ModelFamily::NegativeBinomial, beta, 0.0, 1.0, 0.3)) ==
        doctest::Approx(std::exp(lin)).epsilon(1e-15));
  CHECK(model_mean(x, fit_of(ModelFamily::LognormalPoisson, beta, 0.4)) ==
        doctest::Approx(std::exp(lin + 0.2)).epsilon(1e-15));
  CHECK_THROWS_AS(model_mean(vec({1.0}), fit_of(ModelFamily::Poisson, beta)), DomainError);
  CHECK_THROWS_AS(parse_family("gamma"), DomainError);
  for (auto f : {ModelFamily::Poisson, ModelFamily::NegativeBinomial, ModelFamily::LognormalPoisson,
                 ModelFamily::Lgnb}) {
    CHECK(parse_family(to_string(f)) == f);
  }
}

TEST_CASE("quasi-dispersion values and limits") {
  CHECK(quasi_dispersion(ModelFamily::Lgnb, 0.0, kInf, 0.0) == 0.0);
  CHECK(quasi_dispersion(ModelFamily::Poisson, 0.0, 1.0, 0.0) == 0.0);
  CHECK(quasi_dispersion(ModelFamily::Lgnb, 0.0, 5.2484, 0.0) == doctest::Approx(0.1905).epsilon(3e-4));
  CHECK(quasi_dispersion(ModelFamily::NegativeBinomial, 0.0, 1.0, 1.0 / 5.2484) ==
        doctest::Approx(0.1905).epsilon(3e-4));
  const double direct = std::exp(0.0289) * (1.0 + 1.0 / 6.0420) - 1.0;
  CHECK(quasi_dispersion(ModelFamily::Lgnb, 0.0289, 6.0420, 0.0) == doctest::Approx(direct).epsilon(1e-14));
  CHECK(quasi_dispersion(ModelFamily::LognormalPoisson, 0.5, 1.0, 0.0) ==
        doctest::Approx(std::expm1(0.5)).epsilon(1e-14));

  for (double r : {0.3, 2.0, 40.0}) {
    CHECK(std::abs(quasi_dispersion(ModelFamily::Lgnb, 1e-12, r, 0.0) -
                   quasi_dispersion(ModelFamily::NegativeBinomial, 0.0, 1.0, 1.0 / r)) < 1e-9);
  }
  for (double s2 : {0.01, 0.5, 2.0}) {
    CHECK(std::abs(quasi_dispersion(ModelFamily::Lgnb, s2, 1e12, 0.0) -
                   quasi_dispersion(ModelFamily::LognormalPoisson, s2, 1.0, 0.0)) < 1e-9);
  }
  CHECK_THROWS_AS(quasi_dispersion(ModelFamily::Lgnb, -0.1, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(quasi_dispersion(ModelFamily::LognormalPoisson, -1e-9, 1.0, 0.0), DomainError);
}

TEST_CASE("variance identities hold for simulated draws") {
  const std::size_t n = 1000000;
  const double lin = 0.4, sigma2 = 0.3, r = 2.5;
  RngStream rng(17);
  std::vector<double> lgnb(n), nb(n), lnp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double psi = lin + rng.normal(0.0, std::sqrt(sigma2));
    lgnb[i] = static_cast<double>(rng.poisson(rng.gamma(r, std::exp(psi))));
  }
  for (std::size_t i = 0; i < n; ++i) {
    nb[i] = static_cast<double>(rng.poisson(rng.gamma(r, std::exp(lin) / r)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    lnp[i] = static_cast<double>(rng.poisson(std::exp(lin + rng.normal(0.0, std::sqrt(sigma2)))));
  }
  const Vector x = vec({1.0});
  const auto lg = fit_of(ModelFamily::Lgnb, vec({lin}), sigma2, r);
  check_variance(lgnb, model_mean(x, lg), quasi_dispersion(lg));
  const auto nbf = fit_of(ModelFamily::NegativeBinomial, vec({lin}), 0.0, 1.0, 1.0 / r);
  check_variance(nb, model_mean(x, nbf), quasi_dispersion(nbf));
  const auto ln = fit_of(ModelFamily::LognormalPoisson, vec({lin}), sigma2);
  check_variance(lnp, model_mean(x, ln), quasi_dispersion(ln));
}

TEST_CASE("Pearson statistic") {
  Dataset d = Dataset::intercept_only({3, 3, 3, 3});
  auto pois = fit_of(ModelFamily::Poisson, vec({std::log(3.0)}));
  CHECK(pearson_statistic(pois, d).pearson == doctest::Approx(0.0).epsilon(1e-12));

  RngStream rng(5);
  Dataset g;
  g.X.resize(40, 2);
  for (Eigen::Index i = 0; i < 40; ++i) {
    g.X(i, 0) = 1.0;
    g.X(i, 1) = rng.normal();
    g.y.push_back(rng.poisson(3.0));
  }
  const auto fit = fit_of(ModelFamily::Lgnb, vec({0.2, 0.1}), 0.2, 3.0);
  const auto rep = pearson_statistic(fit, g);
  double sum_sq = 0.0;
  for (double e : rep.residuals) sum_sq += e * e;
  CHECK(rep.pearson == doctest::Approx(sum_sq).epsilon(1e-10));
  CHECK(rep.kappa == doctest::Approx(quasi_dispersion(fit)).epsilon(1e-15));
  for (Eigen::Index i = 0; i < 40; ++i) {
    const double mu = model_mean(g.X.row(i).transpose(), fit);
    CHECK(rep.fitted_mean[static_cast<std::size_t>(i)] == doctest::Approx(mu).epsilon(1e-14));
    const double e = (static_cast<double>(g.y[static_cast<std::size_t>(i)]) - mu) /
                     std::sqrt(mu * (1.0 + rep.kappa * mu));
    CHECK(rep.residuals[static_cast<std::size_t>(i)] == doctest::Approx(e).epsilon(1e-13));
  }

  std::vector<Eigen::Index> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  Dataset perm;
  perm.X.resize(40, 2);
  for (Eigen::Index k = 0; k < 40; ++k) {
    perm.X.row(k) = g.X.row(order[static_cast<std::size_t>(k)]);
    perm.y.push_back(g.y[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
  }
  CHECK(pearson_statistic(fit, perm).pearson == doctest::Approx(rep.pearson).epsilon(1e-12));

  auto tiny = fit_of(ModelFamily::Poisson, vec({-1000.0}));
  CHECK_THROWS_AS(pearson_statistic(tiny, d), NumericalFault);
}

TEST_CASE("trace summaries") {
  const std::size_t lags_arr[] = {0, 1, 5};
  std::map<std::string, std::vector<double>> traces;
  traces["flat"] = std::vector<double>(100, 2.5);
  RngStream rng(9);
  std::vector<double> noise(10000);
  for (auto& v : noise) v = rng.normal();
  traces["noise"] = noise;
  const auto sum = trace_summary(traces, lags_arr);

  const auto& flat = sum.parameters.at("flat");
  CHECK(flat.degenerate);
  CHECK(flat.sd == 0.0);
  CHECK(flat.mean == 2.5);
  CHECK(flat.autocorr.empty());
  CHECK(std::isnan(autocorrelation(traces["flat"], 1)));

  const auto& w = sum.parameters.at("noise");
  CHECK_FALSE(w.degenerate);
  CHECK(w.autocorr.at(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(w.autocorr.at(1)) < 3.0 / std::sqrt(10000.0));
  double prev = -kInf;
  for (auto [prob, value] : w.quantiles) {
    CHECK(value >= prev);
    prev = value;
  }
  std::size_t total = 0;
  for (auto c : w.hist.counts) total += c;
  CHECK(total == noise.size());
  CHECK(w.hist.edges.size() == w.hist.counts.size() + 1);

  const auto fixed = histogram(noise, 30);
  CHECK(fixed.counts.size() == 30);
  CHECK(std::accumulate(fixed.counts.begin(), fixed.counts.end(), std::size_t{0}) == noise.size());

  std::map<std::string, std::vector<double>> empty{{"x", {}}};
  CHECK_THROWS_AS(trace_summary(empty, lags_arr), DomainError);
  CHECK_THROWS_AS(histogram(std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(autocorrelation(noise, noise.size()), DomainError);
}

TEST_CASE("beta correlation") {
  const Matrix id = Matrix::Identity(3, 3);
  CHECK(beta_correlation(id).isApprox(id, 1e-15));
  Matrix s(2, 2);
  s << 4, 2, 2, 4;
  const Matrix c = beta_correlation(s);
  CHECK(c(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(beta_correlation(bad), DomainError);
  Matrix asym(2, 2);
  asym << 1, 0.2, 0.1, 1;
  CHECK_THROWS_AS(beta_correlation(asym), DomainError);
  CHECK_THROWS_AS(beta_correlation(Matrix(0, 0)), DomainError);

  Matrix draws(4, 2);
  draws << 1, 2, 2, 4, 3, 6, 4, 9;
  const Matrix cov = sample_covariance(draws);
  CHECK(cov(0, 0) == doctest::Approx(5.0 / 3.0));
  CHECK(cov(0, 1) == doctest::Approx(11.5 / 3.0));
  CHECK(cov(1, 1) == doctest::Approx(26.75 / 3.0));
  CHECK_THROWS_AS(sample_covariance(Matrix(1, 2)), DomainError);
}

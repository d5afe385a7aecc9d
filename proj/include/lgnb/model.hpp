#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace lgnb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Counts = std::vector<std::uint64_t>;

/// Count responses with a design matrix whose first column is the intercept.
struct Dataset {
  Counts y;
  Matrix X;  ///< N x (P+1)

  std::size_t n() const { return y.size(); }
  std::size_t n_coef() const { return static_cast<std::size_t>(X.cols()); }
  std::uint64_t max_count() const;
  Vector y_as_vector() const;

  /// Throws DomainError unless rows match, X is finite, X has at least one
  /// column and the first column is identically 1. Empty data (N = 0) is
  /// accepted here; fitting front-ends decide whether they allow it.
  void validate() const;

  /// Intercept-only design for a plain count sample.
  static Dataset intercept_only(Counts y);
};

/// Gamma hyperparameters of the regression model plus the Beta prior used by
/// the univariate model. All are shape/rate pairs with default 0.01.
struct Hyperparameters {
  double a0 = 0.01;  ///< shape of r
  double b0 = 0.01;  ///< shape of h (rate hyper of r)
  double c0 = 0.01;  ///< shape of alpha_p
  double d0 = 0.01;  ///< rate of alpha_p
  double e0 = 0.01;  ///< shape of the lognormal precision
  double f0 = 0.01;  ///< rate of the lognormal precision
  double g0 = 0.01;  ///< rate of h
  double beta_a = 0.01;  ///< univariate p ~ Beta(beta_a, beta_b)
  double beta_b = 0.01;

  void validate() const;
};

/// Univariate count sample with summary statistics (variance uses N-1).
struct UnivariateSample {
  Counts y;

  std::size_t n() const { return y.size(); }
  double sum() const;
  double mean() const;
  double variance() const;
  std::uint64_t max_count() const;
};

}  // namespace lgnb

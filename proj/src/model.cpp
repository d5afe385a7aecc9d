#include "lgnb/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lgnb/errors.hpp"

namespace lgnb {

std::uint64_t Dataset::max_count() const {
  return y.empty() ? 0 : *std::max_element(y.begin(), y.end());
}

Vector Dataset::y_as_vector() const {
  Vector out(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<double>(y[i]);
  return out;
}

void Dataset::validate() const {
  if (X.cols() < 1) throw DomainError("dataset: design matrix needs an intercept column");
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw DomainError("dataset: X has " + std::to_string(X.rows()) + " rows but y has " +
                      std::to_string(y.size()) + " entries");
  }
  if (!X.allFinite()) throw DomainError("dataset: design matrix has non-finite entries");
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (X(i, 0) != 1.0) {
      throw DomainError("dataset: first column must be all ones (row " + std::to_string(i) + ")");
    }
  }
}

Dataset Dataset::intercept_only(Counts y) {
  Dataset d;
  d.X = Matrix::Ones(static_cast<Eigen::Index>(y.size()), 1);
  d.y = std::move(y);
  return d;
}

void Hyperparameters::validate() const {
  const double all[] = {a0, b0, c0, d0, e0, f0, g0, beta_a, beta_b};
  for (double v : all) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("hyperparameters must be positive and finite");
    }
  }
}

double UnivariateSample::sum() const {
  return std::accumulate(y.begin(), y.end(), 0.0,
                         [](double acc, std::uint64_t v) { return acc + static_cast<double>(v); });
}

double UnivariateSample::mean() const {
  if (y.empty()) throw DomainError("empty sample has no mean");
  return sum() / static_cast<double>(y.size());
}

double UnivariateSample::variance() const {
  if (y.size() < 2) throw DomainError("sample variance needs at least two observations");
  const double m = mean();
  double ss = 0.0;
  for (auto v : y) {
    const double d = static_cast<double>(v) - m;
    ss += d * d;
  }
  return ss / static_cast<double>(y.size() - 1);
}

std::uint64_t UnivariateSample::max_count() const {
  return y.empty() ? 0 : *std::max_element(y.begin(), y.end());
}

}  // namespace lgnb

#pragma once

#include <cstdint>
#include <random>

namespace lgnb {

/// Seedable random stream. A stream is identified by (seed, stream id);
/// `derive` produces child streams with their own engine state, so chains or
/// per-observation computations never share state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Child stream; deterministic in (seed, stream, id).
  RngStream derive(std::uint64_t id) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal(double mean = 0.0, double sd = 1.0);
  /// Gamma with shape and *scale* (mean = shape * scale).
  double gamma(double shape, double scale = 1.0);
  double beta(double a, double b);
  /// logit of a Beta(a, b) draw, i.e. ln(X/Y) for X~Gamma(a), Y~Gamma(b).
  /// Stays finite where the Beta draw itself would round to 0 or 1.
  double beta_logit(double a, double b);
  std::uint64_t poisson(double mean);

  std::mt19937_64& engine() { return engine_; }

 private:
  double log_gamma_draw(double shape);

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace lgnb

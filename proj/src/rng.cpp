#include "lgnb/rng.hpp"

#include <cmath>

namespace lgnb {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(stream ^ 0x632be59bd9b4e019ULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

RngStream RngStream::derive(std::uint64_t id) const {
  return RngStream(seed_, splitmix64(stream_ * 0x9e3779b97f4a7c15ULL + id + 1));
}

double RngStream::uniform() {
  // 53 random bits mapped into (0, 1); zero is rejected.
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double RngStream::normal(double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  return dist(engine_);
}

double RngStream::gamma(double shape, double scale) {
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

double RngStream::log_gamma_draw(double shape) {
  // For small shapes, X = Gamma(shape + 1) * U^(1/shape) avoids underflow.
  if (shape < 1.0) return std::log(gamma(shape + 1.0)) + std::log(uniform()) / shape;
  return std::log(gamma(shape));
}

double RngStream::beta_logit(double a, double b) {
  const double la = log_gamma_draw(a);
  const double lb = log_gamma_draw(b);
  return la - lb;
}

double RngStream::beta(double a, double b) {
  const double t = beta_logit(a, b);
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

std::uint64_t RngStream::poisson(double mean) {
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(engine_);
}

}  // namespace lgnb

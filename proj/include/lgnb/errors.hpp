#pragma once

#include <stdexcept>
#include <string>

namespace lgnb {

/// Invalid argument or parameter outside the support of a distribution.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A computation that is valid analytically produced something unusable
/// (non-positive scale, failed factorization, non-finite draw).
class NumericalFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent run configuration (flags, iteration counts, model/method).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data; the message carries the row/column location.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lgnb

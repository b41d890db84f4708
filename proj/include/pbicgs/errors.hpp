#pragma once

#include <stdexcept>
#include <string>

namespace pbicgs {

/// Invalid user or programmatic configuration (bad extents, rank layout, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The operator has a zero eigenvalue (e.g. Neumann on every face).
class SingularOperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Chebyshev interval is empty, crossed, or touches the origin.
class SpectralIntervalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense assembly requested for more unknowns than the oracle cap allows.
class OracleSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure inside a rank communicator (timeout, contract violation, abort).
class CommError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pbicgs

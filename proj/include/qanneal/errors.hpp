#pragma once

#include <stdexcept>
#include <string>

namespace qanneal {

// Error taxonomy shared by the library and the CLI.  The CLI maps each kind
// to a stable process exit code: ConfigError -> 2, NumericalError -> 3,
// IoError -> 4.

// Invalid or inconsistent user-supplied parameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A computation that cannot produce a meaningful result (diverged
// optimization, ill-posed input matrix, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Requested inverse-subgradient target lies outside the attainable band
// [max dq(0), min dq(1)].  Distinct type so callers can branch on
// "this instant is a bang, not a singular arc".
class SubgradientRangeError : public NumericalError {
 public:
  explicit SubgradientRangeError(const std::string& what)
      : NumericalError(what) {}
};

// Filesystem / serialization failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qanneal

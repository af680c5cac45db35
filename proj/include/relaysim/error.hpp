#pragma once

#include <stdexcept>
#include <string>

namespace relaysim {

/// Malformed or out-of-range configuration (scenario file, overrides, CLI).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a model (e.g. d <= 0 in a path loss law).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Caller broke a precondition (dimension mismatch, empty codebook, ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// A runtime invariant of the simulation did not hold.
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void expects(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace relaysim

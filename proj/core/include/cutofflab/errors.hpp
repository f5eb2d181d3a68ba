#pragma once

#include <stdexcept>
#include <string>

namespace cutofflab {

// Rejected input: bad modulus, malformed support, out-of-domain parameter,
// unsupported closed form, singular or non-positive-definite matrix.
// The command-line tool maps this to exit code 1.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

// Request exceeds a configured enumeration, state-count, or step budget.
// The command-line tool maps this to exit code 2.
class budget_error : public std::runtime_error {
 public:
  explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

// A computed quantity violated an internal consistency guarantee (kernel mass
// drift, asymmetry residue, failed cross-check).  Exit code 3.
class invariant_error : public std::runtime_error {
 public:
  explicit invariant_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cutofflab

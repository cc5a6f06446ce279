#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpforge {

/// Cholesky-type factorization hit a non-positive pivot.
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(std::ptrdiff_t pivot, double value);
  std::ptrdiff_t pivot() const noexcept { return pivot_; }
  double value() const noexcept { return value_; }

 private:
  std::ptrdiff_t pivot_;
  double value_;
};

/// A set of fidelity parameters violates a coupling constraint between its
/// parameters (e.g. the quadrature budget exceeds its cap).
class ConstraintError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A streaming consumer refused or failed on an element.
class StreamingError : public std::runtime_error {
 public:
  StreamingError(std::size_t emitted, const std::string& what);
  std::size_t emitted() const noexcept { return emitted_; }

 private:
  std::size_t emitted_;
};

}  // namespace gpforge

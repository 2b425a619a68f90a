#pragma once

#include <stdexcept>
#include <string>

namespace lpsl {

// Bad input: malformed files, out-of-range parameters, inconsistent shapes.
// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// The numerics failed: divergence, non-convergence, non-finite values,
// density guard. The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lpsl

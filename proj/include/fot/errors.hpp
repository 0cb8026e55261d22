#pragma once

#include <stdexcept>
#include <string>

namespace fot {

// Newton loop ran out of iterations before the step size dropped below
// tolerance. Carries the last iterate so callers can report context.
class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, double last_value,
                      double last_residual, int iterations)
      : std::runtime_error(what),
        last_value(last_value),
        last_residual(last_residual),
        iterations(iterations) {}

  double last_value;
  double last_residual;
  int iterations;
};

// A non-finite value appeared where the algorithm requires a finite one.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested scalar precision is below the minimum the divergence needs.
class PrecisionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fot

#pragma once

#include <stdexcept>
#include <string>

namespace elastica {

// Failures of the numerics (exit code 1 at the command line).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// det(grad eta) <= 0 somewhere.
struct DegenerateMap : NumericalError {
  using NumericalError::NumericalError;
};

// |d1 eta| fell below the allowed floor on a wall.
struct BoundaryDegeneracy : NumericalError {
  using NumericalError::NumericalError;
};

struct SolverFailure : NumericalError {
  using NumericalError::NumericalError;
};

// Data violating a compatibility condition beyond tolerance.
struct IllPosedData : NumericalError {
  using NumericalError::NumericalError;
};

// Bad configuration or arguments (exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace elastica

#pragma once

#include <stdexcept>
#include <string>

namespace qsurf {

// Invalid parameter combinations and schema problems. CLI exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GeometryConflict : ValidationError {
    using ValidationError::ValidationError;
};

// Numerical failures (mesh generation, linear solves). CLI exit code 2.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MeshFailure : NumericalError {
    using NumericalError::NumericalError;
};

struct SingularSystem : NumericalError {
    using NumericalError::NumericalError;
};

struct NonConvergence : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace qsurf

#pragma once

#include <stdexcept>
#include <string>

namespace hba {

// Base for every error thrown by the library. Catching this at the CLI
// boundary separates data/usage problems (exit 2) from numerical ones (exit 1).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input-side errors (bad files, bad config, missing data).
struct InputError : Error {
  using Error::Error;
};

struct FormatError : InputError {
  using InputError::InputError;
};
struct EmptyScan : InputError {
  using InputError::InputError;
};
struct NonRigidRotation : InputError {
  using InputError::InputError;
};
struct MissingPose : InputError {
  using InputError::InputError;
};
struct LengthMismatch : InputError {
  using InputError::InputError;
};
struct ConfigError : InputError {
  using InputError::InputError;
};
struct DegenerateMap : InputError {
  using InputError::InputError;
};

// Numerical / internal errors.
struct NumericalError : Error {
  using Error::Error;
};

struct AngleAtPi : NumericalError {
  using NumericalError::NumericalError;
};
struct NoFeatures : NumericalError {
  using NumericalError::NumericalError;
};
struct NonFiniteCost : NumericalError {
  using NumericalError::NumericalError;
};
struct SingularHessian : NumericalError {
  using NumericalError::NumericalError;
};
struct DisconnectedGraph : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace hba

#pragma once

#include <stdexcept>

namespace tripod {

// Base class for all failures raised by the library.
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adiabatic frame requested for a drive sample whose angles are undefined.
struct DegenerateDriveError : SimulationError {
  using SimulationError::SimulationError;
};

// dt * ||H(t)|| exceeded the configured stability bound.
struct StepSizeError : SimulationError {
  using SimulationError::SimulationError;
};

// Population leaked out of the dark subspace beyond the configured threshold.
struct AdiabaticityError : SimulationError {
  using SimulationError::SimulationError;
};

// A density matrix eigenvalue dropped below the allowed tolerance.
struct PositivityError : SimulationError {
  using SimulationError::SimulationError;
};

// exp(gamma0 * elapsed) would overflow the interaction-picture couplings.
struct OverflowGuardError : SimulationError {
  using SimulationError::SimulationError;
};

// Gap calibration could not reach the requested geometric phase.
struct CalibrationError : SimulationError {
  using SimulationError::SimulationError;
};

// Malformed or incomplete run configuration.
struct ConfigError : SimulationError {
  using SimulationError::SimulationError;
};

}  // namespace tripod

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tripod/drive.hpp"
#include "tripod/propagate.hpp"

namespace tripod {

// Batch-run parameters. Times are in units of the pulse width, amplitudes in
// inverse pulse widths; see reference_config() for the built-in set.
struct RunConfig {
  double a_max0_tau_2pi = 0.0;       // channel-0 peak amplitude, over 2*pi
  double a_max1_over_a_max0 = 0.0;   // channel-1 amplitude ratio
  double intra_delay_tau = 0.0;      // delay between the two pulses of a pass
  std::optional<double> gap_tau;     // pass separation, start to start
  std::optional<double> calibrate_gamma1_target;  // solve for the gap instead
  double phi01 = 0.0;                // relative phase of channels 0 and 1
  double phi2_rate_tau = 0.0;        // linear phase rate of channel 2
  std::vector<double> gamma0_tau;    // dephasing rates to sweep
  std::optional<std::string> initial_state;            // axial label
  std::optional<std::array<double, 4>> initial_amps;   // re0,im0,re1,im1
  std::uint64_t n_trajectories = 10000;
  std::uint64_t seed = 12345;
  double dt_tau = 4.0e-5;
  int observer_cadence = 100;
  int one_jump_nodes = 200;
  std::string output_path = ".";
};

// The parameter set behind the --paper-defaults flag: peak amplitude
// 2*pi*300, amplitude ratio sqrt(2)+1 (mixing angle pi/8), unit intra-pass
// delay, pass gap pi, phi01 = pi, unit phase rate, dephasing sweep
// {1e-5, 1e-3, 1e-1}, initial state |0>.
RunConfig reference_config();

// Flat key=value file; '#' starts a comment. Unknown keys, missing required
// keys, and out-of-range values are hard errors naming the offender.
RunConfig parse_config(const std::filesystem::path& file);

// Same validation applied to an in-memory config (used for flag overrides).
void validate_config(const RunConfig& cfg);

// Schedule for the configured parameters, solving for the gap first when a
// phase target was requested instead of an explicit gap.
PulseSchedule build_schedule(const RunConfig& cfg);

// The configured initial state (axial label or explicit qubit amplitudes).
StateVector initial_state_vector(const RunConfig& cfg);

// Integration grid from the configured step and cadence.
Integration integration_grid(const RunConfig& cfg);

// Writes every resolved parameter as a reusable config file. `resolved_gap`
// replaces any calibration request so a rerun reproduces outputs
// byte-identically without re-solving.
void write_manifest(const RunConfig& cfg, double resolved_gap,
                    const std::filesystem::path& file);

}  // namespace tripod

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "tripod/drive.hpp"
#include "tripod/propagate.hpp"

namespace tripod {

// Schedule quadratures, evaluated as differences of prefix integrals
// anchored at t_i on a fixed composite-Simpson grid; values over adjacent
// intervals are therefore additive to rounding accuracy.
double integral_sin2_thetaH(const PulseSchedule& schedule, double t0,
                            double t1);
double integral_rabi_norm(const PulseSchedule& schedule, double t0, double t1);

// Geometric phase accumulated by the first dark state between t0 and t1:
// -integral of phi2_rate * sin^2(thetaH) dt.
double geometric_phase(const PulseSchedule& schedule, double t0, double t1);
double geometric_phase(const PulseSchedule& schedule);

// Unitary acting on span{|0>, |1>} after one full double-STIRAP return with
// dark-1 phase gamma_d1 (dark 2 acquires none):
//   U = P_D2 + e^{i gamma_d1} P_D1 restricted to the qubit plane.
// theta01 = pi/8, phi01 = pi, gamma_d1 = -pi gives the Hadamard gate.
Eigen::Matrix2cd gate_matrix(double theta01, double phi01, double gamma_d1);

// Apply gate_matrix for the schedule's own geometric phase to the qubit
// components of psi (which must live in span{|0>, |1>}).
StateVector ideal_final_state(const StateVector& psi, const PulseSchedule& s);

struct DarkSample {
  double t = 0.0;
  std::complex<double> c_d1;
  std::complex<double> c_d2;
  double bright_population = 0.0;
};

struct DarkRun {
  std::vector<DarkSample> trace;
  std::complex<double> c_d1_final;
  std::complex<double> c_d2_final;
  double max_bright_population = 0.0;
};

// Closed evolution projected onto the instantaneous frame at observer
// samples. Throws AdiabaticityError when the bright population exceeds
// `bright_threshold` at any sample.
DarkRun propagate_dark(const StateVector& psi_i, const PulseSchedule& schedule,
                       const Integration& grid,
                       double bright_threshold = 1e-3);

struct ClosedRun {
  StateVector final_state;
  std::vector<double> t;
  std::vector<std::array<double, 4>> populations;
  double max_pe = 0.0;
};

// Plain closed-system run recording populations at observer samples.
ClosedRun run_closed(const StateVector& psi_i, const PulseSchedule& schedule,
                     const Integration& grid);

}  // namespace tripod

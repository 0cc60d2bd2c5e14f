#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "tripod/closed.hpp"
#include "tripod/drive.hpp"
#include "tripod/open.hpp"
#include "tripod/propagate.hpp"

namespace tripod {

// Uhlmann fidelity F(rho, sigma) = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

// <psi|rho|psi>, the Uhlmann fidelity against a pure reference.
double state_fidelity(const DensityMatrix& rho, const StateVector& psi);

// Six axial qubit states: |0>, |1>, (|0>+-|1>)/sqrt2, (|0>+-i|1>)/sqrt2.
std::array<StateVector, 6> axial_states();
std::array<std::string, 6> axial_labels();

// Closed-form survival-weighted overlap for a jump-free segment whose ledger
// is known: the two dark channels beat against the ideal phase gamma_ideal.
double nojump_fidelity_closed_form(const PhaseLedger& ledger,
                                   std::complex<double> c1,
                                   std::complex<double> c2,
                                   double gamma_ideal);

enum class FidelityMode { kNoJump, kOneJump, kMc, kUhlmann };

struct FidelityOptions {
  Integration grid;
  int one_jump_nodes = 200;      // midpoint nodes for the one-jump correction
  std::uint64_t n_trajectories = 10000;  // kMc only
  std::uint64_t seed = 12345;            // kMc only
  int threads = 1;                       // kMc only
};

struct FidelityReport {
  double gamma0 = 0.0;
  FidelityMode mode = FidelityMode::kNoJump;
  std::array<double, 6> per_state{};  // ordered as axial_states()
  double average = 0.0;
};

// Gate fidelity of the schedule at dephasing rate gamma0, averaged over the
// six axial states, each compared against the ideal gate's image.
//
//   kNoJump   keeps only the jump-free branch (a strict lower bound),
//   kOneJump  adds the single-jump correction by quadrature,
//   kMc       averages stochastic trajectories,
//   kUhlmann  evolves the master equation exactly.
FidelityReport average_fidelity(const PulseSchedule& schedule, double gamma0,
                                FidelityMode mode,
                                const FidelityOptions& opts = {});

}  // namespace tripod

#pragma once

#include <Eigen/Dense>

#include "tripod/drive.hpp"

namespace tripod {

// Basis ordering throughout: |0>, |1>, |e>, |2>. hbar = 1, all couplings are
// angular frequencies, and every laser is on resonance with its transition.
inline constexpr int kIdx0 = 0;
inline constexpr int kIdx1 = 1;
inline constexpr int kIdxE = 2;
inline constexpr int kIdx2 = 3;

using Hamiltonian4 = Eigen::Matrix4cd;

// Rotating-frame tripod Hamiltonian: each ground state couples to |e> with
// half its Rabi amplitude; channels 1 and 2 carry the phases phi01 and phi2.
Hamiltonian4 hamiltonian_closed(const DriveSample& s);

// Closed Hamiltonian with the pure-dephasing no-jump term absorbed:
// H - i gamma0 |0><0|. Norm decay of states evolved under it is the physics
// (survival probability), so integrators must not renormalize.
Hamiltonian4 hamiltonian_nonhermitian(const DriveSample& s, double gamma0);

// Interaction picture of hamiltonian_nonhermitian with respect to the decay
// term: couplings <0|..|e> pick up e^{+-gamma0 elapsed} and the diagonal is
// zero. elapsed = t - t_i. Throws OverflowGuardError once
// gamma0 * elapsed > 50, where the growing factor would poison products.
Hamiltonian4 hamiltonian_interaction(const DriveSample& s, double gamma0,
                                     double elapsed);

// Instantaneous eigenframe. Columns of `right` (rows of `left`) are ordered
// bright +, bright -, dark 1, dark 2; the bright eigenvalues are +-S/2 with
// S = sqrt(a0^2 + a1^2 + a2^2) and the dark ones vanish. The frame is
// biorthonormal (left * right = 1) rather than unitary: for gamma0 > 0 the
// |0> components of right vectors grow like e^{gamma0 elapsed} while the
// left ones decay, mirroring the interaction-picture Hamiltonian the frame
// diagonalizes.
struct AdiabaticFrame {
  double omega_plus = 0.0;
  double omega_minus = 0.0;
  Eigen::Matrix4cd right;
  Eigen::Matrix4cd left;
};

inline constexpr int kPlus = 0;
inline constexpr int kMinus = 1;
inline constexpr int kDark1 = 2;
inline constexpr int kDark2 = 3;

// Frames require finite drive angles; a sample with NaN angles (all
// amplitudes zero and no hold value) raises DegenerateDriveError.
AdiabaticFrame eigensystem_closed(const DriveSample& s);
AdiabaticFrame eigensystem_open(const DriveSample& s, double gamma0,
                                double elapsed);

}  // namespace tripod

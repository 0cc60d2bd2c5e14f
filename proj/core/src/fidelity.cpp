#include "tripod/fidelity.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "tripod/errors.hpp"
#include "tripod/model.hpp"

namespace tripod {

namespace {

using Cx = std::complex<double>;

// Hermitian square root with eigenvalues clamped at zero; rejects matrices
// that are negative beyond numerical noise.
Eigen::Matrix4cd psd_sqrt(const Eigen::Matrix4cd& m) {
  const Eigen::Matrix4cd h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h);
  Eigen::Vector4d ev = es.eigenvalues();
  for (int i = 0; i < 4; ++i) {
    if (ev(i) < -1e-8)
      throw PositivityError("density matrix has a negative eigenvalue");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() *
         es.eigenvectors().adjoint();
}

}  // namespace

double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const Eigen::Matrix4cd sr = psd_sqrt(rho.rho);
  const Eigen::Matrix4cd inner = sr * sigma.rho * sr;
  const Eigen::Matrix4cd h = 0.5 * (inner + inner.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h, Eigen::EigenvaluesOnly);
  // Eigenvalues that vanish in exact arithmetic come back as O(eps * ||h||)
  // noise; the square root would amplify them to ~1e-8 each, so anything
  // below the solver's resolution is dropped instead of rooted.
  const double noise_floor = 1e-14 * h.cwiseAbs().maxCoeff();
  double root_sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev < -1e-8)
      throw PositivityError("fidelity kernel has a negative eigenvalue");
    if (ev > noise_floor) root_sum += std::sqrt(ev);
  }
  return root_sum * root_sum;
}

double state_fidelity(const DensityMatrix& rho, const StateVector& psi) {
  const Eigen::Vector4cd v = psi.normalized().amps;
  return std::real(v.dot(rho.rho * v));
}

std::array<StateVector, 6> axial_states() {
  const double r = 1.0 / std::sqrt(2.0);
  return {StateVector::basis(kIdx0),
          StateVector::basis(kIdx1),
          StateVector::qubit(r, r),
          StateVector::qubit(r, -r),
          StateVector::qubit(r, Cx(0.0, 1.0) * r),
          StateVector::qubit(r, Cx(0.0, -1.0) * r)};
}

std::array<std::string, 6> axial_labels() {
  return {"0", "1", "x+", "x-", "y+", "y-"};
}

double nojump_fidelity_closed_form(const PhaseLedger& lg, Cx c1, Cx c2,
                                   double gamma_ideal) {
  const double w1 = lg.dark1_defined ? lg.mod_ratio1 * std::norm(c1) : 0.0;
  const double w2 = lg.dark2_defined ? lg.mod_ratio2 * std::norm(c2) : 0.0;
  double f = w1 * w1 + w2 * w2;
  if (lg.dark1_defined && lg.dark2_defined)
    f += 2.0 * w1 * w2 * std::cos(lg.gamma1 - lg.gamma2 - gamma_ideal);
  return f;
}

FidelityReport average_fidelity(const PulseSchedule& schedule, double gamma0,
                                FidelityMode mode,
                                const FidelityOptions& opts) {
  if (gamma0 < 0.0)
    throw SimulationError("dephasing rate must be non-negative");
  const auto states = axial_states();

  std::array<Eigen::Vector4cd, 6> targets;
  for (std::size_t i = 0; i < 6; ++i)
    targets[i] = ideal_final_state(states[i], schedule).amps;

  FidelityReport rep;
  rep.gamma0 = gamma0;
  rep.mode = mode;

  // Without jumps there is nothing stochastic to sample and the single-jump
  // correction vanishes; every mode shy of the master equation coincides.
  const bool closed = (gamma0 == 0.0);

  switch (mode) {
    case FidelityMode::kNoJump:
    case FidelityMode::kOneJump: {
      std::vector<NoJumpTrace> traces;
      traces.reserve(6);
      for (const auto& s : states)
        traces.emplace_back(s, schedule, gamma0, opts.grid);
      for (std::size_t i = 0; i < 6; ++i)
        rep.per_state[i] =
            std::norm(targets[i].dot(traces[i].final_state().amps));
      if (mode == FidelityMode::kOneJump && !closed) {
        if (opts.one_jump_nodes < 1)
          throw SimulationError("one-jump quadrature needs at least one node");
        const double t0 = schedule.t_initial();
        const double span = schedule.duration();
        const double w = span / opts.one_jump_nodes;
        for (int k = 0; k < opts.one_jump_nodes; ++k) {
          const double tk = t0 + (k + 0.5) * w;
          // The post-jump branch starts from |0> regardless of the initial
          // state, so one propagation serves all six.
          const Eigen::Vector4cd chi =
              propagate_from_jump(traces[0], tk).amps;
          for (std::size_t i = 0; i < 6; ++i) {
            const double c0sq = std::norm(traces[i].state_at(tk)(kIdx0));
            rep.per_state[i] +=
                w * 2.0 * gamma0 * c0sq * std::norm(targets[i].dot(chi));
          }
        }
      }
      break;
    }
    case FidelityMode::kMc: {
      if (closed) {
        for (std::size_t i = 0; i < 6; ++i) {
          NoJumpTrace tr(states[i], schedule, gamma0, opts.grid);
          rep.per_state[i] = std::norm(
              targets[i].dot(tr.final_state().normalized().amps));
        }
        break;
      }
      for (std::size_t i = 0; i < 6; ++i) {
        const McwfBatch batch = average_trajectories(
            states[i], schedule, gamma0, opts.n_trajectories,
            opts.seed + static_cast<std::uint64_t>(i), TrajectoryOptions{opts.grid},
            opts.threads);
        StateVector t;
        t.amps = targets[i];
        t.is_normalized = true;
        rep.per_state[i] = state_fidelity(batch.rho_final, t);
      }
      break;
    }
    case FidelityMode::kUhlmann: {
      for (std::size_t i = 0; i < 6; ++i) {
        DensityMatrix rho_final;
        evolve_density(DensityMatrix::pure(states[i]), schedule, gamma0,
                       opts.grid,
                       [&](double, const DensityMatrix& r) { rho_final = r; });
        StateVector t;
        t.amps = targets[i];
        t.is_normalized = true;
        rep.per_state[i] = state_fidelity(rho_final, t);
      }
      break;
    }
  }

  double sum = 0.0;
  for (double f : rep.per_state) sum += f;
  rep.average = sum / 6.0;
  return rep;
}

}  // namespace tripod

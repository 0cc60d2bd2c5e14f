#include "tripod/propagate.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

#include "tripod/model.hpp"

namespace tripod {

StateVector StateVector::basis(int idx) {
  if (idx < 0 || idx > 3) throw SimulationError("basis index out of range");
  StateVector s;
  s.amps(idx) = 1.0;
  s.is_normalized = true;
  return s;
}

StateVector StateVector::qubit(std::complex<double> c0,
                               std::complex<double> c1) {
  StateVector s;
  s.amps(kIdx0) = c0;
  s.amps(kIdx1) = c1;
  const double n = s.amps.norm();
  if (n < 1e-300) throw SimulationError("qubit state has zero norm");
  s.amps /= n;
  s.is_normalized = true;
  return s;
}

StateVector StateVector::normalized() const {
  const double n = amps.norm();
  if (n < 1e-300)
    throw SimulationError("cannot normalize a zero-norm state");
  StateVector s;
  s.amps = amps / n;
  s.is_normalized = true;
  return s;
}

std::array<double, 4> StateVector::populations() const {
  const double n2 = norm_sq();
  if (n2 < 1e-300)
    throw SimulationError("populations of a zero-norm state are undefined");
  std::array<double, 4> p{};
  for (int i = 0; i < 4; ++i) p[i] = std::norm(amps(i)) / n2;
  return p;
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  const StateVector n = psi.is_normalized ? psi : psi.normalized();
  DensityMatrix d;
  d.rho = n.amps * n.amps.adjoint();
  return d;
}

double DensityMatrix::hermiticity_error() const {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(
      0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::array<double, 4> DensityMatrix::populations() const {
  std::array<double, 4> p{};
  for (int i = 0; i < 4; ++i) p[i] = rho(i, i).real();
  return p;
}

namespace detail {

double spectral_norm(const Eigen::Matrix4cd& m) {
  return m.jacobiSvd().singularValues()(0);
}

}  // namespace detail

namespace {

Eigen::Matrix4cd lindblad_rhs(const Eigen::Matrix4cd& h,
                              const Eigen::Matrix4cd& r, double gamma0) {
  const std::complex<double> mi(0.0, -1.0);
  Eigen::Matrix4cd d = mi * (h * r - r * h);
  for (int j = 1; j < 4; ++j) {
    d(kIdx0, j) -= gamma0 * r(kIdx0, j);
    d(j, kIdx0) -= gamma0 * r(j, kIdx0);
  }
  return d;
}

}  // namespace

DensityMatrix evolve_density(const DensityMatrix& rho0,
                             const PulseSchedule& schedule, double gamma0,
                             const Integration& grid,
                             const DensityObserver& observe) {
  if (!(gamma0 >= 0.0)) throw SimulationError("dephasing rate must be >= 0");
  if (!(grid.dt > 0.0)) throw SimulationError("dt must be positive");
  if (grid.observer_stride < 1)
    throw SimulationError("observer_stride must be >= 1");

  // The drive norm bounds ||H|| by S/2 and the dissipator adds at most
  // gamma0, so one analytic check covers the whole run.
  const double h_bound = 0.5 * schedule.max_rabi_norm() + gamma0;
  if (grid.dt * h_bound > 0.1)
    throw StepSizeError(
        "dt * ||H|| exceeds the stability bound; reduce the step size");

  auto ham = [&](double t) { return hamiltonian_closed(schedule.sample(t)); };
  auto guard = [&](double t, const Eigen::Matrix4cd& r) {
    DensityMatrix d;
    d.rho = r;
    const double mineig = d.min_eigenvalue();
    if (mineig < -1e-6)
      throw PositivityError(
          "density matrix developed a negative eigenvalue beyond tolerance");
    if (observe) observe(t, d);
  };

  const double t0 = schedule.t_initial();
  const double t1 = schedule.t_final();
  Eigen::Matrix4cd r = rho0.rho;
  const auto n_full = static_cast<long>(std::floor((t1 - t0) / grid.dt + 1e-9));

  guard(t0, r);
  for (long k = 0; k < n_full; ++k) {
    const double t = t0 + static_cast<double>(k) * grid.dt;
    const double dt = grid.dt;
    const Eigen::Matrix4cd k1 = lindblad_rhs(ham(t), r, gamma0);
    const Eigen::Matrix4cd hm = ham(t + 0.5 * dt);
    const Eigen::Matrix4cd k2 = lindblad_rhs(hm, r + (0.5 * dt) * k1, gamma0);
    const Eigen::Matrix4cd k3 = lindblad_rhs(hm, r + (0.5 * dt) * k2, gamma0);
    const Eigen::Matrix4cd k4 = lindblad_rhs(ham(t + dt), r + dt * k3, gamma0);
    r += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((k + 1) % grid.observer_stride == 0 && k + 1 < n_full)
      guard(t0 + static_cast<double>(k + 1) * grid.dt, r);
  }
  const double t_last = t0 + static_cast<double>(n_full) * grid.dt;
  const double rem = t1 - t_last;
  if (rem > 1e-9 * grid.dt) {
    const Eigen::Matrix4cd k1 = lindblad_rhs(ham(t_last), r, gamma0);
    const Eigen::Matrix4cd hm = ham(t_last + 0.5 * rem);
    const Eigen::Matrix4cd k2 = lindblad_rhs(hm, r + (0.5 * rem) * k1, gamma0);
    const Eigen::Matrix4cd k3 = lindblad_rhs(hm, r + (0.5 * rem) * k2, gamma0);
    const Eigen::Matrix4cd k4 = lindblad_rhs(ham(t1), r + rem * k3, gamma0);
    r += (rem / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  DensityMatrix out;
  out.rho = r;
  guard(t1, r);
  return out;
}

}  // namespace tripod

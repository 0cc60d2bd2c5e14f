#include "tripod/model.hpp"

#include <cmath>
#include <complex>

#include "tripod/errors.hpp"
#include "tripod/numeric.hpp"

namespace tripod {

namespace {

constexpr double kExpGuard = 50.0;

void require_frame_angles(const DriveSample& s) {
  if (!(std::isfinite(s.theta01) && std::isfinite(s.thetaH)))
    throw DegenerateDriveError(
        "adiabatic frame undefined: drive angles are not finite (all "
        "amplitudes zero with no held value?)");
}

void require_gamma0(double gamma0) {
  if (!(gamma0 >= 0.0))
    throw SimulationError("dephasing rate must be >= 0");
}

}  // namespace

Hamiltonian4 hamiltonian_closed(const DriveSample& s) {
  const auto e01 = std::polar(1.0, s.phi01);
  const auto e2 = std::polar(1.0, s.phi2);
  Hamiltonian4 h = Hamiltonian4::Zero();
  h(kIdx0, kIdxE) = 0.5 * s.a0;
  h(kIdxE, kIdx0) = 0.5 * s.a0;
  h(kIdx1, kIdxE) = 0.5 * s.a1 * e01;
  h(kIdxE, kIdx1) = 0.5 * s.a1 * std::conj(e01);
  h(kIdx2, kIdxE) = 0.5 * s.a2 * e2;
  h(kIdxE, kIdx2) = 0.5 * s.a2 * std::conj(e2);
  return h;
}

Hamiltonian4 hamiltonian_nonhermitian(const DriveSample& s, double gamma0) {
  require_gamma0(gamma0);
  Hamiltonian4 h = hamiltonian_closed(s);
  h(kIdx0, kIdx0) -= std::complex<double>(0.0, gamma0);
  return h;
}

Hamiltonian4 hamiltonian_interaction(const DriveSample& s, double gamma0,
                                     double elapsed) {
  require_gamma0(gamma0);
  const double x = gamma0 * elapsed;
  if (x > kExpGuard)
    throw OverflowGuardError(
        "interaction picture factor exp(gamma0 * elapsed) exceeds exp(50); "
        "split the evolution or lower gamma0");
  const double grow = std::exp(x);
  Hamiltonian4 h = hamiltonian_closed(s);
  h(kIdx0, kIdx0) = 0.0;
  h(kIdx0, kIdxE) *= grow;
  h(kIdxE, kIdx0) /= grow;
  return h;
}

AdiabaticFrame eigensystem_open(const DriveSample& s, double gamma0,
                                double elapsed) {
  require_frame_angles(s);
  require_gamma0(gamma0);
  if (gamma0 * elapsed > kExpGuard)
    throw OverflowGuardError(
        "open-frame factor exp(gamma0 * elapsed) exceeds exp(50)");

  const double st = std::sin(s.theta01);
  const double ct = std::cos(s.theta01);
  const double sh = std::sin(s.thetaH);
  const double ch = std::cos(s.thetaH);
  const auto e01 = std::polar(1.0, s.phi01);
  const auto e2 = std::polar(1.0, s.phi2);
  const double g = std::exp(gamma0 * elapsed);
  const double gi = 1.0 / g;
  const double r = 1.0 / std::numbers::sqrt2;

  AdiabaticFrame f;
  f.right.col(kPlus) << r * sh * st * g, r * sh * ct * e01, r, r * ch * e2;
  f.right.col(kMinus) << r * sh * st * g, r * sh * ct * e01, -r, r * ch * e2;
  f.right.col(kDark1) << -ch * st * g, -ch * ct * e01, 0.0, sh * e2;
  f.right.col(kDark2) << ct * g, -st * e01, 0.0, 0.0;

  f.left.row(kPlus) << r * sh * st * gi, r * sh * ct * std::conj(e01), r,
      r * ch * std::conj(e2);
  f.left.row(kMinus) << r * sh * st * gi, r * sh * ct * std::conj(e01), -r,
      r * ch * std::conj(e2);
  f.left.row(kDark1) << -ch * st * gi, -ch * ct * std::conj(e01), 0.0,
      sh * std::conj(e2);
  f.left.row(kDark2) << ct * gi, -st * std::conj(e01), 0.0, 0.0;

  const double half_s =
      0.5 * std::sqrt(s.a0 * s.a0 + s.a1 * s.a1 + s.a2 * s.a2);
  f.omega_plus = half_s;
  f.omega_minus = -half_s;
  return f;
}

AdiabaticFrame eigensystem_closed(const DriveSample& s) {
  return eigensystem_open(s, 0.0, 0.0);
}

}  // namespace tripod

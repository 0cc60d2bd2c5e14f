#include "tripod/closed.hpp"

#include <cmath>

#include "tripod/errors.hpp"
#include "tripod/model.hpp"
#include "tripod/numeric.hpp"

namespace tripod {

namespace {

double sin2_thetaH(const PulseSchedule& s, double t) {
  const double v = std::sin(s.sample(t).thetaH);
  return v * v;
}

double rabi_norm(const PulseSchedule& s, double t) {
  const DriveSample d = s.sample(t);
  return std::sqrt(d.a0 * d.a0 + d.a1 * d.a1 + d.a2 * d.a2);
}

template <class Fn>
double simpson_cell(const Fn& f, double a, double b) {
  const double m = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

// Prefix integral from t_i to t on a fixed global grid. The integrands are
// piecewise smooth with C^2 junctions, so composite Simpson at this
// resolution is accurate to well below 1e-12 over the full schedule.
template <class Fn>
double prefix_integral(const PulseSchedule& s, const Fn& f, double t) {
  const double t_i = s.t_initial();
  if (t <= t_i) return 0.0;
  const double h = (s.t_final() - t_i) / 32768.0;
  KahanSum sum;
  long k = 0;
  while (t_i + static_cast<double>(k + 1) * h <= t) {
    const double a = t_i + static_cast<double>(k) * h;
    sum.add(simpson_cell(f, a, a + h));
    ++k;
  }
  const double a = t_i + static_cast<double>(k) * h;
  if (t > a) sum.add(simpson_cell(f, a, t));
  return sum.value();
}

}  // namespace

double integral_sin2_thetaH(const PulseSchedule& s, double t0, double t1) {
  auto f = [&](double t) { return sin2_thetaH(s, t); };
  return prefix_integral(s, f, t1) - prefix_integral(s, f, t0);
}

double integral_rabi_norm(const PulseSchedule& s, double t0, double t1) {
  auto f = [&](double t) { return rabi_norm(s, t); };
  return prefix_integral(s, f, t1) - prefix_integral(s, f, t0);
}

double geometric_phase(const PulseSchedule& s, double t0, double t1) {
  return -s.phi2_rate() * integral_sin2_thetaH(s, t0, t1);
}

double geometric_phase(const PulseSchedule& s) {
  return geometric_phase(s, s.t_initial(), s.t_final());
}

Eigen::Matrix2cd gate_matrix(double theta01, double phi01, double gamma_d1) {
  const auto eg = std::polar(1.0, gamma_d1);
  const auto e01 = std::polar(1.0, phi01);
  const double st = std::sin(theta01);
  const double ct = std::cos(theta01);
  Eigen::Matrix2cd u;
  u(0, 0) = ct * ct + eg * st * st;
  u(0, 1) = ct * st * std::conj(e01) * (eg - 1.0);
  u(1, 0) = ct * st * e01 * (eg - 1.0);
  u(1, 1) = st * st + eg * ct * ct;
  return u;
}

StateVector ideal_final_state(const StateVector& psi, const PulseSchedule& s) {
  if (std::abs(psi.amps(kIdxE)) > 1e-12 || std::abs(psi.amps(kIdx2)) > 1e-12)
    throw SimulationError("initial state must live in span{|0>, |1>}");
  const Eigen::Matrix2cd u =
      gate_matrix(s.theta01(), s.phi01(), geometric_phase(s));
  StateVector out = psi;
  out.amps(kIdx0) = u(0, 0) * psi.amps(kIdx0) + u(0, 1) * psi.amps(kIdx1);
  out.amps(kIdx1) = u(1, 0) * psi.amps(kIdx0) + u(1, 1) * psi.amps(kIdx1);
  return out;
}

DarkRun propagate_dark(const StateVector& psi_i, const PulseSchedule& s,
                       const Integration& grid, double bright_threshold) {
  StepControl sc;
  sc.dt = grid.dt;
  sc.t_start = s.t_initial();
  sc.t_end = s.t_final();
  sc.observer_stride = grid.observer_stride;

  DarkRun run;
  auto ham = [&](double t) { return hamiltonian_closed(s.sample(t)); };
  auto observe = [&](double t, const StateVector& psi) {
    const AdiabaticFrame f = eigensystem_closed(s.sample(t));
    const Eigen::Vector4cd c = f.left * psi.amps;
    const double bright = std::norm(c(kPlus)) + std::norm(c(kMinus));
    run.max_bright_population = std::max(run.max_bright_population, bright);
    if (bright > bright_threshold)
      throw AdiabaticityError(
          "bright-state population exceeded the adiabaticity threshold");
    run.trace.push_back({t, c(kDark1), c(kDark2), bright});
  };
  evolve_state(psi_i, ham, sc, observe);
  run.c_d1_final = run.trace.back().c_d1;
  run.c_d2_final = run.trace.back().c_d2;
  return run;
}

ClosedRun run_closed(const StateVector& psi_i, const PulseSchedule& s,
                     const Integration& grid) {
  StepControl sc;
  sc.dt = grid.dt;
  sc.t_start = s.t_initial();
  sc.t_end = s.t_final();
  sc.observer_stride = grid.observer_stride;

  ClosedRun run;
  auto ham = [&](double t) { return hamiltonian_closed(s.sample(t)); };
  auto observe = [&](double t, const StateVector& psi) {
    const auto p = psi.populations();
    run.t.push_back(t);
    run.populations.push_back(p);
    run.max_pe = std::max(run.max_pe, p[kIdxE]);
  };
  run.final_state = evolve_state(psi_i, ham, sc, observe);
  return run;
}

}  // namespace tripod

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <utility>

#include "tripod/drive.hpp"
#include "tripod/errors.hpp"

namespace tripod {

struct StateVector {
  Eigen::Vector4cd amps = Eigen::Vector4cd::Zero();
  // Cleared by non-unitary evolution; callers decide when to renormalize
  // because the lost norm is the survival probability.
  bool is_normalized = false;

  static StateVector basis(int idx);
  // Qubit state c0|0> + c1|1>, normalized.
  static StateVector qubit(std::complex<double> c0, std::complex<double> c1);

  double norm_sq() const { return amps.squaredNorm(); }
  StateVector normalized() const;
  // Populations of the normalized state (raw amplitudes stay accessible
  // through `amps`).
  std::array<double, 4> populations() const;
};

struct DensityMatrix {
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();

  static DensityMatrix pure(const StateVector& psi);

  double trace_real() const { return rho.trace().real(); }
  double hermiticity_error() const;
  double min_eigenvalue() const;
  std::array<double, 4> populations() const;
};

// Fixed-step RK4 controls. The final step is shortened to land on t_end
// exactly; `max_dt_h_norm` bounds dt * ||H(t)|| (spectral norm) at observer
// samples, beyond which StepSizeError aborts the run.
struct StepControl {
  double dt = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  int observer_stride = 100;
  double max_dt_h_norm = 0.1;
};

// Grid parameters for schedule-bound runs (the time span comes from the
// schedule itself). dt defaults to tau/25000, comfortably inside the
// stability bound for the standard drive strengths.
struct Integration {
  double dt = 4.0e-5;
  int observer_stride = 100;
};

namespace detail {

inline Eigen::Vector4cd schrodinger_rhs(const Eigen::Matrix4cd& h,
                                        const Eigen::Vector4cd& y) {
  return std::complex<double>(0.0, -1.0) * (h * y);
}

template <class HamFn>
Eigen::Vector4cd rk4_step(const Eigen::Vector4cd& y, double t, double dt,
                          HamFn&& ham) {
  const Eigen::Vector4cd k1 = schrodinger_rhs(ham(t), y);
  const Eigen::Matrix4cd hm = ham(t + 0.5 * dt);
  const Eigen::Vector4cd k2 = schrodinger_rhs(hm, y + (0.5 * dt) * k1);
  const Eigen::Vector4cd k3 = schrodinger_rhs(hm, y + (0.5 * dt) * k2);
  const Eigen::Vector4cd k4 = schrodinger_rhs(ham(t + dt), y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double spectral_norm(const Eigen::Matrix4cd& m);

inline void check_step_size(const Eigen::Matrix4cd& h, double dt,
                            double bound) {
  if (dt * spectral_norm(h) > bound)
    throw StepSizeError(
        "dt * ||H|| exceeds the stability bound; reduce the step size");
}

}  // namespace detail

// Integrate y' = -i H(t) y with classical RK4 on a fixed grid. No
// renormalization: for non-Hermitian H the norm decay is the physics. The
// observer fires at t_start, after every observer_stride-th step, and at
// t_end; it receives (t, state). The step-size bound is enforced at
// observer samples.
template <class HamFn, class Observer>
StateVector evolve_state(const StateVector& psi0, HamFn&& ham,
                         const StepControl& sc, Observer&& observe) {
  if (!(sc.dt > 0.0)) throw SimulationError("dt must be positive");
  if (!(sc.t_end >= sc.t_start))
    throw SimulationError("t_end must be >= t_start");
  if (sc.observer_stride < 1)
    throw SimulationError("observer_stride must be >= 1");

  Eigen::Vector4cd y = psi0.amps;
  const double span = sc.t_end - sc.t_start;
  const auto n_full = static_cast<long>(std::floor(span / sc.dt + 1e-9));
  StateVector out;

  detail::check_step_size(ham(sc.t_start), sc.dt, sc.max_dt_h_norm);
  out.amps = y;
  observe(sc.t_start, static_cast<const StateVector&>(out));

  for (long k = 0; k < n_full; ++k) {
    const double t = sc.t_start + static_cast<double>(k) * sc.dt;
    y = detail::rk4_step(y, t, sc.dt, ham);
    if ((k + 1) % sc.observer_stride == 0 && k + 1 < n_full) {
      const double tk = sc.t_start + static_cast<double>(k + 1) * sc.dt;
      detail::check_step_size(ham(tk), sc.dt, sc.max_dt_h_norm);
      out.amps = y;
      observe(tk, static_cast<const StateVector&>(out));
    }
  }
  const double t_last = sc.t_start + static_cast<double>(n_full) * sc.dt;
  const double rem = sc.t_end - t_last;
  if (rem > 1e-9 * sc.dt) y = detail::rk4_step(y, t_last, rem, ham);

  out.amps = y;
  out.is_normalized = false;
  observe(sc.t_end, static_cast<const StateVector&>(out));
  return out;
}

template <class HamFn>
StateVector evolve_state(const StateVector& psi0, HamFn&& ham,
                         const StepControl& sc) {
  return evolve_state(psi0, std::forward<HamFn>(ham), sc,
                      [](double, const StateVector&) {});
}

using DensityObserver = std::function<void(double, const DensityMatrix&)>;

// Integrate the master equation for the schedule's drive with pure dephasing
// of |0> at rate gamma0: every coherence involving |0> decays at gamma0,
// populations are untouched. RK4 preserves the trace and hermiticity exactly
// (the right-hand side is traceless and Hermitian); positivity is monitored
// at observer samples and a dip below -1e-6 aborts with PositivityError.
DensityMatrix evolve_density(const DensityMatrix& rho0,
                             const PulseSchedule& schedule, double gamma0,
                             const Integration& grid,
                             const DensityObserver& observe = {});

}  // namespace tripod

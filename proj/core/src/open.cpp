#include "tripod/open.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <deque>
#include <future>
#include <iostream>
#include <numbers>

#include "tripod/closed.hpp"
#include "tripod/errors.hpp"
#include "tripod/model.hpp"
#include "tripod/numeric.hpp"
#include "tripod/random.hpp"

namespace tripod {

namespace {

using Cx = std::complex<double>;
constexpr Cx kI{0.0, 1.0};
constexpr double kTinyAmp = 1e-14;

// ---------------------------------------------------------------------------
// Structure-exploiting stepper. The Hamiltonian has eight nonzero entries, so
// the right-hand side is written out by hand; a full 4x4 matrix product would
// dominate the trajectory loops otherwise.

struct DriveNode {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  Cx e2{1.0, 0.0};  // e^{+i phi2}
};

DriveNode make_node(const DriveSample& s) {
  return {s.a0, s.a1, s.a2, std::polar(1.0, s.phi2)};
}

// y' = -i (H - i gamma0 |0><0|) y for the closed tripod H.
inline Eigen::Vector4cd nh_rhs(const DriveNode& n, const Cx& e01, double gamma0,
                               const Eigen::Vector4cd& y) {
  const Cx ye = y(kIdxE);
  Eigen::Vector4cd d;
  d(kIdx0) = -kI * (0.5 * n.a0 * ye) - gamma0 * y(kIdx0);
  d(kIdx1) = -kI * (0.5 * n.a1 * e01 * ye);
  d(kIdxE) = -kI * (0.5 * n.a0 * y(kIdx0) +
                    0.5 * n.a1 * std::conj(e01) * y(kIdx1) +
                    0.5 * n.a2 * std::conj(n.e2) * y(kIdx2));
  d(kIdx2) = -kI * (0.5 * n.a2 * n.e2 * ye);
  return d;
}

inline Eigen::Vector4cd rk4_nodes(const DriveNode& n0, const DriveNode& nm,
                                  const DriveNode& n1, const Cx& e01,
                                  double gamma0, double dt,
                                  const Eigen::Vector4cd& y) {
  const Eigen::Vector4cd k1 = nh_rhs(n0, e01, gamma0, y);
  const Eigen::Vector4cd k2 = nh_rhs(nm, e01, gamma0, y + (0.5 * dt) * k1);
  const Eigen::Vector4cd k3 = nh_rhs(nm, e01, gamma0, y + (0.5 * dt) * k2);
  const Eigen::Vector4cd k4 = nh_rhs(n1, e01, gamma0, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::Vector4cd free_step(const PulseSchedule& s, const Cx& e01, double gamma0,
                           double t, double h, const Eigen::Vector4cd& y) {
  return rk4_nodes(make_node(s.sample(t)), make_node(s.sample(t + 0.5 * h)),
                   make_node(s.sample(t + h)), e01, gamma0, h, y);
}

// Closed-frame dark rows applied to the Schrodinger-picture state. The open
// frame's e^{+-gamma0 (t - t_i)} factors cancel exactly between the left
// vector and the interaction-picture state, so extraction never forms them.
struct DarkPair {
  Cx c1, c2;
};

DarkPair dark_coeffs(const PulseSchedule& s, double t,
                     const Eigen::Vector4cd& y) {
  const DriveSample d = s.sample(t);
  const double st = std::sin(d.theta01), ct = std::cos(d.theta01);
  const double sh = std::sin(d.thetaH), ch = std::cos(d.thetaH);
  const Cx e01c = std::polar(1.0, -d.phi01);
  const Cx e2c = std::polar(1.0, -d.phi2);
  DarkPair p;
  p.c1 = -ch * st * y(kIdx0) - ch * ct * e01c * y(kIdx1) + sh * e2c * y(kIdx2);
  p.c2 = ct * y(kIdx0) - st * e01c * y(kIdx1);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public point operations

PhaseExtraction extract_phase(Cx c_now, Cx c_start, double gamma0,
                              double prev_phase) {
  const double m0 = std::abs(c_start);
  if (m0 < 1e-150)
    throw SimulationError(
        "phase extraction undefined: reference amplitude vanishes");
  PhaseExtraction out;
  out.mod_ratio = std::abs(c_now) / m0;
  out.phase = unwrap_near(std::arg(c_now / c_start), prev_phase);
  if (gamma0 > 0.0) {
    out.exponent = -std::log(out.mod_ratio) / gamma0;
    out.exponent_defined = true;
  }
  return out;
}

double jump_probability(const StateVector& psi, double gamma0, double dt) {
  if (!(gamma0 >= 0.0)) throw SimulationError("dephasing rate must be >= 0");
  if (!(dt > 0.0)) throw SimulationError("dt must be positive");
  const double n2 = psi.norm_sq();
  if (n2 < 1e-300)
    throw SimulationError("jump probability of a zero-norm state");
  const double p = 2.0 * gamma0 * dt * std::norm(psi.amps(kIdx0)) / n2;
  static std::atomic<bool> warned{false};
  if (p > 0.05 && !warned.exchange(true))
    std::cerr << "warning: per-step jump probability " << p
              << " > 0.05; dt is too coarse for first-order sampling "
                 "(further warnings suppressed)\n";
  return p;
}

StateVector apply_jump(const StateVector& psi, double gamma0) {
  if (!(gamma0 > 0.0))
    throw SimulationError("jumps require a positive dephasing rate");
  const Cx c0 = psi.amps(kIdx0);
  if (std::abs(c0) < kTinyAmp)
    throw SimulationError(
        "jump undefined: the state has no |0> amplitude to collapse onto");
  StateVector out;
  out.amps(kIdx0) = std::sqrt(2.0 * gamma0) * c0;
  out.is_normalized = false;
  return out;
}

// ---------------------------------------------------------------------------
// Dense no-jump branch

namespace detail {

struct NoJumpTraceImpl {
  PulseSchedule schedule;
  double gamma0;
  Integration grid;
  Cx e01;
  double t0, dt, t_last, t_f;
  long n_full;
  bool has_rem;
  std::vector<DriveNode> nodes;        // half-step lattice, 2 n_full + 1
  std::vector<Eigen::Vector4cd> psi;   // grid states, n_full + 1
  std::vector<double> norm_sq;         // same indexing
  StateVector final_state;
  double final_norm_sq = 1.0;
  std::vector<long> obs_steps;         // step index per observer sample
  std::vector<double> obs_times;       // matching times (last one is t_f)
  std::vector<std::array<double, 4>> obs_pops;

  NoJumpTraceImpl(const StateVector& psi_i, const PulseSchedule& s, double g0,
                  const Integration& gr)
      : schedule(s), gamma0(g0), grid(gr) {
    if (!(gamma0 >= 0.0)) throw SimulationError("dephasing rate must be >= 0");
    if (!(grid.dt > 0.0)) throw SimulationError("dt must be positive");
    if (grid.observer_stride < 1)
      throw SimulationError("observer_stride must be >= 1");
    const double bound = 0.5 * schedule.max_rabi_norm() + gamma0;
    if (grid.dt * bound > 0.1)
      throw StepSizeError(
          "dt * ||H|| exceeds the stability bound; reduce the step size");

    e01 = std::polar(1.0, schedule.phi01());
    t0 = schedule.t_initial();
    t_f = schedule.t_final();
    dt = grid.dt;
    n_full = static_cast<long>(std::floor((t_f - t0) / dt + 1e-9));
    t_last = t0 + static_cast<double>(n_full) * dt;
    has_rem = (t_f - t_last) > 1e-9 * dt;

    nodes.resize(2 * n_full + 1);
    for (long j = 0; j <= 2 * n_full; ++j)
      nodes[j] =
          make_node(schedule.sample(t0 + 0.5 * dt * static_cast<double>(j)));

    psi.resize(n_full + 1);
    norm_sq.resize(n_full + 1);
    psi[0] = psi_i.amps;
    norm_sq[0] = psi[0].squaredNorm();
    for (long k = 0; k < n_full; ++k) {
      psi[k + 1] = rk4_nodes(nodes[2 * k], nodes[2 * k + 1], nodes[2 * k + 2],
                             e01, gamma0, dt, psi[k]);
      norm_sq[k + 1] = psi[k + 1].squaredNorm();
    }

    Eigen::Vector4cd y = psi[n_full];
    if (has_rem) y = free_step(schedule, e01, gamma0, t_last, t_f - t_last, y);
    final_state.amps = y;
    final_state.is_normalized = false;
    final_norm_sq = y.squaredNorm();

    obs_steps.push_back(0);
    for (long k = grid.observer_stride; k < n_full; k += grid.observer_stride)
      obs_steps.push_back(k);
    obs_steps.push_back(n_full);  // stands for t_f
    for (std::size_t j = 0; j < obs_steps.size(); ++j) {
      const bool last = (j + 1 == obs_steps.size());
      obs_times.push_back(last ? t_f
                               : t0 + dt * static_cast<double>(obs_steps[j]));
      const Eigen::Vector4cd& v = last ? final_state.amps : psi[obs_steps[j]];
      const double n2 = v.squaredNorm();
      obs_pops.push_back({std::norm(v(0)) / n2, std::norm(v(1)) / n2,
                          std::norm(v(2)) / n2, std::norm(v(3)) / n2});
    }
  }

  Eigen::Vector4cd eval_at(double t) const {
    if (t <= t0) return psi[0];
    if (t >= t_f) return final_state.amps;
    long k = static_cast<long>(std::floor((t - t0) / dt));
    k = std::clamp(k, 0L, n_full);
    double tk = t0 + dt * static_cast<double>(k);
    if (t - tk < 1e-12 && k <= n_full) return psi[k];
    return free_step(schedule, e01, gamma0, tk, t - tk, psi[k]);
  }
};

const NoJumpTraceImpl& trace_impl(const NoJumpTrace& t) { return *t.impl_; }

}  // namespace detail

NoJumpTrace::NoJumpTrace(const StateVector& psi_i, const PulseSchedule& s,
                         double gamma0, const Integration& grid)
    : impl_(std::make_shared<detail::NoJumpTraceImpl>(psi_i, s, gamma0,
                                                      grid)) {}

const PulseSchedule& NoJumpTrace::schedule() const { return impl_->schedule; }
double NoJumpTrace::gamma0() const { return impl_->gamma0; }
const Integration& NoJumpTrace::grid() const { return impl_->grid; }
long NoJumpTrace::n_steps() const { return impl_->n_full; }
double NoJumpTrace::step_time(long k) const {
  return impl_->t0 + impl_->dt * static_cast<double>(k);
}
const Eigen::Vector4cd& NoJumpTrace::state_at_step(long k) const {
  return impl_->psi.at(static_cast<std::size_t>(k));
}
double NoJumpTrace::norm_sq_at_step(long k) const {
  return impl_->norm_sq.at(static_cast<std::size_t>(k));
}
const StateVector& NoJumpTrace::final_state() const {
  return impl_->final_state;
}
double NoJumpTrace::final_norm_sq() const { return impl_->final_norm_sq; }
Eigen::Vector4cd NoJumpTrace::state_at(double t) const {
  return impl_->eval_at(t);
}
const std::vector<double>& NoJumpTrace::observer_times() const {
  return impl_->obs_times;
}
const std::vector<std::array<double, 4>>& NoJumpTrace::observer_populations()
    const {
  return impl_->obs_pops;
}

long NoJumpTrace::first_step_at_or_below(double u) const {
  const std::vector<double>& n2 = impl_->norm_sq;
  auto it = std::partition_point(n2.begin(), n2.end(),
                                 [u](double v) { return v > u; });
  if (it == n2.end()) return -1;
  return static_cast<long>(it - n2.begin());
}

StateVector propagate_from_jump(const NoJumpTrace& ref, double t_jump) {
  const auto& im = detail::trace_impl(ref);
  if (!(t_jump >= im.t0 && t_jump < im.t_f))
    throw SimulationError("jump time outside the schedule");
  Eigen::Vector4cd y = Eigen::Vector4cd::Zero();
  y(kIdx0) = 1.0;

  long k_next = static_cast<long>(std::floor((t_jump - im.t0) / im.dt)) + 1;
  if (k_next > im.n_full) {
    // jump inside the remainder step
    y = free_step(im.schedule, im.e01, im.gamma0, t_jump, im.t_f - t_jump, y);
  } else {
    const double t_next = im.t0 + im.dt * static_cast<double>(k_next);
    if (t_next - t_jump > 1e-12)
      y = free_step(im.schedule, im.e01, im.gamma0, t_jump, t_next - t_jump, y);
    for (long k = k_next; k < im.n_full; ++k)
      y = rk4_nodes(im.nodes[2 * k], im.nodes[2 * k + 1], im.nodes[2 * k + 2],
                    im.e01, im.gamma0, im.dt, y);
    if (im.has_rem)
      y = free_step(im.schedule, im.e01, im.gamma0, im.t_last,
                    im.t_f - im.t_last, y);
  }
  StateVector out;
  out.amps = y;
  out.is_normalized = false;
  return out;
}

// ---------------------------------------------------------------------------
// Dark-amplitude extraction along a jump-free segment

namespace {

class SegmentExtractor {
 public:
  SegmentExtractor(const PulseSchedule& s, double gamma0, double t_start,
                   const Eigen::Vector4cd& y_start)
      : s_(&s), gamma0_(gamma0), t_start_(t_start) {
    const DarkPair p = dark_coeffs(s, t_start, y_start);
    c1_start_ = p.c1;
    c2_start_ = p.c2;
    d1_ = std::abs(p.c1) >= kTinyAmp;
    d2_ = std::abs(p.c2) >= kTinyAmp;
  }

  PhasePoint feed(double t, const Eigen::Vector4cd& y) {
    const DarkPair p = dark_coeffs(*s_, t, y);
    PhasePoint pt;
    pt.t = t;
    if (d1_) {
      const PhaseExtraction e = extract_phase(p.c1, c1_start_, gamma0_, prev1_);
      prev1_ = e.phase;
      pt.gamma1 = e.phase;
      pt.mod_ratio1 = e.mod_ratio;
      pt.alpha = e.exponent;
    } else {
      pt.gamma1 = std::numeric_limits<double>::quiet_NaN();
      pt.mod_ratio1 = std::numeric_limits<double>::quiet_NaN();
    }
    if (d2_) {
      const PhaseExtraction e = extract_phase(p.c2, c2_start_, gamma0_, prev2_);
      prev2_ = e.phase;
      pt.gamma2 = e.phase;
      pt.mod_ratio2 = e.mod_ratio;
      pt.beta = e.exponent;
    } else {
      pt.gamma2 = std::numeric_limits<double>::quiet_NaN();
      pt.mod_ratio2 = std::numeric_limits<double>::quiet_NaN();
    }
    last_ = pt;
    c1_last_ = p.c1;
    c2_last_ = p.c2;
    return pt;
  }

  PhaseLedger finish(double t_end, const Eigen::Vector4cd& y_end) {
    const PhasePoint pt = feed(t_end, y_end);
    PhaseLedger lg;
    lg.segment_start = t_start_;
    lg.segment_end = t_end;
    lg.gamma0 = gamma0_;
    lg.dark1_defined = d1_;
    lg.dark2_defined = d2_;
    lg.exponents_defined = gamma0_ > 0.0;
    if (d1_) {
      lg.gamma1 = pt.gamma1;
      lg.mod_ratio1 = pt.mod_ratio1;
      lg.alpha = pt.alpha;
    }
    if (d2_) {
      lg.gamma2 = pt.gamma2;
      lg.mod_ratio2 = pt.mod_ratio2;
      lg.beta = pt.beta;
    }
    // Bright-branch quadratures: pure schedule functionals of the segment.
    const double int_s2 = integral_sin2_thetaH(*s_, t_start_, t_end);
    const double st = std::sin(s_->theta01());
    lg.delta = 0.5 * st * st * int_s2;
    lg.gamma_b = -0.5 * s_->phi2_rate() * ((t_end - t_start_) - int_s2);
    const double big_theta = 0.5 * integral_rabi_norm(*s_, t_start_, t_end);
    lg.theta_plus = -big_theta;
    lg.theta_minus = big_theta;
    return lg;
  }

  Cx c1_start() const { return c1_start_; }
  Cx c2_start() const { return c2_start_; }
  Cx c1_last() const { return c1_last_; }
  Cx c2_last() const { return c2_last_; }
  const PhasePoint& last_point() const { return last_; }

 private:
  const PulseSchedule* s_;
  double gamma0_;
  double t_start_;
  Cx c1_start_{0.0}, c2_start_{0.0};
  Cx c1_last_{0.0}, c2_last_{0.0};
  bool d1_ = false, d2_ = false;
  double prev1_ = 0.0, prev2_ = 0.0;
  PhasePoint last_;
};

}  // namespace

NoJumpRun nojump_run(const StateVector& psi_i, const PulseSchedule& s,
                     double gamma0, const Integration& grid) {
  NoJumpTrace trace(psi_i, s, gamma0, grid);
  const auto& im = detail::trace_impl(trace);

  SegmentExtractor ext(s, gamma0, im.t0, im.psi[0]);
  NoJumpRun run;
  run.c1_start = ext.c1_start();
  run.c2_start = ext.c2_start();

  double max_recon = 0.0;
  auto recon_error = [&](double t, const Eigen::Vector4cd& y) {
    const AdiabaticFrame f = eigensystem_closed(s.sample(t));
    const Eigen::Vector4cd c = f.left * y;
    const double nrm = y.norm();
    if (nrm < 1e-300) return 0.0;
    return (f.right * c - y).norm() / nrm;
  };

  const std::size_t n_obs = im.obs_steps.size();
  for (std::size_t j = 0; j < n_obs; ++j) {
    const bool last = (j + 1 == n_obs);
    const double t = im.obs_times[j];
    const Eigen::Vector4cd& y =
        last ? im.final_state.amps : im.psi[im.obs_steps[j]];
    if (!last) {
      if (j > 0) run.trace.push_back(ext.feed(t, y));
    } else {
      run.ledger = ext.finish(t, y);
      run.trace.push_back(ext.last_point());
    }
    max_recon = std::max(max_recon, recon_error(t, y));
  }
  // The t_start point carries zero phases by definition; channels absent from
  // the initial state stay NaN the whole way through.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  PhasePoint p0;
  p0.t = im.t0;
  if (run.ledger.dark1_defined) {
    if (gamma0 > 0.0) p0.alpha = 0.0;
  } else {
    p0.gamma1 = nan;
    p0.mod_ratio1 = nan;
  }
  if (run.ledger.dark2_defined) {
    if (gamma0 > 0.0) p0.beta = 0.0;
  } else {
    p0.gamma2 = nan;
    p0.mod_ratio2 = nan;
  }
  run.trace.insert(run.trace.begin(), p0);

  run.final_state = im.final_state;
  run.c1_final = ext.c1_last();
  run.c2_final = ext.c2_last();
  run.max_reconstruction_error = max_recon;
  return run;
}

Eigen::Matrix2cd l_matrix(const PhaseLedger& lg, double theta01, double phi01) {
  if (!(lg.dark1_defined && lg.dark2_defined))
    throw SimulationError(
        "effective qubit map needs both dark channels of the ledger");
  const Cx r1 = lg.mod_ratio1 * std::polar(1.0, lg.gamma1);
  const Cx r2 = lg.mod_ratio2 * std::polar(1.0, lg.gamma2);
  const double st = std::sin(theta01), ct = std::cos(theta01);
  const Cx e01 = std::polar(1.0, phi01);
  Eigen::Matrix2cd l;
  l(0, 0) = r2 * ct * ct + r1 * st * st;
  l(0, 1) = ct * st * std::conj(e01) * (r1 - r2);
  l(1, 0) = ct * st * e01 * (r1 - r2);
  l(1, 1) = r2 * st * st + r1 * ct * ct;
  return l;
}

// ---------------------------------------------------------------------------
// Post-jump branch: reduced dark dynamics + bright quadratures vs direct

namespace {

// Reduced two-level dark dynamics with dephasing-induced mixing:
//   c1' = -(i phi2_rate sin^2 thetaH + gamma0 sin^2 theta01 cos^2 thetaH) c1
//         + gamma0 sin theta01 cos theta01 cos thetaH c2
//   c2' = +gamma0 sin theta01 cos theta01 cos thetaH c1 - gamma0 cos^2 theta01 c2
// valid after adiabatic elimination of the bright pair. Every coefficient is
// bounded by gamma0 or phi2_rate, so the system is slow regardless of the
// drive strength.
struct DarkRhs {
  const PulseSchedule* s;
  double gamma0;
  double st, ct;

  void operator()(double t, const Cx& c1, const Cx& c2, Cx& d1, Cx& d2) const {
    const DriveSample smp = s->sample(t);
    const double sh = std::sin(smp.thetaH), ch = std::cos(smp.thetaH);
    const double g = gamma0;
    d1 = -(kI * (s->phi2_rate() * sh * sh) + g * st * st * ch * ch) * c1 +
         g * st * ct * ch * c2;
    d2 = g * st * ct * ch * c1 - g * ct * ct * c2;
  }
};

}  // namespace

PostJumpRun post_jump_run(const PulseSchedule& s, double gamma0, double t_jump,
                          const Integration& grid) {
  if (!(gamma0 >= 0.0)) throw SimulationError("dephasing rate must be >= 0");
  if (!(t_jump >= s.t_initial() && t_jump < s.t_final()))
    throw SimulationError("jump time outside the schedule");

  PostJumpRun run;
  run.t_jump = t_jump;

  const double st = std::sin(s.theta01()), ct = std::cos(s.theta01());
  const DriveSample smp_j = s.sample(t_jump);
  const double shj = std::sin(smp_j.thetaH), chj = std::cos(smp_j.thetaH);

  // |0> re-expanded in the frame at the jump: dark-1 takes -cos(thetaH) sin,
  // dark-2 cos, and each bright state sin(thetaH) sin / sqrt(2).
  const Cx b1{-chj * st, 0.0};
  const Cx b2{ct, 0.0};
  const double bpm = shj * st / std::numbers::sqrt2;

  // Reduced dark propagation t_jump -> t_f with phase unwrapping.
  const double span = s.t_final() - t_jump;
  const long n = std::max(1L, static_cast<long>(std::ceil(span / grid.dt)));
  const double h = span / static_cast<double>(n);
  DarkRhs rhs{&s, gamma0, st, ct};
  Cx c1 = b1, c2 = b2;
  double prev1 = 0.0, prev2 = 0.0;
  const bool d1_defined = std::abs(b1) >= kTinyAmp;
  for (long k = 0; k < n; ++k) {
    const double t = t_jump + h * static_cast<double>(k);
    Cx k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
    rhs(t, c1, c2, k1a, k1b);
    rhs(t + 0.5 * h, c1 + 0.5 * h * k1a, c2 + 0.5 * h * k1b, k2a, k2b);
    rhs(t + 0.5 * h, c1 + 0.5 * h * k2a, c2 + 0.5 * h * k2b, k3a, k3b);
    rhs(t + h, c1 + h * k3a, c2 + h * k3b, k4a, k4b);
    c1 += (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    c2 += (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    if ((k + 1) % grid.observer_stride == 0 || k + 1 == n) {
      if (d1_defined) prev1 = unwrap_near(std::arg(c1 / b1), prev1);
      prev2 = unwrap_near(std::arg(c2 / b2), prev2);
    }
  }

  PhaseLedger lg;
  lg.segment_start = t_jump;
  lg.segment_end = s.t_final();
  lg.gamma0 = gamma0;
  lg.exponents_defined = gamma0 > 0.0;
  lg.dark1_defined = d1_defined;
  lg.dark2_defined = true;
  if (d1_defined) {
    lg.gamma1 = prev1;
    lg.mod_ratio1 = std::abs(c1) / std::abs(b1);
    if (gamma0 > 0.0) lg.alpha = -std::log(lg.mod_ratio1) / gamma0;
  }
  lg.gamma2 = prev2;
  lg.mod_ratio2 = std::abs(c2) / std::abs(b2);
  if (gamma0 > 0.0) lg.beta = -std::log(lg.mod_ratio2) / gamma0;

  const double int_s2 = integral_sin2_thetaH(s, t_jump, s.t_final());
  lg.delta = 0.5 * st * st * int_s2;
  lg.gamma_b = -0.5 * s.phi2_rate() * (span - int_s2);
  const double big_theta = 0.5 * integral_rabi_norm(s, t_jump, s.t_final());
  lg.theta_plus = -big_theta;
  lg.theta_minus = big_theta;
  run.ledger = lg;

  // Closed-form populations: dark pair through (c1, c2), bright pair through
  // the ledger quadratures, assembled in the frame at t_f (thetaH = 0 there).
  const Cx e01 = std::polar(1.0, s.phi01());
  const Cx e2f = std::polar(1.0, s.phi2_rate() * (s.t_final() - s.t_initial()));
  const Cx bright = bpm * std::exp(-gamma0 * lg.delta) *
                    std::polar(1.0, lg.gamma_b);
  const Cx cpf = bright * std::polar(1.0, lg.theta_plus);
  const Cx cmf = bright * std::polar(1.0, lg.theta_minus);
  const double r = 1.0 / std::numbers::sqrt2;
  const Cx a0 = -st * c1 + ct * c2;
  const Cx a1 = e01 * (-ct * c1 - st * c2);
  const Cx ae = r * (cpf - cmf);
  const Cx a2 = r * e2f * (cpf + cmf);
  const double nrm =
      std::norm(a0) + std::norm(a1) + std::norm(ae) + std::norm(a2);
  run.populations_formula = {std::norm(a0) / nrm, std::norm(a1) / nrm,
                             std::norm(ae) / nrm, std::norm(a2) / nrm};

  // Direct route: integrate the restarted branch with the full Hamiltonian.
  StepControl sc;
  sc.dt = grid.dt;
  sc.t_start = t_jump;
  sc.t_end = s.t_final();
  sc.observer_stride = grid.observer_stride;
  StateVector psi0 = StateVector::basis(kIdx0);
  auto ham = [&](double t) {
    return hamiltonian_nonhermitian(s.sample(t), gamma0);
  };
  run.final_state = evolve_state(psi0, ham, sc);
  run.populations_direct = run.final_state.populations();
  return run;
}

// ---------------------------------------------------------------------------
// Trajectory sampling

namespace {

struct LiveObs {
  // Observer bookkeeping for the live (post-first-jump) part of a trajectory.
  const detail::NoJumpTraceImpl* im;
  std::vector<std::array<double, 4>>* out;  // may be null

  void record_step(long k, const Eigen::Vector4cd& y) const {
    if (!out || k <= 0 || k >= im->n_full) return;
    if (k % im->grid.observer_stride != 0) return;
    const std::size_t j = 1 + static_cast<std::size_t>((k - 1) /
                                                       im->grid.observer_stride);
    write(j, y);
  }
  void record_final(const Eigen::Vector4cd& y) const {
    if (!out) return;
    write(im->obs_steps.size() - 1, y);
  }
  void write(std::size_t j, const Eigen::Vector4cd& y) const {
    const double n2 = y.squaredNorm();
    (*out)[j] = {std::norm(y(0)) / n2, std::norm(y(1)) / n2,
                 std::norm(y(2)) / n2, std::norm(y(3)) / n2};
  }
};

/// Refine the jump time inside (t_prev, t_prev + h]: the survival norm is
// continuous and decreasing through u there. Returns (t_jump, state at it).
std::pair<double, Eigen::Vector4cd> refine_crossing(
    const detail::NoJumpTraceImpl& im, double t_prev,
    const Eigen::Vector4cd& y_prev, double h, const Eigen::Vector4cd& y_end,
    double u) {
  double lo = 0.0, hi = h;
  Eigen::Vector4cd y_hi = y_end;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const Eigen::Vector4cd y_mid =
        free_step(im.schedule, im.e01, im.gamma0, t_prev, mid, y_prev);
    if (y_mid.squaredNorm() > u) {
      lo = mid;
    } else {
      hi = mid;
      y_hi = y_mid;
    }
  }
  return {t_prev + hi, y_hi};
}

TrajectoryRecord simulate_norm_threshold(
    const NoJumpTrace& trace, std::uint64_t seed, const TrajectoryOptions& opts,
    std::vector<std::array<double, 4>>* obs_pops_out) {
  const auto& im = detail::trace_impl(trace);
  RngStream rng(seed);
  TrajectoryRecord rec;
  if (obs_pops_out) obs_pops_out->assign(im.obs_pops.size(), {});

  double u = rng.uniform();
  const long m = trace.first_step_at_or_below(u);
  const bool rem_cross = (m < 0) && im.has_rem && (im.final_norm_sq <= u);

  if (m == 0)
    throw SimulationError(
        "survival norm below threshold at t_i; "
        "was the initial state normalized?");

  if (m < 0 && !rem_cross) {
    rec.final_state = im.final_state;
    rec.final_norm_sq = im.final_norm_sq;
    rec.final_populations = im.final_state.populations();
    if (obs_pops_out) *obs_pops_out = im.obs_pops;
    if (opts.record_ledgers) {
      SegmentExtractor ext(im.schedule, im.gamma0, im.t0, im.psi[0]);
      for (std::size_t j = 1; j + 1 < im.obs_steps.size(); ++j)
        ext.feed(im.obs_times[j], im.psi[im.obs_steps[j]]);
      rec.ledgers.push_back(ext.finish(im.t_f, im.final_state.amps));
    }
    return rec;
  }

  // First crossing lies in a known cached step; refine it there.
  double t_prev, h_cross;
  Eigen::Vector4cd y_prev, y_end_cross;
  if (m > 0) {
    t_prev = trace.step_time(m - 1);
    y_prev = im.psi[m - 1];
    h_cross = im.dt;
    y_end_cross = im.psi[m];
  } else {
    t_prev = im.t_last;
    y_prev = im.psi[im.n_full];
    h_cross = im.t_f - im.t_last;
    y_end_cross = im.final_state.amps;
  }
  if (obs_pops_out) {
    const long last_cached = (m > 0) ? (m - 1) : im.n_full;
    for (std::size_t j = 0; j + 1 < im.obs_steps.size(); ++j)
      if (im.obs_steps[j] <= last_cached) (*obs_pops_out)[j] = im.obs_pops[j];
  }
  auto [t_jump, y_jump] =
      refine_crossing(im, t_prev, y_prev, h_cross, y_end_cross, u);

  std::unique_ptr<SegmentExtractor> ext;
  if (opts.record_ledgers) {
    ext = std::make_unique<SegmentExtractor>(im.schedule, im.gamma0, im.t0,
                                             im.psi[0]);
    for (std::size_t j = 1; j + 1 < im.obs_steps.size(); ++j)
      if (im.obs_times[j] < t_jump)
        ext->feed(im.obs_times[j], im.psi[im.obs_steps[j]]);
    rec.ledgers.push_back(ext->finish(t_jump, y_jump));
  }

  LiveObs obs{&im, obs_pops_out};
  auto collapse = [&](double tj, const Eigen::Vector4cd& yj) {
    StateVector sj;
    sj.amps = yj;
    rec.jump_times.push_back(tj);
    u = rng.uniform();
    Eigen::Vector4cd y0 = apply_jump(sj, im.gamma0).normalized().amps;
    if (opts.record_ledgers)
      ext = std::make_unique<SegmentExtractor>(im.schedule, im.gamma0, tj, y0);
    return y0;
  };

  double t_cur = t_jump;
  Eigen::Vector4cd y = collapse(t_jump, y_jump);

  // Live integration: a partial step onto the grid after each jump, table
  // steps across the grid, and a free remainder step to t_f.
  while (t_cur < im.t_f - 1e-12) {
    long k_next = static_cast<long>(std::floor((t_cur - im.t0) / im.dt)) + 1;
    // A refined jump time can land on a grid node to within rounding; aim at
    // the next node that is strictly ahead or the loop would stall.
    while (k_next <= im.n_full &&
           im.t0 + im.dt * static_cast<double>(k_next) <=
               t_cur + 1e-9 * im.dt)
      ++k_next;
    double t_next;
    long k_arrive = -1;
    if (k_next <= im.n_full) {
      t_next = im.t0 + im.dt * static_cast<double>(k_next);
      k_arrive = k_next;
    } else {
      t_next = im.t_f;
    }
    const double h = t_next - t_cur;
    Eigen::Vector4cd y_new;
    if (k_arrive >= 1 && h >= im.dt * (1.0 - 1e-9)) {
      const long k = k_arrive - 1;
      y_new = rk4_nodes(im.nodes[2 * k], im.nodes[2 * k + 1],
                        im.nodes[2 * k + 2], im.e01, im.gamma0, im.dt, y);
    } else {
      y_new = free_step(im.schedule, im.e01, im.gamma0, t_cur, h, y);
    }

    if (y_new.squaredNorm() <= u) {
      auto [tj, yj] = refine_crossing(im, t_cur, y, h, y_new, u);
      if (opts.record_ledgers && ext)
        rec.ledgers.push_back(ext->finish(tj, yj));
      t_cur = tj;
      y = collapse(tj, yj);
      continue;
    }

    y = y_new;
    t_cur = t_next;
    if (k_arrive > 0 && k_arrive < im.n_full) {
      obs.record_step(k_arrive, y);
      if (opts.record_ledgers && ext &&
          k_arrive % im.grid.observer_stride == 0)
        ext->feed(t_cur, y);
    }
  }

  rec.final_state.amps = y;
  rec.final_state.is_normalized = false;
  rec.final_norm_sq = y.squaredNorm();
  rec.final_populations = rec.final_state.populations();
  obs.record_final(y);
  if (opts.record_ledgers && ext)
    rec.ledgers.push_back(ext->finish(im.t_f, y));
  return rec;
}

TrajectoryRecord simulate_bernoulli(
    const NoJumpTrace& trace, std::uint64_t seed, const TrajectoryOptions& opts,
    std::vector<std::array<double, 4>>* obs_pops_out) {
  const auto& im = detail::trace_impl(trace);
  RngStream rng(seed);
  TrajectoryRecord rec;
  if (obs_pops_out) obs_pops_out->assign(im.obs_pops.size(), {});

  // One Bernoulli draw per step boundary, taken against the pre-step state;
  // the cached branch serves the states until the first firing.
  long fire_k = -1;
  bool fire_rem = false;
  for (long k = 0; k < im.n_full; ++k) {
    StateVector s;
    s.amps = im.psi[k];
    if (rng.uniform() < jump_probability(s, im.gamma0, im.dt)) {
      fire_k = k;
      break;
    }
  }
  if (fire_k < 0 && im.has_rem) {
    StateVector s;
    s.amps = im.psi[im.n_full];
    if (rng.uniform() < jump_probability(s, im.gamma0, im.t_f - im.t_last))
      fire_rem = true;
  }

  if (fire_k < 0 && !fire_rem) {
    rec.final_state = im.final_state;
    rec.final_norm_sq = im.final_norm_sq;
    rec.final_populations = im.final_state.populations();
    if (obs_pops_out) *obs_pops_out = im.obs_pops;
    return rec;
  }

  LiveObs obs{&im, obs_pops_out};
  const long jump_step = fire_rem ? im.n_full : fire_k;
  if (obs_pops_out)
    for (std::size_t j = 0; j + 1 < im.obs_steps.size(); ++j)
      if (im.obs_steps[j] <= jump_step) (*obs_pops_out)[j] = im.obs_pops[j];

  StateVector sj;
  sj.amps = im.psi[jump_step];
  Eigen::Vector4cd y = apply_jump(sj, im.gamma0).normalized().amps;
  rec.jump_times.push_back(trace.step_time(jump_step));

  // The boundary that fired has consumed its draw; step away from it first,
  // then resume draw-then-step at the following boundaries.
  for (long k = jump_step; k <= im.n_full; ++k) {
    const bool rem = (k == im.n_full);
    if (rem && !im.has_rem) break;
    const double h = rem ? (im.t_f - im.t_last) : im.dt;
    if (k != jump_step) {
      StateVector cur;
      cur.amps = y;
      if (rng.uniform() < jump_probability(cur, im.gamma0, h)) {
        y = apply_jump(cur, im.gamma0).normalized().amps;
        rec.jump_times.push_back(trace.step_time(k));
      }
    }
    if (rem) {
      y = free_step(im.schedule, im.e01, im.gamma0, im.t_last, h, y);
    } else {
      y = rk4_nodes(im.nodes[2 * k], im.nodes[2 * k + 1], im.nodes[2 * k + 2],
                    im.e01, im.gamma0, im.dt, y);
      if (k + 1 < im.n_full) obs.record_step(k + 1, y);
    }
  }

  rec.final_state.amps = y;
  rec.final_state.is_normalized = false;
  rec.final_norm_sq = y.squaredNorm();
  rec.final_populations = rec.final_state.populations();
  obs.record_final(y);
  return rec;
}

TrajectoryRecord simulate_trajectory(
    const NoJumpTrace& trace, std::uint64_t seed, const TrajectoryOptions& opts,
    std::vector<std::array<double, 4>>* obs_pops_out) {
  if (opts.sampling == JumpSampling::kNormThreshold)
    return simulate_norm_threshold(trace, seed, opts, obs_pops_out);
  return simulate_bernoulli(trace, seed, opts, obs_pops_out);
}

}  // namespace

TrajectoryRecord run_trajectory(const StateVector& psi_i,
                                const PulseSchedule& schedule, double gamma0,
                                std::uint64_t seed,
                                const TrajectoryOptions& opts) {
  if (!(gamma0 > 0.0))
    throw SimulationError("trajectory sampling requires gamma0 > 0");
  NoJumpTrace trace(psi_i.normalized(), schedule, gamma0, opts.grid);
  return simulate_trajectory(trace, seed, opts, nullptr);
}

// ---------------------------------------------------------------------------
// Trajectory averaging

namespace {

struct ChunkAccum {
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  std::vector<std::array<double, 4>> pops;
  std::vector<std::uint64_t> hist;
  std::uint64_t jumps = 0;

  void bump_hist(std::size_t n_jumps) {
    if (hist.size() <= n_jumps) hist.resize(n_jumps + 1, 0);
    ++hist[n_jumps];
  }
};

ChunkAccum process_chunk(const NoJumpTrace& trace, std::uint64_t master_seed,
                         std::uint64_t begin, std::uint64_t end,
                         const TrajectoryOptions& opts) {
  const auto& im = detail::trace_impl(trace);
  const std::size_t n_obs = im.obs_pops.size();
  ChunkAccum acc;
  acc.pops.assign(n_obs, {});

  std::uint64_t nojump_count = 0;
  std::vector<std::array<double, 4>> tmp;
  for (std::uint64_t i = begin; i < end; ++i) {
    const std::uint64_t seed = trajectory_seed(master_seed, i);
    if (opts.sampling == JumpSampling::kNormThreshold) {
      // Peek at the first draw: trajectories that never cross their survival
      // threshold coincide with the cached branch and are folded in bulk.
      RngStream peek(seed);
      const double u = peek.uniform();
      const bool crossed = (trace.first_step_at_or_below(u) >= 0) ||
                           (im.has_rem && im.final_norm_sq <= u);
      if (!crossed) {
        ++nojump_count;
        continue;
      }
    }
    TrajectoryRecord r = simulate_trajectory(trace, seed, opts, &tmp);
    if (r.jump_times.empty()) {
      // Bernoulli path can come back jump-free; fold it like the others.
      ++nojump_count;
      continue;
    }
    const Eigen::Vector4cd v = r.final_state.normalized().amps;
    acc.rho += v * v.adjoint();
    for (std::size_t j = 0; j < n_obs; ++j)
      for (int c = 0; c < 4; ++c) acc.pops[j][c] += tmp[j][c];
    acc.bump_hist(r.jump_times.size());
    acc.jumps += r.jump_times.size();
  }

  if (nojump_count > 0) {
    const double w = static_cast<double>(nojump_count);
    const Eigen::Vector4cd v = im.final_state.normalized().amps;
    acc.rho += w * (v * v.adjoint());
    for (std::size_t j = 0; j < n_obs; ++j)
      for (int c = 0; c < 4; ++c) acc.pops[j][c] += w * im.obs_pops[j][c];
    if (acc.hist.empty()) acc.hist.resize(1, 0);
    acc.hist[0] += nojump_count;
  }
  return acc;
}

}  // namespace

McwfBatch average_trajectories(const StateVector& psi_i,
                               const PulseSchedule& schedule, double gamma0,
                               std::uint64_t n_trajectories,
                               std::uint64_t master_seed,
                               const TrajectoryOptions& opts, int threads) {
  if (!(gamma0 > 0.0))
    throw SimulationError("trajectory sampling requires gamma0 > 0");
  if (n_trajectories == 0)
    throw SimulationError("need at least one trajectory");

  TrajectoryOptions batch_opts = opts;
  batch_opts.record_ledgers = false;

  NoJumpTrace trace(psi_i.normalized(), schedule, gamma0, batch_opts.grid);
  const auto& im = detail::trace_impl(trace);

  constexpr std::uint64_t kChunk = 256;
  const std::uint64_t n_chunks = (n_trajectories + kChunk - 1) / kChunk;

  McwfBatch out;
  out.n_trajectories = n_trajectories;
  out.t = im.obs_times;
  const std::size_t n_obs = im.obs_pops.size();
  std::vector<std::array<double, 4>> pops_total(n_obs,
                                                std::array<double, 4>{});
  Eigen::Matrix4cd rho_total = Eigen::Matrix4cd::Zero();
  std::vector<std::uint64_t> hist;

  auto reduce = [&](const ChunkAccum& acc) {
    rho_total += acc.rho;
    for (std::size_t j = 0; j < n_obs; ++j)
      for (int c = 0; c < 4; ++c) pops_total[j][c] += acc.pops[j][c];
    if (hist.size() < acc.hist.size()) hist.resize(acc.hist.size(), 0);
    for (std::size_t j = 0; j < acc.hist.size(); ++j) hist[j] += acc.hist[j];
    out.n_jumps_total += acc.jumps;
  };

  auto chunk_range = [&](std::uint64_t c) {
    const std::uint64_t b = c * kChunk;
    return std::pair<std::uint64_t, std::uint64_t>{
        b, std::min(b + kChunk, n_trajectories)};
  };

  if (threads <= 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) {
      const auto [b, e] = chunk_range(c);
      reduce(process_chunk(trace, master_seed, b, e, batch_opts));
    }
  } else {
    // Bounded pipeline: chunks are evaluated in parallel but reduced in
    // index order, so the result is bitwise independent of `threads`.
    const std::size_t window = 2 * static_cast<std::size_t>(threads);
    std::deque<std::future<ChunkAccum>> pending;
    std::uint64_t next = 0;
    while (next < n_chunks || !pending.empty()) {
      while (next < n_chunks && pending.size() < window) {
        const auto [b, e] = chunk_range(next);
        pending.push_back(std::async(std::launch::async, [&, b, e] {
          return process_chunk(trace, master_seed, b, e, batch_opts);
        }));
        ++next;
      }
      reduce(pending.front().get());
      pending.pop_front();
    }
  }

  const double inv = 1.0 / static_cast<double>(n_trajectories);
  out.rho_final.rho = inv * rho_total;
  out.mean_populations.assign(n_obs, {});
  for (std::size_t j = 0; j < n_obs; ++j)
    for (int c = 0; c < 4; ++c)
      out.mean_populations[j][c] = inv * pops_total[j][c];
  out.jump_count_histogram = std::move(hist);
  return out;
}

}  // namespace tripod

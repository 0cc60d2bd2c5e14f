#include "tripod/drive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tripod/closed.hpp"
#include "tripod/errors.hpp"
#include "tripod/numeric.hpp"

namespace tripod {

double Pulse::envelope(double t) const {
  if (a_max <= 0.0) return 0.0;
  const double u = t - t_start;
  if (u <= 0.0 || u >= 2.0 * width) return 0.0;
  const double s = std::sin(0.5 * kPi * u / width);
  return a_max * s * s;
}

PulseSchedule::PulseSchedule(const std::array<Pulse, 6>& pulses,
                             double theta01_fallback, double phi01,
                             double phi2_rate, double t_i, double t_f)
    : pulses_(pulses),
      theta01_(theta01_fallback),
      phi01_(phi01),
      phi2_rate_(phi2_rate),
      t_i_(t_i),
      t_f_(t_f) {
  if (!(t_f_ > t_i_)) throw SimulationError("schedule needs t_f > t_i");
  for (const Pulse& p : pulses_) {
    if (p.width <= 0.0) throw SimulationError("pulse width must be positive");
    if (p.a_max < 0.0) throw SimulationError("pulse amplitude must be >= 0");
    if (p.active() && (p.t_start < t_i_ - 1e-12 || p.t_end() > t_f_ + 1e-12))
      throw SimulationError("pulse support outside [t_i, t_f]");
  }
  // Peak drive norm: exact when pulse peaks coincide pairwise (the factory
  // guarantees channel peaks align), conservative scan otherwise.
  const int n_scan = 4096;
  double m = 0.0;
  for (int i = 0; i <= n_scan; ++i) {
    const double t = t_i_ + (t_f_ - t_i_) * static_cast<double>(i) / n_scan;
    double a0 = pulses_[0].envelope(t) + pulses_[3].envelope(t);
    double a1 = pulses_[1].envelope(t) + pulses_[4].envelope(t);
    double a2 = pulses_[2].envelope(t) + pulses_[5].envelope(t);
    m = std::max(m, std::sqrt(a0 * a0 + a1 * a1 + a2 * a2));
  }
  max_rabi_norm_ = m;
}

PulseSchedule PulseSchedule::double_stirap(const ScheduleParams& p) {
  if (p.width <= 0.0) throw SimulationError("width must be positive");
  if (p.a_max0 < 0.0 || p.a_max1 < 0.0)
    throw SimulationError("peak amplitudes must be >= 0");
  if (p.a_max0 + p.a_max1 <= 0.0)
    throw SimulationError("at least one of a_max0, a_max1 must be positive");
  if (p.intra_delay < 0.0) throw SimulationError("intra_delay must be >= 0");
  const double min_gap = p.intra_delay + 2.0 * p.width;
  if (p.gap < min_gap - 1e-12)
    throw SimulationError(
        "process separation too small: the two processes would overlap");

  const double a_max2 = std::hypot(p.a_max0, p.a_max1);
  std::array<Pulse, 6> pulses{};
  const double p1 = p.t_i;
  const double p2 = p.t_i + p.gap;
  pulses[2] = {a_max2, p1, p.width};
  pulses[0] = {p.a_max0, p1 + p.intra_delay, p.width};
  pulses[1] = {p.a_max1, p1 + p.intra_delay, p.width};
  pulses[3] = {p.a_max0, p2, p.width};
  pulses[4] = {p.a_max1, p2, p.width};
  pulses[5] = {a_max2, p2 + p.intra_delay, p.width};

  const double t_f = p2 + p.intra_delay + 2.0 * p.width;
  PulseSchedule s(pulses, std::atan2(p.a_max0, p.a_max1), p.phi01, p.phi2_rate,
                  p.t_i, t_f);
  s.params_ = p;
  // Channel peaks coincide at mid-pulse, where theta01 and thetaH sit at
  // their plateau values; the scanned norm is exact up to grid resolution.
  // Tighten with the analytic peak so step-size guards are not optimistic.
  s.max_rabi_norm_ = std::max(s.max_rabi_norm_, a_max2);
  return s;
}

const ScheduleParams& PulseSchedule::params() const {
  if (!params_)
    throw SimulationError("schedule was not built by double_stirap()");
  return *params_;
}

PulseSchedule PulseSchedule::with_gap(double gap) const {
  ScheduleParams p = params();
  p.gap = gap;
  return double_stirap(p);
}

DriveSample PulseSchedule::sample(double t) const {
  DriveSample s;
  s.a0 = pulses_[0].envelope(t) + pulses_[3].envelope(t);
  s.a1 = pulses_[1].envelope(t) + pulses_[4].envelope(t);
  s.a2 = pulses_[2].envelope(t) + pulses_[5].envelope(t);
  s.phi01 = phi01_;
  s.phi2 = phi2_rate_ * (t - t_i_);

  const double r01 = std::hypot(s.a0, s.a1);
  s.theta01 = (r01 > 0.0) ? std::atan2(s.a0, s.a1) : theta01_;
  if (r01 > 0.0 || s.a2 > 0.0) {
    s.thetaH = std::atan2(r01, s.a2);
    return s;
  }

  // All channels silent. Hold the angle it had at the end of the most recent
  // support: evaluate the envelopes just inside that support, where the
  // amplitude ratio has a well-defined limit.
  double hold_at = -std::numeric_limits<double>::infinity();
  for (const Pulse& p : pulses_)
    if (p.active() && p.t_end() <= t) hold_at = std::max(hold_at, p.t_end());
  if (!std::isfinite(hold_at)) {
    s.thetaH = 0.0;  // nothing has fired yet
    return s;
  }
  const double eps = 1e-9 * (t_f_ - t_i_);
  const double th = hold_at - eps;
  const double h0 = pulses_[0].envelope(th) + pulses_[3].envelope(th);
  const double h1 = pulses_[1].envelope(th) + pulses_[4].envelope(th);
  const double h2 = pulses_[2].envelope(th) + pulses_[5].envelope(th);
  s.thetaH = std::atan2(std::hypot(h0, h1), h2);
  return s;
}

double calibrate_gap(const PulseSchedule& proto, double target_gamma,
                     double tolerance) {
  if (!proto.is_double_stirap())
    throw CalibrationError("calibration needs a double-STIRAP schedule");
  const ScheduleParams& p = proto.params();
  if (p.phi2_rate <= 0.0)
    throw CalibrationError(
        "calibration requires phi2_rate > 0: the geometric phase does not "
        "depend on the separation otherwise");
  if (tolerance <= 0.0) throw CalibrationError("tolerance must be positive");

  auto gamma_of = [&](double gap) {
    return geometric_phase(proto.with_gap(gap));
  };

  // The phase is strictly decreasing in the separation, so the smallest
  // admissible separation bounds the achievable range from above.
  const double min_gap = p.intra_delay + 2.0 * p.width;
  double lo = min_gap;
  double f_lo = gamma_of(lo) - target_gamma;
  if (f_lo < 0.0) {
    std::ostringstream msg;
    msg << "target geometric phase " << target_gamma
        << " is unreachable: the largest value compatible with "
           "non-overlapping processes is "
        << (f_lo + target_gamma);
    throw CalibrationError(msg.str());
  }
  if (f_lo <= 1e-10) return lo;

  double hi = lo + std::max(p.width, f_lo / p.phi2_rate);
  double f_hi = gamma_of(hi) - target_gamma;
  for (int i = 0; i < 64 && f_hi > 0.0; ++i) {
    hi += (hi - lo);
    f_hi = gamma_of(hi) - target_gamma;
  }
  if (f_hi > 0.0)
    throw CalibrationError("failed to bracket the requested geometric phase");

  // Regula falsi with a bisection safeguard. The phase is exactly linear in
  // the separation for this pulse family, so the secant step lands on the
  // root almost immediately; the loop is belt and braces.
  double x = hi, fx = f_hi;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(fx) <= 1e-10 || (hi - lo) <= 1e-13 * std::max(1.0, hi)) break;
    double cand = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    const double fc = gamma_of(cand) - target_gamma;
    x = cand;
    fx = fc;
    if (fc > 0.0) {
      lo = cand;
      f_lo = fc;
    } else {
      hi = cand;
      f_hi = fc;
    }
  }
  if (std::abs(fx) > tolerance)
    throw CalibrationError("gap calibration did not converge");
  return x;
}

}  // namespace tripod

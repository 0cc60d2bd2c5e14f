#pragma once

#include <array>
#include <limits>
#include <optional>

namespace tripod {

// One sin^2 pulse: a(t) = a_max sin^2(pi (t - t_start) / (2 width)) for
// t_start < t < t_start + 2 width and zero outside; the FWHM equals width.
// The envelope vanishes quadratically at both support edges, so stitched
// schedules stay C^1 in time.
struct Pulse {
  double a_max = 0.0;
  double t_start = 0.0;
  double width = 1.0;

  double t_end() const { return t_start + 2.0 * width; }
  bool active() const { return a_max > 0.0; }
  double envelope(double t) const;
};

// Instantaneous drive values. theta01 = atan2(a0, a1) and
// thetaH = atan2(hypot(a0, a1), a2) follow the hold-last-value rule where
// the defining ratio is 0/0 (see PulseSchedule::sample). A hand-built
// sample keeps NaN angles until they are set explicitly; consumers that
// need the adiabatic frame reject non-finite angles.
struct DriveSample {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double theta01 = std::numeric_limits<double>::quiet_NaN();
  double thetaH = std::numeric_limits<double>::quiet_NaN();
  double phi01 = 0.0;
  double phi2 = 0.0;
};

struct ScheduleParams {
  double a_max0 = 0.0;
  double a_max1 = 0.0;
  double width = 1.0;
  // Delay between the two pulses of one process (leading pulse start to
  // trailing pulse start).
  double intra_delay = 1.0;
  // Process separation: start of process 1 to start of process 2. Must be
  // >= intra_delay + 2 width so the processes do not overlap; the silent
  // window between them has length gap - intra_delay - 2 width.
  double gap = 0.0;
  double phi01 = 0.0;
  // phi2(t) = phi2_rate * (t - t_i)
  double phi2_rate = 0.0;
  double t_i = 0.0;
};

// Six sin^2 pulses indexed [process * 3 + channel] plus the drive phases.
// Factory double_stirap() builds the standard two-process sequence; the
// public constructor admits hand-built schedules for tests and toys.
class PulseSchedule {
 public:
  PulseSchedule(const std::array<Pulse, 6>& pulses, double theta01_fallback,
                double phi01, double phi2_rate, double t_i, double t_f);

  // Process 1 drives channel 2 first and channels 0/1 intra_delay later;
  // process 2, starting `gap` after process 1, reverses the order. The
  // channel-2 peak is sqrt(a_max0^2 + a_max1^2), which keeps
  // tan(theta01) = a_max0/a_max1 constant on the overlap and sweeps thetaH
  // through a full 0 -> pi/2 -> 0 return per process pair.
  static PulseSchedule double_stirap(const ScheduleParams& p);

  DriveSample sample(double t) const;

  double theta01() const { return theta01_; }
  double phi01() const { return phi01_; }
  double phi2_rate() const { return phi2_rate_; }
  double t_initial() const { return t_i_; }
  double t_final() const { return t_f_; }
  double duration() const { return t_f_ - t_i_; }
  const std::array<Pulse, 6>& pulses() const { return pulses_; }

  // Largest sqrt(a0^2 + a1^2 + a2^2) over the schedule; used by step-size
  // guards. Exact for double-STIRAP schedules, sampled otherwise.
  double max_rabi_norm() const { return max_rabi_norm_; }

  bool is_double_stirap() const { return params_.has_value(); }
  const ScheduleParams& params() const;
  PulseSchedule with_gap(double gap) const;

 private:
  std::array<Pulse, 6> pulses_;
  double theta01_;
  double phi01_;
  double phi2_rate_;
  double t_i_;
  double t_f_;
  double max_rabi_norm_ = 0.0;
  std::optional<ScheduleParams> params_;
};

// Adjust the process separation of a double-STIRAP schedule until its
// geometric phase over the full sequence equals target_gamma (within
// `tolerance` radians on the phase). The phase decreases strictly with the
// separation, so the root is unique; throws CalibrationError when the
// target is unreachable without overlapping the processes, or when
// phi2_rate <= 0 (no dependence to exploit). Calibration is idempotent:
// re-calibrating moves the separation by less than 1e-9.
double calibrate_gap(const PulseSchedule& proto, double target_gamma,
                     double tolerance = 1e-6);

}  // namespace tripod

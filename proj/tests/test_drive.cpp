#include <cmath>

#include <tripod/closed.hpp>
#include <tripod/drive.hpp>
#include <tripod/errors.hpp>
#include <tripod/numeric.hpp>

#include "doctest.h"
#include "helpers.hpp"

using namespace tripod;

TEST_CASE("sin^2 envelope: support, peak, FWHM") {
  const Pulse p{2.0, 1.0, 1.5};
  CHECK(p.envelope(1.0) == 0.0);
  CHECK(p.envelope(0.5) == 0.0);
  CHECK(p.envelope(4.0) == 0.0);
  CHECK(p.envelope(4.5) == 0.0);
  CHECK(p.envelope(1.0 + 1.5) == doctest::Approx(2.0).epsilon(1e-14));
  // Half maximum sits half a width from either edge: FWHM = width.
  CHECK(p.envelope(1.0 + 0.75) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.envelope(4.0 - 0.75) == doctest::Approx(1.0).epsilon(1e-12));
  // Quadratic vanishing at the edges keeps the stitched drive C^1.
  CHECK(p.envelope(1.0 + 1e-6) < 1e-11);
  const Pulse off{0.0, 0.0, 1.0};
  CHECK(off.envelope(1.0) == 0.0);
  CHECK(!off.active());
}

TEST_CASE("double-STIRAP layout and timing") {
  const auto s = testutil::reference_schedule();
  const ScheduleParams& p = s.params();
  CHECK(p.gap == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(s.t_initial() == 0.0);
  CHECK(s.t_final() ==
        doctest::Approx(p.gap + p.intra_delay + 2.0 * p.width).epsilon(1e-15));

  const auto& pulses = s.pulses();
  // Process 1 leads with channel 2; channels 0/1 follow intra_delay later.
  CHECK(pulses[2].t_start == 0.0);
  CHECK(pulses[0].t_start == doctest::Approx(p.intra_delay));
  CHECK(pulses[1].t_start == doctest::Approx(p.intra_delay));
  // Process 2 reverses the order.
  CHECK(pulses[3].t_start == doctest::Approx(p.gap));
  CHECK(pulses[4].t_start == doctest::Approx(p.gap));
  CHECK(pulses[5].t_start == doctest::Approx(p.gap + p.intra_delay));
  // Channel-2 peak keeps tan(theta01) fixed on the overlap.
  CHECK(pulses[2].a_max ==
        doctest::Approx(std::hypot(p.a_max0, p.a_max1)).epsilon(1e-15));
  CHECK(s.theta01() == doctest::Approx(kPi / 8.0).epsilon(1e-14));
}

TEST_CASE("mixing angles: plateaus and hold-last-value") {
  const auto s = testutil::reference_schedule();
  const double gap = s.params().gap;

  // Only channel 2 drives at the start: thetaH = 0.
  CHECK(s.sample(0.5).thetaH == doctest::Approx(0.0).epsilon(1e-15));
  // Only channels 0/1 drive after it ends: thetaH = pi/2.
  CHECK(s.sample(2.5).thetaH == doctest::Approx(kPi / 2.0).epsilon(1e-14));
  // Silent window between the processes holds the last value.
  const double t_quiet = 0.5 * (3.0 + gap);
  const DriveSample q = s.sample(t_quiet);
  CHECK(q.a0 == 0.0);
  CHECK(q.a2 == 0.0);
  CHECK(q.thetaH == doctest::Approx(kPi / 2.0).epsilon(1e-6));
  CHECK(q.theta01 == doctest::Approx(kPi / 8.0).epsilon(1e-14));
  // Before anything fires both angles are defined (fallback values).
  const DriveSample i = s.sample(0.0);
  CHECK(i.thetaH == 0.0);
  CHECK(i.theta01 == doctest::Approx(kPi / 8.0).epsilon(1e-14));
  // theta01 stays on its plateau wherever channels 0/1 are on.
  for (double t : {1.3, 1.9, 2.7, gap + 0.4, gap + 1.6})
    CHECK(s.sample(t).theta01 == doctest::Approx(kPi / 8.0).epsilon(1e-13));
  // phi2 advances linearly from t_i.
  CHECK(s.sample(2.0).phi2 == doctest::Approx(2.0 * s.phi2_rate()));
}

TEST_CASE("peak drive norm equals the channel-2 peak") {
  const auto s = testutil::reference_schedule();
  const ScheduleParams& p = s.params();
  const double expected = std::hypot(p.a_max0, p.a_max1);
  CHECK(s.max_rabi_norm() == doctest::Approx(expected).epsilon(1e-12));
  double scanned = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double t = s.duration() * i / 20000.0;
    const DriveSample d = s.sample(t);
    scanned = std::max(scanned,
                       std::sqrt(d.a0 * d.a0 + d.a1 * d.a1 + d.a2 * d.a2));
  }
  CHECK(scanned <= s.max_rabi_norm() * (1.0 + 1e-12));
  CHECK(scanned == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("sin^2(thetaH) quadrature equals the process separation") {
  // The full sweep integrates to the separation exactly, which ties the
  // geometric phase to the gap: gamma = -rate * gap.
  const auto s = testutil::reference_schedule();
  const double gap = s.params().gap;
  CHECK(integral_sin2_thetaH(s, s.t_initial(), s.t_final()) ==
        doctest::Approx(gap).epsilon(1e-10));
  CHECK(geometric_phase(s) == doctest::Approx(-kPi).epsilon(1e-10));

  const auto wide = s.with_gap(4.0);
  CHECK(geometric_phase(wide) == doctest::Approx(-4.0).epsilon(1e-10));
}

TEST_CASE("gap calibration hits the phase target and is idempotent") {
  RunConfig cfg = reference_config();
  ScheduleParams p;
  p.a_max0 = 2.0 * kPi * cfg.a_max0_tau_2pi;
  p.a_max1 = p.a_max0 * cfg.a_max1_over_a_max0;
  p.intra_delay = 1.0;
  p.gap = 3.0;
  p.phi01 = kPi;
  p.phi2_rate = 1.0;
  const auto proto = PulseSchedule::double_stirap(p);

  const double gap = calibrate_gap(proto, -kPi);
  CHECK(std::abs(gap - kPi) < 0.25 * kPi);
  CHECK(std::abs(geometric_phase(proto.with_gap(gap)) + kPi) < 1e-6);

  const double gap2 = calibrate_gap(proto.with_gap(gap), -kPi);
  CHECK(std::abs(gap2 - gap) < 1e-9);

  // Different target, same linear relation gamma = -rate * gap.
  const double gap_b = calibrate_gap(proto, -3.3);
  CHECK(gap_b == doctest::Approx(3.3).epsilon(1e-7));
}

TEST_CASE("calibration failure modes") {
  RunConfig cfg = reference_config();
  ScheduleParams p;
  p.a_max0 = 2.0 * kPi * cfg.a_max0_tau_2pi;
  p.a_max1 = p.a_max0 * cfg.a_max1_over_a_max0;
  p.intra_delay = 1.0;
  p.gap = 3.0;
  p.phi01 = kPi;
  p.phi2_rate = 1.0;
  const auto proto = PulseSchedule::double_stirap(p);

  // Reaching -0.5 needs a gap of 0.5, below the no-overlap minimum of 3.
  CHECK_THROWS_AS(calibrate_gap(proto, -0.5), CalibrationError);

  ScheduleParams frozen = p;
  frozen.phi2_rate = 0.0;
  CHECK_THROWS_AS(calibrate_gap(PulseSchedule::double_stirap(frozen), -kPi),
                  CalibrationError);
}

TEST_CASE("schedule construction rejects bad parameters") {
  ScheduleParams p;
  p.a_max0 = 1.0;
  p.a_max1 = 1.0;
  p.intra_delay = 1.0;
  p.gap = 1.0;  // overlapping processes
  CHECK_THROWS_AS(PulseSchedule::double_stirap(p), SimulationError);
  p.gap = 4.0;
  p.width = -1.0;
  CHECK_THROWS_AS(PulseSchedule::double_stirap(p), SimulationError);
}

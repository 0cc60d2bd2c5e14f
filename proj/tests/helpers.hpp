#pragma once

#include <tripod/config.hpp>
#include <tripod/drive.hpp>
#include <tripod/propagate.hpp>

namespace testutil {

// The reference double-STIRAP sequence (mixing angle pi/8, gap pi).
inline tripod::PulseSchedule reference_schedule() {
  return tripod::build_schedule(tripod::reference_config());
}

// Same geometry at a tenth of the drive strength. Still deeply adiabatic
// (bright leakage ~1e-5) but stable at a 10x coarser step, which keeps
// property tests fast.
inline tripod::PulseSchedule weak_schedule() {
  tripod::RunConfig cfg = tripod::reference_config();
  cfg.a_max0_tau_2pi = 30.0;
  return tripod::build_schedule(cfg);
}

inline tripod::Integration weak_grid() {
  tripod::Integration g;
  g.dt = 4.0e-4;
  g.observer_stride = 50;
  return g;
}

inline tripod::Integration reference_grid() { return tripod::Integration{}; }

}  // namespace testutil

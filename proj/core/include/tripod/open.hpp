#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "tripod/drive.hpp"
#include "tripod/propagate.hpp"

namespace tripod {

// Phase bookkeeping for one jump-free segment of a trajectory. The dark
// amplitudes are parameterized as
//   c_i(t) = mod_ratio_i * e^{i gamma_i} * c_i(segment_start),
// and alpha/beta = -ln(mod_ratio)/gamma0 are derived views that stay NaN in
// the closed limit (where the ratios are 1 and the exponents are 0/0). A
// dark channel that starts with no amplitude has no well-defined ratio and
// is flagged undefined. The bright fields are adiabatic quadratures of the
// drive over the segment: gamma_b is the geometric phase shared by both
// bright states, delta the dephasing-decay integral, theta_plus/minus the
// dynamical phases -+(1/2) integral of S dt. They describe the branch
// re-populated by a jump and are pure schedule functionals.
struct PhaseLedger {
  double segment_start = 0.0;
  double segment_end = 0.0;
  double gamma0 = 0.0;
  bool dark1_defined = false;
  bool dark2_defined = false;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double mod_ratio1 = 1.0;
  double mod_ratio2 = 1.0;
  bool exponents_defined = false;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double gamma_b = 0.0;
  double delta = 0.0;
  double theta_plus = 0.0;
  double theta_minus = 0.0;
};

// arg(c_now/c_start) unwrapped onto the branch nearest prev_phase, plus the
// modulus ratio and its decay exponent -ln|c_now/c_start|/gamma0. The
// exponent is flagged undefined at gamma0 = 0 (the ratio itself remains the
// primitive quantity). Throws when |c_start| vanishes.
struct PhaseExtraction {
  double phase = 0.0;
  double mod_ratio = 1.0;
  double exponent = std::numeric_limits<double>::quiet_NaN();
  bool exponent_defined = false;
};
PhaseExtraction extract_phase(std::complex<double> c_now,
                              std::complex<double> c_start, double gamma0,
                              double prev_phase = 0.0);

// Probability that the dephasing jump fires within dt:
// 2 gamma0 dt |<0|psi>|^2 / <psi|psi>. Warns on stderr when the result is
// coarse enough (> 0.05) that first-order sampling is unreliable.
double jump_probability(const StateVector& psi, double gamma0, double dt);

// State right after a jump: the |0> amplitude survives (with its phase),
// everything else is projected away. Returned non-normalized, norm
// sqrt(2 gamma0) |<0|psi>|; throws when |<0|psi>| < 1e-14.
StateVector apply_jump(const StateVector& psi, double gamma0);

// Phase trace sample at one observer time (both dark channels, NaN where
// undefined).
struct PhasePoint {
  double t = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double mod_ratio1 = 1.0;
  double mod_ratio2 = 1.0;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
};

class NoJumpTrace;

namespace detail {
struct NoJumpTraceImpl;
const NoJumpTraceImpl& trace_impl(const NoJumpTrace&);
}  // namespace detail

// Dense no-jump branch: the Schrodinger-picture state under
// H - i gamma0 |0><0| stored at every grid step, with survival norms and
// observer-cadence populations. This is the shared backbone of trajectory
// sampling (every trajectory follows this branch until its first jump),
// phase extraction, and the one-jump fidelity quadrature.
class NoJumpTrace {
 public:
  NoJumpTrace(const StateVector& psi_i, const PulseSchedule& schedule,
              double gamma0, const Integration& grid);

  const PulseSchedule& schedule() const;
  double gamma0() const;
  const Integration& grid() const;

  long n_steps() const;  // full grid steps; a shorter remainder step may follow
  double step_time(long k) const;
  const Eigen::Vector4cd& state_at_step(long k) const;
  double norm_sq_at_step(long k) const;

  const StateVector& final_state() const;  // at t_f, non-normalized
  double final_norm_sq() const;

  // State at arbitrary t via one partial RK4 step from the grid point below.
  Eigen::Vector4cd state_at(double t) const;

  // Smallest grid index k with norm_sq(k) <= u, or -1 when the survival norm
  // stays above u on the whole step grid (the remainder step, if any, is the
  // caller's business). Norms decrease monotonically, so this is a binary
  // search.
  long first_step_at_or_below(double u) const;

  const std::vector<double>& observer_times() const;
  const std::vector<std::array<double, 4>>& observer_populations() const;

 private:
  std::shared_ptr<const detail::NoJumpTraceImpl> impl_;
  friend const detail::NoJumpTraceImpl& detail::trace_impl(const NoJumpTrace&);
};

// Final state (Schrodinger picture, t_f) of the branch restarted in |0> at
// t_jump, reusing ref's precomputed drive table. Non-normalized: its norm
// decay encodes the survival probability since the jump.
StateVector propagate_from_jump(const NoJumpTrace& ref, double t_jump);

struct NoJumpRun {
  StateVector final_state;  // Schrodinger picture, non-normalized
  PhaseLedger ledger;
  std::vector<PhasePoint> trace;
  std::complex<double> c1_start, c2_start;
  std::complex<double> c1_final, c2_final;
  // Worst-case distance between the stored state and its frame
  // reconstruction from all four instantaneous amplitudes.
  double max_reconstruction_error = 0.0;
};

// No-jump evolution with dark-amplitude extraction at observer cadence.
// Phases are unwrapped along the trace, so they are continuous functions of
// time rather than principal values.
NoJumpRun nojump_run(const StateVector& psi_i, const PulseSchedule& schedule,
                     double gamma0, const Integration& grid);

// Effective qubit map of the no-jump branch: diag dark phases/decays rotated
// by the mixing angle. Reduces to gate_matrix at gamma0 = 0 and to
// exp(-gamma0 alpha) * gate when both decays coincide. Requires both dark
// channels of the ledger to be defined.
Eigen::Matrix2cd l_matrix(const PhaseLedger& ledger, double theta01,
                          double phi01);

struct PostJumpRun {
  double t_jump = 0.0;
  PhaseLedger ledger;  // segment [t_jump, t_f]
  // Populations at t_f predicted by the adiabatic closed form (dark pair
  // from the reduced two-level dark dynamics, bright pair from the ledger
  // quadratures), and by direct integration of the restarted branch.
  std::array<double, 4> populations_formula{};
  std::array<double, 4> populations_direct{};
  StateVector final_state;  // direct route, non-normalized
};

// Branch that jumped at t_jump: restart in |0>, carry the segment to t_f.
PostJumpRun post_jump_run(const PulseSchedule& schedule, double gamma0,
                          double t_jump, const Integration& grid);

enum class JumpSampling {
  // Draw a survival threshold u and jump when <psi|psi> crosses it; the
  // crossing is refined inside the step by bisection. Exact waiting-time
  // sampling, independent of dt to integrator accuracy.
  kNormThreshold,
  // First-order per-step Bernoulli draw; kept as a cross-check.
  kPerStepBernoulli,
};

struct TrajectoryOptions {
  Integration grid;
  JumpSampling sampling = JumpSampling::kNormThreshold;
  bool record_ledgers = false;
};

struct TrajectoryRecord {
  std::vector<double> jump_times;
  StateVector final_state;  // non-normalized since the last jump
  double final_norm_sq = 1.0;
  std::array<double, 4> final_populations{};
  std::vector<PhaseLedger> ledgers;  // one per segment when recorded
};

// One Monte Carlo trajectory. Deterministic function of the seed; identical
// (bitwise) to the corresponding member of average_trajectories when the
// seed equals trajectory_seed(master_seed, index).
TrajectoryRecord run_trajectory(const StateVector& psi_i,
                                const PulseSchedule& schedule, double gamma0,
                                std::uint64_t seed,
                                const TrajectoryOptions& opts = {});

struct McwfBatch {
  DensityMatrix rho_final;  // mean of normalized projectors at t_f
  std::vector<double> t;    // observer times
  std::vector<std::array<double, 4>> mean_populations;
  std::vector<std::uint64_t> jump_count_histogram;  // index = jumps/trajectory
  std::uint64_t n_trajectories = 0;
  std::uint64_t n_jumps_total = 0;
};

// Trajectory average over n trajectories seeded from master_seed. All
// trajectories share the cached no-jump branch until their first jump, so
// only the jumping minority costs integration time. Results are bitwise
// reproducible for a fixed master seed regardless of `threads` (reductions
// run over fixed-size chunks in index order).
McwfBatch average_trajectories(const StateVector& psi_i,
                               const PulseSchedule& schedule, double gamma0,
                               std::uint64_t n_trajectories,
                               std::uint64_t master_seed,
                               const TrajectoryOptions& opts = {},
                               int threads = 1);

}  // namespace tripod

#include <benchmark/benchmark.h>

#include <tripod/closed.hpp>
#include <tripod/config.hpp>
#include <tripod/drive.hpp>
#include <tripod/model.hpp>
#include <tripod/open.hpp>
#include <tripod/propagate.hpp>
#include <tripod/random.hpp>

using namespace tripod;

namespace {

PulseSchedule weak_schedule() {
  RunConfig cfg = reference_config();
  cfg.a_max0_tau_2pi = 30.0;
  return build_schedule(cfg);
}

Integration coarse_grid() {
  Integration g;
  g.dt = 4e-4;
  g.observer_stride = 1 << 30;
  return g;
}

void BM_ScheduleSample(benchmark::State& state) {
  const PulseSchedule s = weak_schedule();
  double t = s.t_initial();
  const double span = s.duration();
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.sample(t));
    t += 1e-3;
    if (t > s.t_initial() + span) t = s.t_initial();
  }
}
BENCHMARK(BM_ScheduleSample);

void BM_FrameEigensystem(benchmark::State& state) {
  const PulseSchedule s = weak_schedule();
  const DriveSample d = s.sample(1.3);
  for (auto _ : state)
    benchmark::DoNotOptimize(eigensystem_open(d, 0.05, 1.3 - s.t_initial()));
}
BENCHMARK(BM_FrameEigensystem);

void BM_StateSegment(benchmark::State& state) {
  const PulseSchedule s = weak_schedule();
  StepControl sc;
  sc.dt = 4e-4;
  sc.t_start = 1.0;
  sc.t_end = 1.2;
  sc.observer_stride = 1 << 30;
  const auto h = [&](double t) { return hamiltonian_closed(s.sample(t)); };
  for (auto _ : state)
    benchmark::DoNotOptimize(evolve_state(StateVector::basis(kIdx0), h, sc));
}
BENCHMARK(BM_StateSegment);

void BM_DensityRun(benchmark::State& state) {
  const PulseSchedule s = weak_schedule();
  const DensityMatrix rho0 = DensityMatrix::pure(StateVector::basis(kIdx0));
  for (auto _ : state)
    benchmark::DoNotOptimize(evolve_density(rho0, s, 0.05, coarse_grid()));
}
BENCHMARK(BM_DensityRun);

void BM_NoJumpRun(benchmark::State& state) {
  const PulseSchedule s = weak_schedule();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nojump_run(StateVector::basis(kIdx0), s, 0.05, coarse_grid()));
}
BENCHMARK(BM_NoJumpRun);

void BM_Trajectory(benchmark::State& state) {
  const PulseSchedule s = weak_schedule();
  TrajectoryOptions opts;
  opts.grid = coarse_grid();
  std::uint64_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_trajectory(StateVector::basis(kIdx0), s,
                                            0.05, trajectory_seed(7, i++),
                                            opts));
}
BENCHMARK(BM_Trajectory);

}  // namespace

BENCHMARK_MAIN();

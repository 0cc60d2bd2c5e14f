#include "tripod/commands.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include "tripod/closed.hpp"
#include "tripod/errors.hpp"
#include "tripod/fidelity.hpp"
#include "tripod/io.hpp"
#include "tripod/open.hpp"
#include "tripod/propagate.hpp"

namespace tripod {

namespace {

namespace fs = std::filesystem;

struct Context {
  PulseSchedule schedule;
  StateVector psi_i;
  Integration grid;
  fs::path dir;
};

Context make_context(const RunConfig& cfg) {
  validate_config(cfg);
  Context ctx{build_schedule(cfg), initial_state_vector(cfg),
              integration_grid(cfg), fs::path(cfg.output_path)};
  if (!ctx.dir.empty()) fs::create_directories(ctx.dir);
  write_manifest(cfg, ctx.schedule.params().gap, ctx.dir / "run_manifest.txt");
  return ctx;
}

// Rate tag for per-gamma0 file names, e.g. "0.001" or "1e-05".
std::string rate_tag(double gamma0) { return csv_number(gamma0); }

std::vector<std::array<double, 4>> master_populations(
    const Context& ctx, double gamma0, std::vector<double>* times = nullptr) {
  std::vector<std::array<double, 4>> pops;
  evolve_density(DensityMatrix::pure(ctx.psi_i), ctx.schedule, gamma0,
                 ctx.grid, [&](double t, const DensityMatrix& rho) {
                   if (times) times->push_back(t);
                   pops.push_back(rho.populations());
                 });
  return pops;
}

}  // namespace

void command_closed(const RunConfig& cfg) {
  const Context ctx = make_context(cfg);
  const ClosedRun run = run_closed(ctx.psi_i, ctx.schedule, ctx.grid);
  CsvWriter csv(ctx.dir / "closed_populations.csv",
                {"t_over_tau", "p0", "p1", "pe", "p2"});
  for (std::size_t i = 0; i < run.t.size(); ++i)
    csv.row({run.t[i], run.populations[i][0], run.populations[i][1],
             run.populations[i][2], run.populations[i][3]});
  csv.close();
}

void command_lindblad(const RunConfig& cfg) {
  const Context ctx = make_context(cfg);
  for (double g0 : cfg.gamma0_tau) {
    CsvWriter csv(ctx.dir / ("lindblad_populations_" + rate_tag(g0) + ".csv"),
                  {"t_over_tau", "p0", "p1", "pe", "p2"});
    evolve_density(DensityMatrix::pure(ctx.psi_i), ctx.schedule, g0, ctx.grid,
                   [&](double t, const DensityMatrix& rho) {
                     const auto p = rho.populations();
                     csv.row({t, p[0], p[1], p[2], p[3]});
                   });
    csv.close();
  }
}

void command_mcwf(const RunConfig& cfg, int threads) {
  const Context ctx = make_context(cfg);
  for (double g0 : cfg.gamma0_tau) {
    std::vector<double> times;
    const auto master = master_populations(ctx, g0, &times);

    const NoJumpTrace trace(ctx.psi_i, ctx.schedule, g0, ctx.grid);
    const auto nojump = trace.observer_populations();

    // Without dephasing every trajectory is the jump-free one.
    std::vector<std::array<double, 4>> mc = nojump;
    if (g0 > 0.0) {
      const McwfBatch batch =
          average_trajectories(ctx.psi_i, ctx.schedule, g0,
                               cfg.n_trajectories, cfg.seed,
                               TrajectoryOptions{ctx.grid}, threads);
      mc = batch.mean_populations;
    }

    if (master.size() != nojump.size() || master.size() != mc.size() ||
        master.size() != times.size())
      throw SimulationError("observer grids disagree across solvers");

    const std::string tag = rate_tag(g0);
    CsvWriter pops_csv(ctx.dir / ("mcwf_populations_" + tag + ".csv"),
                       {"t_over_tau", "p0", "p1", "pe", "p2"});
    for (std::size_t i = 0; i < times.size(); ++i)
      pops_csv.row({times[i], mc[i][0], mc[i][1], mc[i][2], mc[i][3]});
    pops_csv.close();

    CsvWriter dev_csv(
        ctx.dir / ("mcwf_deviation_" + tag + ".csv"),
        {"t_over_tau", "p0_master", "p1_master", "p0_nojump_dev",
         "p1_nojump_dev", "p0_mcwf_dev", "p1_mcwf_dev"});
    for (std::size_t i = 0; i < times.size(); ++i)
      dev_csv.row({times[i], master[i][0], master[i][1],
                   nojump[i][0] - master[i][0], nojump[i][1] - master[i][1],
                   mc[i][0] - master[i][0], mc[i][1] - master[i][1]});
    dev_csv.close();
  }
}

void command_phases(const RunConfig& cfg) {
  const Context ctx = make_context(cfg);
  for (double g0 : cfg.gamma0_tau) {
    const NoJumpRun run = nojump_run(ctx.psi_i, ctx.schedule, g0, ctx.grid);
    CsvWriter csv(ctx.dir / ("phases_" + rate_tag(g0) + ".csv"),
                  {"t_over_tau", "gamma1", "gamma2", "alpha", "beta"});
    for (const PhasePoint& pt : run.trace)
      csv.row({pt.t, pt.gamma1, pt.gamma2, pt.alpha, pt.beta});
    csv.close();
  }
}

void command_fidelity(const RunConfig& cfg, int threads) {
  const Context ctx = make_context(cfg);
  FidelityOptions opts;
  opts.grid = ctx.grid;
  opts.one_jump_nodes = cfg.one_jump_nodes;
  opts.n_trajectories = cfg.n_trajectories;
  opts.seed = cfg.seed;
  opts.threads = threads;

  CsvWriter csv(ctx.dir / "fidelity.csv",
                {"gamma0_tau", "f_nojump", "f_one_jump", "f_mc", "f_uhlmann"});
  for (double g0 : cfg.gamma0_tau) {
    const double f_nj =
        average_fidelity(ctx.schedule, g0, FidelityMode::kNoJump, opts).average;
    const double f_1j =
        average_fidelity(ctx.schedule, g0, FidelityMode::kOneJump, opts).average;
    const double f_mc =
        average_fidelity(ctx.schedule, g0, FidelityMode::kMc, opts).average;
    const double f_uhl =
        average_fidelity(ctx.schedule, g0, FidelityMode::kUhlmann, opts).average;
    csv.row({g0, f_nj, f_1j, f_mc, f_uhl});
  }
  csv.close();
}

}  // namespace tripod

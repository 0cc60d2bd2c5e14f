#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "tripod/commands.hpp"
#include "tripod/config.hpp"
#include "tripod/errors.hpp"

namespace {

struct Args {
  std::string config_path;
  bool paper_defaults = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  bool out_dir_set = false;
  int threads = 1;
};

tripod::RunConfig resolve_config(const Args& a) {
  if (a.paper_defaults == !a.config_path.empty())
    throw tripod::ConfigError(
        "pass exactly one of --config FILE or --paper-defaults");
  tripod::RunConfig cfg = a.paper_defaults
                              ? tripod::reference_config()
                              : tripod::parse_config(a.config_path);
  if (a.seed_set) cfg.seed = a.seed;
  if (a.out_dir_set) cfg.output_path = a.out_dir;
  tripod::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tripod-atom stimulated-Raman-passage batch simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  Args args;
  app.add_option("--config", args.config_path,
                 "key=value run configuration file");
  app.add_flag("--paper-defaults", args.paper_defaults,
               "use the built-in reference parameter set");
  app.add_option("--seed", args.seed, "override the random seed")
      ->each([&](const std::string&) { args.seed_set = true; });
  app.add_option("--out-dir", args.out_dir, "override the output directory")
      ->each([&](const std::string&) { args.out_dir_set = true; });
  app.add_option("--threads", args.threads, "trajectory worker threads")
      ->check(CLI::PositiveNumber);

  app.add_subcommand("closed", "populations without dephasing")
      ->callback([&] { tripod::command_closed(resolve_config(args)); });
  app.add_subcommand("lindblad", "master-equation populations per rate")
      ->callback([&] { tripod::command_lindblad(resolve_config(args)); });
  app.add_subcommand("mcwf",
                     "trajectory-averaged populations and deviations")
      ->callback(
          [&] { tripod::command_mcwf(resolve_config(args), args.threads); });
  app.add_subcommand("phases", "geometric phases and decay exponents")
      ->callback([&] { tripod::command_phases(resolve_config(args)); });
  app.add_subcommand("fidelity", "gate fidelity vs dephasing rate")
      ->callback(
          [&] { tripod::command_fidelity(resolve_config(args), args.threads); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

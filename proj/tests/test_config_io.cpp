#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <tripod/closed.hpp>
#include <tripod/config.hpp>
#include <tripod/errors.hpp>
#include <tripod/io.hpp>
#include <tripod/model.hpp>
#include <tripod/numeric.hpp>

#include "doctest.h"

using namespace tripod;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("tripod_test_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path file(const std::string& name, const std::string& content) const {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kRequiredOnly =
    "a_max0_tau_2pi = 30\n"
    "a_max1_over_a_max0 = 2.5\n"
    "intra_delay_tau = 1\n"
    "gap_tau = 3.5\n"
    "phi01 = 3.141592653589793\n"
    "phi2_rate_tau = 1\n"
    "gamma0_tau = 1e-3\n"
    "initial_state = 0\n";

}  // namespace

TEST_CASE("built-in reference parameter set") {
  const RunConfig cfg = reference_config();
  CHECK(cfg.a_max0_tau_2pi == 300.0);
  CHECK(cfg.a_max1_over_a_max0 == doctest::Approx(std::sqrt(2.0) + 1.0)
                                      .epsilon(1e-15));
  CHECK(cfg.intra_delay_tau == 1.0);
  REQUIRE(cfg.gap_tau.has_value());
  CHECK(*cfg.gap_tau == kPi);
  CHECK(!cfg.calibrate_gamma1_target.has_value());
  CHECK(cfg.phi01 == kPi);
  CHECK(cfg.phi2_rate_tau == 1.0);
  CHECK(cfg.gamma0_tau == std::vector<double>{1e-5, 1e-3, 1e-1});
  REQUIRE(cfg.initial_state.has_value());
  CHECK(*cfg.initial_state == "0");
  CHECK(cfg.n_trajectories == 10000);
  CHECK(cfg.seed == 12345);
  CHECK(cfg.dt_tau == 4.0e-5);
  CHECK(cfg.observer_cadence == 100);
  CHECK(cfg.one_jump_nodes == 200);
  CHECK(cfg.output_path == ".");
  validate_config(cfg);  // must not throw

  const PulseSchedule s = build_schedule(cfg);
  CHECK(s.theta01() == doctest::Approx(kPi / 8.0).epsilon(1e-15));
  CHECK(s.t_initial() == 0.0);
  CHECK(s.t_final() == doctest::Approx(kPi + 3.0).epsilon(1e-15));
}

TEST_CASE("full config file parses with comments and whitespace") {
  TempDir tmp;
  const fs::path p = tmp.file("full.cfg",
                              "# full parameter set\n"
                              "a_max0_tau_2pi = 120   # peak amplitude\n"
                              "  a_max1_over_a_max0=2.5\n"
                              "intra_delay_tau = 0.75\n"
                              "gap_tau = 3.5\n"
                              "phi01 = 1.25\n"
                              "phi2_rate_tau = 0.8\n"
                              "gamma0_tau = 1e-4, 2e-3\n"
                              "\n"
                              "initial_state = x+\n"
                              "n_trajectories = 444\n"
                              "seed = 987\n"
                              "dt_tau = 2e-4\n"
                              "observer_cadence = 25\n"
                              "one_jump_nodes = 111\n"
                              "output_path = out/dir\n");
  const RunConfig cfg = parse_config(p);
  CHECK(cfg.a_max0_tau_2pi == 120.0);
  CHECK(cfg.a_max1_over_a_max0 == 2.5);
  CHECK(cfg.intra_delay_tau == 0.75);
  CHECK(*cfg.gap_tau == 3.5);
  CHECK(cfg.phi01 == 1.25);
  CHECK(cfg.phi2_rate_tau == 0.8);
  CHECK(cfg.gamma0_tau == std::vector<double>{1e-4, 2e-3});
  CHECK(*cfg.initial_state == "x+");
  CHECK(cfg.n_trajectories == 444);
  CHECK(cfg.seed == 987);
  CHECK(cfg.dt_tau == 2e-4);
  CHECK(cfg.observer_cadence == 25);
  CHECK(cfg.one_jump_nodes == 111);
  CHECK(cfg.output_path == "out/dir");

  const StateVector psi = initial_state_vector(cfg);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(psi.amps(kIdx0) - r) < 1e-15);
  CHECK(std::abs(psi.amps(kIdx1) - r) < 1e-15);

  const Integration grid = integration_grid(cfg);
  CHECK(grid.dt == 2e-4);
  CHECK(grid.observer_stride == 25);
}

TEST_CASE("optional keys default as documented") {
  TempDir tmp;
  const RunConfig cfg = parse_config(tmp.file("req.cfg", kRequiredOnly));
  CHECK(cfg.n_trajectories == 10000);
  CHECK(cfg.seed == 12345);
  CHECK(cfg.dt_tau == 4.0e-5);
  CHECK(cfg.observer_cadence == 100);
  CHECK(cfg.one_jump_nodes == 200);
  CHECK(cfg.output_path == ".");
  CHECK(!cfg.initial_amps.has_value());
}

TEST_CASE("explicit qubit amplitudes") {
  TempDir tmp;
  std::string text(kRequiredOnly);
  text.replace(text.find("initial_state = 0\n"), 18,
               "initial_amps = 0.6, 0, 0, 0.8\n");
  const RunConfig cfg = parse_config(tmp.file("amps.cfg", text));
  REQUIRE(cfg.initial_amps.has_value());
  const StateVector psi = initial_state_vector(cfg);
  CHECK(std::abs(psi.amps(kIdx0) - 0.6) < 1e-15);
  CHECK(std::abs(psi.amps(kIdx1) - std::complex<double>(0.0, 0.8)) < 1e-15);
}

TEST_CASE("parse errors name the file, line, and offender") {
  TempDir tmp;
  CHECK_THROWS_WITH_AS(
      parse_config(tmp.dir / "absent.cfg"),
      ("cannot open config file: " + (tmp.dir / "absent.cfg").string())
          .c_str(),
      ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(tmp.file("bad1.cfg", "# c\nnope = 3\n")),
      "bad1.cfg:2: unknown key 'nope'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(tmp.file("bad2.cfg", "hello\n")),
                       "bad2.cfg:1: expected key = value", ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(tmp.file("bad3.cfg", "phi01 =   # comment\n")),
      "bad3.cfg:1: empty value for 'phi01'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(tmp.file("bad4.cfg", "phi01 = abc\n")),
                       "bad4.cfg:1: not a number: 'abc'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(tmp.file("bad5.cfg", "phi01 = 1.5x\n")),
                       "bad5.cfg:1: trailing characters in '1.5x'",
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(tmp.file("bad6.cfg", "seed = -3\n")),
                       "bad6.cfg:1: not a non-negative integer: '-3'",
                       ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(tmp.file("bad7.cfg", "initial_amps = 1, 2, 3\n")),
      "bad7.cfg:1: initial_amps needs re0,im0,re1,im1 (4 numbers)",
      ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(tmp.file("bad8.cfg", "a_max0_tau_2pi = 3\n")),
      "bad8.cfg: missing required key(s): a_max1_over_a_max0"
      " intra_delay_tau gap_tau (or calibrate_gamma1_target) phi01"
      " phi2_rate_tau gamma0_tau initial_state (or initial_amps)",
      ConfigError);
}

TEST_CASE("validation lists every violation, one bullet each") {
  RunConfig cfg = reference_config();
  cfg.a_max0_tau_2pi = -1.0;
  cfg.gap_tau = -2.0;
  cfg.gamma0_tau = {1e-3, -1.0};
  CHECK_THROWS_WITH_AS(validate_config(cfg),
                       "invalid configuration:"
                       "\n  - a_max0_tau_2pi must be > 0"
                       "\n  - gap_tau must be > 0"
                       "\n  - gamma0_tau values must be >= 0",
                       ConfigError);

  RunConfig both = reference_config();
  both.calibrate_gamma1_target = -kPi;
  CHECK_THROWS_WITH_AS(
      validate_config(both),
      "invalid configuration:"
      "\n  - gap_tau and calibrate_gamma1_target are mutually exclusive",
      ConfigError);

  RunConfig states = reference_config();
  states.initial_amps = {1.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(
      validate_config(states),
      "invalid configuration:"
      "\n  - initial_state and initial_amps are mutually exclusive",
      ConfigError);

  RunConfig label = reference_config();
  label.initial_state = "z+";
  CHECK_THROWS_WITH_AS(
      validate_config(label),
      "invalid configuration:"
      "\n  - initial_state must be one of 0, 1, x+, x-, y+, y-",
      ConfigError);

  RunConfig zero = reference_config();
  zero.initial_state.reset();
  zero.initial_amps = {0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(validate_config(zero),
                       "invalid configuration:"
                       "\n  - initial_amps must have nonzero norm",
                       ConfigError);

  RunConfig knobs = reference_config();
  knobs.n_trajectories = 0;
  knobs.dt_tau = 0.0;
  knobs.observer_cadence = 0;
  knobs.one_jump_nodes = 0;
  CHECK_THROWS_WITH_AS(validate_config(knobs),
                       "invalid configuration:"
                       "\n  - n_trajectories must be >= 1"
                       "\n  - dt_tau must be > 0"
                       "\n  - observer_cadence must be >= 1"
                       "\n  - one_jump_nodes must be >= 1",
                       ConfigError);
}

TEST_CASE("manifest round trip is byte-identical and rerunnable") {
  TempDir tmp;
  RunConfig cfg = reference_config();
  cfg.gamma0_tau = {1e-5, 1e-3};
  cfg.seed = 31337;
  cfg.output_path = (tmp.dir / "out").string();

  const fs::path m1 = tmp.dir / "m1.cfg";
  write_manifest(cfg, *cfg.gap_tau, m1);
  const RunConfig back = parse_config(m1);
  CHECK(back.a_max0_tau_2pi == cfg.a_max0_tau_2pi);
  CHECK(back.a_max1_over_a_max0 == cfg.a_max1_over_a_max0);
  CHECK(*back.gap_tau == *cfg.gap_tau);
  CHECK(back.phi01 == cfg.phi01);
  CHECK(back.gamma0_tau == cfg.gamma0_tau);
  CHECK(back.seed == cfg.seed);
  CHECK(back.output_path == cfg.output_path);

  const fs::path m2 = tmp.dir / "m2.cfg";
  write_manifest(back, *back.gap_tau, m2);
  CHECK(slurp(m1) == slurp(m2));
  CHECK(slurp(m1).find('\r') == std::string::npos);
}

TEST_CASE("a phase target resolves to the matching separation") {
  TempDir tmp;
  std::string text(kRequiredOnly);
  text.replace(text.find("gap_tau = 3.5\n"), 14,
               "calibrate_gamma1_target = -3.141592653589793\n");
  const RunConfig cfg = parse_config(tmp.file("cal.cfg", text));
  REQUIRE(cfg.calibrate_gamma1_target.has_value());
  CHECK(!cfg.gap_tau.has_value());

  const PulseSchedule s = build_schedule(cfg);
  REQUIRE(s.is_double_stirap());
  CHECK(std::abs(s.params().gap - kPi) < 1e-5);
  CHECK(std::abs(geometric_phase(s) + kPi) < 1e-6);

  // The manifest records the solved gap, so a rerun skips the solve and
  // reproduces the exact schedule.
  const fs::path m = tmp.dir / "resolved.cfg";
  write_manifest(cfg, s.params().gap, m);
  const RunConfig back = parse_config(m);
  REQUIRE(back.gap_tau.has_value());
  CHECK(!back.calibrate_gamma1_target.has_value());
  CHECK(*back.gap_tau == s.params().gap);
  CHECK(build_schedule(back).params().gap == s.params().gap);
}

TEST_CASE("CSV values carry 12 significant digits") {
  CHECK(csv_number(kPi) == "3.14159265359");
  CHECK(csv_number(1e-5) == "1e-05");
  CHECK(csv_number(0.5) == "0.5");
  CHECK(csv_number(1.0) == "1");
  CHECK(csv_number(-123456789012.0) == "-123456789012");
  CHECK(csv_number(1.0 / 3.0) == "0.333333333333");
  CHECK(csv_number(0.0) == "0");
}

TEST_CASE("CSV writer: atomic close, LF endings, width checks, cleanup") {
  TempDir tmp;
  const fs::path p = tmp.dir / "table.csv";
  {
    CsvWriter w(p, {"t_over_tau", "p0"});
    CHECK(fs::exists(tmp.dir / "table.csv.tmp"));
    CHECK(!fs::exists(p));
    w.row({1.0, 0.25});
    CHECK_THROWS_AS(w.row({1.0}), SimulationError);
    CHECK_THROWS_AS(w.row({1.0, 2.0, 3.0}), SimulationError);
    w.row({kPi, 1e-5});
    w.close();
    CHECK(fs::exists(p));
    CHECK(!fs::exists(tmp.dir / "table.csv.tmp"));
  }
  CHECK(slurp(p) ==
        "t_over_tau,p0\n"
        "1,0.25\n"
        "3.14159265359,1e-05\n");

  // Abandoned writer: no partial file, no leftover temp.
  const fs::path q = tmp.dir / "gone.csv";
  {
    CsvWriter w(q, {"a"});
    w.row({1.0});
  }
  CHECK(!fs::exists(q));
  CHECK(!fs::exists(tmp.dir / "gone.csv.tmp"));

  CHECK_THROWS_AS(CsvWriter(tmp.dir / "x.csv", {}), SimulationError);
}

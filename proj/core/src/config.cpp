#include "tripod/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tripod/closed.hpp"
#include "tripod/errors.hpp"
#include "tripod/fidelity.hpp"
#include "tripod/numeric.hpp"

namespace tripod {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double to_double(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  double out;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number: '" + v + "'");
  }
  if (used != v.size())
    throw ConfigError(where + ": trailing characters in '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
  std::size_t used = 0;
  unsigned long long out;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a non-negative integer: '" + v + "'");
  }
  if (used != v.size() || v.find('-') != std::string::npos)
    throw ConfigError(where + ": not a non-negative integer: '" + v + "'");
  return static_cast<std::uint64_t>(out);
}

int to_int(const std::string& v, const std::string& where) {
  const std::uint64_t u = to_u64(v, where);
  if (u > 1000000000ULL) throw ConfigError(where + ": value too large");
  return static_cast<int>(u);
}

std::vector<double> to_double_list(const std::string& v,
                                   const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item), where));
  if (out.empty()) throw ConfigError(where + ": empty list");
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

RunConfig reference_config() {
  RunConfig cfg;
  cfg.a_max0_tau_2pi = 300.0;
  cfg.a_max1_over_a_max0 = std::sqrt(2.0) + 1.0;
  cfg.intra_delay_tau = 1.0;
  cfg.gap_tau = kPi;
  cfg.phi01 = kPi;
  cfg.phi2_rate_tau = 1.0;
  cfg.gamma0_tau = {1e-5, 1e-3, 1e-1};
  cfg.initial_state = "0";
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());

  RunConfig cfg;
  std::optional<double> a0, ratio, intra, phi01, rate;
  bool have_gamma0 = false;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = file.filename().string() + ":" +
                              std::to_string(lineno);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (val.empty()) throw ConfigError(where + ": empty value for '" + key + "'");

    if (key == "a_max0_tau_2pi") a0 = to_double(val, where);
    else if (key == "a_max1_over_a_max0") ratio = to_double(val, where);
    else if (key == "intra_delay_tau") intra = to_double(val, where);
    else if (key == "gap_tau") cfg.gap_tau = to_double(val, where);
    else if (key == "calibrate_gamma1_target")
      cfg.calibrate_gamma1_target = to_double(val, where);
    else if (key == "phi01") phi01 = to_double(val, where);
    else if (key == "phi2_rate_tau") rate = to_double(val, where);
    else if (key == "gamma0_tau") {
      cfg.gamma0_tau = to_double_list(val, where);
      have_gamma0 = true;
    } else if (key == "initial_state") cfg.initial_state = val;
    else if (key == "initial_amps") {
      const auto list = to_double_list(val, where);
      if (list.size() != 4)
        throw ConfigError(where +
                          ": initial_amps needs re0,im0,re1,im1 (4 numbers)");
      cfg.initial_amps = std::array<double, 4>{list[0], list[1], list[2],
                                               list[3]};
    } else if (key == "n_trajectories") cfg.n_trajectories = to_u64(val, where);
    else if (key == "seed") cfg.seed = to_u64(val, where);
    else if (key == "dt_tau") cfg.dt_tau = to_double(val, where);
    else if (key == "observer_cadence") cfg.observer_cadence = to_int(val, where);
    else if (key == "one_jump_nodes") cfg.one_jump_nodes = to_int(val, where);
    else if (key == "output_path") cfg.output_path = val;
    else throw ConfigError(where + ": unknown key '" + key + "'");
  }

  std::vector<std::string> missing;
  if (!a0) missing.push_back("a_max0_tau_2pi");
  if (!ratio) missing.push_back("a_max1_over_a_max0");
  if (!intra) missing.push_back("intra_delay_tau");
  if (!cfg.gap_tau && !cfg.calibrate_gamma1_target)
    missing.push_back("gap_tau (or calibrate_gamma1_target)");
  if (!phi01) missing.push_back("phi01");
  if (!rate) missing.push_back("phi2_rate_tau");
  if (!have_gamma0) missing.push_back("gamma0_tau");
  if (!cfg.initial_state && !cfg.initial_amps)
    missing.push_back("initial_state (or initial_amps)");
  if (!missing.empty()) {
    std::string msg = file.filename().string() + ": missing required key(s):";
    for (const auto& k : missing) msg += " " + k;
    throw ConfigError(msg);
  }
  cfg.a_max0_tau_2pi = *a0;
  cfg.a_max1_over_a_max0 = *ratio;
  cfg.intra_delay_tau = *intra;
  cfg.phi01 = *phi01;
  cfg.phi2_rate_tau = *rate;

  validate_config(cfg);
  return cfg;
}

void validate_config(const RunConfig& cfg) {
  std::vector<std::string> bad;
  if (!(cfg.a_max0_tau_2pi > 0.0)) bad.push_back("a_max0_tau_2pi must be > 0");
  if (!(cfg.a_max1_over_a_max0 > 0.0))
    bad.push_back("a_max1_over_a_max0 must be > 0");
  if (!(cfg.intra_delay_tau >= 0.0))
    bad.push_back("intra_delay_tau must be >= 0");
  if (cfg.gap_tau && cfg.calibrate_gamma1_target)
    bad.push_back("gap_tau and calibrate_gamma1_target are mutually exclusive");
  if (cfg.gap_tau && !(*cfg.gap_tau > 0.0)) bad.push_back("gap_tau must be > 0");
  if (cfg.gamma0_tau.empty()) bad.push_back("gamma0_tau must not be empty");
  for (double g : cfg.gamma0_tau)
    if (!(g >= 0.0)) {
      bad.push_back("gamma0_tau values must be >= 0");
      break;
    }
  if (cfg.initial_state && cfg.initial_amps)
    bad.push_back("initial_state and initial_amps are mutually exclusive");
  if (cfg.initial_state) {
    const auto labels = axial_labels();
    bool ok = false;
    for (const auto& l : labels) ok = ok || (l == *cfg.initial_state);
    if (!ok)
      bad.push_back("initial_state must be one of 0, 1, x+, x-, y+, y-");
  }
  if (cfg.initial_amps) {
    const auto& a = *cfg.initial_amps;
    if (!(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3] > 0.0))
      bad.push_back("initial_amps must have nonzero norm");
  }
  if (cfg.n_trajectories < 1) bad.push_back("n_trajectories must be >= 1");
  if (!(cfg.dt_tau > 0.0)) bad.push_back("dt_tau must be > 0");
  if (cfg.observer_cadence < 1) bad.push_back("observer_cadence must be >= 1");
  if (cfg.one_jump_nodes < 1) bad.push_back("one_jump_nodes must be >= 1");

  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ConfigError(msg);
  }
}

PulseSchedule build_schedule(const RunConfig& cfg) {
  ScheduleParams p;
  p.a_max0 = 2.0 * kPi * cfg.a_max0_tau_2pi;
  p.a_max1 = p.a_max0 * cfg.a_max1_over_a_max0;
  p.width = 1.0;
  p.intra_delay = cfg.intra_delay_tau;
  p.phi01 = cfg.phi01;
  p.phi2_rate = cfg.phi2_rate_tau;
  p.t_i = 0.0;
  if (cfg.gap_tau) {
    p.gap = *cfg.gap_tau;
    return PulseSchedule::double_stirap(p);
  }
  p.gap = cfg.intra_delay_tau + 2.0 * p.width;  // feasible starting point
  const PulseSchedule proto = PulseSchedule::double_stirap(p);
  const double gap = calibrate_gap(proto, *cfg.calibrate_gamma1_target);
  return proto.with_gap(gap);
}

StateVector initial_state_vector(const RunConfig& cfg) {
  if (cfg.initial_amps) {
    const auto& a = *cfg.initial_amps;
    return StateVector::qubit({a[0], a[1]}, {a[2], a[3]});
  }
  const auto labels = axial_labels();
  const auto states = axial_states();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (cfg.initial_state && labels[i] == *cfg.initial_state) return states[i];
  throw ConfigError("no initial state configured");
}

Integration integration_grid(const RunConfig& cfg) {
  Integration grid;
  grid.dt = cfg.dt_tau;
  grid.observer_stride = cfg.observer_cadence;
  return grid;
}

void write_manifest(const RunConfig& cfg, double resolved_gap,
                    const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write manifest: " + file.string());
  out << "# resolved run parameters; reusable as a config file\n";
  out << "a_max0_tau_2pi = " << fmt(cfg.a_max0_tau_2pi) << "\n";
  out << "a_max1_over_a_max0 = " << fmt(cfg.a_max1_over_a_max0) << "\n";
  out << "intra_delay_tau = " << fmt(cfg.intra_delay_tau) << "\n";
  out << "gap_tau = " << fmt(resolved_gap) << "\n";
  out << "phi01 = " << fmt(cfg.phi01) << "\n";
  out << "phi2_rate_tau = " << fmt(cfg.phi2_rate_tau) << "\n";
  out << "gamma0_tau = ";
  for (std::size_t i = 0; i < cfg.gamma0_tau.size(); ++i)
    out << (i ? ", " : "") << fmt(cfg.gamma0_tau[i]);
  out << "\n";
  if (cfg.initial_amps) {
    const auto& a = *cfg.initial_amps;
    out << "initial_amps = " << fmt(a[0]) << ", " << fmt(a[1]) << ", "
        << fmt(a[2]) << ", " << fmt(a[3]) << "\n";
  } else if (cfg.initial_state) {
    out << "initial_state = " << *cfg.initial_state << "\n";
  }
  out << "n_trajectories = " << cfg.n_trajectories << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "dt_tau = " << fmt(cfg.dt_tau) << "\n";
  out << "observer_cadence = " << cfg.observer_cadence << "\n";
  out << "one_jump_nodes = " << cfg.one_jump_nodes << "\n";
  out << "output_path = " << cfg.output_path << "\n";
  if (!out) throw ConfigError("failed writing manifest: " + file.string());
}

}  // namespace tripod

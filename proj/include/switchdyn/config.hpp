#pragma once

// Run configuration files.
//
// Sectioned key/value text:
//
//     # comment
//     [potential]
//     name = double_well
//     [dynamics]
//     variant = isd_regularized
//     epsilon = 0.05
//     delta = 1e-3
//     [run]
//     T = 10
//     seed = 1
//
// Sections: potential, dynamics, run, experiment, sweep. Unknown sections or keys, malformed values, missing
// required keys (potential.name, dynamics.variant, dynamics.epsilon, dynamics.delta, run.T, run.seed) and
// constraint violations are reported with the offending key and line. serialize() writes every field, and
// parse(serialize(c)) == c.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "switchdyn/dynamics.hpp"
#include "switchdyn/experiments.hpp"
#include "switchdyn/integrator.hpp"
#include "switchdyn/landscape.hpp"
#include "switchdyn/report_io.hpp"

namespace switchdyn {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct PotentialSpec {
  std::string name = "double_well"; // double_well | mixture | lennard_jones
  MixtureParams mixture;
  int n_particles = 7;

  friend bool operator==(const PotentialSpec &a, const PotentialSpec &b) {
    return a.name == b.name && a.mixture.m_x == b.mixture.m_x && a.mixture.m_y == b.mixture.m_y &&
           a.mixture.s_x == b.mixture.s_x && a.mixture.s_y == b.mixture.s_y && a.mixture.L == b.mixture.L &&
           a.n_particles == b.n_particles;
  }
};

enum class ExperimentKind { hitting_time, failure_probability, transition_time, visit_all_minima, histogram };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::hitting_time:
    return "hitting_time";
  case ExperimentKind::failure_probability:
    return "failure_probability";
  case ExperimentKind::transition_time:
    return "transition_time";
  case ExperimentKind::visit_all_minima:
    return "visit_all_minima";
  case ExperimentKind::histogram:
    return "histogram";
  }
  return "?";
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::hitting_time;
  std::vector<double> target;           // Ball centre; empty means the origin.
  double radius = 0.1;                  // Ball radius.
  std::optional<double> energy_below;   // Energy threshold predicate instead of a ball.
  double t_max = 100.0;
  std::int64_t n_trials = 100;
  double quench_period = 0.5;
  int bins = 40;
  std::optional<double> burn_in;        // Histogram burn-in; default 10% of T.

  friend bool operator==(const ExperimentSpec &, const ExperimentSpec &) = default;
};

struct SweepSpec {
  std::vector<double> nu;
  std::vector<double> epsilon;
  std::vector<RegularizerSpec> regularizer;

  bool empty() const noexcept { return nu.empty() && epsilon.empty() && regularizer.empty(); }
  friend bool operator==(const SweepSpec &, const SweepSpec &) = default;
};

struct RunConfig {
  PotentialSpec potential;
  DynamicsConfig dynamics;
  double horizon = 10.0; // T
  std::int64_t stride = 1;
  std::vector<double> x0; // Empty selects the potential's default start.
  std::vector<double> v0;
  std::uint64_t seed = 1;
  std::string out = "out.csv";
  unsigned workers = 0; // 0 = available parallelism.
  ExperimentSpec experiment;
  SweepSpec sweep;

  friend bool operator==(const RunConfig &a, const RunConfig &b) {
    return a.potential == b.potential && dynamics_equal(a.dynamics, b.dynamics) && a.horizon == b.horizon &&
           a.stride == b.stride && a.x0 == b.x0 && a.v0 == b.v0 && a.seed == b.seed && a.out == b.out &&
           a.workers == b.workers && a.experiment == b.experiment && a.sweep == b.sweep;
  }

  static bool dynamics_equal(const DynamicsConfig &a, const DynamicsConfig &b) {
    return a.variant == b.variant && a.switching == b.switching && a.initial_mode == b.initial_mode &&
           a.epsilon == b.epsilon && a.epsilon_prime == b.epsilon_prime && a.eta == b.eta && a.nu == b.nu &&
           a.delta == b.delta && a.regularizer == b.regularizer && a.guard_radius == b.guard_radius &&
           a.guard_mode == b.guard_mode && a.divergence_ceiling == b.divergence_ceiling;
  }
};

// Potential named by the spec.
inline Potential make_potential(const PotentialSpec &spec) {
  if (spec.name == "double_well") return make_double_well();
  if (spec.name == "mixture") return make_mixture(spec.mixture);
  if (spec.name == "lennard_jones") return make_lennard_jones({spec.n_particles, 2});
  throw ConfigError("unknown potential '" + spec.name + "'");
}

// x0 from the config, or the potential's default start: (0.9, 0) for the double well, (m_x, m_y) for the
// mixture, and the U ~ -11.47 minimizer for the seven-particle cluster.
inline Vector start_point(const RunConfig &c) {
  if (!c.x0.empty()) return Eigen::Map<const Vector>(c.x0.data(), static_cast<Eigen::Index>(c.x0.size()));
  if (c.potential.name == "double_well") return Eigen::Vector2d(0.9, 0.0);
  if (c.potential.name == "mixture") return Eigen::Vector2d(c.potential.mixture.m_x, c.potential.mixture.m_y);
  if (c.potential.name == "lennard_jones" && c.potential.n_particles == 7) return lj7_minimum(2);
  throw ConfigError("run.x0 is required for potential '" + c.potential.name + "'");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Entry {
  std::string value;
  int line;
};

class ConfigReader {
public:
  explicit ConfigReader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string &key) const { return entries_.count(key) != 0; }

  int line_of(const std::string &key) const { return has(key) ? entries_.at(key).line : 0; }

  std::string where(const std::string &key) const {
    return has(key) ? " (line " + std::to_string(line_of(key)) + ")" : "";
  }

  [[noreturn]] void type_error(const std::string &key, const std::string &expected) const {
    throw ConfigError("type mismatch for '" + key + "'" + where(key) + ": expected " + expected + ", got '" +
                      entries_.at(key).value + "'");
  }

  void require(const std::string &key) const {
    if (!has(key)) throw ConfigError("missing required field '" + key + "'");
  }

  static std::optional<double> to_number(const std::string &s) {
    double v = 0.0;
    const char *first = s.data();
    const char *last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
    return v;
  }

  void number(const std::string &key, double &out) const {
    if (!has(key)) return;
    const auto v = to_number(entries_.at(key).value);
    if (!v) type_error(key, "a number");
    out = *v;
  }

  void optional_number(const std::string &key, std::optional<double> &out) const {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  template <typename Int> void integer(const std::string &key, Int &out) const {
    if (!has(key)) return;
    const std::string &s = entries_.at(key).value;
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) type_error(key, "an integer");
    out = v;
  }

  void boolean(const std::string &key, bool &out) const {
    if (!has(key)) return;
    const std::string &s = entries_.at(key).value;
    if (s == "true") {
      out = true;
    } else if (s == "false") {
      out = false;
    } else {
      type_error(key, "true or false");
    }
  }

  void text(const std::string &key, std::string &out) const {
    if (has(key)) out = entries_.at(key).value;
  }

  std::vector<std::string> items(const std::string &key) const {
    std::vector<std::string> out;
    std::stringstream ss(entries_.at(key).value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  void numbers(const std::string &key, std::vector<double> &out) const {
    if (!has(key)) return;
    out.clear();
    for (const auto &item : items(key)) {
      const auto v = to_number(item);
      if (!v) type_error(key, "a comma-separated list of numbers");
      out.push_back(*v);
    }
  }

  template <typename Enum>
  void choice(const std::string &key, Enum &out, std::initializer_list<Enum> options) const {
    if (!has(key)) return;
    const std::string &s = entries_.at(key).value;
    std::string expected;
    for (Enum o : options) {
      if (s == to_string(o)) {
        out = o;
        return;
      }
      expected += (expected.empty() ? "" : " | ") + std::string(to_string(o));
    }
    type_error(key, "one of " + expected);
  }

  [[noreturn]] void violation(const std::string &key, const std::string &what) const {
    throw ConfigError("constraint violation: '" + key + "'" + where(key) + " " + what);
  }

private:
  std::map<std::string, Entry> entries_;
};

inline const std::set<std::string> &known_keys() {
  static const std::set<std::string> keys = {
      "potential.name",          "potential.mx",           "potential.my",          "potential.sx",
      "potential.sy",            "potential.L",            "potential.n_particles", "dynamics.variant",
      "dynamics.switching",      "dynamics.initial_mode",  "dynamics.epsilon",      "dynamics.epsilon_prime",
      "dynamics.eta",            "dynamics.nu",            "dynamics.delta",        "dynamics.regularizer",
      "dynamics.r_star",         "dynamics.guard_radius",  "dynamics.guard_mode",   "dynamics.divergence_ceiling",
      "run.T",                   "run.stride",             "run.x0",                "run.v0",
      "run.seed",                "run.out",                "run.workers",           "experiment.kind",
      "experiment.target",       "experiment.radius",      "experiment.energy_below", "experiment.t_max",
      "experiment.n_trials",     "experiment.quench_period", "experiment.bins",     "experiment.burn_in",
      "sweep.nu",                "sweep.epsilon",          "sweep.regularizer"};
  return keys;
}

} // namespace detail

// Parse and validate configuration text. Throws ConfigError naming the offending key and line.
inline RunConfig parse_config(std::string_view text) {
  static const std::set<std::string> sections = {"potential", "dynamics", "run", "experiment", "sweep"};
  std::map<std::string, detail::Entry> entries;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header on line " + std::to_string(line_no));
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections.count(section)) {
        throw ConfigError("unknown section '" + section + "' on line " + std::to_string(line_no));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected 'key = value' on line " + std::to_string(line_no));
    }
    if (section.empty()) {
      throw ConfigError("key outside of any section on line " + std::to_string(line_no));
    }
    const std::string key = section + "." + detail::trim(std::string_view(line).substr(0, eq));
    if (!detail::known_keys().count(key)) {
      throw ConfigError("unknown key '" + key + "' on line " + std::to_string(line_no));
    }
    if (entries.count(key)) {
      throw ConfigError("duplicate key '" + key + "' on line " + std::to_string(line_no));
    }
    entries[key] = {detail::trim(std::string_view(line).substr(eq + 1)), line_no};
  }

  const detail::ConfigReader r(std::move(entries));
  for (const char *key : {"potential.name", "dynamics.variant", "dynamics.epsilon", "dynamics.delta", "run.T",
                          "run.seed"}) {
    r.require(key);
  }

  RunConfig c;
  r.text("potential.name", c.potential.name);
  if (c.potential.name != "double_well" && c.potential.name != "mixture" && c.potential.name != "lennard_jones") {
    r.type_error("potential.name", "one of double_well | mixture | lennard_jones");
  }
  r.number("potential.mx", c.potential.mixture.m_x);
  r.number("potential.my", c.potential.mixture.m_y);
  r.number("potential.sx", c.potential.mixture.s_x);
  r.number("potential.sy", c.potential.mixture.s_y);
  r.optional_number("potential.L", c.potential.mixture.L);
  r.integer("potential.n_particles", c.potential.n_particles);

  auto &d = c.dynamics;
  r.choice("dynamics.variant", d.variant,
           {DriftKind::langevin, DriftKind::isd, DriftKind::isd_regularized, DriftKind::gad,
            DriftKind::gad_two_vector});
  r.boolean("dynamics.switching", d.switching);
  r.integer("dynamics.initial_mode", d.initial_mode);
  r.number("dynamics.epsilon", d.epsilon);
  r.number("dynamics.epsilon_prime", d.epsilon_prime);
  r.number("dynamics.eta", d.eta);
  r.number("dynamics.nu", d.nu);
  r.number("dynamics.delta", d.delta);
  r.choice("dynamics.regularizer", d.regularizer.kind,
           {RegularizerSpec::Kind::none, RegularizerSpec::Kind::step, RegularizerSpec::Kind::linear});
  r.number("dynamics.r_star", d.regularizer.r_star);
  r.optional_number("dynamics.guard_radius", d.guard_radius);
  r.choice("dynamics.guard_mode", d.guard_mode, {GuardMode::revert_to_langevin, GuardMode::force_mode_zero});
  r.number("dynamics.divergence_ceiling", d.divergence_ceiling);

  r.number("run.T", c.horizon);
  r.integer("run.stride", c.stride);
  r.numbers("run.x0", c.x0);
  r.numbers("run.v0", c.v0);
  r.integer("run.seed", c.seed);
  r.text("run.out", c.out);
  r.integer("run.workers", c.workers);

  auto &e = c.experiment;
  r.choice("experiment.kind", e.kind,
           {ExperimentKind::hitting_time, ExperimentKind::failure_probability, ExperimentKind::transition_time,
            ExperimentKind::visit_all_minima, ExperimentKind::histogram});
  r.numbers("experiment.target", e.target);
  r.number("experiment.radius", e.radius);
  r.optional_number("experiment.energy_below", e.energy_below);
  r.number("experiment.t_max", e.t_max);
  r.integer("experiment.n_trials", e.n_trials);
  r.number("experiment.quench_period", e.quench_period);
  r.integer("experiment.bins", e.bins);
  r.optional_number("experiment.burn_in", e.burn_in);

  r.numbers("sweep.nu", c.sweep.nu);
  r.numbers("sweep.epsilon", c.sweep.epsilon);
  if (r.has("sweep.regularizer")) {
    for (const auto &item : r.items("sweep.regularizer")) {
      RegularizerSpec s = d.regularizer;
      if (item == "none") {
        s.kind = RegularizerSpec::Kind::none;
      } else if (item == "step") {
        s.kind = RegularizerSpec::Kind::step;
      } else if (item == "linear") {
        s.kind = RegularizerSpec::Kind::linear;
      } else {
        r.type_error("sweep.regularizer", "a list of none | step | linear");
      }
      c.sweep.regularizer.push_back(s);
    }
  }

  // Constraints.
  const auto &mx = c.potential.mixture;
  if (!(mx.s_x > 0.0)) r.violation("potential.sx", "must be > 0");
  if (!(mx.s_y > 0.0)) r.violation("potential.sy", "must be > 0");
  if (mx.L && !(*mx.L > 0.0)) r.violation("potential.L", "must be > 0");
  if (c.potential.n_particles < 2) r.violation("potential.n_particles", "must be >= 2");
  if (!(d.epsilon >= 0.0)) r.violation("dynamics.epsilon", "(ε) must be >= 0");
  if (!(d.epsilon_prime >= 0.0)) r.violation("dynamics.epsilon_prime", "(ε') must be >= 0");
  if (!(d.eta > 0.0)) r.violation("dynamics.eta", "(η) must be > 0");
  if (!(d.nu >= 0.0)) r.violation("dynamics.nu", "(ν) must be >= 0");
  if (!(d.delta > 0.0)) r.violation("dynamics.delta", "(δ) must be > 0");
  if (d.initial_mode != 0 && d.initial_mode != 1) r.violation("dynamics.initial_mode", "must be 0 or 1");
  if (d.regularizer.kind != RegularizerSpec::Kind::none && !(d.regularizer.r_star > 0.0)) {
    r.violation("dynamics.r_star", "must be > 0");
  }
  if (d.guard_radius && !(*d.guard_radius > 0.0)) r.violation("dynamics.guard_radius", "must be > 0");
  if (!(d.divergence_ceiling > 0.0)) r.violation("dynamics.divergence_ceiling", "must be > 0");
  if (d.variant == DriftKind::gad_two_vector && d.epsilon_prime > 0.0) {
    r.violation("dynamics.epsilon_prime", "must be 0 for the two-vector GAD");
  }
  if (!(c.horizon > 0.0)) r.violation("run.T", "must be > 0");
  if (c.stride < 1) r.violation("run.stride", "must be >= 1");
  if (!(e.radius > 0.0)) r.violation("experiment.radius", "must be > 0");
  if (!(e.t_max > 0.0)) r.violation("experiment.t_max", "must be > 0");
  if (e.n_trials < 1) r.violation("experiment.n_trials", "must be >= 1");
  if (!(e.quench_period > 0.0)) r.violation("experiment.quench_period", "must be > 0");
  if (e.bins < 1) r.violation("experiment.bins", "must be >= 1");
  if (e.burn_in && !(*e.burn_in >= 0.0)) r.violation("experiment.burn_in", "must be >= 0");
  for (double v : c.sweep.nu) {
    if (!(v >= 0.0)) r.violation("sweep.nu", "entries must be >= 0");
  }
  for (double v : c.sweep.epsilon) {
    if (!(v >= 0.0)) r.violation("sweep.epsilon", "entries must be >= 0");
  }
  return c;
}

// Full configuration text; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const RunConfig &c) {
  std::ostringstream o;
  auto num = [](double v) { return format_double(v); };
  auto list = [&](const std::vector<double> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
    return s;
  };
  const auto &m = c.potential.mixture;
  o << "[potential]\n";
  o << "name = " << c.potential.name << "\n";
  o << "mx = " << num(m.m_x) << "\nmy = " << num(m.m_y) << "\nsx = " << num(m.s_x) << "\nsy = " << num(m.s_y)
    << "\n";
  if (m.L) o << "L = " << num(*m.L) << "\n";
  o << "n_particles = " << c.potential.n_particles << "\n";

  const auto &d = c.dynamics;
  o << "\n[dynamics]\n";
  o << "variant = " << to_string(d.variant) << "\n";
  o << "switching = " << (d.switching ? "true" : "false") << "\n";
  o << "initial_mode = " << d.initial_mode << "\n";
  o << "epsilon = " << num(d.epsilon) << "\nepsilon_prime = " << num(d.epsilon_prime) << "\neta = " << num(d.eta)
    << "\nnu = " << num(d.nu) << "\ndelta = " << num(d.delta) << "\n";
  o << "regularizer = " << to_string(d.regularizer.kind) << "\nr_star = " << num(d.regularizer.r_star) << "\n";
  if (d.guard_radius) o << "guard_radius = " << num(*d.guard_radius) << "\n";
  o << "guard_mode = " << to_string(d.guard_mode) << "\n";
  o << "divergence_ceiling = " << num(d.divergence_ceiling) << "\n";

  o << "\n[run]\n";
  o << "T = " << num(c.horizon) << "\nstride = " << c.stride << "\n";
  if (!c.x0.empty()) o << "x0 = " << list(c.x0) << "\n";
  if (!c.v0.empty()) o << "v0 = " << list(c.v0) << "\n";
  o << "seed = " << c.seed << "\nout = " << c.out << "\nworkers = " << c.workers << "\n";

  const auto &e = c.experiment;
  o << "\n[experiment]\n";
  o << "kind = " << to_string(e.kind) << "\n";
  if (!e.target.empty()) o << "target = " << list(e.target) << "\n";
  o << "radius = " << num(e.radius) << "\n";
  if (e.energy_below) o << "energy_below = " << num(*e.energy_below) << "\n";
  o << "t_max = " << num(e.t_max) << "\nn_trials = " << e.n_trials << "\nquench_period = " << num(e.quench_period)
    << "\nbins = " << e.bins << "\n";
  if (e.burn_in) o << "burn_in = " << num(*e.burn_in) << "\n";

  if (!c.sweep.empty()) {
    o << "\n[sweep]\n";
    if (!c.sweep.nu.empty()) o << "nu = " << list(c.sweep.nu) << "\n";
    if (!c.sweep.epsilon.empty()) o << "epsilon = " << list(c.sweep.epsilon) << "\n";
    if (!c.sweep.regularizer.empty()) {
      o << "regularizer = ";
      for (std::size_t i = 0; i < c.sweep.regularizer.size(); ++i) {
        o << (i ? ", " : "") << to_string(c.sweep.regularizer[i].kind);
      }
      o << "\n";
    }
  }
  return o.str();
}

} // namespace switchdyn

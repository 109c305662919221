#pragma once

// The command-line subcommands as plain functions returning exit codes.
//
// Exit codes: 0 success, 1 check failure, 2 divergence, 3 I/O error, 4 invalid configuration.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "switchdyn/checks.hpp"
#include "switchdyn/config.hpp"
#include "switchdyn/experiments.hpp"
#include "switchdyn/integrator.hpp"
#include "switchdyn/report_io.hpp"

namespace switchdyn {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitDiverged = 2, kExitIo = 3, kExitConfig = 4 };

// Companion JSON path of a CSV output: same stem, .json extension.
inline std::filesystem::path summary_path(const std::string &csv_path) {
  return std::filesystem::path(csv_path).replace_extension(".json");
}

namespace detail {

inline std::optional<std::ofstream> open_output(const std::filesystem::path &path, std::ostream &err) {
  std::ofstream f(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!f) {
    err << "error: cannot write '" << path.string() << "'\n";
    return std::nullopt;
  }
  return f;
}

inline std::optional<Vector> optional_vector(const std::vector<double> &v) {
  if (v.empty()) return std::nullopt;
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline HittingExperiment hitting_setup(const RunConfig &c, const Potential &potential) {
  HittingExperiment exp;
  exp.x0 = start_point(c);
  exp.v0 = optional_vector(c.v0);
  exp.t_max = c.experiment.t_max;
  exp.n_trials = static_cast<std::size_t>(c.experiment.n_trials);
  const auto &e = c.experiment;
  if (e.kind == ExperimentKind::visit_all_minima) {
    if (c.potential.name != "lennard_jones" || c.potential.n_particles != 7) {
      throw ConfigError("visit_all_minima needs the seven-particle Lennard-Jones catalog");
    }
    exp.predicate = AllMinimaVisited{lj7_catalog(), e.quench_period, QuenchOptions{0.01, 1e-4, 20000, 0.1}};
  } else if (e.energy_below) {
    exp.predicate = EnergyBelow{*e.energy_below};
  } else {
    Vector centre = e.target.empty() ? Vector(Vector::Zero(potential.dimension())) : *optional_vector(e.target);
    if (centre.size() != potential.dimension()) throw ConfigError("experiment.target has the wrong dimension");
    exp.predicate = BallTarget{centre, e.radius};
  }
  return exp;
}

inline bool write_json(const std::filesystem::path &path, const nlohmann::json &j, std::ostream &err) {
  auto f = open_output(path, err);
  if (!f) return false;
  *f << j.dump(2) << '\n';
  return static_cast<bool>(*f);
}

} // namespace detail

// Trajectory CSV (t,x0..x{d-1},energy,mode), one row per `stride` steps. Exit 2 if the run diverged.
inline int cmd_simulate(const RunConfig &c, std::ostream &log = std::cout, std::ostream &err = std::cerr) {
  const Potential potential = make_potential(c.potential);
  auto f = detail::open_output(c.out, err);
  if (!f) return kExitIo;
  TrajectoryCsvWriter writer(*f, potential.dimension());
  RngStream rng(c.seed, 0);
  SimulateOptions opts;
  opts.horizon = c.horizon;
  opts.stride = c.stride;
  opts.observer = [&](const ObservedPoint &p) { writer(p); };
  const SimResult r = simulate(c.dynamics, potential, start_point(c), detail::optional_vector(c.v0), opts, rng);
  f->flush();
  if (!*f) {
    err << "error: failed writing '" << c.out << "'\n";
    return kExitIo;
  }
  log << "simulate: " << writer.rows() << " rows, " << r.switches << " switches, status " << to_string(r.status)
      << " -> " << c.out << '\n';
  if (r.status == SimStatus::diverged || r.status == SimStatus::evaluation_error) {
    err << "trajectory " << to_string(r.status) << " at t=" << r.state.t << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

// Occupation histogram CSV (ix,iy,x_center,y_center,mass); burn-in defaults to 10% of T.
inline int cmd_histogram(const RunConfig &c, std::ostream &log = std::cout, std::ostream &err = std::cerr) {
  const Potential potential = make_potential(c.potential);
  RngStream rng(c.seed, 0);
  const double burn_in = c.experiment.burn_in.value_or(0.1 * c.horizon);
  const Histogram2D h =
      invariant_histogram(c.dynamics, potential, start_point(c), c.horizon, burn_in, c.experiment.bins, rng);
  auto f = detail::open_output(c.out, err);
  if (!f) return kExitIo;
  write_histogram_csv(*f, h);
  if (!*f) return kExitIo;
  log << "histogram: " << h.bins << "x" << h.bins << " bins -> " << c.out << '\n';
  return kExitOk;
}

// One experiment: trial CSV at run.out and a JSON summary next to it.
inline int cmd_experiment(const RunConfig &c, std::ostream &log = std::cout, std::ostream &err = std::cerr) {
  if (c.experiment.kind == ExperimentKind::histogram) return cmd_histogram(c, log, err);
  const Potential potential = make_potential(c.potential);
  const HittingExperiment exp = detail::hitting_setup(c, potential);
  ExperimentReport rep = failure_probability(c.dynamics, potential, exp, c.seed, c.workers);
  rep.label = std::string(to_string(c.experiment.kind));
  rep.config_echo = serialize_config(c);

  auto f = detail::open_output(c.out, err);
  if (!f) return kExitIo;
  write_trials_csv(*f, rep);
  if (!*f) return kExitIo;
  if (!detail::write_json(summary_path(c.out), report_summary(rep), err)) return kExitIo;
  log << "experiment " << rep.label << ": " << rep.trials.size() << " trials, failure_rate " << rep.failure_rate
      << ", mean " << rep.mean << " +- " << rep.std_error << " -> " << c.out << '\n';
  return kExitOk;
}

// Grid from the [sweep] section: trial CSV with a leading point column, and a JSON array of summaries.
inline int cmd_sweep(const RunConfig &c, std::ostream &log = std::cout, std::ostream &err = std::cerr) {
  if (c.sweep.empty()) throw ConfigError("sweep needs at least one of sweep.nu, sweep.epsilon, sweep.regularizer");
  const Potential potential = make_potential(c.potential);
  const HittingExperiment exp = detail::hitting_setup(c, potential);
  const SweepGrid grid{c.sweep.nu, c.sweep.epsilon, c.sweep.regularizer};
  const auto points = grid.expand(c.dynamics);
  const auto reports = sweep(points, potential, exp, c.seed, c.workers);

  auto f = detail::open_output(c.out, err);
  if (!f) return kExitIo;
  nlohmann::json summaries = nlohmann::json::array();
  for (std::size_t p = 0; p < reports.size(); ++p) {
    write_trials_csv(*f, reports[p], true, p, p == 0);
    auto s = report_summary(reports[p]);
    s["point"] = p;
    summaries.push_back(std::move(s));
    log << "point " << p << " [" << reports[p].label << "]: failure_rate " << reports[p].failure_rate << ", mean "
        << reports[p].mean << " +- " << reports[p].std_error << '\n';
  }
  if (!*f) return kExitIo;
  nlohmann::json doc;
  doc["config"] = serialize_config(c);
  doc["points"] = std::move(summaries);
  if (!detail::write_json(summary_path(c.out), doc, err)) return kExitIo;
  return kExitOk;
}

// Self-checks on a potential; prints one PASS/FAIL line per check.
inline int cmd_check(const Potential &potential, std::uint64_t seed, std::ostream &log = std::cout) {
  const auto results = run_checks(potential, seed);
  bool ok = true;
  for (const auto &r : results) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << "  worst=" << r.worst << " limit=" << r.limit << '\n';
    ok = ok && r.passed;
  }
  log << (ok ? "all checks passed" : "some checks failed") << " for " << potential.name() << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

} // namespace switchdyn

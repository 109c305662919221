#pragma once

// Measurement protocols: hitting times, failure probabilities, minima cataloguing and visit times,
// occupation histograms and parameter sweeps.
//
// Every Monte Carlo trial owns an RngStream derived from (master seed, stream index), so reports do not
// depend on the number of worker threads or on scheduling order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "switchdyn/dynamics.hpp"
#include "switchdyn/errors.hpp"
#include "switchdyn/integrator.hpp"
#include "switchdyn/landscape.hpp"
#include "switchdyn/rng.hpp"

namespace switchdyn {

// ---------------------------------------------------------------------------------------------------------------
// Quench and minima catalog

struct QuenchOptions {
  double step = 1e-3;
  double tol = 1e-6; // Stop once |grad U| < tol.
  std::int64_t max_iters = 100000;
  double max_move = 0.1; // Cap on the largest coordinate change of a single step.
};

struct QuenchResult {
  Vector x;
  double energy = 0.0;
  bool converged = false;
  std::int64_t iterations = 0;
};

// Gradient descent to the local minimum of the basin containing x0.
//
// The step is halved whenever a trial step would raise the energy, so the energy sequence is non-increasing.
inline QuenchResult quench(const Potential &potential, const Vector &x0, const QuenchOptions &options = {}) {
  if (!(options.step > 0.0)) {
    throw ContractError("quench step must be positive");
  }
  const DomainGeometry geo = potential.geometry();
  QuenchResult r;
  r.x = wrap_to_domain(x0, geo);
  r.energy = potential.energy(r.x);
  double step = options.step;
  Vector g = potential.gradient(r.x);
  for (r.iterations = 0; r.iterations < options.max_iters; ++r.iterations) {
    if (g.norm() < options.tol) {
      r.converged = true;
      break;
    }
    const double largest = g.cwiseAbs().maxCoeff();
    for (;;) {
      const double h = std::min(step, options.max_move / largest);
      Vector trial = wrap_to_domain(r.x - h * g, geo);
      double e = std::numeric_limits<double>::infinity();
      try {
        e = potential.energy(trial);
      } catch (const EvaluationError &) {
      }
      if (e <= r.energy) {
        r.x = std::move(trial);
        r.energy = e;
        break;
      }
      step *= 0.5;
      if (step < 1e-300) {
        return r; // cannot make progress; flagged as not converged
      }
    }
    g = potential.gradient(r.x);
  }
  if (!r.converged && g.norm() < options.tol) {
    r.converged = true;
  }
  return r;
}

struct MinimaCatalog {
  std::vector<double> energies; // Strictly increasing.
  std::vector<std::optional<Vector>> configurations;
  double match_tolerance = 0.01;

  std::size_t size() const noexcept { return energies.size(); }

  void validate() const {
    if (energies.empty()) {
      throw ParameterError("minima catalog is empty");
    }
    if (!(match_tolerance > 0.0)) {
      throw ParameterError("catalog match tolerance must be positive");
    }
    for (std::size_t i = 1; i < energies.size(); ++i) {
      if (!(energies[i] > energies[i - 1])) {
        throw ParameterError("catalog energies must be strictly increasing");
      }
      if (!(energies[i] - energies[i - 1] > match_tolerance)) {
        throw ParameterError("catalog tolerance must be below the smallest energy separation");
      }
    }
    if (!configurations.empty() && configurations.size() != energies.size()) {
      throw ParameterError("catalog configurations must match the energy list");
    }
  }
};

// Index of the unique catalog entry within tolerance of `energy`, or nullopt.
inline std::optional<std::size_t> match_minimum(const MinimaCatalog &catalog, double energy) {
  std::optional<std::size_t> hit;
  for (std::size_t i = 0; i < catalog.energies.size(); ++i) {
    if (std::abs(catalog.energies[i] - energy) <= catalog.match_tolerance) {
      if (hit) {
        throw AmbiguityError("energy " + std::to_string(energy) + " matches several catalog entries");
      }
      hit = i;
    }
  }
  return hit;
}

// Centred local minimizers of the seven-particle planar cluster, ordered by energy. Obtained by quenching from
// random compact starts; tests/test_experiments.cpp re-derives the four levels.
inline Vector lj7_minimum(std::size_t index) {
  static const double coords[4][14] = {
      {0.0, 0.0, -0.95516761482, 0.581900109347, -0.0263564737313, -1.11814947383, 0.981524091188, 0.53624936595,
       -0.981524091352, -0.53624936604, 0.955167614979, -0.581900109444, 0.0263564737354, 1.11814947402},
      {0.261322106955, -1.08949517743, -0.380297158774, -0.17309283879, 0.0823527856698, 0.842927520155,
       -0.857632485111, -1.17993935908, 0.730905486984, -0.0737657916169, -1.03322052586, 0.730024109397,
       1.19656979013, 0.943341537366},
      {0.238797304916, 0.973210021911, -0.707605682521, 0.375893162953, -0.653402398146, -0.748262069305,
       1.26013612657, -0.673975186024, -1.64692538561, -0.231436822888, 0.280184869192, -0.143830248498,
       1.2288151656, 0.448401141852},
      {-0.549127207745, 0.428901154677, 0.0381910789881, -1.72628561044, 0.534468045319, 0.144836878528,
       -0.257437464675, -0.647474202228, 0.244247927183, 1.22295186146, -0.838647057931, 1.50936797354,
       0.82830467886, -0.932298055537}};
  if (index >= 4) throw ContractError("the planar LJ7 cluster has four minima");
  return Eigen::Map<const Vector>(coords[index], 14);
}

// Catalog of the four minima of the planar LJ7 cluster (ascending energy).
inline MinimaCatalog lj7_catalog(double tolerance = 0.01) {
  MinimaCatalog c;
  c.energies = {-12.5348665, -11.5012911, -11.4769070, -11.4034186};
  for (std::size_t i = 0; i < 4; ++i) c.configurations.emplace_back(lj7_minimum(i));
  c.match_tolerance = tolerance;
  return c;
}

// Group sorted energies into levels separated by more than `gap`; returns the mean of each level.
inline std::vector<double> distinct_levels(std::vector<double> energies, double gap) {
  std::sort(energies.begin(), energies.end());
  std::vector<double> levels;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= energies.size(); ++i) {
    if (i == energies.size() || energies[i] - energies[i - 1] > gap) {
      double sum = 0.0;
      for (std::size_t j = start; j < i; ++j) sum += energies[j];
      if (i > start) levels.push_back(sum / static_cast<double>(i - start));
      start = i;
    }
  }
  return levels;
}

// ---------------------------------------------------------------------------------------------------------------
// Stop predicates and hitting times

struct BallTarget {
  Vector center;
  double radius = 0.1;
};

struct EnergyBelow {
  double threshold = 0.0;
};

struct AllMinimaVisited {
  MinimaCatalog catalog;
  double quench_period = 0.5;
  QuenchOptions quench;
};

using StopPredicate = std::variant<BallTarget, EnergyBelow, AllMinimaVisited>;

enum class OutcomeKind { hit, timeout, diverged, evaluation_error };

inline std::string_view to_string(OutcomeKind k) {
  switch (k) {
  case OutcomeKind::hit:
    return "hit";
  case OutcomeKind::timeout:
    return "timeout";
  case OutcomeKind::diverged:
    return "diverged";
  case OutcomeKind::evaluation_error:
    return "evaluation_error";
  }
  return "?";
}

struct HitResult {
  OutcomeKind kind = OutcomeKind::timeout;
  double time = std::numeric_limits<double>::quiet_NaN(); // First hitting time, or the time the run ended.
  std::int64_t quench_checks = 0;
  std::int64_t unmatched_quenches = 0;

  bool success() const noexcept { return kind == OutcomeKind::hit; }
};

namespace detail {

inline std::int64_t quench_stride(double period, double delta) {
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(period / delta)));
}

} // namespace detail

// First time the predicate holds, checked after every grid step (and at t = 0).
//
// For AllMinimaVisited, the current point is quenched every quench_period of simulated time and matched
// against the catalog; the hitting time is the first check at which every entry has been matched.
inline HitResult hitting_time(const DynamicsConfig &config, const Potential &potential, const SimState &start,
                              const StopPredicate &predicate, double t_max, RngStream &rng) {
  if (!(t_max > 0.0)) {
    throw ContractError("t_max must be positive");
  }
  const DomainGeometry geo = potential.geometry();
  SimulateOptions opts;
  opts.horizon = t_max;
  HitResult out;

  std::vector<bool> visited;
  std::size_t n_visited = 0;
  if (const auto *ball = std::get_if<BallTarget>(&predicate)) {
    if (!(ball->radius > 0.0)) throw ContractError("ball radius must be positive");
    if (ball->center.size() != potential.dimension()) throw ContractError("ball centre has the wrong dimension");
    opts.stop = [&, ball](const SimState &s) { return displacement(s.x, ball->center, geo).norm() < ball->radius; };
  } else if (const auto *below = std::get_if<EnergyBelow>(&predicate)) {
    opts.stop = [&, below](const SimState &s) { return potential.energy(s.x) < below->threshold; };
  } else {
    const auto &all = std::get<AllMinimaVisited>(predicate);
    all.catalog.validate();
    if (!(all.quench_period > 0.0)) throw ContractError("quench period must be positive");
    visited.assign(all.catalog.size(), false);
    const std::int64_t every = detail::quench_stride(all.quench_period, config.delta);
    opts.on_step = [&, every](const SimState &s, std::int64_t n) {
      if (n % every != 0) return false;
      ++out.quench_checks;
      const QuenchResult q = quench(potential, s.x, all.quench);
      const auto idx = match_minimum(all.catalog, q.energy);
      if (!idx) {
        ++out.unmatched_quenches;
        return false;
      }
      if (!visited[*idx]) {
        visited[*idx] = true;
        ++n_visited;
      }
      return n_visited == visited.size();
    };
  }

  const SimResult r = simulate(config, potential, start, opts, rng);
  out.time = r.state.t;
  switch (r.status) {
  case SimStatus::stopped:
    out.kind = OutcomeKind::hit;
    break;
  case SimStatus::horizon:
    out.kind = OutcomeKind::timeout;
    break;
  case SimStatus::diverged:
    out.kind = OutcomeKind::diverged;
    break;
  case SimStatus::evaluation_error:
    out.kind = OutcomeKind::evaluation_error;
    break;
  }
  return out;
}

inline HitResult hitting_time(const DynamicsConfig &config, const Potential &potential, const Vector &x0,
                              const StopPredicate &predicate, double t_max, RngStream &rng,
                              const std::optional<Vector> &v0 = std::nullopt) {
  return hitting_time(config, potential, initial_state(config, potential, x0, rng, v0), predicate, t_max, rng);
}

// ---------------------------------------------------------------------------------------------------------------
// Reports and the trial runner

struct TrialRecord {
  std::uint64_t trial_index = 0;
  std::uint64_t stream_index = 0;
  std::uint64_t seed = 0; // Engine seed derived from (master seed, stream index).
  HitResult result;
};

struct ExperimentReport {
  std::string label;
  std::uint64_t master_seed = 0;
  std::vector<TrialRecord> trials;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double failure_rate = 0.0;
  std::size_t failures = 0;
  std::size_t successes = 0;
  std::string config_echo; // Serialized configuration that produced the report.

  // Recompute mean / standard error / failure rate from the trial list.
  void summarize() {
    successes = 0;
    double sum = 0.0;
    for (const auto &t : trials) {
      if (t.result.success()) {
        ++successes;
        sum += t.result.time;
      }
    }
    failures = trials.size() - successes;
    failure_rate = trials.empty() ? 0.0 : static_cast<double>(failures) / static_cast<double>(trials.size());
    mean = successes ? sum / static_cast<double>(successes) : std::numeric_limits<double>::quiet_NaN();
    if (successes >= 2) {
      double ss = 0.0;
      for (const auto &t : trials) {
        if (t.result.success()) ss += (t.result.time - mean) * (t.result.time - mean);
      }
      std_error = std::sqrt(ss / static_cast<double>(successes - 1) / static_cast<double>(successes));
    } else {
      std_error = std::numeric_limits<double>::quiet_NaN();
    }
  }
};

// Worker count used when the caller asks for 0 (= automatic).
inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Run job(i) for i in [0, n) on up to `workers` threads; results land at their index.
//
// The first exception thrown by any job is rethrown after all threads have joined.
template <typename Result, typename Job>
std::vector<Result> run_parallel(std::size_t n, unsigned workers, Job &&job) {
  std::vector<Result> results(n);
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

// A Monte Carlo hitting-time experiment: n_trials independent runs from x0 until the predicate holds.
struct HittingExperiment {
  Vector x0;
  std::optional<Vector> v0;
  StopPredicate predicate;
  double t_max = 100.0;
  std::size_t n_trials = 100;
};

// Stream index of trial `trial` at sweep point `point`.
constexpr std::uint64_t stream_for(std::uint64_t point, std::uint64_t trial) noexcept {
  return (point << 32) | trial;
}

namespace detail {

inline TrialRecord run_trial(const DynamicsConfig &config, const Potential &potential, const HittingExperiment &exp,
                             std::uint64_t seed, std::uint64_t point, std::uint64_t trial) {
  RngStream rng(seed, stream_for(point, trial));
  TrialRecord rec;
  rec.trial_index = trial;
  rec.stream_index = rng.stream_index();
  rec.seed = rng.engine_seed();
  rec.result = hitting_time(config, potential, exp.x0, exp.predicate, exp.t_max, rng, exp.v0);
  return rec;
}

} // namespace detail

// Monte Carlo estimate of the hitting time and of the probability of failing to hit (timeout or divergence).
inline ExperimentReport failure_probability(const DynamicsConfig &config, const Potential &potential,
                                            const HittingExperiment &exp, std::uint64_t seed, unsigned workers = 0) {
  if (exp.n_trials < 1) throw ContractError("n_trials must be at least 1");
  config.validate();
  ExperimentReport rep;
  rep.master_seed = seed;
  rep.trials = run_parallel<TrialRecord>(exp.n_trials, workers, [&](std::size_t i) {
    return detail::run_trial(config, potential, exp, seed, 0, i);
  });
  rep.summarize();
  return rep;
}

// Time to enter a ball around a target (typically another minimum).
inline ExperimentReport transition_time(const DynamicsConfig &config, const Potential &potential, const Vector &x0,
                                        const BallTarget &target, double t_max, std::size_t n_trials,
                                        std::uint64_t seed, unsigned workers = 0) {
  return failure_probability(config, potential, HittingExperiment{x0, std::nullopt, target, t_max, n_trials}, seed,
                             workers);
}

// Time until every catalog minimum has been identified by quench-matching along the trajectory.
inline ExperimentReport visit_all_minima_time(const DynamicsConfig &config, const Potential &potential,
                                              const Vector &x0, const MinimaCatalog &catalog, double quench_period,
                                              double t_max, std::size_t n_trials, std::uint64_t seed,
                                              unsigned workers = 0, const QuenchOptions &quench_options = {}) {
  return failure_probability(
      config, potential,
      HittingExperiment{x0, std::nullopt, AllMinimaVisited{catalog, quench_period, quench_options}, t_max, n_trials},
      seed, workers);
}

// ---------------------------------------------------------------------------------------------------------------
// Sweeps

struct SweepPoint {
  std::string label;
  DynamicsConfig config;
};

// Cartesian grid over switching rate, temperature and regularizer; an empty axis keeps the base value.
struct SweepGrid {
  std::vector<double> nu;
  std::vector<double> epsilon;
  std::vector<RegularizerSpec> regularizer;

  std::vector<SweepPoint> expand(const DynamicsConfig &base) const {
    std::vector<SweepPoint> out;
    const std::size_t nr = std::max<std::size_t>(1, regularizer.size());
    const std::size_t ne = std::max<std::size_t>(1, epsilon.size());
    const std::size_t nn = std::max<std::size_t>(1, nu.size());
    for (std::size_t r = 0; r < nr; ++r) {
      for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t k = 0; k < nn; ++k) {
          SweepPoint p{"", base};
          std::string label;
          auto append = [&](const std::string &part) { label += (label.empty() ? "" : ",") + part; };
          if (!regularizer.empty()) {
            p.config.regularizer = regularizer[r];
            append("regularizer=" + std::string(to_string(regularizer[r].kind)));
          }
          if (!epsilon.empty()) {
            p.config.epsilon = epsilon[e];
            append("epsilon=" + format_number(epsilon[e]));
          }
          if (!nu.empty()) {
            p.config.nu = nu[k];
            append("nu=" + format_number(nu[k]));
          }
          p.label = label.empty() ? "base" : label;
          out.push_back(std::move(p));
        }
      }
    }
    return out;
  }

  static std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }
};

// One report per sweep point. All trials of the sweep share a single worker pool; trial j of point p
// draws from stream (p << 32) | j.
inline std::vector<ExperimentReport> sweep(const std::vector<SweepPoint> &points, const Potential &potential,
                                           const HittingExperiment &exp, std::uint64_t seed, unsigned workers = 0) {
  if (points.empty()) throw ContractError("sweep grid is empty");
  if (exp.n_trials < 1) throw ContractError("n_trials must be at least 1");
  for (const auto &p : points) p.config.validate();
  const std::size_t per = exp.n_trials;
  auto flat = run_parallel<TrialRecord>(points.size() * per, workers, [&](std::size_t i) {
    return detail::run_trial(points[i / per].config, potential, exp, seed, i / per, i % per);
  });
  std::vector<ExperimentReport> reports(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    reports[p].label = points[p].label;
    reports[p].master_seed = seed;
    reports[p].trials.assign(flat.begin() + static_cast<std::ptrdiff_t>(p * per),
                             flat.begin() + static_cast<std::ptrdiff_t>((p + 1) * per));
    reports[p].summarize();
  }
  return reports;
}

// ---------------------------------------------------------------------------------------------------------------
// Occupation histograms on the torus

struct Histogram2D {
  int bins = 0;
  double period = 0.0;
  std::vector<double> masses; // Row-major, masses[iy * bins + ix].

  double &at(int ix, int iy) { return masses[static_cast<std::size_t>(iy) * bins + ix]; }
  double at(int ix, int iy) const { return masses[static_cast<std::size_t>(iy) * bins + ix]; }
  double bin_width() const { return period / bins; }
  double center(int i) const { return (i + 0.5) * bin_width(); }

  double total() const {
    double s = 0.0;
    for (double m : masses) s += m;
    return s;
  }
};

inline double total_variation(const Histogram2D &a, const Histogram2D &b) {
  if (a.masses.size() != b.masses.size()) throw ContractError("histograms have different shapes");
  double s = 0.0;
  for (std::size_t i = 0; i < a.masses.size(); ++i) s += std::abs(a.masses[i] - b.masses[i]);
  return 0.5 * s;
}

namespace detail {

inline void require_planar_torus(const Potential &potential) {
  if (!potential.geometry().is_torus()) {
    throw ContractError("occupation histograms need a torus domain (bounded support)");
  }
  if (potential.dimension() != 2) {
    throw ContractError("occupation histograms are two-dimensional");
  }
}

inline int bin_of(double coord, int bins, double period) {
  const int i = static_cast<int>(coord / period * bins);
  return std::clamp(i, 0, bins - 1);
}

// Raw occupation counts of one trajectory over grid times t > burn_in.
inline std::vector<double> occupation_counts(const DynamicsConfig &config, const Potential &potential,
                                             const SimState &start, double horizon, double burn_in, int bins,
                                             RngStream &rng) {
  std::vector<double> counts(static_cast<std::size_t>(bins) * bins, 0.0);
  const double period = potential.geometry().period;
  SimulateOptions opts;
  opts.horizon = horizon;
  opts.on_step = [&](const SimState &s, std::int64_t) {
    if (s.t > burn_in) {
      counts[static_cast<std::size_t>(bin_of(s.x[1], bins, period)) * bins + bin_of(s.x[0], bins, period)] += 1.0;
    }
    return false;
  };
  simulate(config, potential, start, opts, rng);
  return counts;
}

inline Histogram2D normalized(std::vector<double> counts, int bins, double period) {
  double total = 0.0;
  for (double c : counts) total += c;
  if (!(total > 0.0)) throw ContractError("histogram window is empty (burn_in >= T?)");
  for (double &c : counts) c /= total;
  return {bins, period, std::move(counts)};
}

} // namespace detail

// Normalized occupation histogram of one trajectory over (burn_in, T], on a bins x bins grid of the torus.
inline Histogram2D invariant_histogram(const DynamicsConfig &config, const Potential &potential, const Vector &x0,
                                       double horizon, double burn_in, int bins, RngStream &rng) {
  detail::require_planar_torus(potential);
  if (bins < 1) throw ContractError("bins must be positive");
  const SimState start = initial_state(config, potential, x0, rng);
  return detail::normalized(detail::occupation_counts(config, potential, start, horizon, burn_in, bins, rng), bins,
                            potential.geometry().period);
}

// Occupation histogram pooled over independent trajectories, one per starting point.
//
// Starting point i uses stream i of the master seed.
inline Histogram2D ensemble_histogram(const DynamicsConfig &config, const Potential &potential,
                                      const std::vector<Vector> &starts, double horizon, double burn_in, int bins,
                                      std::uint64_t seed, unsigned workers = 0) {
  detail::require_planar_torus(potential);
  if (bins < 1) throw ContractError("bins must be positive");
  if (starts.empty()) throw ContractError("ensemble needs at least one starting point");
  auto parts = run_parallel<std::vector<double>>(starts.size(), workers, [&](std::size_t i) {
    RngStream rng(seed, i);
    const SimState s = initial_state(config, potential, starts[i], rng);
    return detail::occupation_counts(config, potential, s, horizon, burn_in, bins, rng);
  });
  std::vector<double> total(static_cast<std::size_t>(bins) * bins, 0.0);
  for (const auto &p : parts) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }
  return detail::normalized(std::move(total), bins, potential.geometry().period);
}

// Mass of the bins whose centres lie within `radius` (torus distance) of `point`.
inline double mass_near(const Histogram2D &h, const Vector &point, double radius) {
  const DomainGeometry geo = DomainGeometry::torus(h.period);
  double m = 0.0;
  Vector c(2);
  for (int iy = 0; iy < h.bins; ++iy) {
    for (int ix = 0; ix < h.bins; ++ix) {
      c << h.center(ix), h.center(iy);
      if (displacement(c, point, geo).norm() <= radius) m += h.at(ix, iy);
    }
  }
  return m;
}

} // namespace switchdyn

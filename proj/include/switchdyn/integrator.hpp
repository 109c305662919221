#pragma once

// Euler-Maruyama integration of the switched diffusions.
//
// A trajectory lives on a fixed time grid of spacing delta. The Poisson clock driving the mode is simulated
// exactly: a grid step that straddles a switching event is split at the event time, so only the last
// sub-step before the event is shorter than delta.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "switchdyn/dynamics.hpp"
#include "switchdyn/errors.hpp"
#include "switchdyn/landscape.hpp"
#include "switchdyn/rng.hpp"
#include "switchdyn/spectral.hpp"

namespace switchdyn {

enum class GuardMode { revert_to_langevin, force_mode_zero };

inline std::string_view to_string(GuardMode g) {
  return g == GuardMode::revert_to_langevin ? "revert_to_langevin" : "force_mode_zero";
}

struct DynamicsConfig {
  DriftKind variant = DriftKind::isd;
  bool switching = false;   // Poisson mode switching at rate nu (ISP / GSP).
  int initial_mode = 1;     // Mode at t = 0; 0 selects gradient descent, 1 the saddle drift.
  double epsilon = 0.0;     // Temperature of the position noise.
  double epsilon_prime = 0.0; // Temperature of the direction noise (single-vector GAD only).
  double eta = 1.0;         // Relaxation time of the direction dynamics.
  double nu = 0.0;          // Switching rate.
  double delta = 1e-3;      // Time step.
  RegularizerSpec regularizer;
  std::optional<double> guard_radius;
  GuardMode guard_mode = GuardMode::revert_to_langevin;
  double divergence_ceiling = 1e6; // |x| beyond this (or a non-finite x) ends the trajectory.

  double effective_rate() const noexcept { return switching ? nu : 0.0; }

  void validate() const {
    auto fail = [](const std::string &msg) { throw ParameterError(msg); };
    if (!(delta > 0.0) || !std::isfinite(delta)) fail("delta must be positive");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) fail("epsilon must be non-negative");
    if (!(epsilon_prime >= 0.0) || !std::isfinite(epsilon_prime)) fail("epsilon_prime must be non-negative");
    if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be positive");
    if (!(nu >= 0.0) || !std::isfinite(nu)) fail("nu must be non-negative");
    if (initial_mode != 0 && initial_mode != 1) fail("initial_mode must be 0 or 1");
    if (guard_radius && !(*guard_radius > 0.0)) fail("guard_radius must be positive");
    if (!(divergence_ceiling > 0.0)) fail("divergence_ceiling must be positive");
    if (regularizer.kind != RegularizerSpec::Kind::none && !(regularizer.r_star > 0.0)) fail("r_star must be positive");
    if (variant == DriftKind::gad_two_vector && epsilon_prime > 0.0) {
      fail("epsilon_prime > 0 is not supported for the two-vector GAD");
    }
  }
};

struct SimState {
  double t = 0.0;
  Vector x;
  std::optional<Vector> v;
  std::optional<Vector> v2;
  int mode = 0;
  double next_switch = std::numeric_limits<double>::infinity();
};

// now + Exp(nu); +infinity when nu = 0.
inline double sample_switch_time(double nu, double now, RngStream &rng) { return now + rng.exponential(nu); }

// Uniformly distributed point on the unit sphere of R^d.
inline Vector random_unit_vector(int d, RngStream &rng) {
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) {
      v[i] = rng.gaussian();
    }
  } while (v.norm() == 0.0);
  return v / v.norm();
}

// State at t = 0.
//
// Direction vectors default to the lowest (and second lowest) Hessian eigenvectors at x0.
inline SimState initial_state(const DynamicsConfig &config, const Potential &potential, const Vector &x0,
                              RngStream &rng, const std::optional<Vector> &v0 = std::nullopt,
                              const std::optional<Vector> &v20 = std::nullopt) {
  config.validate();
  if (x0.size() != potential.dimension()) {
    throw InputError("initial point has the wrong dimension");
  }
  SimState s;
  s.x = wrap_to_domain(x0, potential.geometry());
  s.mode = config.initial_mode;
  if (uses_direction(config.variant)) {
    const int k = config.variant == DriftKind::gad_two_vector ? 2 : 1;
    std::optional<SpectralResult> eig;
    auto eigen = [&]() -> const SpectralResult & {
      if (!eig) eig = smallest_eigenpairs(potential.hessian(s.x), k);
      return *eig;
    };
    s.v = v0 ? *v0 : Vector(eigen().vector(0));
    if (!(std::abs(s.v->norm() - 1.0) <= kUnitTolerance)) {
      throw ContractError("initial direction must be a unit vector");
    }
    if (k == 2) {
      s.v2 = v20 ? *v20 : Vector(eigen().vector(1));
      if (!(std::abs(s.v2->norm() - 1.0) <= kUnitTolerance) ||
          !(std::abs(s.v->dot(*s.v2)) <= kOrthogonalityTolerance)) {
        throw ContractError("initial direction pair must be orthonormal");
      }
    }
  }
  s.next_switch = sample_switch_time(config.effective_rate(), 0.0, rng);
  return s;
}

namespace detail {

inline bool outside_guard(const SimState &s, const DynamicsConfig &c, const Potential &p) {
  return c.guard_radius && !p.geometry().is_torus() && s.x.norm() > *c.guard_radius;
}

} // namespace detail

// Stability guard.
//
// With force_mode_zero, a trajectory in mode 1 at |x| >= R is sent back to mode 0 and the switching clock is
// restarted. With revert_to_langevin the state is left alone (the drift selection in em_step handles it). The
// guard never acts on a torus.
inline SimState apply_guard(const SimState &state, const DynamicsConfig &config, const Potential &potential,
                            RngStream &rng) {
  if (!config.guard_radius || potential.geometry().is_torus() || config.guard_mode != GuardMode::force_mode_zero) {
    return state;
  }
  SimState out = state;
  if (out.mode == 1 && out.x.norm() >= *config.guard_radius) {
    out.mode = 0;
    out.next_switch = sample_switch_time(config.effective_rate(), out.t, rng);
  }
  return out;
}

// One Euler-Maruyama step of length h (which must not cross the next switching time).
//
//   x' = wrap(x + h H(x) + sqrt(2 eps h) G)
//   v' = normalize(v + h dv + (I - v v^T) sqrt(2 eps' h) G' - d eps' h v)
//
// For the two-vector dynamics, v2 is additionally Gram-Schmidt orthogonalized against v'.
inline SimState em_step(const SimState &state, const DynamicsConfig &config, const Potential &potential,
                        RngStream &rng, double h) {
  if (!(h > 0.0)) {
    throw ContractError("step length must be positive");
  }
  if (state.t + h > state.next_switch * (1.0 + 1e-12) + 1e-12) {
    throw ContractError("step crosses a switching time");
  }
  const int d = potential.dimension();
  const bool descent = state.mode == 0 || config.variant == DriftKind::langevin ||
                       (config.guard_mode == GuardMode::revert_to_langevin &&
                        detail::outside_guard(state, config, potential));

  SimState next = state;
  Vector drift;
  Vector dv, dv2;
  switch (config.variant) {
  case DriftKind::langevin:
    drift = drift_langevin(potential, state.x);
    break;
  case DriftKind::isd:
    drift = descent ? drift_langevin(potential, state.x) : drift_isd(potential, state.x);
    break;
  case DriftKind::isd_regularized:
    drift = descent ? drift_langevin(potential, state.x)
                    : drift_isd_regularized(potential, state.x, config.regularizer);
    break;
  case DriftKind::gad: {
    if (!state.v) throw ContractError("GAD state is missing its direction");
    GadDrift g = drift_gad(potential, state.x, *state.v, config.eta);
    drift = descent ? drift_langevin(potential, state.x) : std::move(g.dx);
    dv = std::move(g.dv);
    break;
  }
  case DriftKind::gad_two_vector: {
    if (!state.v || !state.v2) throw ContractError("two-vector GAD state is missing a direction");
    GadPairDrift g = drift_gad_two_vector(potential, state.x, *state.v, *state.v2, config.eta, config.regularizer);
    drift = descent ? drift_langevin(potential, state.x) : std::move(g.dx);
    dv = std::move(g.dv1);
    dv2 = std::move(g.dv2);
    break;
  }
  }

  Vector x = state.x + h * drift;
  if (config.epsilon > 0.0) {
    const double scale = std::sqrt(2.0 * config.epsilon * h);
    for (int i = 0; i < d; ++i) {
      x[i] += scale * rng.gaussian();
    }
  }
  next.x = wrap_to_domain(x, potential.geometry());

  if (uses_direction(config.variant)) {
    const Vector &v = *state.v;
    Vector v1 = v + h * dv;
    if (config.epsilon_prime > 0.0) {
      const double scale = std::sqrt(2.0 * config.epsilon_prime * h);
      Vector noise(d);
      for (int i = 0; i < d; ++i) {
        noise[i] = scale * rng.gaussian();
      }
      v1 += tangent_project(v, noise);
      v1 -= (d * config.epsilon_prime * h) * v;
    }
    v1 /= v1.norm();
    next.v = v1;
    if (config.variant == DriftKind::gad_two_vector) {
      Vector w = *state.v2 + h * dv2;
      w -= v1 * v1.dot(w);
      w /= w.norm();
      next.v2 = std::move(w);
    }
  }
  next.t = state.t + h;
  return next;
}

inline SimState em_step(const SimState &state, const DynamicsConfig &config, const Potential &potential,
                        RngStream &rng) {
  return em_step(state, config, potential, rng, config.delta);
}

struct ObservedPoint {
  double t;
  const Vector &x;
  double energy;
  int mode;
};

enum class SimStatus { horizon, stopped, diverged, evaluation_error };

inline std::string_view to_string(SimStatus s) {
  switch (s) {
  case SimStatus::horizon:
    return "horizon";
  case SimStatus::stopped:
    return "stopped";
  case SimStatus::diverged:
    return "diverged";
  case SimStatus::evaluation_error:
    return "evaluation_error";
  }
  return "?";
}

struct SimulateOptions {
  double horizon = 1.0;
  std::int64_t stride = 1; // Observer cadence in grid steps.
  std::function<void(const ObservedPoint &)> observer;
  std::function<bool(const SimState &)> stop; // Checked at t = 0 and after every grid step.
  // Called after every grid step with the step count; returning true stops the run.
  std::function<bool(const SimState &, std::int64_t)> on_step;
};

struct SimResult {
  SimState state;
  SimStatus status = SimStatus::horizon;
  std::int64_t steps = 0;
  std::int64_t switches = 0;
  std::string message;
};

// Number of grid steps needed to cover [0, horizon] with spacing delta.
inline std::int64_t grid_steps(double horizon, double delta) {
  return static_cast<std::int64_t>(std::ceil(horizon / delta - 1e-9));
}

// Advance a state to the horizon (or until the stop predicate fires).
//
// Trajectories whose position becomes non-finite or exceeds the divergence ceiling (Euclidean domains
// only) end with status diverged; a potential that cannot be evaluated ends the run with
// evaluation_error. Neither throws.
inline SimResult simulate(const DynamicsConfig &config, const Potential &potential, SimState state,
                          const SimulateOptions &options, RngStream &rng) {
  config.validate();
  if (!(options.horizon > 0.0)) {
    throw ContractError("simulation horizon must be positive");
  }
  if (options.stride < 1) {
    throw ContractError("observer stride must be at least 1");
  }
  const double rate = config.effective_rate();
  const bool torus = potential.geometry().is_torus();
  const double t0 = state.t;
  const std::int64_t n_steps = grid_steps(options.horizon, config.delta);

  SimResult result;
  auto observe = [&](const SimState &s) {
    if (options.observer) {
      options.observer(ObservedPoint{s.t, s.x, potential.energy(s.x), s.mode});
    }
  };
  auto diverged = [&](const SimState &s) {
    return !s.x.allFinite() || (!torus && s.x.norm() > config.divergence_ceiling);
  };

  try {
    if (options.stop && options.stop(state)) {
      result.status = SimStatus::stopped;
      observe(state);
      result.state = std::move(state);
      return result;
    }
    observe(state);

    for (std::int64_t n = 1; n <= n_steps; ++n) {
      const double t_end = std::min(t0 + options.horizon, t0 + static_cast<double>(n) * config.delta);
      while (state.next_switch < t_end) {
        const double h = state.next_switch - state.t;
        const double t_switch = state.next_switch;
        if (h > 0.0) {
          state = em_step(state, config, potential, rng, h);
          if (diverged(state)) {
            result.status = SimStatus::diverged;
            result.steps = n;
            result.state = std::move(state);
            return result;
          }
        }
        state.t = t_switch;
        state.mode = 1 - state.mode;
        state.next_switch = sample_switch_time(rate, t_switch, rng);
        ++result.switches;
      }
      const double h = t_end - state.t;
      if (h > 0.0) {
        state = em_step(state, config, potential, rng, h);
      }
      state.t = t_end;
      result.steps = n;
      if (diverged(state)) {
        result.status = SimStatus::diverged;
        result.state = std::move(state);
        return result;
      }
      state = apply_guard(state, config, potential, rng);

      if (options.stop && options.stop(state)) {
        result.status = SimStatus::stopped;
        observe(state);
        result.state = std::move(state);
        return result;
      }
      if (options.on_step && options.on_step(state, n)) {
        result.status = SimStatus::stopped;
        result.state = std::move(state);
        return result;
      }
      if (n % options.stride == 0) {
        observe(state);
      }
    }
  } catch (const EvaluationError &e) {
    result.status = SimStatus::evaluation_error;
    result.message = e.what();
  }
  result.state = std::move(state);
  return result;
}

// Convenience overload starting from x0 (and optional initial directions) at t = 0.
inline SimResult simulate(const DynamicsConfig &config, const Potential &potential, const Vector &x0,
                          const std::optional<Vector> &v0, const SimulateOptions &options, RngStream &rng) {
  return simulate(config, potential, initial_state(config, potential, x0, rng, v0), options, rng);
}

} // namespace switchdyn

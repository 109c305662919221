#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "switchdyn/integrator.hpp"

using namespace switchdyn;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// U(x) = -b . x: constant force b, zero Hessian.
Potential linear_potential(const Vector &b) {
  const auto d = static_cast<int>(b.size());
  return Potential::from_functions(
      "linear", d, DomainGeometry::euclidean(), [b](const Vector &x) { return -b.dot(x); },
      [b](const Vector &) { return Vector(-b); }, [d](const Vector &) { return Matrix(Matrix::Zero(d, d)); });
}

Potential separable_quadratic() {
  return Potential::from_functions(
      "sep", 2, DomainGeometry::euclidean(), [](const Vector &x) { return x[0] * x[0] + 2 * x[1] * x[1]; },
      [](const Vector &x) { return vec({2 * x[0], 4 * x[1]}); },
      [](const Vector &) {
        Matrix h = Matrix::Zero(2, 2);
        h(0, 0) = 2;
        h(1, 1) = 4;
        return h;
      });
}

DynamicsConfig deterministic(DriftKind k, int mode, double delta = 1e-3) {
  DynamicsConfig c;
  c.variant = k;
  c.initial_mode = mode;
  c.delta = delta;
  return c;
}

Vector run_to(const DynamicsConfig &c, const Potential &u, const Vector &x0, double T, std::uint64_t seed = 1) {
  RngStream rng(seed, 0);
  SimulateOptions o;
  o.horizon = T;
  return simulate(c, u, x0, std::nullopt, o, rng).state.x;
}

} // namespace

TEST(EmStep, ZeroDriftNoNoise) {
  const Potential u = linear_potential(vec({0, 0}));
  DynamicsConfig c = deterministic(DriftKind::langevin, 0);
  RngStream rng(1, 0);
  SimState s = initial_state(c, u, vec({0.3, -2}), rng);
  const SimState n = em_step(s, c, u, rng);
  EXPECT_EQ(n.x, s.x);
  EXPECT_EQ(n.t, c.delta);
}

TEST(EmStep, ConstantDriftIsExact) {
  const Vector b = vec({1.5, -0.25});
  const Potential u = linear_potential(b);
  DynamicsConfig c = deterministic(DriftKind::langevin, 0);
  RngStream rng(1, 0);
  const SimState s = initial_state(c, u, vec({0.3, -2}), rng);
  EXPECT_EQ(em_step(s, c, u, rng).x, Vector(s.x + c.delta * b));
}

TEST(EmStep, IncrementVariance) {
  const Potential u = linear_potential(vec({0, 0}));
  DynamicsConfig c = deterministic(DriftKind::langevin, 0);
  c.epsilon = 0.1;
  RngStream rng(42, 0);
  SimState s = initial_state(c, u, vec({0, 0}), rng);
  double sum = 0, sq = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const SimState next = em_step(s, c, u, rng);
    for (int i = 0; i < 2; ++i) {
      const double dx = next.x[i] - s.x[i];
      sum += dx;
      sq += dx * dx;
    }
    s = next;
  }
  const double m = sum / (2.0 * n);
  const double var = sq / (2.0 * n) - m * m;
  EXPECT_NEAR(var / (2 * c.epsilon * c.delta), 1.0, 0.03);
}

TEST(EmStep, RefusesToCrossSwitch) {
  const Potential u = linear_potential(vec({0, 0}));
  DynamicsConfig c = deterministic(DriftKind::langevin, 0);
  RngStream rng(1, 0);
  SimState s = initial_state(c, u, vec({0, 0}), rng);
  s.next_switch = 0.5 * c.delta;
  EXPECT_THROW(em_step(s, c, u, rng), ContractError);
  EXPECT_NO_THROW(em_step(s, c, u, rng, 0.5 * c.delta));
}

TEST(SwitchClock, InfiniteWithoutRate) {
  RngStream rng(1, 0);
  EXPECT_TRUE(std::isinf(sample_switch_time(0.0, 3.0, rng)));
}

TEST(SwitchClock, ExponentialMean) {
  RngStream rng(7, 3);
  double s = 0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) s += sample_switch_time(2.0, 10.0, rng) - 10.0;
  EXPECT_NEAR(s / n, 0.5, 0.5 * 0.02);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  RngStream a(5, 9), b(5, 9), c(5, 10), d(6, 9);
  bool differs_c = false, differs_d = false;
  for (int k = 0; k < 100; ++k) {
    const double x = a.gaussian();
    EXPECT_EQ(x, b.gaussian());
    differs_c |= x != c.gaussian();
    differs_d |= x != d.gaussian();
  }
  EXPECT_TRUE(differs_c);
  EXPECT_TRUE(differs_d);
  EXPECT_EQ(RngStream(5, 9).engine_seed(), derive_seed(5, 9));
}

TEST(Simulate, GradientFlowConverges) {
  const Potential u = make_double_well();
  const Vector x = run_to(deterministic(DriftKind::isd, 0), u, vec({0.5, 0.3}), 20.0);
  const Eigen::Vector2d ref = oracle::rk4(oracle::double_well_descent, {0.5, 0.3}, 20.0, 1e-5);
  EXPECT_LT((x - vec({1, 0})).norm(), 1e-3);
  EXPECT_LT((x - Vector(ref)).norm(), 1e-3);
}

TEST(Simulate, SaddleDynamicsReachesSaddle) {
  const Potential u = make_double_well();
  const Vector x = run_to(deterministic(DriftKind::isd, 1), u, vec({0.5, 0}), 5.0);
  EXPECT_LT(x.norm(), 1e-3);
}

TEST(Simulate, SaddleDynamicsFirstOrderAgainstOracle) {
  const Potential u = make_double_well();
  const Eigen::Vector2d ref = oracle::rk4(oracle::double_well_isd, {0.5, 0.3}, 1.0, 1e-5);
  std::vector<double> err;
  for (double delta : {4e-3, 2e-3, 1e-3}) {
    err.push_back((run_to(deterministic(DriftKind::isd, 1, delta), u, vec({0.5, 0.3}), 1.0) - Vector(ref)).norm());
  }
  EXPECT_LT(err[2], 1e-2);
  // Halving the step halves the error.
  EXPECT_NEAR(err[0] / err[1], 2.0, 0.3);
  EXPECT_NEAR(err[1] / err[2], 2.0, 0.3);
}

TEST(Simulate, HalvingStepChangesEndpointByOrderDelta) {
  const Potential u = make_double_well();
  const Vector x0 = vec({0.5, 0.3});
  const Vector a = run_to(deterministic(DriftKind::isd, 1, 2e-3), u, x0, 1.0);
  const Vector b = run_to(deterministic(DriftKind::isd, 1, 1e-3), u, x0, 1.0);
  const Vector c = run_to(deterministic(DriftKind::isd, 1, 5e-4), u, x0, 1.0);
  const double d1 = (a - b).norm(), d2 = (b - c).norm();
  EXPECT_GT(d1, 0.0);
  EXPECT_LT(d1, 10 * 2e-3);
  EXPECT_NEAR(d1 / d2, 2.0, 0.3);
}

TEST(Simulate, DeterministicEscapeDiverges) {
  const Potential u = make_double_well();
  RngStream rng(1, 0);
  SimulateOptions o;
  o.horizon = 50;
  const SimResult r = simulate(deterministic(DriftKind::isd, 1), u, vec({0.9, 0.05}), std::nullopt, o, rng);
  EXPECT_EQ(r.status, SimStatus::diverged);
  EXPECT_LT(r.state.t, 50.0);
}

TEST(Simulate, SwitchTimesAreExact) {
  // In 1D with U = -x, descent moves right at unit speed and the saddle drift moves left at unit speed, so
  // x(T) - x(0) = (time in mode 0) - (time in mode 1). With eps = 0 the clock is the only random input, so
  // the switch times can be replayed from an identical stream.
  const Potential u = linear_potential(vec({1.0}));
  DynamicsConfig c = deterministic(DriftKind::isd, 0, 0.01);
  c.switching = true;
  c.nu = 7.0;
  const double T = 10.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream rng(seed, 0);
    SimulateOptions o;
    o.horizon = T;
    const SimResult r = simulate(c, u, vec({0.0}), std::nullopt, o, rng);

    RngStream replay(seed, 0);
    double t = 0, t0 = 0, t1 = 0;
    int mode = 0;
    std::int64_t switches = 0;
    for (;;) {
      const double next = t + replay.exponential(c.nu);
      const double end = std::min(next, T);
      (mode == 0 ? t0 : t1) += end - t;
      if (next >= T) break;
      t = next;
      mode = 1 - mode;
      ++switches;
    }
    EXPECT_EQ(r.switches, switches);
    EXPECT_EQ(r.state.mode, mode);
    EXPECT_NEAR(r.state.x[0], t0 - t1, 1e-9);
  }
}

TEST(Simulate, PoissonFlipCount) {
  const Potential u = linear_potential(vec({0, 0}));
  DynamicsConfig c = deterministic(DriftKind::isd, 0, 0.01);
  c.switching = true;
  c.nu = 2.0;
  const double T = 5.0;
  const int runs = 200;
  double sum = 0, sq = 0;
  for (int k = 0; k < runs; ++k) {
    RngStream rng(99, static_cast<std::uint64_t>(k));
    SimulateOptions o;
    o.horizon = T;
    const double n = static_cast<double>(simulate(c, u, vec({0, 0}), std::nullopt, o, rng).switches);
    sum += n;
    sq += n * n;
  }
  const double mean = sum / runs;
  const double var = sq / runs - mean * mean;
  EXPECT_LT(std::abs(mean - c.nu * T), 3.0 * std::sqrt(c.nu * T / runs));
  EXPECT_NEAR(var / (c.nu * T), 1.0, 0.35);
}

TEST(Simulate, NoSwitchingWithoutFlag) {
  const Potential u = linear_potential(vec({0, 0}));
  DynamicsConfig c = deterministic(DriftKind::isd, 1, 0.01);
  c.nu = 50.0; // ignored
  RngStream rng(1, 0);
  SimulateOptions o;
  o.horizon = 5;
  const SimResult r = simulate(c, u, vec({0, 0}), std::nullopt, o, rng);
  EXPECT_EQ(r.switches, 0);
  EXPECT_EQ(r.state.mode, 1);
}

TEST(Simulate, ObserverCadence) {
  const Potential u = make_double_well();
  DynamicsConfig c = deterministic(DriftKind::isd, 0, 0.1);
  for (const auto &[stride, rows] : std::vector<std::pair<int, int>>{{1, 11}, {2, 6}, {3, 4}}) {
    std::vector<double> ts;
    SimulateOptions o;
    o.horizon = 1.0;
    o.stride = stride;
    o.observer = [&](const ObservedPoint &p) { ts.push_back(p.t); };
    RngStream rng(1, 0);
    simulate(c, u, vec({0.5, 0.5}), std::nullopt, o, rng);
    EXPECT_EQ(static_cast<int>(ts.size()), rows);
    EXPECT_EQ(ts.front(), 0.0);
  }
}

TEST(Simulate, BitIdenticalReplay) {
  const Potential u = make_mixture({});
  DynamicsConfig c = deterministic(DriftKind::gad, 0);
  c.epsilon = 0.05;
  c.epsilon_prime = 0.02;
  c.switching = true;
  c.nu = 1.0;
  auto record = [&] {
    std::vector<double> out;
    SimulateOptions o;
    o.horizon = 3;
    o.observer = [&](const ObservedPoint &p) {
      out.push_back(p.t);
      out.insert(out.end(), p.x.data(), p.x.data() + p.x.size());
      out.push_back(p.mode);
    };
    RngStream rng(2024, 17);
    simulate(c, u, vec({4, 0}), std::nullopt, o, rng);
    return out;
  };
  EXPECT_EQ(record(), record());
}

TEST(Simulate, EvaluationErrorIsReported) {
  const Potential u = Potential::from_functions(
      "walls", 1, DomainGeometry::euclidean(), [](const Vector &x) { return -x[0]; },
      [](const Vector &x) {
        if (x[0] > 1) throw EvaluationError("outside the model");
        return vec({-1});
      },
      [](const Vector &) { return Matrix(Matrix::Zero(1, 1)); });
  RngStream rng(1, 0);
  SimulateOptions o;
  o.horizon = 5;
  const SimResult r = simulate(deterministic(DriftKind::langevin, 0, 0.1), u, vec({0}), std::nullopt, o, rng);
  EXPECT_EQ(r.status, SimStatus::evaluation_error);
  EXPECT_FALSE(r.message.empty());
}

TEST(Simulate, TorusStaysInCellAndNeverDiverges) {
  MixtureParams p;
  p.L = 4.0;
  const Potential u = make_mixture(p);
  DynamicsConfig c = deterministic(DriftKind::isd, 1, 1e-2);
  c.epsilon = 1.0;
  c.divergence_ceiling = 1e-3; // irrelevant on a compact domain
  RngStream rng(3, 0);
  SimulateOptions o;
  o.horizon = 20;
  o.on_step = [&](const SimState &s, std::int64_t) {
    EXPECT_TRUE((s.x.array() >= 0).all() && (s.x.array() < u.geometry().period).all());
    return false;
  };
  EXPECT_EQ(simulate(c, u, vec({1, 1}), std::nullopt, o, rng).status, SimStatus::horizon);
}

TEST(Guard, Examples) {
  const Potential u = make_double_well();
  DynamicsConfig c = deterministic(DriftKind::isd, 1);
  c.guard_radius = 2.0;
  c.guard_mode = GuardMode::force_mode_zero;
  c.switching = true;
  c.nu = 1.0;
  RngStream rng(1, 0);
  SimState s = initial_state(c, u, vec({0.5, 0.5}), rng);
  const SimState same = apply_guard(s, c, u, rng);
  EXPECT_EQ(same.mode, 1);
  EXPECT_EQ(same.next_switch, s.next_switch);
  s.x = vec({3, 0});
  const SimState out = apply_guard(s, c, u, rng);
  EXPECT_EQ(out.mode, 0);
  EXPECT_GE(out.next_switch, s.t);

  MixtureParams p;
  p.L = 0.1;
  const Potential torus = make_mixture(p);
  c.guard_radius = 0.01;
  SimState ts = initial_state(c, torus, vec({0.2, 0.2}), rng); // |x| > R, but a torus is never guarded
  EXPECT_EQ(apply_guard(ts, c, torus, rng).mode, 1);
}

TEST(Guard, RevertToLangevinPreventsEscape) {
  const Potential u = make_double_well();
  DynamicsConfig c = deterministic(DriftKind::isd, 1);
  c.guard_radius = 2.0;
  c.guard_mode = GuardMode::revert_to_langevin;
  RngStream rng(1, 0);
  SimulateOptions o;
  o.horizon = 50;
  double worst = 0;
  o.on_step = [&](const SimState &s, std::int64_t) {
    worst = std::max(worst, s.x.norm());
    return false;
  };
  const SimResult r = simulate(c, u, vec({0.9, 0.05}), std::nullopt, o, rng);
  EXPECT_EQ(r.status, SimStatus::horizon);
  EXPECT_LT(worst, 2.1);
  EXPECT_EQ(r.state.mode, 1);
}

TEST(Guard, ForceModeZeroReturnsToMinimum) {
  const Potential u = make_double_well();
  DynamicsConfig c = deterministic(DriftKind::isd, 1);
  c.guard_radius = 2.0;
  c.guard_mode = GuardMode::force_mode_zero;
  RngStream rng(1, 0);
  SimulateOptions o;
  o.horizon = 50;
  const SimResult r = simulate(c, u, vec({0.9, 0.05}), std::nullopt, o, rng);
  EXPECT_EQ(r.status, SimStatus::horizon);
  EXPECT_EQ(r.state.mode, 0);
  EXPECT_LT((r.state.x - vec({1, 0})).norm(), 1e-3);
}

TEST(Direction, SphereConstraint) {
  const Potential u = make_mixture({});
  DynamicsConfig c = deterministic(DriftKind::gad, 1);
  c.epsilon = 0.05;
  c.epsilon_prime = 0.5;
  RngStream rng(8, 0);
  SimState s = initial_state(c, u, vec({1, 0.5}), rng, vec({0.6, 0.8}));
  for (int k = 0; k < 5000; ++k) {
    s = em_step(s, c, u, rng);
    ASSERT_LE(std::abs(s.v->norm() - 1.0), 1e-12);
  }
}

TEST(Direction, SeparableFreeze) {
  const Potential u = separable_quadratic();
  DynamicsConfig c = deterministic(DriftKind::gad, 1);
  c.epsilon = 0.1;
  RngStream rng(8, 0);
  SimState s = initial_state(c, u, vec({0.7, -0.3}), rng, vec({1, 0}));
  for (int k = 0; k < 5000; ++k) {
    s = em_step(s, c, u, rng);
    ASSERT_EQ(*s.v, vec({1, 0}));
  }
}

TEST(Direction, PairStaysOrthonormal) {
  const Potential u = make_lennard_jones({});
  DynamicsConfig c = deterministic(DriftKind::gad_two_vector, 1, 1e-4);
  c.regularizer = RegularizerSpec::linear(1.0);
  c.epsilon = 0.05;
  RngStream rng(8, 0);
  const Vector x0 = vec({0, 0, 1.12, 0, 0.56, 0.97, -0.56, 0.97, -1.12, 0, -0.56, -0.97, 0.56, -0.97});
  SimState s = initial_state(c, u, x0, rng);
  for (int k = 0; k < 2000; ++k) {
    s = em_step(s, c, u, rng);
    ASSERT_LE(std::abs(s.v->norm() - 1.0), 1e-12);
    ASSERT_LE(std::abs(s.v2->norm() - 1.0), 1e-12);
    ASSERT_LE(std::abs(s.v->dot(*s.v2)), 1e-12);
  }
}

TEST(Direction, InitialStateDefaultsToLowestEigenvector) {
  const Potential u = make_double_well();
  DynamicsConfig c = deterministic(DriftKind::gad, 1);
  RngStream rng(1, 0);
  EXPECT_EQ(*initial_state(c, u, vec({0.1, 0}), rng).v, vec({1, 0}));
  EXPECT_EQ(*initial_state(c, u, vec({0.95, 0}), rng).v, vec({0, 1}));
  EXPECT_THROW(initial_state(c, u, vec({0.1, 0}), rng, vec({1, 1})), ContractError);
  EXPECT_THROW(initial_state(c, u, vec({0.1, 0, 0}), rng), InputError);
}

TEST(Config, Validation) {
  DynamicsConfig c;
  c.delta = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.epsilon = -1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.initial_mode = 2;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.variant = DriftKind::gad_two_vector;
  c.epsilon_prime = 0.1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.guard_radius = -1.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

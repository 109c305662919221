#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "switchdyn/checks.hpp"
#include "switchdyn/experiments.hpp"
#include "switchdyn/report_io.hpp"

using namespace switchdyn;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

DynamicsConfig isd(double eps, int mode = 1, double delta = 1e-3) {
  DynamicsConfig c;
  c.variant = DriftKind::isd;
  c.initial_mode = mode;
  c.epsilon = eps;
  c.delta = delta;
  return c;
}

Potential flat_torus(double period) {
  return Potential::from_functions(
      "flat", 2, DomainGeometry::torus(period), [](const Vector &) { return 0.0; },
      [](const Vector &) { return Vector(Vector::Zero(2)); }, [](const Vector &) { return Matrix(Matrix::Zero(2, 2)); });
}

TrialRecord trial(OutcomeKind k, double t) {
  TrialRecord r;
  r.result.kind = k;
  r.result.time = t;
  return r;
}

std::string trials_csv(const ExperimentReport &r) {
  std::ostringstream s;
  write_trials_csv(s, r);
  return s.str();
}

} // namespace

TEST(Quench, MinimumIsFixed) {
  const Potential u = make_double_well();
  const QuenchResult q = quench(u, vec({1, 0}));
  EXPECT_TRUE(q.converged);
  EXPECT_EQ(q.x, vec({1, 0}));
  EXPECT_EQ(q.energy, 0.0);
}

TEST(Quench, DoubleWellBasin) {
  const QuenchResult q = quench(make_double_well(), vec({0.5, 0.3}), {0.01, 1e-8, 100000, 0.1});
  EXPECT_TRUE(q.converged);
  EXPECT_LT((q.x - vec({1, 0})).norm(), 1e-8);
  EXPECT_NEAR(q.energy, 0.0, 1e-15);
}

TEST(Quench, PerturbedGlobalMinimum) {
  const Potential u = make_lennard_jones({});
  RngStream rng(4, 0);
  Vector x = lj7_minimum(0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 0.01 * rng.gaussian();
  const QuenchResult q = quench(u, x, {0.01, 1e-6, 100000, 0.1});
  EXPECT_NEAR(q.energy, -12.53, 0.01);
}

TEST(Catalog, StoredConfigurationsAreMinima) {
  const Potential u = make_lennard_jones({});
  const MinimaCatalog cat = lj7_catalog();
  EXPECT_NO_THROW(cat.validate());
  for (std::size_t i = 0; i < cat.size(); ++i) {
    const Vector x = *cat.configurations[i];
    EXPECT_NEAR(u.energy(x), cat.energies[i], 1e-6);
    EXPECT_LT(u.gradient(x).norm(), 1e-5);
    // Local minimum: only the three rigid-motion zero modes, everything else positive.
    const SpectralResult s = smallest_eigenpairs(u.hessian(x), 4);
    EXPECT_NEAR(s.eigenvalues[0], 0.0, 1e-4);
    EXPECT_NEAR(s.eigenvalues[2], 0.0, 1e-4);
    EXPECT_GT(s.eigenvalues[3], 1e-2);
  }
}

TEST(Catalog, QuenchedLevelsComeFromTheCatalog) {
  const Potential u = make_lennard_jones({});
  const MinimaCatalog cat = lj7_catalog();
  RngStream rng(31, 0);
  std::vector<double> energies;
  for (int k = 0; k < 100; ++k) {
    Vector x(14);
    // Compact random start: disk of radius 1.6, no pair closer than 0.8.
    for (int i = 0; i < 7;) {
      const double a = 2 * M_PI * rng.uniform(), r = 1.6 * std::sqrt(rng.uniform());
      bool ok = true;
      for (int j = 0; j < i && ok; ++j) ok = std::hypot(r * std::cos(a) - x[2 * j], r * std::sin(a) - x[2 * j + 1]) >= 0.8;
      if (!ok) continue;
      x[2 * i] = r * std::cos(a);
      x[2 * i + 1] = r * std::sin(a);
      ++i;
    }
    const QuenchResult q = quench(u, x, {0.01, 1e-6, 200000, 0.1});
    if (!q.converged) continue;
    energies.push_back(q.energy);
    EXPECT_TRUE(match_minimum(cat, q.energy).has_value()) << q.energy;
  }
  EXPECT_GT(energies.size(), 90u);
  EXPECT_GE(distinct_levels(energies, 0.005).size(), 2u);
}

TEST(Catalog, MatchExamples) {
  const MinimaCatalog cat = lj7_catalog();
  EXPECT_EQ(match_minimum(cat, -12.53), 0u);
  EXPECT_EQ(match_minimum(cat, -11.50), 1u);
  EXPECT_EQ(match_minimum(cat, -11.47), 2u);
  EXPECT_EQ(match_minimum(cat, -11.40), 3u);
  EXPECT_FALSE(match_minimum(cat, 0.0).has_value());
}

TEST(Catalog, AmbiguityIsAnError) {
  MinimaCatalog cat;
  cat.energies = {-1.0, -0.99};
  cat.match_tolerance = 0.05;
  EXPECT_THROW(cat.validate(), ParameterError);
  EXPECT_THROW(match_minimum(cat, -0.995), AmbiguityError);
  cat.energies = {-1.0, -2.0};
  EXPECT_THROW(cat.validate(), ParameterError);
}

TEST(Catalog, DistinctLevels) {
  const auto lv = distinct_levels({-1.0, -1.0001, -2.0, -1.9999, 3.0}, 0.01);
  ASSERT_EQ(lv.size(), 3u);
  EXPECT_NEAR(lv[0], -1.99995, 1e-12);
  EXPECT_NEAR(lv[1], -1.00005, 1e-12);
  EXPECT_EQ(lv[2], 3.0);
}

TEST(HittingTime, PredicateTrueAtStart) {
  RngStream rng(1, 0);
  const HitResult r = hitting_time(isd(0.1), make_double_well(), vec({0.05, 0}), BallTarget{vec({0, 0}), 0.1}, 1.0, rng);
  EXPECT_EQ(r.kind, OutcomeKind::hit);
  EXPECT_EQ(r.time, 0.0);
}

TEST(HittingTime, DeterministicSaddleTimeMatchesClosedForm) {
  const double exact = oracle::double_well_isd_axis_time(0.5, 0.1);
  // First-order scheme plus rounding of the hit to the grid: the error is a few steps at most.
  for (double delta : {1e-3, 5e-4}) {
    RngStream rng(1, 0);
    const HitResult r =
        hitting_time(isd(0.0, 1, delta), make_double_well(), vec({0.5, 0}), BallTarget{vec({0, 0}), 0.1}, 10.0, rng);
    ASSERT_EQ(r.kind, OutcomeKind::hit);
    EXPECT_LT(std::abs(r.time - exact), 2 * delta);
  }
}

TEST(HittingTime, DeterministicEscapeFails) {
  RngStream rng(1, 0);
  const HitResult r =
      hitting_time(isd(0.0), make_double_well(), vec({0.9, 0.05}), BallTarget{vec({0, 0}), 0.1}, 100.0, rng);
  EXPECT_EQ(r.kind, OutcomeKind::diverged);
  EXPECT_FALSE(r.success());
}

TEST(HittingTime, LangevinIsMetastable) {
  RngStream rng(1, 0);
  const HitResult r =
      hitting_time(isd(0.02, 0), make_double_well(), vec({1, 0}), BallTarget{vec({-1, 0}), 0.3}, 5.0, rng);
  EXPECT_EQ(r.kind, OutcomeKind::timeout);
}

TEST(HittingTime, EnergyThreshold) {
  RngStream rng(1, 0);
  const HitResult r = hitting_time(isd(0.0, 0), make_double_well(), vec({0.5, 0.3}), EnergyBelow{0.01}, 10.0, rng);
  EXPECT_EQ(r.kind, OutcomeKind::hit);
  EXPECT_GT(r.time, 0.0);
}

TEST(HittingTime, SingleEntryCatalogMatchesAtFirstCheck) {
  MinimaCatalog cat;
  cat.energies = {0.0};
  RngStream rng(1, 0);
  const HitResult r = hitting_time(isd(0.0, 0), make_double_well(), vec({0.98, 0.01}),
                                   AllMinimaVisited{cat, 0.5, {0.01, 1e-8, 10000, 0.1}}, 10.0, rng);
  EXPECT_EQ(r.kind, OutcomeKind::hit);
  EXPECT_NEAR(r.time, 0.5, 1e-12);
  EXPECT_EQ(r.quench_checks, 1);
}

TEST(Report, MeanAndStandardErrorByHand) {
  ExperimentReport rep;
  rep.trials = {trial(OutcomeKind::hit, 1.0), trial(OutcomeKind::timeout, 100.0), trial(OutcomeKind::hit, 2.0),
                trial(OutcomeKind::hit, 6.0), trial(OutcomeKind::diverged, 3.0)};
  rep.summarize();
  // successes {1, 2, 6}: mean 3, sample variance 7, SE sqrt(7/3)
  EXPECT_EQ(rep.successes, 3u);
  EXPECT_EQ(rep.failures, 2u);
  EXPECT_DOUBLE_EQ(rep.mean, 3.0);
  EXPECT_DOUBLE_EQ(rep.std_error, std::sqrt(7.0 / 3.0));
  EXPECT_DOUBLE_EQ(rep.failure_rate, 0.4);
  EXPECT_DOUBLE_EQ(rep.failure_rate + static_cast<double>(rep.successes) / rep.trials.size(), 1.0);
}

TEST(Report, AllFailures) {
  ExperimentReport rep;
  rep.trials = {trial(OutcomeKind::timeout, 1.0)};
  rep.summarize();
  EXPECT_TRUE(std::isnan(rep.mean));
  EXPECT_EQ(rep.failure_rate, 1.0);
}

TEST(Experiment, AlwaysSucceedingSetup) {
  const HittingExperiment exp{vec({0.5, 0}), std::nullopt, BallTarget{vec({0, 0}), 0.1}, 10.0, 8};
  const ExperimentReport rep = failure_probability(isd(0.0), make_double_well(), exp, 3, 1);
  EXPECT_EQ(rep.failure_rate, 0.0);
  for (const auto &t : rep.trials) EXPECT_EQ(t.result.time, rep.trials[0].result.time);
}

TEST(Experiment, StartInsideTarget) {
  const ExperimentReport rep =
      transition_time(isd(0.05), make_double_well(), vec({-1, 0}), BallTarget{vec({-1, 0}), 0.3}, 10.0, 5, 1, 1);
  for (const auto &t : rep.trials) EXPECT_EQ(t.result.time, 0.0);
  EXPECT_EQ(rep.mean, 0.0);
}

TEST(Experiment, FailureRateComplementsSuccesses) {
  DynamicsConfig c = isd(0.02);
  c.divergence_ceiling = 1e3;
  const HittingExperiment exp{vec({0.9, 0}), std::nullopt, BallTarget{vec({0, 0}), 0.1}, 20.0, 40};
  const ExperimentReport rep = failure_probability(c, make_double_well(), exp, 5, 2);
  EXPECT_GT(rep.failures, 0u);
  EXPECT_GT(rep.successes, 0u);
  EXPECT_DOUBLE_EQ(rep.failure_rate + static_cast<double>(rep.successes) / 40.0, 1.0);
}

TEST(Experiment, WorkerCountDoesNotChangeResults) {
  DynamicsConfig c = isd(0.05);
  c.switching = true;
  c.nu = 1.0;
  c.initial_mode = 0;
  const HittingExperiment exp{vec({1, 0}), std::nullopt, BallTarget{vec({-1, 0}), 0.3}, 30.0, 24};
  const ExperimentReport a = failure_probability(c, make_double_well(), exp, 77, 1);
  const ExperimentReport b = failure_probability(c, make_double_well(), exp, 77, 4);
  const ExperimentReport d = failure_probability(c, make_double_well(), exp, 78, 4);
  EXPECT_EQ(trials_csv(a), trials_csv(b));
  EXPECT_NE(trials_csv(a), trials_csv(d));
}

TEST(Sweep, OnePointEqualsSingleExperiment) {
  DynamicsConfig c = isd(0.05);
  const HittingExperiment exp{vec({0.9, 0}), std::nullopt, BallTarget{vec({0, 0}), 0.1}, 20.0, 10};
  const auto reports = sweep(SweepGrid{}.expand(c), make_double_well(), exp, 9, 1);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].label, "base");
  EXPECT_EQ(trials_csv(reports[0]), trials_csv(failure_probability(c, make_double_well(), exp, 9, 1)));
}

TEST(Sweep, GridExpansion) {
  DynamicsConfig c = isd(0.05);
  const SweepGrid g{{0.1, 1.0}, {0.03, 0.04, 0.05}, {RegularizerSpec::none(), RegularizerSpec::step(2)}};
  const auto pts = g.expand(c);
  ASSERT_EQ(pts.size(), 12u);
  EXPECT_EQ(pts[0].label, "regularizer=none,epsilon=0.03,nu=0.1");
  EXPECT_EQ(pts[11].config.nu, 1.0);
  EXPECT_EQ(pts[11].config.epsilon, 0.05);
  EXPECT_EQ(pts[11].config.regularizer, RegularizerSpec::step(2));
}

TEST(Sweep, StreamsAreIndependentAcrossPoints) {
  EXPECT_EQ(stream_for(0, 5), 5u);
  EXPECT_EQ(stream_for(2, 5), (2ull << 32) | 5u);
}

TEST(Histogram, NormalizedAndRejectsEuclidean) {
  MixtureParams p;
  p.L = 4.0;
  const Potential u = make_mixture(p);
  DynamicsConfig c = isd(0.5, 0, 1e-2);
  RngStream rng(2, 0);
  const Histogram2D h = invariant_histogram(c, u, vec({1, 1}), 50, 5, 20, rng);
  EXPECT_NEAR(h.total(), 1.0, 1e-12);
  EXPECT_EQ(h.bins, 20);
  EXPECT_THROW(invariant_histogram(c, make_double_well(), vec({1, 1}), 1, 0.1, 10, rng), ContractError);
  EXPECT_THROW(invariant_histogram(c, u, vec({1, 1}), 1, 2, 10, rng), ContractError);
}

TEST(Histogram, FlatLandscapeIsUniform) {
  // A step with noise standard deviation far above the period wraps to an essentially uniform draw, so the
  // visited bins are independent multinomial samples.
  const Potential u = flat_torus(4 * M_PI);
  DynamicsConfig c = isd(1000.0, 0, 1.0);
  RngStream rng(6, 0);
  const int bins = 10;
  const double T = 100000;
  const Histogram2D h = invariant_histogram(c, u, vec({1, 1}), T, 0.5, bins, rng);
  const double p = 1.0 / (bins * bins);
  const double sd = std::sqrt(p * (1 - p) / T);
  for (double m : h.masses) EXPECT_LT(std::abs(m - p), 3 * sd);
}

TEST(Histogram, EnsembleIsWorkerIndependent) {
  MixtureParams p;
  p.L = 4.0;
  const Potential u = make_mixture(p);
  DynamicsConfig c = isd(0.3, 0, 1e-2);
  const std::vector<Vector> starts = {vec({0, 0}), vec({4, 0}), vec({2, 2})};
  const Histogram2D a = ensemble_histogram(c, u, starts, 5, 1, 10, 4, 1);
  const Histogram2D b = ensemble_histogram(c, u, starts, 5, 1, 10, 4, 3);
  EXPECT_EQ(a.masses, b.masses);
}

TEST(Histogram, TotalVariationAndMassNear) {
  Histogram2D a{2, 2.0, {0.25, 0.25, 0.25, 0.25}}, b{2, 2.0, {0.5, 0.5, 0.0, 0.0}};
  EXPECT_DOUBLE_EQ(total_variation(a, b), 0.5);
  EXPECT_DOUBLE_EQ(total_variation(a, a), 0.0);
  // Bin centres sit at 0.5 and 1.5. From x = 1.9 the centre at 0.5 is 0.6 away through the periodic boundary.
  EXPECT_DOUBLE_EQ(mass_near(b, vec({0.5, 0.5}), 0.1), 0.5);
  EXPECT_DOUBLE_EQ(mass_near(b, vec({1.9, 0.5}), 0.45), 0.5);
  EXPECT_DOUBLE_EQ(mass_near(b, vec({1.9, 0.5}), 0.65), 1.0);
}

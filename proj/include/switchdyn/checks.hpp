#pragma once

// Self-test suite for a potential: analytic derivatives against finite differences, eigen-residuals,
// the reflection isometry, the sphere constraint of the direction dynamics, periodicity on a torus, and the
// translation zero modes of the cluster.

#include <cmath>
#include <string>
#include <vector>

#include "switchdyn/dynamics.hpp"
#include "switchdyn/integrator.hpp"
#include "switchdyn/landscape.hpp"
#include "switchdyn/rng.hpp"
#include "switchdyn/spectral.hpp"

namespace switchdyn {

struct CheckResult {
  std::string name;
  bool passed = true;
  double worst = 0.0; // Largest observed error (in the check's own units).
  double limit = 0.0;
};

struct CheckOptions {
  int points = 100;
  double gradient_tol = 1e-5;
  double hessian_tol = 1e-4;
  double fd_scale = 1e-5;
};

// Random evaluation point adapted to the landscape: compact non-overlapping configurations for the cluster,
// the fundamental cell on a torus, a box around the wells otherwise.
inline Vector random_point(const Potential &potential, RngStream &rng) {
  const int d = potential.dimension();
  Vector x(d);
  if (potential.name() == "lennard_jones") {
    const int n = d / 2;
    const double radius = 0.8 * std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n;) {
      const double a = 2.0 * M_PI * rng.uniform();
      const double r = radius * std::sqrt(rng.uniform());
      const double px = r * std::cos(a), py = r * std::sin(a);
      bool ok = true;
      for (int j = 0; j < i && ok; ++j) ok = std::hypot(px - x[2 * j], py - x[2 * j + 1]) >= 0.8;
      if (ok) {
        x[2 * i] = px;
        x[2 * i + 1] = py;
        ++i;
      }
    }
    return x;
  }
  if (potential.geometry().is_torus()) {
    for (int i = 0; i < d; ++i) x[i] = potential.geometry().period * rng.uniform();
    return x;
  }
  if (potential.name() == "mixture") {
    x << -2.0 + 8.0 * rng.uniform(), -3.0 + 6.0 * rng.uniform();
    return x;
  }
  for (int i = 0; i < d; ++i) x[i] = -2.0 + 4.0 * rng.uniform();
  return x;
}

// Central-difference gradient of the energy with step h.
inline Vector fd_gradient(const Potential &p, const Vector &x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (p.energy(a) - p.energy(b)) / (2.0 * h);
  }
  return g;
}

// Central-difference Jacobian of the analytic gradient.
inline Matrix fd_hessian(const Potential &p, const Vector &x, double h) {
  Matrix m(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    m.col(i) = (p.gradient(a) - p.gradient(b)) / (2.0 * h);
  }
  return m;
}

inline std::vector<CheckResult> run_checks(const Potential &potential, std::uint64_t seed,
                                           const CheckOptions &opt = {}) {
  RngStream rng(seed, 0);
  const int d = potential.dimension();
  std::vector<CheckResult> out;

  CheckResult grad{"gradient_vs_finite_differences", true, 0.0, opt.gradient_tol};
  CheckResult hess{"hessian_vs_finite_differences", true, 0.0, opt.hessian_tol};
  CheckResult sym{"hessian_symmetry", true, 0.0, 0.0};
  CheckResult eig{"eigen_residual", true, 0.0, 1e-8};
  CheckResult orth{"eigen_orthonormality", true, 0.0, 1e-10};
  CheckResult iso{"reflection_isometry", true, 0.0, 1e-12};

  for (int k = 0; k < opt.points; ++k) {
    const Vector x = random_point(potential, rng);
    const double h = opt.fd_scale * std::max(1.0, x.norm());
    const Vector g = potential.gradient(x);
    const double ge = (fd_gradient(potential, x, h) - g).norm() / std::max(1.0, g.norm());
    grad.worst = std::max(grad.worst, ge);

    const Matrix H = potential.hessian(x);
    const double he = (fd_hessian(potential, x, h) - H).norm() / std::max(1.0, H.norm());
    hess.worst = std::max(hess.worst, he);
    sym.worst = std::max(sym.worst, (H - H.transpose()).cwiseAbs().maxCoeff());

    const SpectralResult s = smallest_eigenpairs(H, d);
    for (int i = 0; i < d; ++i) {
      const double lam = s.eigenvalues[i];
      eig.worst = std::max(eig.worst, (H * s.vector(i) - lam * s.vector(i)).norm() / (1.0 + std::abs(lam)));
    }
    orth.worst = std::max(orth.worst, (s.eigenvectors.transpose() * s.eigenvectors - Matrix::Identity(d, d))
                                          .cwiseAbs()
                                          .maxCoeff());

    const Vector isd = reflected_descent(g, s.vector(0));
    iso.worst = std::max(iso.worst, std::abs(isd.norm() - g.norm()) / std::max(1.0, g.norm()));
  }
  for (CheckResult *c : {&grad, &hess, &sym, &eig, &orth, &iso}) {
    c->passed = c->worst <= c->limit;
    out.push_back(*c);
  }

  // Direction dynamics must stay on the unit sphere.
  {
    CheckResult sphere{"sphere_constraint", true, 0.0, 1e-12};
    DynamicsConfig cfg;
    cfg.variant = DriftKind::gad;
    cfg.epsilon = 0.01;
    cfg.epsilon_prime = 0.05;
    cfg.delta = potential.name() == "lennard_jones" ? 1e-4 : 1e-3;
    cfg.divergence_ceiling = 1e300;
    for (int k = 0; k < 5; ++k) {
      SimState s = initial_state(cfg, potential, random_point(potential, rng), rng, random_unit_vector(d, rng));
      for (int step = 0; step < 100; ++step) {
        s = em_step(s, cfg, potential, rng);
        sphere.worst = std::max(sphere.worst, std::abs(s.v->norm() - 1.0));
      }
    }
    sphere.passed = sphere.worst <= sphere.limit;
    out.push_back(sphere);
  }

  if (potential.geometry().is_torus()) {
    CheckResult per{"torus_periodicity", true, 0.0, 1e-9};
    const double p = potential.geometry().period;
    for (int k = 0; k < opt.points; ++k) {
      const Vector x = random_point(potential, rng);
      for (int i = 0; i < d; ++i) {
        Vector y = x;
        y[i] += p;
        const double scale = 1.0 + std::abs(potential.energy(x));
        per.worst = std::max(per.worst, std::abs(potential.energy(y) - potential.energy(x)) / scale);
        per.worst = std::max(per.worst, (potential.gradient(y) - potential.gradient(x)).norm() / scale);
      }
    }
    per.passed = per.worst <= per.limit;
    out.push_back(per);
  }

  if (potential.name() == "lennard_jones") {
    CheckResult zero{"translation_zero_mode", true, 0.0, 1e-8};
    for (int k = 0; k < opt.points; ++k) {
      const Vector x = random_point(potential, rng);
      const Matrix H = potential.hessian(x);
      for (int axis = 0; axis < 2; ++axis) {
        Vector t = Vector::Zero(d);
        for (int i = axis; i < d; i += 2) t[i] = 1.0;
        zero.worst = std::max(zero.worst, (H * t).norm() / std::max(1.0, H.norm()));
      }
    }
    zero.passed = zero.worst <= zero.limit;
    out.push_back(zero);
  }
  return out;
}

// Test hook: a copy of `potential` whose gradient is scaled by (1 + relative_error).
inline Potential with_corrupted_gradient(const Potential &potential, double relative_error) {
  return Potential::from_functions(
      potential.name(), potential.dimension(), potential.geometry(),
      [potential](const Vector &x) { return potential.energy(x); },
      [potential, relative_error](const Vector &x) { return Vector((1.0 + relative_error) * potential.gradient(x)); },
      [potential](const Vector &x) { return potential.hessian(x); });
}

} // namespace switchdyn

#pragma once

// Deterministic drift fields of the Langevin, saddle-search and gentlest-ascent dynamics.
//
// Every function here is pure. Noise terms and Ito corrections are applied by the integrator.

#include <cmath>
#include <string>
#include <string_view>

#include "switchdyn/errors.hpp"
#include "switchdyn/landscape.hpp"
#include "switchdyn/spectral.hpp"

namespace switchdyn {

// Cut function applied to the spectral gap: none = constant 2, step = 1 + 1{r > r*},
// linear = 1 + min(r / r*, 1).
struct RegularizerSpec {
  enum class Kind { none, step, linear };

  Kind kind = Kind::none;
  double r_star = 1.0;

  static RegularizerSpec none() { return {}; }
  static RegularizerSpec step(double r_star) { return checked({Kind::step, r_star}); }
  static RegularizerSpec linear(double r_star) { return checked({Kind::linear, r_star}); }

  static RegularizerSpec checked(RegularizerSpec s) {
    if (s.kind != Kind::none && !(s.r_star > 0.0)) {
      throw ParameterError("regularizer threshold r_star must be positive");
    }
    return s;
  }

  // Weight a in [1, 2] given the (non-negative) gap.
  double weight(double gap) const {
    switch (kind) {
    case Kind::none:
      return 2.0;
    case Kind::step:
      return gap > r_star ? 2.0 : 1.0;
    case Kind::linear:
      return gap > r_star ? 2.0 : 1.0 + gap / r_star;
    }
    return 2.0;
  }

  friend bool operator==(const RegularizerSpec &, const RegularizerSpec &) = default;
};

enum class DriftKind { langevin, isd, isd_regularized, gad, gad_two_vector };

inline std::string_view to_string(DriftKind k) {
  switch (k) {
  case DriftKind::langevin:
    return "langevin";
  case DriftKind::isd:
    return "isd";
  case DriftKind::isd_regularized:
    return "isd_regularized";
  case DriftKind::gad:
    return "gad";
  case DriftKind::gad_two_vector:
    return "gad_two_vector";
  }
  return "?";
}

inline std::string_view to_string(RegularizerSpec::Kind k) {
  switch (k) {
  case RegularizerSpec::Kind::none:
    return "none";
  case RegularizerSpec::Kind::step:
    return "step";
  case RegularizerSpec::Kind::linear:
    return "linear";
  }
  return "?";
}

inline bool uses_direction(DriftKind k) { return k == DriftKind::gad || k == DriftKind::gad_two_vector; }

// Unit-norm tolerance for direction vectors passed to the GAD drifts.
inline constexpr double kUnitTolerance = 1e-8;

namespace detail {

inline void require_unit(const Vector &v, const char *what) {
  if (!(std::abs(v.norm() - 1.0) <= kUnitTolerance)) {
    throw ContractError(std::string(what) + " must be a unit vector");
  }
}

} // namespace detail

// (I - v v^T) w. Computed as w - v (v . w).
inline Vector tangent_project(const Vector &v, const Vector &w) {
  detail::require_unit(v, "projection direction");
  return w - v * v.dot(w);
}

// H_0(x) = -grad U(x).
inline Vector drift_langevin(const Potential &potential, const Vector &x) { return -potential.gradient(x); }

// -(I - 2 v v^T) g: the gradient with its component along v reversed.
inline Vector reflected_descent(const Vector &gradient, const Eigen::Ref<const Vector> &v) {
  return -(gradient - 2.0 * v * v.dot(gradient));
}

// H_1(x) = -(I - 2 v_1 v_1^T) grad U(x), with v_1 the lowest Hessian eigenvector.
inline Vector drift_isd(const Potential &potential, const Vector &x) {
  const SpectralResult spec = smallest_eigenpairs(potential.hessian(x), 1);
  return reflected_descent(potential.gradient(x), spec.vector(0));
}

// Regularized saddle drift.
//
//   -(I - a v_1 v_1^T - (2 - a) v_2 v_2^T) grad U,   a = f(lambda_2 - lambda_1).
//
// For a = 2 this is the plain reflection. For a = 1 the gradient is projected onto span(v_1, v_2)^perp.
inline Vector regularized_descent(const Vector &gradient, const Eigen::Ref<const Vector> &v1,
                                  const Eigen::Ref<const Vector> &v2, double a) {
  Vector out = gradient - a * v1 * v1.dot(gradient);
  if (a != 2.0) {
    out -= (2.0 - a) * v2 * v2.dot(gradient);
  }
  return -out;
}

inline Vector drift_isd_regularized(const Potential &potential, const Vector &x, const RegularizerSpec &spec) {
  if (potential.dimension() < 2) {
    throw ContractError("regularized saddle drift needs dimension >= 2");
  }
  const SpectralResult eig = smallest_eigenpairs(potential.hessian(x), 2);
  const double a = spec.weight(spectral_gap(eig));
  return regularized_descent(potential.gradient(x), eig.vector(0), eig.vector(1), a);
}

struct GadDrift {
  Vector dx;
  Vector dv;
};

// Deterministic part of the single-direction gentlest ascent dynamics.
inline GadDrift drift_gad(const Potential &potential, const Vector &x, const Vector &v, double eta) {
  detail::require_unit(v, "GAD direction");
  if (!(eta > 0.0)) {
    throw ContractError("GAD relaxation time eta must be positive");
  }
  const Vector g = potential.gradient(x);
  const Vector hv = potential.hessian(x) * v;
  return {reflected_descent(g, v), -(1.0 / eta) * (hv - v * v.dot(hv))};
}

struct GadPairDrift {
  Vector dx;
  Vector dv1;
  Vector dv2;
};

// Orthonormality tolerance for the direction pair of the two-vector dynamics.
inline constexpr double kOrthogonalityTolerance = 1e-8;

// Deterministic part of the two-direction gentlest ascent dynamics.
//
//   dv1 = -(1/eta) (I - v1 v1^T) H v1
//   dv2 = -(1/eta) (I - v2 v2^T - 2 v1 v1^T) H v2
//
// The x drift is the regularized reflection built from (v1, v2), with the gap replaced by the difference of
// Rayleigh quotients v2^T H v2 - v1^T H v1 (clamped at zero).
inline GadPairDrift drift_gad_two_vector(const Potential &potential, const Vector &x, const Vector &v1,
                                         const Vector &v2, double eta, const RegularizerSpec &spec) {
  detail::require_unit(v1, "first GAD direction");
  detail::require_unit(v2, "second GAD direction");
  if (!(std::abs(v1.dot(v2)) <= kOrthogonalityTolerance)) {
    throw ContractError("GAD directions must be orthogonal");
  }
  if (!(eta > 0.0)) {
    throw ContractError("GAD relaxation time eta must be positive");
  }
  const Vector g = potential.gradient(x);
  const Matrix h = potential.hessian(x);
  const Vector hv1 = h * v1;
  const Vector hv2 = h * v2;
  const double gap = std::max(0.0, v2.dot(hv2) - v1.dot(hv1));
  const double a = spec.weight(gap);

  GadPairDrift out;
  out.dx = regularized_descent(g, v1, v2, a);
  out.dv1 = -(1.0 / eta) * (hv1 - v1 * v1.dot(hv1));
  out.dv2 = -(1.0 / eta) * (hv2 - v2 * v2.dot(hv2) - 2.0 * v1 * v1.dot(hv2));
  return out;
}

} // namespace switchdyn

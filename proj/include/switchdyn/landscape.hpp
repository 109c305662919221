#pragma once

// Energy landscapes with analytic gradients and Hessians.
//
// A Potential is an immutable, cheaply copyable handle around a model that evaluates U, grad U and the
// Hessian of U. Four models are provided: the two-mode Gaussian mixture (plain or periodized on a torus),
// the double well with singular lines, and the two-dimensional Lennard-Jones cluster.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "switchdyn/errors.hpp"

namespace switchdyn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct DomainGeometry {
  enum class Kind { euclidean, torus };

  Kind kind = Kind::euclidean;
  double period = 0.0; // Per-coordinate period, only meaningful for a torus.

  static DomainGeometry euclidean() { return {}; }

  static DomainGeometry torus(double period) {
    if (!(period > 0.0) || !std::isfinite(period)) {
      throw ParameterError("torus period must be positive and finite");
    }
    return {Kind::torus, period};
  }

  bool is_torus() const noexcept { return kind == Kind::torus; }
};

// Interface implemented by every concrete landscape.
class PotentialModel {
public:
  virtual ~PotentialModel() = default;

  virtual int dimension() const noexcept = 0;
  virtual DomainGeometry geometry() const noexcept = 0;
  virtual std::string name() const = 0;

  virtual double energy(const Vector &x) const = 0;
  virtual Vector gradient(const Vector &x) const = 0;
  virtual Matrix hessian(const Vector &x) const = 0;
};

// Value-semantic handle to a PotentialModel.
//
// Copies share the underlying (immutable) model, so a Potential can be handed to any number of worker
// threads.
class Potential {
public:
  using EnergyFn = std::function<double(const Vector &)>;
  using GradientFn = std::function<Vector(const Vector &)>;
  using HessianFn = std::function<Matrix(const Vector &)>;

  explicit Potential(std::shared_ptr<const PotentialModel> model) : model_(std::move(model)) {
    if (!model_) {
      throw ParameterError("potential model must not be null");
    }
  }

  // Build a potential from plain callables, e.g. for test landscapes or fault injection.
  static Potential from_functions(std::string name, int dimension, DomainGeometry geometry, EnergyFn energy,
                                  GradientFn gradient, HessianFn hessian);

  int dimension() const noexcept { return model_->dimension(); }
  DomainGeometry geometry() const noexcept { return model_->geometry(); }
  std::string name() const { return model_->name(); }

  double energy(const Vector &x) const {
    check_size(x);
    return model_->energy(x);
  }
  Vector gradient(const Vector &x) const {
    check_size(x);
    return model_->gradient(x);
  }
  Matrix hessian(const Vector &x) const {
    check_size(x);
    return model_->hessian(x);
  }

private:
  void check_size(const Vector &x) const {
    if (x.size() != model_->dimension()) {
      throw InputError("point has dimension " + std::to_string(x.size()) + ", potential expects " +
                       std::to_string(model_->dimension()));
    }
  }

  std::shared_ptr<const PotentialModel> model_;
};

namespace detail {

class FunctionModel final : public PotentialModel {
public:
  FunctionModel(std::string name, int dim, DomainGeometry geo, Potential::EnergyFn e, Potential::GradientFn g,
                Potential::HessianFn h)
      : name_(std::move(name)), dim_(dim), geo_(geo), e_(std::move(e)), g_(std::move(g)), h_(std::move(h)) {}

  int dimension() const noexcept override { return dim_; }
  DomainGeometry geometry() const noexcept override { return geo_; }
  std::string name() const override { return name_; }
  double energy(const Vector &x) const override { return e_(x); }
  Vector gradient(const Vector &x) const override { return g_(x); }
  Matrix hessian(const Vector &x) const override { return h_(x); }

private:
  std::string name_;
  int dim_;
  DomainGeometry geo_;
  Potential::EnergyFn e_;
  Potential::GradientFn g_;
  Potential::HessianFn h_;
};

} // namespace detail

inline Potential Potential::from_functions(std::string name, int dimension, DomainGeometry geometry,
                                           EnergyFn energy, GradientFn gradient, HessianFn hessian) {
  if (dimension < 1) {
    throw ParameterError("potential dimension must be positive");
  }
  if (!energy || !gradient || !hessian) {
    throw ParameterError("potential callables must all be set");
  }
  return Potential(std::make_shared<detail::FunctionModel>(std::move(name), dimension, geometry, std::move(energy),
                                                           std::move(gradient), std::move(hessian)));
}

// ---------------------------------------------------------------------------------------------------------------
// Gaussian mixture

struct MixtureParams {
  double m_x = 4.0;
  double m_y = 0.0;
  double s_x = 3.0;
  double s_y = 1.0;
  std::optional<double> L; // Periodization length; empty selects the Euclidean mixture.
};

namespace detail {

// U = -log(exp(a)/2 + exp(b)/2) where a, b are the (negated) quadratic or sin^2 forms of the two modes.
// Derivatives follow from the softmax weights w_a, w_b of (a, b):
//
//   grad U = -(w_a grad a + w_b grad b)
//   hess U = -(w_a hess a + w_b hess b + w_a w_b (grad a - grad b)(grad a - grad b)^T)
class MixtureModel final : public PotentialModel {
public:
  explicit MixtureModel(const MixtureParams &p) : p_(p) {
    if (!(p.s_x > 0.0) || !(p.s_y > 0.0)) {
      throw ParameterError("mixture stiffnesses s_x and s_y must be positive");
    }
    if (p.L && !(*p.L > 0.0)) {
      throw ParameterError("mixture periodization length L must be positive");
    }
    if (!std::isfinite(p.m_x) || !std::isfinite(p.m_y) || !std::isfinite(p.s_x) || !std::isfinite(p.s_y) ||
        (p.L && !std::isfinite(*p.L))) {
      throw ParameterError("mixture parameters must be finite");
    }
  }

  int dimension() const noexcept override { return 2; }

  DomainGeometry geometry() const noexcept override {
    if (p_.L) {
      return {DomainGeometry::Kind::torus, M_PI * *p_.L};
    }
    return DomainGeometry::euclidean();
  }

  std::string name() const override { return p_.L ? "periodized_mixture" : "mixture"; }

  double energy(const Vector &x) const override {
    auto m = modes(x, false);
    return -log_half_sum(m.a, m.b);
  }

  Vector gradient(const Vector &x) const override {
    auto m = modes(x, false);
    auto [wa, wb] = weights(m.a, m.b);
    return -(wa * m.ga + wb * m.gb);
  }

  Matrix hessian(const Vector &x) const override {
    auto m = modes(x, true);
    auto [wa, wb] = weights(m.a, m.b);
    Eigen::Vector2d diff = m.ga - m.gb;
    Eigen::Matrix2d h = -(wa * m.ha + wb * m.hb + (wa * wb) * diff * diff.transpose());
    h(0, 1) = h(1, 0) = 0.5 * (h(0, 1) + h(1, 0));
    return h;
  }

private:
  struct Modes {
    double a, b;
    Eigen::Vector2d ga, gb;
    Eigen::Matrix2d ha, hb;
  };

  // One-dimensional building block: value, first and second derivative of -k q(u) where q(u) = u^2 in the
  // Euclidean case and L^2 sin^2(u/L) in the periodized case.
  void form(double u, double k, double &val, double &d1, double &d2) const {
    if (p_.L) {
      const double L = *p_.L;
      const double s = std::sin(u / L);
      val = -k * L * L * s * s;
      d1 = -k * L * std::sin(2.0 * u / L);
      d2 = -2.0 * k * std::cos(2.0 * u / L);
    } else {
      val = -k * u * u;
      d1 = -2.0 * k * u;
      d2 = -2.0 * k;
    }
  }

  Modes modes(const Vector &x, bool second) const {
    Modes m{};
    double ax, ax1, ax2, ay, ay1, ay2, bx, bx1, bx2, by, by1, by2;
    form(x[0], 1.0, ax, ax1, ax2);
    form(x[1], 1.0, ay, ay1, ay2);
    form(x[0] - p_.m_x, p_.s_x, bx, bx1, bx2);
    form(x[1] - p_.m_y, p_.s_y, by, by1, by2);
    m.a = ax + ay;
    m.b = bx + by;
    m.ga = {ax1, ay1};
    m.gb = {bx1, by1};
    if (second) {
      m.ha = Eigen::Vector2d(ax2, ay2).asDiagonal();
      m.hb = Eigen::Vector2d(bx2, by2).asDiagonal();
    }
    return m;
  }

  static double log_half_sum(double a, double b) {
    const double hi = std::max(a, b);
    return hi + std::log(0.5 * std::exp(a - hi) + 0.5 * std::exp(b - hi));
  }

  static std::pair<double, double> weights(double a, double b) {
    const double hi = std::max(a, b);
    const double ea = std::exp(a - hi);
    const double eb = std::exp(b - hi);
    const double total = ea + eb;
    return {ea / total, eb / total};
  }

  MixtureParams p_;
};

} // namespace detail

// Two-mode Gaussian mixture on R^2, or its periodized version on the torus of period pi*L when L is set.
inline Potential make_mixture(const MixtureParams &params) {
  return Potential(std::make_shared<detail::MixtureModel>(params));
}

// ---------------------------------------------------------------------------------------------------------------
// Double well with singular lines

namespace detail {

class DoubleWellModel final : public PotentialModel {
public:
  int dimension() const noexcept override { return 2; }
  DomainGeometry geometry() const noexcept override { return DomainGeometry::euclidean(); }
  std::string name() const override { return "double_well"; }

  double energy(const Vector &p) const override {
    const double w = 1.0 - p[0] * p[0];
    return w * w + 2.0 * p[1] * p[1];
  }

  Vector gradient(const Vector &p) const override {
    Vector g(2);
    g << -4.0 * p[0] * (1.0 - p[0] * p[0]), 4.0 * p[1];
    return g;
  }

  Matrix hessian(const Vector &p) const override {
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = -4.0 + 12.0 * p[0] * p[0];
    h(1, 1) = 4.0;
    return h;
  }
};

} // namespace detail

// U(x, y) = (1 - x^2)^2 + 2 y^2. Minima at (+-1, 0), saddle at the origin.
inline Potential make_double_well() { return Potential(std::make_shared<detail::DoubleWellModel>()); }

// ---------------------------------------------------------------------------------------------------------------
// Lennard-Jones cluster

struct ClusterParams {
  int n_particles = 7;
  int spatial_dim = 2; // only 2 is supported
};

namespace detail {

inline constexpr double kMinPairDistance = 1e-12;

// W(r) = 4 (r^-12 - r^-6) and its first two derivatives.
struct PairTerms {
  double w, dw, d2w;
};

inline PairTerms lj_pair(double r) {
  const double ir = 1.0 / r;
  const double ir2 = ir * ir;
  const double ir6 = ir2 * ir2 * ir2;
  const double ir12 = ir6 * ir6;
  return {4.0 * (ir12 - ir6), 4.0 * (-12.0 * ir12 + 6.0 * ir6) * ir, 4.0 * (156.0 * ir12 - 42.0 * ir6) * ir2};
}

class LennardJonesModel final : public PotentialModel {
public:
  explicit LennardJonesModel(const ClusterParams &p) : n_(p.n_particles) {
    if (p.n_particles < 2) {
      throw ParameterError("Lennard-Jones cluster needs at least 2 particles");
    }
    if (p.spatial_dim != 2) {
      throw ParameterError("only two-dimensional Lennard-Jones clusters are supported");
    }
  }

  int dimension() const noexcept override { return 2 * n_; }
  DomainGeometry geometry() const noexcept override { return DomainGeometry::euclidean(); }
  std::string name() const override { return "lennard_jones"; }

  double energy(const Vector &x) const override {
    double u = 0.0;
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        u += lj_pair(distance(x, i, j)).w;
      }
    }
    return u;
  }

  Vector gradient(const Vector &x) const override {
    Vector g = Vector::Zero(2 * n_);
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        const Eigen::Vector2d d = x.segment<2>(2 * i) - x.segment<2>(2 * j);
        const double r = checked_norm(d, i, j);
        const Eigen::Vector2d f = (lj_pair(r).dw / r) * d;
        g.segment<2>(2 * i) += f;
        g.segment<2>(2 * j) -= f;
      }
    }
    return g;
  }

  Matrix hessian(const Vector &x) const override {
    Matrix h = Matrix::Zero(2 * n_, 2 * n_);
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        const Eigen::Vector2d d = x.segment<2>(2 * i) - x.segment<2>(2 * j);
        const double r = checked_norm(d, i, j);
        const PairTerms t = lj_pair(r);
        const Eigen::Vector2d u = d / r;
        const Eigen::Matrix2d uu = u * u.transpose();
        const Eigen::Matrix2d block = t.d2w * uu + (t.dw / r) * (Eigen::Matrix2d::Identity() - uu);
        h.block<2, 2>(2 * i, 2 * i) += block;
        h.block<2, 2>(2 * j, 2 * j) += block;
        h.block<2, 2>(2 * i, 2 * j) -= block;
        h.block<2, 2>(2 * j, 2 * i) -= block;
      }
    }
    return h;
  }

private:
  static double checked_norm(const Eigen::Vector2d &d, int i, int j) {
    const double r = d.norm();
    if (!(r >= kMinPairDistance)) {
      throw EvaluationError("particles " + std::to_string(i) + " and " + std::to_string(j) +
                            " coincide (distance " + std::to_string(r) + ")");
    }
    return r;
  }

  double distance(const Vector &x, int i, int j) const {
    return checked_norm(x.segment<2>(2 * i) - x.segment<2>(2 * j), i, j);
  }

  int n_;
};

} // namespace detail

// Sum of 4 (r^-12 - r^-6) over all particle pairs; particle i lives at coordinates (2i, 2i+1).
inline Potential make_lennard_jones(const ClusterParams &params) {
  return Potential(std::make_shared<detail::LennardJonesModel>(params));
}

// ---------------------------------------------------------------------------------------------------------------

// Canonical representative of x: identity on R^d, each coordinate reduced into [0, period) on a torus.
inline Vector wrap_to_domain(const Vector &x, const DomainGeometry &geometry) {
  if (!geometry.is_torus()) {
    return x;
  }
  const double p = geometry.period;
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double r = std::fmod(x[i], p);
    if (r < 0.0) {
      r += p;
    }
    if (r >= p) { // -tiny + p rounds up to p
      r = 0.0;
    }
    y[i] = r;
  }
  return y;
}

// Shortest displacement from b to a, using the minimum image on a torus.
inline Vector displacement(const Vector &a, const Vector &b, const DomainGeometry &geometry) {
  Vector d = a - b;
  if (geometry.is_torus()) {
    const double p = geometry.period;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      d[i] -= p * std::round(d[i] / p);
    }
  }
  return d;
}

// The hexagon-plus-centre arrangement of seven particles at pair distance 2^(1/6), scaled by `spacing`.
inline Vector lj7_hexagon(double spacing = std::pow(2.0, 1.0 / 6.0)) {
  Vector x = Vector::Zero(14);
  for (int k = 0; k < 6; ++k) {
    const double angle = M_PI / 3.0 * k;
    x[2 * (k + 1)] = spacing * std::cos(angle);
    x[2 * (k + 1) + 1] = spacing * std::sin(angle);
  }
  return x;
}

} // namespace switchdyn

#pragma once

// Smallest eigenpairs of small dense symmetric matrices with a reproducible eigenvector choice.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "switchdyn/errors.hpp"
#include "switchdyn/landscape.hpp"

namespace switchdyn {

struct SpectralResult {
  Vector eigenvalues;  // Ascending.
  Matrix eigenvectors; // Column i pairs with eigenvalues[i]; orthonormal, sign-canonical.

  int count() const noexcept { return static_cast<int>(eigenvalues.size()); }

  auto vector(int i) const { return eigenvectors.col(i); }
};

// Magnitudes within this relative distance count as tied, so rounding cannot flip the sign choice.
inline constexpr double kSignTieTolerance = 1e-12;

// Flip v so that its largest-magnitude component is positive; ties go to the lowest index.
inline void canonicalize_sign(Eigen::Ref<Vector> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best]) * (1.0 + kSignTieTolerance)) {
      best = i;
    }
  }
  if (v[best] < 0.0) {
    v = -v;
  }
}

// The k smallest eigenpairs of a symmetric matrix.
//
// The input is symmetrized as (H + H^T) / 2 before a dense self-adjoint decomposition (Householder
// tridiagonalization followed by implicit symmetric QR). Identical inputs yield bit-identical outputs.
inline SpectralResult smallest_eigenpairs(const Matrix &h, int k) {
  if (h.rows() != h.cols() || h.rows() == 0) {
    throw InputError("smallest_eigenpairs expects a non-empty square matrix");
  }
  if (k < 1 || k > h.rows()) {
    throw ContractError("eigenpair count k=" + std::to_string(k) + " outside [1, " + std::to_string(h.rows()) +
                        "]");
  }
  if (!h.allFinite()) {
    throw InputError("matrix has non-finite entries");
  }

  const Matrix sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw InputError("symmetric eigensolver did not converge");
  }

  SpectralResult out;
  out.eigenvalues = solver.eigenvalues().head(k);
  out.eigenvectors = solver.eigenvectors().leftCols(k);
  for (int i = 0; i < k; ++i) {
    canonicalize_sign(out.eigenvectors.col(i));
  }
  return out;
}

// lambda_2 - lambda_1, clamped at zero against rounding.
inline double spectral_gap(const SpectralResult &result) {
  if (result.count() < 2) {
    throw ContractError("spectral gap needs at least two eigenpairs");
  }
  return std::max(0.0, result.eigenvalues[1] - result.eigenvalues[0]);
}

} // namespace switchdyn

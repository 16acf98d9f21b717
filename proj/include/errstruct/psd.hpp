#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "errstruct/types.hpp"

namespace errstruct {

// Eigenvalues below -kPsdTolerance make a covariance matrix invalid; anything
// between that and 0 is rounding and gets clipped.
inline constexpr double kPsdTolerance = 1e-10;

template <typename Scalar>
struct PsdProjection {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix;
  Scalar min_eigenvalue;
  // Largest amount an eigenvalue was raised by clipping.
  Scalar clipped;
};

// Mirrors the upper triangle onto the lower one.
template <typename Derived>
void mirror_upper(Eigen::MatrixBase<Derived>& m) {
  m.template triangularView<Eigen::StrictlyLower>() = m.transpose();
}

// Symmetrizes, checks the spectrum against the tolerance and floors negative
// eigenvalues at zero. The input is returned untouched when nothing needs
// clipping, so exact inputs stay exact.
template <typename Derived>
PsdProjection<typename Derived::Scalar> project_psd(const Eigen::MatrixBase<Derived>& input,
                                                    const char* what) {
  using Scalar = typename Derived::Scalar;
  using MatrixS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  MatrixS m = input;
  mirror_upper(m);
  if (!m.allFinite()) throw DomainError(std::string(what) + " has non-finite entries");
  if (m.rows() == 0) return {m, Scalar(0), Scalar(0)};
  Eigen::SelfAdjointEigenSolver<MatrixS> es(m);
  const Scalar min_ev = es.eigenvalues().minCoeff();
  if (min_ev < Scalar(-kPsdTolerance)) {
    throw StructureInvalid(std::string(what) + " is not positive semidefinite (min eigenvalue " +
                               std::to_string(static_cast<double>(min_ev)) + ")",
                           static_cast<double>(min_ev));
  }
  if (min_ev >= Scalar(0)) return {m, min_ev, Scalar(0)};
  auto values = es.eigenvalues().cwiseMax(Scalar(0));
  MatrixS clipped = es.eigenvectors() * values.asDiagonal() * es.eigenvectors().transpose();
  mirror_upper(clipped);
  return {clipped, min_ev, -min_ev};
}

// Symmetric square root S with S*S = m, for PSD m (singular allowed).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> psd_sqrt(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using MatrixS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<MatrixS> es{MatrixS(m)};
  auto roots = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  MatrixS s = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
  mirror_upper(s);
  return s;
}

}  // namespace errstruct

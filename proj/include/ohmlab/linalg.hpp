// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>

namespace ohmlab {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};

/// Largest absolute entry.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const CMatrix& m) { return max_abs(m - m.adjoint()); }

inline double unitarity_defect(const CMatrix& u) {
  return max_abs(u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols()));
}

/// Eigendecomposition of a Hermitian matrix, h = V diag(ε) V†, eigenvalues ascending.
struct HermitianEigen {
  RVector values;
  CMatrix vectors;

  explicit HermitianEigen(const CMatrix& h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
    values = solver.eigenvalues();
    vectors = solver.eigenvectors();
  }

  /// V diag(g(ε)) V† for a scalar function g returning real or complex values.
  template <typename F>
  CMatrix apply(F&& g) const {
    const Eigen::Index n = values.size();
    CVector d(n);
    for (Eigen::Index k = 0; k < n; ++k) d(k) = cplx(g(values(k)));
    return vectors * d.asDiagonal() * vectors.adjoint();
  }

  /// exp(-i t h)
  CMatrix propagator(double t) const {
    return apply([t](double e) { return std::exp(cplx(0.0, -t * e)); });
  }

  double spectral_radius() const {
    if (values.size() == 0) return 0.0;
    return std::max(std::abs(values(0)), std::abs(values(values.size() - 1)));
  }
};

/// Re Tr(a b) without forming the product.
inline cplx trace_product(const CMatrix& a, const CMatrix& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

}  // namespace ohmlab

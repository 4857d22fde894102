// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "linalg.hpp"
#include "tolerances.hpp"

#include <cmath>
#include <stdexcept>

namespace ohmlab {

struct KmsParameters {
  double beta = 1.0;  // inverse temperature
  double mu = 0.0;    // chemical potential
};

/// Fermi function 1/(1 + e^x), evaluated without overflow for either sign of x.
inline double logistic(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

inline double fermi(double energy, const KmsParameters& p) {
  return logistic(p.beta * (energy - p.mu));
}

/// One-particle reduction of the quasi-free KMS state: ρ₁ = f(h) with the
/// eigendata of h kept alongside, since every later two-point computation
/// works in that basis.
struct QuasiFreeState {
  CMatrix density;
  CMatrix hamiltonian;
  KmsParameters params;
  HermitianEigen eigen;
  RVector occupations;  // f(ε_k), aligned with eigen.values
  bool conditioning_warning = false;

  int size() const { return static_cast<int>(density.rows()); }
};

inline QuasiFreeState fermi_dirac_symbol(const CMatrix& h, const KmsParameters& params) {
  if (!(params.beta > 0.0) || !std::isfinite(params.beta))
    throw std::invalid_argument("inverse temperature must be finite and > 0");
  if (h.rows() != h.cols()) throw std::invalid_argument("hamiltonian must be square");

  HermitianEigen eig(h);
  RVector occ(eig.values.size());
  for (Eigen::Index k = 0; k < occ.size(); ++k) occ(k) = fermi(eig.values(k), params);
  CMatrix rho = eig.vectors * occ.cast<cplx>().asDiagonal() * eig.vectors.adjoint();
  const bool warn = params.beta * eig.spectral_radius() > tol::kLogisticOverflow;
  return QuasiFreeState{std::move(rho), h, params, std::move(eig), std::move(occ), warn};
}

/// ‖ρ₁ − e^{−β(h−μ)}(1 − ρ₁)‖_max, the one-particle KMS identity.
/// ‖min(1, e^{βK}) (ρ − e^{−βK}(1 − ρ))‖ with K = h − μ; the bounded prefactor is
/// invertible, so the residual vanishes exactly when the KMS relation holds.
inline double kms_residual(const QuasiFreeState& s) {
  const double beta = s.params.beta;
  const double mu = s.params.mu;
  const CMatrix left = s.eigen.apply([=](double e) { return e >= mu ? 1.0 : std::exp(beta * (e - mu)); });
  const CMatrix right = s.eigen.apply([=](double e) { return e >= mu ? std::exp(-beta * (e - mu)) : 1.0; });
  const CMatrix one = CMatrix::Identity(s.size(), s.size());
  return max_abs(left * s.density - right * (one - s.density));
}

inline double energy_expectation(const QuasiFreeState& s, const CMatrix& h) {
  if (h.rows() != s.density.rows() || h.cols() != s.density.cols())
    throw std::invalid_argument("shape mismatch between state and hamiltonian");
  return trace_product(s.density, h).real();
}

inline double particle_number(const QuasiFreeState& s) { return s.density.trace().real(); }

}  // namespace ohmlab

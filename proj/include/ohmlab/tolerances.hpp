// SPDX-License-Identifier: Apache-2.0
#pragma once

// Numerical contracts shared by all modules. Tests and the acceptance suite
// read these values instead of repeating literals.
namespace ohmlab::tol {

inline constexpr double kHermiticity = 0.0;        // exact construction
inline constexpr double kGaugeSpectrum = 1e-12;    // open-chain gauge removal
inline constexpr double kCommutator = 1e-12;       // [ρ₁, h] in max-norm
inline constexpr double kKmsResidual = 1e-10;
inline constexpr double kUnitarityDrift = 1e-8;
inline constexpr double kSpectrumInvariance = 1e-10;
inline constexpr double kPassivityRelative = 1e-9;
inline constexpr double kQuadratureRelative = 1e-6;  // work quadrature vs energy difference
inline constexpr double kQuadraticFormFloor = -1e-10;
inline constexpr double kWickEquivalence = 1e-10;
inline constexpr double kKernelSymmetry = 1e-10;
inline constexpr double kAtomWeightFloor = -1e-12;
inline constexpr double kJouleRelative = 1e-4;
inline constexpr double kJouleFormsRelative = 1e-12;
inline constexpr double kBochnerTotalVariation = 0.02;
inline constexpr double kBochnerLeakage = 1e-3;
inline constexpr double kRemainderSlope = 2.8;
inline constexpr double kUniformityRelative = 0.20;
inline constexpr double kSupportBucketRelative = 1e-6;
inline constexpr double kLogisticOverflow = 700.0;

}  // namespace ohmlab::tol

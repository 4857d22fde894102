// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dynamics.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ohmlab {

// ---------------------------------------------------------------------------
// Current observable

/// Paramagnetic current I(θ) = ∂h/∂θ and diamagnetic term K(θ) = ∂²h/∂θ².
struct CurrentObservable {
  CMatrix paramagnetic;
  CMatrix diamagnetic;
};

inline CurrentObservable current_observable(const LatticeBox& box, double theta) {
  return {current_matrix(box, theta), diamagnetic_matrix(box, theta)};
}

// ---------------------------------------------------------------------------
// Work of a cyclic process

/// Work L done on the system by a cyclic process.
///
/// Two routes are kept: the energy difference Tr(D(end)h) − Tr(ρ₁h) and the
/// trapezoid quadrature of Tr(D(t)∂ₜh(t)). Each is evaluated on the grid and
/// on its 2× refinement; `work` and `work_quadrature` are the Richardson
/// extrapolations (the stepper is symmetric, so the error series is even in
/// Δt). `work_raw` is the energy route on the finest grid, i.e. the exact work
/// of the discrete piecewise-constant process.
struct WorkResult {
  double work = 0.0;
  double work_quadrature = 0.0;
  double work_raw = 0.0;
  double work_quadrature_raw = 0.0;
  double initial_energy = 0.0;
  double energy_scale = 0.0;
  double strength = 0.0;
  std::uint64_t seed = 0;
  TimeGrid grid;
  double max_unitarity_defect = 0.0;

  /// |work − work_quadrature| / max(|work|, tiny)
  double route_discrepancy() const {
    const double scale = std::max(std::abs(work), std::numeric_limits<double>::min());
    return std::abs(work - work_quadrature) / scale;
  }

  /// L ≥ −tol·max(|L|, E_scale) for both the raw and extrapolated values.
  bool passive(double tol_rel = tol::kPassivityRelative) const {
    const double slack = tol_rel * std::max(std::abs(work), energy_scale);
    return work_raw >= -slack && work >= -slack;
  }
};

struct WorkOptions {
  bool richardson = true;
};

namespace detail {

struct WorkPass {
  double energy = 0.0;
  double quadrature = 0.0;
  double defect = 0.0;
};

template <Drive D>
WorkPass full_pass(const D& drive, const QuasiFreeState& state, const TimeGrid& grid) {
  WorkPass out;
  const double t0 = drive.support_start();
  const double t1 = drive.support_end();
  const CMatrix h_end = drive.hamiltonian(grid.end());
  CMatrix u_final;
  out.defect = propagate(drive, grid, [&](int k, double t, const CMatrix& u) {
    if (k == grid.steps) u_final = u;
    if (t <= t0 || t >= t1) return;
    const CMatrix rate = drive.hamiltonian_rate(t);
    if (max_abs(rate) == 0.0) return;
    out.quadrature += grid.step * trace_product(state.density, u.adjoint() * rate * u).real();
  });
  const CMatrix d_final = u_final * state.density * u_final.adjoint();
  out.energy = trace_product(d_final, h_end).real() - trace_product(state.density, h_end).real();
  return out;
}

}  // namespace detail

/// Work for any drive whose initial Hamiltonian is `state.hamiltonian`.
template <Drive D>
WorkResult total_work(const D& drive, const QuasiFreeState& state, const TimeGrid& grid,
                      WorkOptions options = {}) {
  const CMatrix h_start = drive.hamiltonian(grid.start);
  const CMatrix h_end = drive.hamiltonian(grid.end());
  if (max_abs(h_start - h_end) != 0.0)
    throw NumericalContractError("process is not cyclic: h differs at the grid ends");
  if (max_abs(h_start - state.hamiltonian) > 1e-12 * (1.0 + max_abs(h_start)))
    throw std::invalid_argument("state was not built from the unperturbed hamiltonian");

  WorkResult r;
  r.grid = grid;
  r.initial_energy = energy_expectation(state, h_start);
  r.energy_scale = state.size() * std::max(state.eigen.spectral_radius(), 1.0);

  const auto coarse = detail::full_pass(drive, state, grid);
  if (!options.richardson) {
    r.work = r.work_raw = coarse.energy;
    r.work_quadrature = r.work_quadrature_raw = coarse.quadrature;
    r.max_unitarity_defect = coarse.defect;
    return r;
  }
  const auto fine = detail::full_pass(drive, state, grid.refined(2));
  r.work_raw = fine.energy;
  r.work_quadrature_raw = fine.quadrature;
  r.work = (4.0 * fine.energy - coarse.energy) / 3.0;
  r.work_quadrature = (4.0 * fine.quadrature - coarse.quadrature) / 3.0;
  r.max_unitarity_defect = std::max(coarse.defect, fine.defect);
  return r;
}

inline WorkResult total_work(const LatticeBox& box, const DisorderField& disorder,
                             const QuasiFreeState& state, const CyclicProcess& process,
                             const TimeGrid& grid, WorkOptions options = {}) {
  if (process.strength() == 0.0) {
    WorkResult r;
    r.grid = grid;
    r.initial_energy = energy_expectation(state, state.hamiltonian);
    r.energy_scale = state.size() * std::max(state.eigen.spectral_radius(), 1.0);
    r.seed = disorder.seed;
    return r;
  }
  auto r = total_work(PeierlsDrive(box, disorder, process), state, grid, options);
  r.strength = process.strength();
  r.seed = disorder.seed;
  return r;
}

// ---------------------------------------------------------------------------
// Current–current correlation

/// Transition (j → k) of the current between eigenstates of h:
/// frequency ε_k − ε_j and matrix element |⟨φ_j|I|φ_k⟩|².
struct CurrentTransition {
  int from = 0;
  int to = 0;
  double frequency = 0.0;
  double matrix_element = 0.0;
};

/// All ordered pairs (j, k), j ≠ k, with a nonzero current matrix element.
inline std::vector<CurrentTransition> current_transitions(const QuasiFreeState& state,
                                                          const CMatrix& current) {
  const CMatrix in_eigenbasis = state.eigen.vectors.adjoint() * current * state.eigen.vectors;
  const int n = state.size();
  std::vector<CurrentTransition> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const double m = std::norm(in_eigenbasis(j, k));
      if (m == 0.0) continue;
      out.push_back({j, k, state.eigen.values(k) - state.eigen.values(j), m});
    }
  return out;
}

/// Samples C(mΔt), m = −M..M, of the connected current–current correlation
/// ⟨J(t)J⟩ − ⟨J⟩² of the quasi-free state.
struct CorrelationKernel {
  double step = 0.0;
  int half_count = 0;
  std::vector<cplx> values;

  cplx at(int m) const { return values[static_cast<std::size_t>(m + half_count)]; }
  double time(int m) const { return m * step; }
};

/// By Wick's rule the connected four-point function reduces to
/// C(t) = Tr(ρ₁ I(t) (1−ρ₁) I), I(t) = e^{ith} I e^{−ith}, which in the
/// eigenbasis of h reads Σ_{jk} f_j(1−f_k)|I_jk|² e^{−i(ε_k−ε_j)t}.
/// Diagonal pairs contribute the time-independent f_j(1−f_j)|I_jj|².
inline cplx correlation_at(const QuasiFreeState& state, const CMatrix& in_eigenbasis, double t) {
  const int n = state.size();
  const auto& f = state.occupations;
  const auto& e = state.eigen.values;
  cplx sum = 0.0;
  for (int j = 0; j < n; ++j) {
    if (f(j) == 0.0) continue;
    for (int k = 0; k < n; ++k) {
      const double w = f(j) * (1.0 - f(k)) * std::norm(in_eigenbasis(j, k));
      if (w == 0.0) continue;
      sum += w * std::exp(cplx(0.0, -(e(k) - e(j)) * t));
    }
  }
  return sum;
}

inline CorrelationKernel current_current_correlation(const QuasiFreeState& state,
                                                     const CMatrix& current, double step,
                                                     int half_count) {
  if (!(step > 0.0) || half_count < 1)
    throw std::invalid_argument("correlation grid needs step > 0 and at least one sample");
  const CMatrix in_eigenbasis = state.eigen.vectors.adjoint() * current * state.eigen.vectors;
  CorrelationKernel kernel{step, half_count, std::vector<cplx>(2 * half_count + 1)};
  for (int m = 0; m <= half_count; ++m) {
    const cplx c = correlation_at(state, in_eigenbasis, m * step);
    kernel.values[half_count + m] = c;
    kernel.values[half_count - m] = std::conj(c);
  }
  return kernel;
}

/// Kernel values at arbitrary times (used by the Wick-reduction oracle).
inline std::vector<cplx> current_current_correlation(const QuasiFreeState& state,
                                                     const CMatrix& current,
                                                     std::span<const double> times) {
  const CMatrix in_eigenbasis = state.eigen.vectors.adjoint() * current * state.eigen.vectors;
  std::vector<cplx> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(correlation_at(state, in_eigenbasis, t));
  return out;
}

// ---------------------------------------------------------------------------
// Quadratic heat production

/// Samples of a process shape a(t) on the kernel step, from its support start.
struct ShapeSamples {
  double step = 0.0;
  std::vector<double> value;
  std::vector<double> rate;
};

inline ShapeSamples sample_shape(const CyclicProcess& process, double step) {
  const int count = static_cast<int>(std::ceil((process.end() - process.start()) / step - 1e-9));
  ShapeSamples s{step, std::vector<double>(count + 1), std::vector<double>(count + 1)};
  for (int n = 0; n <= count; ++n) {
    const double t = process.start() + n * step;
    s.value[n] = process.amplitude(t);
    s.rate[n] = process.amplitude_rate(t);
  }
  return s;
}

/// η²-coefficient of |Λ|⁻¹L in the Duhamel expansion:
///
///   Q = (2/|Λ|) ∫dt ȧ(t) ∫_{s}^{t} ds a(s) Im C(t − s).
///
/// The inner integral is a trapezoid sum with the Euler–Maclaurin endpoint
/// correction at s = t (a and ȧ vanish at the support start), so both
/// quadratures are O(Δt⁴) for smooth shapes. The kernel step sets Δt.
inline double heat_production_quadratic(const CorrelationKernel& kernel,
                                        const CyclicProcess& process, int volume) {
  if (volume <= 0) throw std::invalid_argument("volume must be positive");
  const ShapeSamples a = sample_shape(process, kernel.step);
  const int count = static_cast<int>(a.value.size()) - 1;
  if (count > kernel.half_count)
    throw NumericalContractError("correlation kernel does not cover the process duration");

  std::vector<double> im(count + 1);
  for (int m = 0; m <= count; ++m) im[m] = kernel.at(m).imag();
  const double im_slope = kernel.half_count >= 1 ? kernel.at(1).imag() / kernel.step : 0.0;
  const double dt = kernel.step;

  double outer = 0.0;
  for (int n = 1; n < count; ++n) {
    if (a.rate[n] == 0.0) continue;
    // trapezoid over s_m, m = 0..n; the m = n term has Im C(0) = 0
    double inner = 0.5 * a.value[0] * im[n];
    for (int m = 1; m < n; ++m) inner += a.value[m] * im[n - m];
    inner *= dt;
    inner += dt * dt / 12.0 * a.value[n] * im_slope;
    outer += a.rate[n] * inner;
  }
  return 2.0 * outer * dt / volume;
}

// ---------------------------------------------------------------------------
// Remainder scaling

struct ScalingPoint {
  double strength = 0.0;
  double work_per_volume = 0.0;
  double remainder = 0.0;
  bool above_noise = true;
};

struct ScalingResult {
  double heat = 0.0;  // Q
  std::vector<ScalingPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  double noise_floor = 0.0;
  bool at_noise_floor = false;  // fewer than three points above the floor
  int fitted = 0;

  bool passes(double min_slope = tol::kRemainderSlope) const {
    return at_noise_floor || slope >= min_slope;
  }
};

struct ScalingOptions {
  double time_step = 0.0;    // 0 selects default_time_step
  double kernel_step = 0.0;  // 0 selects min(time_step, 0.01)
};

/// Least-squares slope of log|(|Λ|⁻¹L(η) − η²Q)| against log η.
inline ScalingResult remainder_scaling(const LatticeBox& box, const DisorderField& disorder,
                                       const QuasiFreeState& state, const CyclicProcess& shape,
                                       std::span<const double> strengths,
                                       ScalingOptions options = {}) {
  if (strengths.size() < 3) throw std::invalid_argument("need at least three strengths");
  const auto [lo, hi] = std::minmax_element(strengths.begin(), strengths.end());
  if (!(*lo > 0.0)) throw std::invalid_argument("strengths must be > 0 (log undefined at 0)");
  if (*hi / *lo < 10.0 - 1e-9) throw std::invalid_argument("strengths must span a decade");

  const double radius = state.eigen.spectral_radius();
  const double dt = options.time_step > 0.0 ? options.time_step
                                            : default_time_step(shape.omega, radius);
  const double kdt = options.kernel_step > 0.0 ? options.kernel_step : std::min(dt, 0.01);
  const int volume = box.field_bond_count();

  ScalingResult result;
  const int samples = static_cast<int>(std::ceil((shape.end() - shape.start()) / kdt)) + 2;
  const auto kernel =
      current_current_correlation(state, current_matrix(box, 0.0), kdt, samples);
  result.heat = heat_production_quadratic(kernel, shape, volume);

  const TimeGrid grid = make_time_grid(shape, dt);
  const double scale = state.size() * std::max(radius, 1.0);
  result.noise_floor = 1e4 * std::numeric_limits<double>::epsilon() * scale / volume;

  std::vector<double> xs, ys;
  for (double eta : strengths) {
    const auto w = total_work(box, disorder, state, with_strength(shape, eta), grid);
    if (std::abs(w.work) >= 0.1 * radius)
      throw std::invalid_argument("strength too large: work exceeds 0.1·‖h‖");
    ScalingPoint p{eta, w.work / volume, 0.0, true};
    p.remainder = p.work_per_volume - eta * eta * result.heat;
    p.above_noise = std::abs(p.remainder) > result.noise_floor;
    if (p.above_noise) {
      xs.push_back(std::log(eta));
      ys.push_back(std::log(std::abs(p.remainder)));
    }
    result.points.push_back(p);
  }

  result.fitted = static_cast<int>(xs.size());
  if (result.fitted < 3) {
    result.at_noise_floor = true;
    return result;
  }
  const double nx = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  result.slope = (nx * sxy - sx * sy) / (nx * sxx - sx * sx);
  result.intercept = (sy - result.slope * sx) / nx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = ys[i] - (result.intercept + result.slope * xs[i]);
    ss += d * d;
  }
  result.residual = std::sqrt(ss / nx);
  return result;
}

// ---------------------------------------------------------------------------
// Complete passivity on n-fold copies

inline CMatrix direct_sum(std::span<const CMatrix> blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  CMatrix out = CMatrix::Zero(n, n);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    out.block(offset, offset, b.rows(), b.cols()) = b;
    offset += b.rows();
  }
  return out;
}

/// Quasi-free product state of independent copies: direct sum of the
/// one-particle densities. With unequal parameters the result is not a KMS
/// state of the summed Hamiltonian; `params` then carries the first copy's.
inline QuasiFreeState direct_sum_state(std::span<const QuasiFreeState> copies) {
  if (copies.empty()) throw std::invalid_argument("need at least one copy");
  std::vector<CMatrix> rho, h;
  for (const auto& c : copies) {
    rho.push_back(c.density);
    h.push_back(c.hamiltonian);
  }
  CMatrix hs = direct_sum(h);
  CMatrix rs = direct_sum(rho);
  HermitianEigen eig(hs);
  const CMatrix in_basis = eig.vectors.adjoint() * rs * eig.vectors;
  RVector occ = in_basis.diagonal().real();
  return QuasiFreeState{std::move(rs), std::move(hs), copies.front().params, std::move(eig),
                        std::move(occ), false};
}

/// Random Hermitian coupling acting on the whole direct sum, with entries of
/// scale `amplitude`, paired with a random bump×sine cyclic amplitude.
template <typename Rng>
QuadraticDrive::Term random_cyclic_term(int dimension, double amplitude, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CMatrix v(dimension, dimension);
  for (int i = 0; i < dimension; ++i) {
    v(i, i) = amplitude * u(rng);
    for (int j = i + 1; j < dimension; ++j) {
      v(i, j) = amplitude * cplx(u(rng), u(rng));
      v(j, i) = std::conj(v(i, j));
    }
  }
  std::uniform_real_distribution<double> length(2.0, 12.0), omega(0.2, 3.0), offset(0.0, 2.0);
  const double s = offset(rng);
  return {modulated_sine(Envelope::SmoothBump, s, length(rng), omega(rng)), std::move(v)};
}

/// Work done on the n-fold direct-sum system by a quadratic cyclic drive.
inline WorkResult complete_passivity_check(std::span<const QuasiFreeState> copies,
                                           std::vector<QuadraticDrive::Term> terms,
                                           double max_step = 0.0) {
  if (copies.size() < 2 || copies.size() > 3)
    throw std::invalid_argument("complete passivity probe supports n = 2 or 3 copies");
  const QuasiFreeState state = direct_sum_state(copies);
  const QuadraticDrive drive(state.hamiltonian, std::move(terms));
  double radius = state.eigen.spectral_radius();
  for (double t = drive.support_start(); t <= drive.support_end(); t += 0.25)
    radius = std::max(radius, HermitianEigen(drive.hamiltonian(t)).spectral_radius());
  const double dt = max_step > 0.0 ? max_step : std::min(0.02, default_time_step(0.0, radius));
  const TimeGrid grid = make_time_grid(drive.support_start(), drive.support_end(), dt);
  return total_work(drive, state, grid);
}

}  // namespace ohmlab

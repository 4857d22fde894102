// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "equilibrium.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "tolerances.hpp"
#include "waveform.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ohmlab {

/// Vector potential t ↦ η·a(t) with a compactly supported on [s, s+T].
struct CyclicProcess {
  VectorPotential potential;
  double omega = 0.0;

  const Waveform& shape() const { return potential.shape; }
  double strength() const { return potential.strength; }
  double start() const { return potential.shape.start(); }
  double end() const { return potential.shape.end(); }
  double amplitude(double t) const { return potential.shape.value(t); }
  double amplitude_rate(double t) const { return potential.shape.derivative(t); }
  /// E(t) = −∂ₜ(η·a(t))
  double field(double t) const { return potential.field(t); }
};

inline CyclicProcess make_cyclic_process(Envelope envelope, double start, double length,
                                         double strength, double omega, int smoothness = 2) {
  if (!(length > 0.0)) throw std::invalid_argument("process length T must be positive");
  if (!(strength >= 0.0)) throw std::invalid_argument("process strength must be >= 0");
  return {VectorPotential{strength, modulated_sine(envelope, start, length, omega, smoothness)},
          omega};
}

/// Same shape with a different strength η.
inline CyclicProcess with_strength(const CyclicProcess& p, double strength) {
  CyclicProcess q = p;
  q.potential.strength = strength;
  return q;
}

/// Process with a(t) replaced by −a(t), i.e. strength −η.
inline CyclicProcess negated(const CyclicProcess& p) {
  const Waveform& w = p.potential.shape;
  Waveform flipped(w.id() + "_negated", w.start(), w.length(),
                   [w](double t) { return -w.value(t); },
                   [w](double t) { return -w.derivative(t); });
  return {VectorPotential{p.strength(), std::move(flipped)}, p.omega};
}

/// Uniform time grid t_k = start + k·step, k = 0..steps.
struct TimeGrid {
  double start = 0.0;
  double step = 0.0;
  int steps = 0;

  double end() const { return start + step * steps; }
  double node(int k) const { return start + step * k; }
  int node_count() const { return steps + 1; }

  TimeGrid refined(int factor = 2) const { return {start, step / factor, steps * factor}; }
};

/// Grid over [start, end + margin] whose step is the largest value ≤ `max_step`
/// that divides the interval evenly.
inline TimeGrid make_time_grid(double start, double end, double max_step, double margin = 0.0) {
  if (!(max_step > 0.0)) throw std::invalid_argument("time step must be positive");
  if (!(end > start)) throw std::invalid_argument("time grid needs end > start");
  const double span = end + margin - start;
  const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step - 1e-12)));
  return {start, span / steps, steps};
}

inline TimeGrid make_time_grid(const CyclicProcess& p, double max_step, double margin = 0.0) {
  return make_time_grid(p.start(), p.end(), max_step, margin);
}

/// Step satisfying ω·Δt ≤ 0.05 and ‖h‖·Δt ≤ 0.1.
inline double default_time_step(double omega, double spectral_radius) {
  double dt = 0.1 / std::max(spectral_radius, 1e-12);
  if (omega > 0.0) dt = std::min(dt, 0.05 / omega);
  return dt;
}

/// Anything that supplies a time-dependent one-particle Hamiltonian and its
/// time derivative, with a compact support outside which h equals h(start).
template <typename D>
concept Drive = requires(const D& d, double t) {
  { d.hamiltonian(t) } -> std::convertible_to<CMatrix>;
  { d.hamiltonian_rate(t) } -> std::convertible_to<CMatrix>;
  { d.support_start() } -> std::convertible_to<double>;
  { d.support_end() } -> std::convertible_to<double>;
};

/// Peierls-dressed lattice Hamiltonian h(η·a(t)).
class PeierlsDrive {
 public:
  PeierlsDrive(const LatticeBox& box, const DisorderField& disorder, const CyclicProcess& process)
      : box_(&box), disorder_(&disorder), process_(&process) {}

  CMatrix hamiltonian(double t) const {
    return hamiltonian_matrix(*box_, *disorder_, process_->potential.phase(t));
  }
  /// ∂ₜh = θ̇·I(θ)
  CMatrix hamiltonian_rate(double t) const {
    const double rate = process_->potential.phase_rate(t);
    if (rate == 0.0) return CMatrix::Zero(box_->site_count(), box_->site_count());
    return rate * current_matrix(*box_, process_->potential.phase(t));
  }
  double support_start() const { return process_->start(); }
  double support_end() const { return process_->end(); }

 private:
  const LatticeBox* box_;
  const DisorderField* disorder_;
  const CyclicProcess* process_;
};

/// h(t) = h₀ + Σ_k g_k(t)·V_k with Hermitian V_k and cyclic amplitudes g_k.
class QuadraticDrive {
 public:
  struct Term {
    Waveform amplitude;
    CMatrix coupling;
  };

  QuadraticDrive(CMatrix base, std::vector<Term> terms)
      : base_(std::move(base)), terms_(std::move(terms)) {
    if (terms_.empty()) throw std::invalid_argument("quadratic drive needs at least one term");
    for (const auto& t : terms_) {
      if (t.coupling.rows() != base_.rows() || t.coupling.cols() != base_.cols())
        throw std::invalid_argument("coupling shape does not match the base hamiltonian");
      if (hermiticity_defect(t.coupling) > 0.0)
        throw std::invalid_argument("coupling must be Hermitian");
    }
    start_ = terms_.front().amplitude.start();
    end_ = terms_.front().amplitude.end();
    for (const auto& t : terms_) {
      start_ = std::min(start_, t.amplitude.start());
      end_ = std::max(end_, t.amplitude.end());
    }
  }

  CMatrix hamiltonian(double t) const {
    CMatrix h = base_;
    for (const auto& term : terms_) {
      const double g = term.amplitude.value(t);
      if (g != 0.0) h += g * term.coupling;
    }
    return h;
  }
  CMatrix hamiltonian_rate(double t) const {
    CMatrix r = CMatrix::Zero(base_.rows(), base_.cols());
    for (const auto& term : terms_) {
      const double g = term.amplitude.derivative(t);
      if (g != 0.0) r += g * term.coupling;
    }
    return r;
  }
  double support_start() const { return start_; }
  double support_end() const { return end_; }
  const CMatrix& base() const { return base_; }

 private:
  CMatrix base_;
  std::vector<Term> terms_;
  double start_ = 0.0;
  double end_ = 0.0;
};

/// Streams U(t_k, t_0) through `visit(k, t_k, U)` for every grid node,
/// advancing with exponential-midpoint steps U ← exp(−iΔt·h(t + Δt/2))·U.
/// The step exponential is formed from the eigendecomposition of the frozen
/// midpoint Hamiltonian and reused while h does not change. Returns the
/// largest unitarity defect seen; throws NumericalContractError when a node
/// drifts past tol::kUnitarityDrift.
template <Drive D, typename Visitor>
double propagate(const D& drive, const TimeGrid& grid, Visitor&& visit) {
  if (grid.start > drive.support_start() + 1e-12 || grid.end() < drive.support_end() - 1e-12)
    throw std::invalid_argument("time grid does not cover the process support");

  const CMatrix h0 = drive.hamiltonian(grid.start);
  const Eigen::Index n = h0.rows();
  CMatrix u = CMatrix::Identity(n, n);
  CMatrix last_h = CMatrix::Zero(0, 0);
  CMatrix step_exp;
  double worst = 0.0;

  visit(0, grid.start, static_cast<const CMatrix&>(u));
  for (int k = 0; k < grid.steps; ++k) {
    const double tm = grid.node(k) + 0.5 * grid.step;
    CMatrix h = drive.hamiltonian(tm);
    if (h.rows() != last_h.rows() || h != last_h) {
      step_exp = HermitianEigen(h).propagator(grid.step);
      last_h = std::move(h);
    }
    u = step_exp * u;
    const double drift = unitarity_defect(u);
    worst = std::max(worst, drift);
    if (drift > tol::kUnitarityDrift) {
      std::ostringstream msg;
      msg << "unitarity drift " << drift << " at t=" << grid.node(k + 1)
          << " exceeds contract; reduce the time step";
      throw NumericalContractError(msg.str());
    }
    visit(k + 1, grid.node(k + 1), static_cast<const CMatrix&>(u));
  }
  return worst;
}

/// Propagator stored at every grid node.
struct Propagator {
  TimeGrid grid;
  std::vector<CMatrix> nodes;
  double max_unitarity_defect = 0.0;

  const CMatrix& final() const { return nodes.back(); }
};

template <Drive D>
Propagator evolve_propagator(const D& drive, const TimeGrid& grid) {
  Propagator p{grid, {}, 0.0};
  p.nodes.reserve(grid.node_count());
  p.max_unitarity_defect =
      propagate(drive, grid, [&](int, double, const CMatrix& u) { p.nodes.push_back(u); });
  return p;
}

inline Propagator evolve_propagator(const LatticeBox& box, const DisorderField& disorder,
                                    const CyclicProcess& process, const TimeGrid& grid) {
  return evolve_propagator(PeierlsDrive(box, disorder, process), grid);
}

/// D(t) = U ρ₁ U†
inline CMatrix evolve_density(const QuasiFreeState& state, const CMatrix& u) {
  if (u.rows() != state.density.rows())
    throw std::invalid_argument("propagator does not match the state");
  return u * state.density * u.adjoint();
}

}  // namespace ohmlab

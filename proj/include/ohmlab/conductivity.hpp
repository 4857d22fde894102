// SPDX-License-Identifier: Apache-2.0
#pragma once

// Conductivity measures of the quasi-free KMS state.
//
// Fourier convention (stated in every exported header): unitary angular
// frequency, Â(ν) = (2π)^{-1/2} ∫ a(t) e^{−iνt} dt, so that with E = −∂ₜA,
// Ê(ν) = −iν Â(ν). In this convention the quadratic heat per field bond is
//
//   Q = ∫ dμ̃(ν) |Â(ν)|²,
//   μ̃ = Σ_{j≠k} (π/|Λ|) |⟨φ_j|I|φ_k⟩|² (f_j − f_k)(ε_k − ε_j) δ(ν − (ε_k − ε_j)).
//
// Each weight is nonnegative because the Fermi function is decreasing, and
// the measure is even in ν. It follows from the Duhamel expansion of the
// work and is cross-checked against the time-domain Q in the test suite.
// Through detailed balance the same measure is (π/|Λ|) ν(1 − e^{−βν}) S(ν),
// where S is the spectral measure of the correlation C(t) = ∫ S(ν)e^{−iνt}dν.

#include "dynamics.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "response.hpp"
#include "tolerances.hpp"

#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ohmlab {

inline constexpr const char* kFourierConvention =
    "unitary angular frequency: A_hat(nu) = (2 pi)^(-1/2) int a(t) exp(-i nu t) dt; "
    "E_hat = -i nu A_hat";

struct Atom {
  double frequency = 0.0;
  double weight = 0.0;
};

/// Finite positive measure as a sorted list of atoms.
///
/// Atoms with |ν| < ε₀ are kept apart in `near_zero`; they are not part of
/// the measure on ℝ∖{0} and are reported separately.
struct SpectralMeasure {
  std::vector<Atom> atoms;
  std::vector<Atom> near_zero;
  double epsilon0 = 0.0;
  int clipped = 0;  // weights in [−1e−12, 0) set to 0

  double total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.weight;
    return m;
  }
  double near_zero_mass() const {
    double m = 0.0;
    for (const auto& a : near_zero) m += a.weight;
    return m;
  }
  double min_weight() const {
    double m = 0.0;
    for (const auto& a : atoms) m = std::min(m, a.weight);
    return m;
  }
};

/// Default ε₀ = 10⁻³·‖h‖.
inline double default_epsilon0(const QuasiFreeState& state) {
  return 1e-3 * std::max(state.eigen.spectral_radius(), 1e-12);
}

/// Default bin width: a quarter of the mean level spacing of h.
inline double default_bin_width(const QuasiFreeState& state) {
  const auto& e = state.eigen.values;
  if (e.size() < 2) return 1.0;
  return (e(e.size() - 1) - e(0)) / static_cast<double>(e.size() - 1) / 4.0;
}

/// μ̃ built from the eigendata of h and the current matrix (see header note).
inline SpectralMeasure spectral_measure_from_diagonalization(const QuasiFreeState& state,
                                                             const CMatrix& current, int volume,
                                                             double epsilon0) {
  if (volume <= 0) throw std::invalid_argument("volume must be positive");
  if (!(epsilon0 > 0.0)) throw std::invalid_argument("epsilon0 must be positive");
  SpectralMeasure m;
  m.epsilon0 = epsilon0;
  const auto& f = state.occupations;
  for (const auto& tr : current_transitions(state, current)) {
    double w = std::numbers::pi / volume * tr.matrix_element * (f(tr.from) - f(tr.to)) *
               tr.frequency;
    if (w < 0.0 && w >= tol::kAtomWeightFloor) {
      w = 0.0;
      ++m.clipped;
    }
    (std::abs(tr.frequency) < epsilon0 ? m.near_zero : m.atoms).push_back({tr.frequency, w});
  }
  auto by_frequency = [](const Atom& a, const Atom& b) { return a.frequency < b.frequency; };
  std::stable_sort(m.atoms.begin(), m.atoms.end(), by_frequency);
  std::stable_sort(m.near_zero.begin(), m.near_zero.end(), by_frequency);
  return m;
}

// ---------------------------------------------------------------------------
// Histograms

/// Bins of width `width` centred on k·width, k = −half_bins..half_bins.
struct Histogram {
  double width = 1.0;
  int half_bins = 0;
  std::vector<double> weight;
  std::vector<double> stderr_;
  int realizations = 1;

  static Histogram zeros(double width, int half_bins) {
    const auto n = static_cast<std::size_t>(2 * half_bins + 1);
    return {width, half_bins, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 1};
  }
  std::size_t size() const { return weight.size(); }
  double center(std::size_t i) const {
    return (static_cast<int>(i) - half_bins) * width;
  }
  /// Bin index for ν, or −1 when out of range. Rounds half away from zero,
  /// so ±ν always land in mirrored bins.
  int index_of(double nu) const {
    const long k = std::lround(nu / width);
    if (k < -half_bins || k > half_bins) return -1;
    return static_cast<int>(k + half_bins);
  }
  double total() const {
    double s = 0.0;
    for (double w : weight) s += w;
    return s;
  }
};

inline Histogram bin_atoms(std::span<const Atom> atoms, double width, int half_bins) {
  if (!(width > 0.0)) throw std::invalid_argument("bin width must be positive");
  Histogram h = Histogram::zeros(width, half_bins);
  for (const auto& a : atoms) {
    const int i = h.index_of(a.frequency);
    if (i < 0) throw std::out_of_range("atom frequency outside the histogram range");
    h.weight[static_cast<std::size_t>(i)] += a.weight;
  }
  return h;
}

inline int half_bins_for(double max_frequency, double width) {
  return static_cast<int>(std::ceil(max_frequency / width)) + 1;
}

inline Histogram bin_measure(const SpectralMeasure& m, double width, int half_bins) {
  return bin_atoms(m.atoms, width, half_bins);
}

/// Atoms convolved with a centred Gaussian of standard deviation `spread`,
/// integrated exactly over each bin. With spread = 1/σ this is the measure
/// the Bochner route sees through a Gaussian taper of width σ.
inline Histogram bin_atoms_smoothed(std::span<const Atom> atoms, double width, int half_bins,
                                    double spread) {
  if (!(spread > 0.0)) return bin_atoms(atoms, width, half_bins);
  Histogram h = Histogram::zeros(width, half_bins);
  const double scale = 1.0 / (spread * std::numbers::sqrt2);
  for (const auto& a : atoms) {
    const int centre = h.index_of(a.frequency);
    const int reach = static_cast<int>(std::ceil(10.0 * spread / width)) + 1;
    for (int i = std::max(0, centre - reach);
         i <= std::min(static_cast<int>(h.size()) - 1, centre + reach); ++i) {
      const double lo = h.center(static_cast<std::size_t>(i)) - 0.5 * width - a.frequency;
      const double hi = lo + width;
      h.weight[static_cast<std::size_t>(i)] +=
          a.weight * 0.5 * (std::erf(hi * scale) - std::erf(lo * scale));
    }
  }
  return h;
}

/// Σ|a_i − b_i| over aligned bins.
inline double total_variation(const Histogram& a, const Histogram& b) {
  if (a.size() != b.size() || a.width != b.width)
    throw std::invalid_argument("histograms use different binning");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.weight[i] - b.weight[i]);
  return s;
}

/// Bin-wise mean and standard error of the mean over realizations.
inline Histogram average_histograms(std::span<const Histogram> runs) {
  if (runs.empty()) throw std::invalid_argument("no histograms to average");
  Histogram out = Histogram::zeros(runs.front().width, runs.front().half_bins);
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    if (r.size() != out.size() || r.width != out.width)
      throw std::invalid_argument("histograms use different binning");
    for (std::size_t i = 0; i < r.size(); ++i) out.weight[i] += r.weight[i] / n;
  }
  if (runs.size() > 1) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      double ss = 0.0;
      for (const auto& r : runs) ss += (r.weight[i] - out.weight[i]) * (r.weight[i] - out.weight[i]);
      out.stderr_[i] = std::sqrt(ss / (n - 1.0) / n);
    }
  }
  out.realizations = static_cast<int>(runs.size());
  return out;
}

// ---------------------------------------------------------------------------
// Bochner route: Fourier transform of the correlation kernel

struct BochnerOptions {
  /// Gaussian taper exp(−t²/2σ²); 0 selects σ = t_max/6.
  double sigma = 0.0;
  /// Pointwise factor applied to the kernel spectrum before binning.
  /// Identity yields S itself; kms_heat_multiplier yields μ̃.
  std::function<double(double)> multiplier;
};

struct BochnerResult {
  Histogram histogram;
  double max_negative_bin = 0.0;  // most negative bin weight (≤ 0)
  double max_bin = 0.0;
  double sigma = 0.0;

  /// max negative bin must exceed −1e−3·max bin
  bool leakage_ok(double tol_rel = tol::kBochnerLeakage) const {
    return max_negative_bin >= -tol_rel * max_bin;
  }
};

/// (π/|Λ|)·ν(1 − e^{−βν}): maps the spectrum of C to μ̃ by detailed balance.
inline std::function<double(double)> kms_heat_multiplier(double beta, int volume) {
  return [beta, volume](double nu) {
    return std::numbers::pi / volume * nu * -std::expm1(-beta * nu);
  };
}

/// Discrete Fourier transform of the tapered kernel,
/// S(ν_p) = (Δt/2π) Σ_m w(t_m) C(t_m) e^{iν_p t_m}, binned after applying the
/// multiplier. A Gaussian taper has a positive transform, so a positive-type
/// kernel yields a nonnegative density up to truncation of the taper.
inline BochnerResult bochner_measure_from_kernel(const CorrelationKernel& kernel, double width,
                                                 int half_bins, BochnerOptions options = {}) {
  const int m_half = kernel.half_count;
  const int n = 2 * m_half;
  const double dt = kernel.step;
  const double sigma = options.sigma > 0.0 ? options.sigma : m_half * dt / 6.0;

  std::vector<cplx> samples(static_cast<std::size_t>(n));
  for (int m = -m_half; m < m_half; ++m) {
    const double t = m * dt;
    const double w = std::exp(-0.5 * t * t / (sigma * sigma));
    samples[static_cast<std::size_t>((m + n) % n)] = w * kernel.at(m);
  }
  Eigen::FFT<double> fft;
  std::vector<cplx> spectrum;
  fft.inv(spectrum, samples);  // (1/N) Σ x_m e^{+2πi mp/N}

  const double dnu = 2.0 * std::numbers::pi / (n * dt);
  BochnerResult r{Histogram::zeros(width, half_bins), 0.0, 0.0, sigma};
  for (int p = -n / 2; p < n / 2; ++p) {
    const double nu = p * dnu;
    const int bin = r.histogram.index_of(nu);
    if (bin < 0) continue;
    const double density =
        (spectrum[static_cast<std::size_t>((p + n) % n)] * static_cast<double>(n)).real() * dt /
        (2.0 * std::numbers::pi);
    const double factor = options.multiplier ? options.multiplier(nu) : 1.0;
    r.histogram.weight[static_cast<std::size_t>(bin)] += factor * density * dnu;
  }
  for (double w : r.histogram.weight) {
    r.max_bin = std::max(r.max_bin, w);
    r.max_negative_bin = std::min(r.max_negative_bin, w);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Conductivity measure and Joule's law

/// μ = ν⁻²·μ̃ on |ν| ≥ ε₀.
struct ConductivityMeasure {
  std::vector<Atom> atoms;
  double epsilon0 = 0.0;
  double excluded_mass = 0.0;  // μ̃ mass with |ν| < ε₀, not transformed
  int excluded_count = 0;
};

inline ConductivityMeasure conductivity_from_mu_tilde(const SpectralMeasure& mu_tilde,
                                                      double epsilon0) {
  if (!(epsilon0 > 0.0)) throw std::invalid_argument("epsilon0 must be positive");
  ConductivityMeasure mu;
  mu.epsilon0 = epsilon0;
  for (const auto& a : mu_tilde.near_zero) {
    mu.excluded_mass += a.weight;
    ++mu.excluded_count;
  }
  for (const auto& a : mu_tilde.atoms) {
    if (std::abs(a.frequency) < epsilon0) {
      mu.excluded_mass += a.weight;
      ++mu.excluded_count;
      continue;
    }
    mu.atoms.push_back({a.frequency, a.weight / (a.frequency * a.frequency)});
  }
  return mu;
}

/// Unitary Fourier transform of a process shape a(t) (η excluded), from its
/// samples on a uniform grid; the shape is smooth and compactly supported,
/// so the trapezoid sum converges spectrally.
class ProcessTransform {
 public:
  ProcessTransform(const CyclicProcess& process, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("transform step must be positive");
    const ShapeSamples s = sample_shape(process, step);
    for (std::size_t n = 0; n < s.value.size(); ++n) {
      if (s.value[n] == 0.0) continue;
      times_.push_back(process.start() + static_cast<double>(n) * step);
      values_.push_back(s.value[n]);
    }
    step_ = step;
  }

  /// Â(ν)
  cplx amplitude(double nu) const {
    cplx sum = 0.0;
    for (std::size_t n = 0; n < times_.size(); ++n)
      sum += values_[n] * std::exp(cplx(0.0, -nu * times_[n]));
    return sum * step_ / std::sqrt(2.0 * std::numbers::pi);
  }
  /// Ê(ν) = −iν·Â(ν)
  cplx field(double nu) const { return cplx(0.0, -nu) * amplitude(nu); }

 private:
  double step_ = 0.0;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Frequencies with Â and Ê of a process.
struct FourierSpectrum {
  std::vector<double> frequencies;
  std::vector<cplx> potential;  // Â
  std::vector<cplx> field;      // Ê = −iν Â
};

inline FourierSpectrum fourier_spectrum(const ProcessTransform& transform,
                                        std::span<const double> frequencies) {
  FourierSpectrum s;
  s.frequencies.assign(frequencies.begin(), frequencies.end());
  for (double nu : frequencies) {
    const cplx a = transform.amplitude(nu);
    s.potential.push_back(a);
    s.field.push_back(cplx(0.0, -nu) * a);
  }
  return s;
}

struct JouleHeat {
  double mu_tilde_form = 0.0;  // Σ w̃ |Â(ν)|²
  double mu_form = 0.0;        // Σ w ν⁻² ... i.e. Σ (w̃/ν²) |Ê(ν)|²
  double near_zero_contribution = 0.0;
};

/// Heat per field bond from the measures; throws when the process has
/// spectral weight where μ̃ has mass inside (−ε₀, ε₀).
inline JouleHeat joule_heat(const SpectralMeasure& mu_tilde, const ProcessTransform& transform) {
  JouleHeat q;
  std::vector<double> freqs;
  freqs.reserve(mu_tilde.atoms.size());
  for (const auto& a : mu_tilde.atoms) freqs.push_back(a.frequency);
  const FourierSpectrum spectrum = fourier_spectrum(transform, freqs);
  const ConductivityMeasure mu = conductivity_from_mu_tilde(mu_tilde, mu_tilde.epsilon0);

  for (std::size_t i = 0; i < mu_tilde.atoms.size(); ++i)
    q.mu_tilde_form += mu_tilde.atoms[i].weight * std::norm(spectrum.potential[i]);
  for (std::size_t i = 0; i < mu.atoms.size(); ++i)
    q.mu_form += mu.atoms[i].weight * std::norm(spectrum.field[i]);
  for (const auto& a : mu_tilde.near_zero)
    q.near_zero_contribution += a.weight * std::norm(transform.amplitude(a.frequency));

  if (q.near_zero_contribution >
      tol::kSupportBucketRelative * std::max(std::abs(q.mu_tilde_form), 1e-300))
    throw NumericalContractError(
        "process spectrum overlaps the excluded neighbourhood of nu = 0");
  return q;
}

// ---------------------------------------------------------------------------
// Drude fit

struct DrudeFit {
  double weight = 0.0;  // D
  double rate = 0.0;    // γ
  double r_squared = 0.0;
  double window = 0.0;  // |ν| ≤ window, bins with |ν| < ε₀ dropped
  int iterations = 0;
  bool converged = false;
  bool enough_realizations = false;
  std::string status;
};

namespace detail {

struct LorentzianResidual : Eigen::DenseFunctor<double> {
  std::vector<double> x, y, sigma;

  LorentzianResidual(std::vector<double> xs, std::vector<double> ys, std::vector<double> ss)
      : Eigen::DenseFunctor<double>(2, static_cast<int>(xs.size())),
        x(std::move(xs)), y(std::move(ys)), sigma(std::move(ss)) {}

  static double model(double d, double g, double nu) { return d * g / (g * g + nu * nu); }

  int operator()(const InputType& p, ValueType& r) const {
    for (std::size_t i = 0; i < x.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = (model(p(0), p(1), x[i]) - y[i]) / sigma[i];
    return 0;
  }
  int df(const InputType& p, JacobianType& j) const {
    const double d = p(0), g = p(1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double den = g * g + x[i] * x[i];
      const auto row = static_cast<Eigen::Index>(i);
      j(row, 0) = g / den / sigma[i];
      j(row, 1) = d * (x[i] * x[i] - g * g) / (den * den) / sigma[i];
    }
    return 0;
  }
};

}  // namespace detail

/// Least-squares fit of the histogram density weight/width to the Lorentzian
/// D·γ/(γ² + ν²). Never throws; failures are reported in `status`.
inline DrudeFit drude_fit(const Histogram& hist, double epsilon0, double window = 0.0) {
  DrudeFit fit;
  fit.enough_realizations = hist.realizations >= 50;
  fit.window = window > 0.0 ? window : hist.half_bins * hist.width;

  std::vector<double> xs, ys, ss;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double nu = hist.center(i);
    if (std::abs(nu) < std::max(epsilon0, 0.5 * hist.width) || std::abs(nu) > fit.window) continue;
    xs.push_back(nu);
    ys.push_back(hist.weight[i] / hist.width);
    ss.push_back(1.0);  // unweighted: stderr enters only the report
  }
  if (xs.size() < 3) {
    fit.status = "too few bins in the fit window";
    return fit;
  }

  // Initial guess from the peak and its half-maximum width.
  std::size_t peak = 0;
  for (std::size_t i = 1; i < ys.size(); ++i)
    if (ys[i] > ys[peak]) peak = i;
  double half = std::abs(xs[peak]) + hist.width;
  for (std::size_t i = 0; i < ys.size(); ++i)
    if (ys[i] >= 0.5 * ys[peak]) half = std::max(half, std::abs(xs[i]));
  Eigen::VectorXd p(2);
  p << std::max(ys[peak], 1e-12) * half, half;

  detail::LorentzianResidual functor(xs, ys, ss);
  Eigen::LevenbergMarquardt<detail::LorentzianResidual> lm(functor);
  lm.setMaxfev(2000);
  const auto info = lm.minimize(p);
  fit.iterations = static_cast<int>(lm.iterations());
  fit.converged = info == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  info == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  info == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  info == Eigen::LevenbergMarquardtSpace::CosinusTooSmall;
  fit.weight = p(0);
  fit.rate = std::abs(p(1));
  if (p(1) < 0.0) fit.weight = -fit.weight;  // (D, −γ) and (−D, γ) give the same curve

  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(ys.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double m = detail::LorentzianResidual::model(p(0), p(1), xs[i]);
    ss_res += (ys[i] - m) * (ys[i] - m);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  fit.status = fit.converged ? "converged" : "not converged (LM status " +
                                                 std::to_string(static_cast<int>(info)) + ")";
  return fit;
}

}  // namespace ohmlab

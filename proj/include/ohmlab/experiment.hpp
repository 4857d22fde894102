// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "conductivity.hpp"
#include "config.hpp"
#include "dynamics.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "response.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#ifndef OHMLAB_VERSION
#define OHMLAB_VERSION "0.0.0"
#endif

namespace ohmlab {

inline constexpr const char* kCodeVersion = OHMLAB_VERSION;

struct RealizationResult {
  int index = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> values;
};

struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

using Series = std::vector<std::pair<double, double>>;

struct RunRecord {
  std::string config_hash;
  std::string code_version = kCodeVersion;
  ExperimentConfig config;
  std::vector<RealizationResult> realizations;
  std::map<std::string, Aggregate> aggregates;
  std::map<std::string, std::string> metadata;  // grids, conventions, fit status
  std::map<std::string, Histogram> histograms;
  std::map<std::string, Series> series;
  std::map<std::string, std::string> series_columns;
  double wall_clock_seconds = 0.0;

  bool empty() const { return realizations.empty(); }
};

/// Failure inside one disorder realization.
class RealizationError : public std::runtime_error {
 public:
  RealizationError(int index, bool numerical, const std::string& what)
      : std::runtime_error("realization " + std::to_string(index) + ": " + what),
        index_(index), numerical_(numerical) {}
  int index() const { return index_; }
  /// True when the cause was a NumericalContractError.
  bool numerical() const { return numerical_; }

 private:
  int index_;
  bool numerical_;
};

struct RunOptions {
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
};

inline std::map<std::string, Aggregate> aggregate(const std::vector<RealizationResult>& rs) {
  std::map<std::string, std::vector<double>> columns;
  for (const auto& r : rs)
    for (const auto& [k, v] : r.values) columns[k].push_back(v);
  std::map<std::string, Aggregate> out;
  for (const auto& [k, xs] : columns) {
    Aggregate a;
    a.count = static_cast<int>(xs.size());
    for (double x : xs) a.mean += x;
    a.mean /= a.count;
    if (a.count > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - a.mean) * (x - a.mean);
      a.stderr_ = std::sqrt(ss / (a.count - 1) / a.count);
    }
    out[k] = a;
  }
  return out;
}

inline std::string series_name(const std::string& prefix, int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return prefix + digits;
}

namespace detail {

struct RealizationContext {
  const ExperimentConfig& config;
  const LatticeBox& box;
  int index;
  std::uint64_t seed;
};

/// Per-realization outputs beyond scalar values.
struct RealizationOutput {
  RealizationResult result;
  std::map<std::string, Histogram> histograms;
  Series series;
};

inline CyclicProcess configured_process(const ExperimentConfig& c, double strength) {
  return make_cyclic_process(c.waveform, c.process_start, c.process_length, strength, c.omega,
                             c.smoothness);
}

/// Spectral-width bound of h: 4d hopping + 2λ disorder.
inline double spectral_width_bound(const ExperimentConfig& c) {
  return 4.0 * c.dimension + 2.0 * c.disorder_amplitude;
}

inline double ensemble_bin_width(const ExperimentConfig& c, int sites) {
  if (c.bin_width > 0.0) return c.bin_width;
  return spectral_width_bound(c) / std::max(sites - 1, 1) / 4.0;
}

inline RealizationOutput run_one(const RealizationContext& ctx) {
  const auto& c = ctx.config;
  RealizationOutput out;
  out.result.index = ctx.index;
  out.result.seed = ctx.seed;
  auto& v = out.result.values;

  const DisorderField disorder = sample_disorder(ctx.box, c.disorder_amplitude, ctx.seed);
  const CMatrix h0 = hamiltonian_matrix(ctx.box, disorder, 0.0);
  const QuasiFreeState state = fermi_dirac_symbol(h0, {c.beta, c.mu});
  const double radius = state.eigen.spectral_radius();
  const double dt = c.time_step > 0.0 ? c.time_step : default_time_step(c.omega, radius);
  const int volume = ctx.box.field_bond_count();
  const double eps0 = c.epsilon0 > 0.0 ? c.epsilon0 : default_epsilon0(state);
  v["time_step"] = dt;
  v["epsilon0"] = eps0;
  v["kms_residual"] = kms_residual(state);

  switch (c.kind) {
    case ExperimentKind::Passivity: {
      const auto process = configured_process(c, c.strength);
      const auto w = total_work(ctx.box, disorder, state, process, make_time_grid(process, dt));
      v["work"] = w.work;
      v["work_quadrature"] = w.work_quadrature;
      v["work_raw"] = w.work_raw;
      v["work_per_volume"] = w.work / volume;
      v["route_discrepancy"] = w.route_discrepancy();
      v["energy_scale"] = w.energy_scale;
      v["passive"] = w.passive() ? 1.0 : 0.0;
      v["max_unitarity_defect"] = w.max_unitarity_defect;
      break;
    }
    case ExperimentKind::Scaling: {
      const auto shape = configured_process(c, 1.0);
      const auto s = remainder_scaling(ctx.box, disorder, state, shape, c.strengths,
                                       {dt, c.kernel_step});
      v["slope"] = s.slope;
      v["heat"] = s.heat;
      v["fit_residual"] = s.residual;
      v["fitted_points"] = s.fitted;
      v["at_noise_floor"] = s.at_noise_floor ? 1.0 : 0.0;
      v["passes"] = s.passes() ? 1.0 : 0.0;
      for (const auto& p : s.points)
        if (p.above_noise) out.series.emplace_back(std::log(p.strength), std::log(std::abs(p.remainder)));
      break;
    }
    case ExperimentKind::GreenKubo: {
      const auto shape = configured_process(c, 1.0);
      const CMatrix current = current_matrix(ctx.box, 0.0);
      const int samples =
          static_cast<int>(std::ceil(c.process_length / c.kernel_step)) + 2;
      const auto kernel = current_current_correlation(state, current, c.kernel_step, samples);
      const double q_time = heat_production_quadratic(kernel, shape, volume);
      const auto mu_tilde = spectral_measure_from_diagonalization(state, current, volume, eps0);
      const auto q = joule_heat(mu_tilde, ProcessTransform(shape, c.kernel_step));
      v["heat_time_domain"] = q_time;
      v["heat_mu_tilde"] = q.mu_tilde_form;
      v["heat_mu"] = q.mu_form;
      v["relative_error_time_vs_mu_tilde"] = std::abs(q_time - q.mu_tilde_form) / std::abs(q_time);
      v["relative_error_time_vs_mu"] = std::abs(q_time - q.mu_form) / std::abs(q_time);
      v["relative_error_forms"] =
          std::abs(q.mu_tilde_form - q.mu_form) / std::abs(q.mu_tilde_form);
      v["near_zero_contribution"] = q.near_zero_contribution;
      break;
    }
    case ExperimentKind::Measure:
    case ExperimentKind::Drude: {
      const CMatrix current = current_matrix(ctx.box, 0.0);
      const auto mu_tilde = spectral_measure_from_diagonalization(state, current, volume, eps0);
      const auto mu = conductivity_from_mu_tilde(mu_tilde, eps0);
      const double width = ensemble_bin_width(c, ctx.box.site_count());
      const int half = half_bins_for(spectral_width_bound(c), width);
      out.histograms["mu_tilde"] = bin_measure(mu_tilde, width, half);
      out.histograms["mu"] = bin_atoms(mu.atoms, width, half);
      v["mu_tilde_mass"] = mu_tilde.total_mass();
      v["mu_tilde_min_weight"] = mu_tilde.min_weight();
      v["mu_tilde_clipped"] = mu_tilde.clipped;
      v["mu_tilde_near_zero_mass"] = mu_tilde.near_zero_mass();
      double mu_mass = 0.0;
      for (const auto& a : mu.atoms) mu_mass += a.weight;
      v["mu_mass"] = mu_mass;
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Runs every realization (seed = seed_base + index) on `workers` threads and
/// aggregates in index order, so results do not depend on scheduling.
inline RunRecord run_experiment(ExperimentConfig config, RunOptions options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (options.seed_override) config.seed_base = *options.seed_override;
  const LatticeBox box = config.box();

  const int n = config.realizations;
  std::vector<std::optional<detail::RealizationOutput>> slots(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        slots[static_cast<std::size_t>(i)] = detail::run_one(
            {config, box, i, config.seed_base + static_cast<std::uint64_t>(i)});
      } catch (...) {
        failures[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(options.workers, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (int i = 0; i < n; ++i) {
    if (!failures[static_cast<std::size_t>(i)]) continue;
    try {
      std::rethrow_exception(failures[static_cast<std::size_t>(i)]);
    } catch (const NumericalContractError& e) {
      throw RealizationError(i, true, e.what());
    } catch (const std::exception& e) {
      throw RealizationError(i, false, e.what());
    }
  }

  RunRecord record;
  record.config = config;
  record.config_hash = config.hash();
  std::map<std::string, std::vector<Histogram>> histograms;
  for (auto& slot : slots) {
    record.realizations.push_back(slot->result);
    for (auto& [name, h] : slot->histograms) histograms[name].push_back(std::move(h));
    if (!slot->series.empty())
      record.series[series_name("scaling_r", slot->result.index)] = std::move(slot->series);
  }
  record.aggregates = aggregate(record.realizations);
  for (auto& [name, hs] : histograms) record.histograms[name] = average_histograms(hs);

  record.metadata["disorder_generator"] = std::string(kDisorderGenerator);
  record.metadata["fourier_convention"] = kFourierConvention;
  record.metadata["volume_convention"] = "per field-region bond";
  record.metadata["field_bonds"] = std::to_string(box.field_bond_count());
  record.metadata["sites"] = std::to_string(box.site_count());

  if (config.kind == ExperimentKind::Passivity) {
    Series work;
    int passive = 0;
    for (const auto& r : record.realizations) {
      work.emplace_back(r.index, r.values.at("work"));
      passive += r.values.at("passive") > 0.5;
    }
    record.series["work_by_realization"] = std::move(work);
    record.series_columns["work_by_realization"] = "realization work";
    record.metadata["passive_count"] = std::to_string(passive) + "/" + std::to_string(n);
  }
  for (const auto& [name, s] : record.series)
    if (name.rfind("scaling_r", 0) == 0) record.series_columns[name] = "log_eta log_remainder";

  if (config.kind == ExperimentKind::Measure || config.kind == ExperimentKind::Drude) {
    for (const auto& [name, h] : record.histograms) {
      Series density;
      for (std::size_t i = 0; i < h.size(); ++i) density.emplace_back(h.center(i), h.weight[i] / h.width);
      record.series[name + "_density"] = std::move(density);
      record.series_columns[name + "_density"] = "nu density";
    }
    record.metadata["bin_width"] = format_double(record.histograms.at("mu").width);
  }
  if (config.kind == ExperimentKind::Drude) {
    const auto eps0 = record.aggregates.at("epsilon0").mean;
    const auto fit = drude_fit(record.histograms.at("mu"), eps0);
    record.metadata["drude.D"] = format_double(fit.weight);
    record.metadata["drude.gamma"] = format_double(fit.rate);
    record.metadata["drude.r_squared"] = format_double(fit.r_squared);
    record.metadata["drude.window"] = format_double(fit.window);
    record.metadata["drude.converged"] = fit.converged ? "true" : "false";
    record.metadata["drude.enough_realizations"] = fit.enough_realizations ? "true" : "false";
    record.metadata["drude.status"] = fit.status;
    Series model;
    const auto& h = record.histograms.at("mu");
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double nu = h.center(i);
      model.emplace_back(nu, fit.weight * fit.rate / (fit.rate * fit.rate + nu * nu));
    }
    record.series["drude_fit"] = std::move(model);
    record.series_columns["drude_fit"] = "nu lorentzian";
  }

  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

}  // namespace ohmlab

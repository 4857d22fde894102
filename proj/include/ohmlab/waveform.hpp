// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace ohmlab {

/// Real scalar amplitude a(t) with compact support [start, start + length].
///
/// The value and its time derivative are both analytic; the field of a
/// vector potential η·a is E(t) = −η·ȧ(t) in the Weyl gauge. Custom shapes
/// are accepted as long as they vanish outside the support and are C¹.
class Waveform {
 public:
  using Fn = std::function<double(double)>;

  Waveform(std::string id, double start, double length, Fn value, Fn derivative)
      : id_(std::move(id)), start_(start), length_(length),
        value_(std::move(value)), derivative_(std::move(derivative)) {
    if (!(length_ > 0.0)) throw std::invalid_argument("waveform length must be positive");
  }

  const std::string& id() const { return id_; }
  double start() const { return start_; }
  double length() const { return length_; }
  double end() const { return start_ + length_; }

  double value(double t) const { return inside(t) ? value_(t) : 0.0; }
  double derivative(double t) const { return inside(t) ? derivative_(t) : 0.0; }

  bool inside(double t) const { return t > start_ && t < end(); }

 private:
  std::string id_;
  double start_;
  double length_;
  Fn value_;
  Fn derivative_;
};

enum class Envelope { SmoothBump, SinePower };

inline std::string to_string(Envelope e) {
  return e == Envelope::SmoothBump ? "bump_sine" : "sine_power_sine";
}

/// envelope(t)·sin(ω(t − start)).
///
/// SmoothBump is the C^∞ bump exp(1 − 1/(1 − x²)), x ∈ (−1, 1), peaking at 1.
/// SinePower is sin^{k+1}(π(t − start)/length), which is C^k at the support
/// edges; `smoothness` = k must be at least 2.
inline Waveform modulated_sine(Envelope envelope, double start, double length, double omega,
                               int smoothness = 2) {
  if (!(length > 0.0)) throw std::invalid_argument("process length T must be positive");
  if (envelope == Envelope::SinePower && smoothness < 2)
    throw std::invalid_argument("sine-power envelope needs smoothness order >= 2");

  std::function<std::pair<double, double>(double)> env;
  if (envelope == Envelope::SmoothBump) {
    env = [start, length](double t) -> std::pair<double, double> {
      const double x = 2.0 * (t - start) / length - 1.0;
      const double q = 1.0 - x * x;
      if (q <= 0.0) return {0.0, 0.0};
      const double e = std::exp(1.0 - 1.0 / q);
      return {e, e * (-2.0 * x / (q * q)) * (2.0 / length)};
    };
  } else {
    const double p = smoothness + 1.0;
    env = [start, length, p](double t) -> std::pair<double, double> {
      const double u = std::numbers::pi * (t - start) / length;
      const double s = std::sin(u);
      if (s <= 0.0) return {0.0, 0.0};
      return {std::pow(s, p), p * std::pow(s, p - 1.0) * std::cos(u) * std::numbers::pi / length};
    };
  }

  auto value = [env, start, omega](double t) {
    return env(t).first * std::sin(omega * (t - start));
  };
  auto derivative = [env, start, omega](double t) {
    const auto [e, de] = env(t);
    const double ph = omega * (t - start);
    return de * std::sin(ph) + e * omega * std::cos(ph);
  };
  return Waveform(to_string(envelope), start, length, value, derivative);
}

/// Vector potential η·a(t), applied uniformly on every field-region bond.
struct VectorPotential {
  double strength = 0.0;  // η
  Waveform shape;

  double phase(double t) const { return strength * shape.value(t); }
  double phase_rate(double t) const { return strength * shape.derivative(t); }
  double field(double t) const { return -phase_rate(t); }
};

}  // namespace ohmlab

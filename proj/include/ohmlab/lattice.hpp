// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "linalg.hpp"
#include "waveform.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ohmlab {

enum class Boundary { Open, Periodic };

inline std::string to_string(Boundary b) { return b == Boundary::Open ? "open" : "periodic"; }

/// Nearest-neighbour bond, oriented from `from` to `to = from + e_axis`.
struct Bond {
  int from = 0;
  int to = 0;
  int axis = 0;
  bool in_field = false;
};

/// Inclusive range of axis-1 coordinates carrying the vector potential.
struct FieldSpan {
  int first = 0;
  int last = 0;
};

/// Finite cubic box of Z^d with `extent` sites per axis.
///
/// Coordinates run over 0..extent-1 on each axis; sites are numbered
/// row-major with axis 1 as the slowest index.
class LatticeBox {
 public:
  LatticeBox(int dimension, int extent, Boundary boundary, FieldSpan span)
      : dimension_(dimension), extent_(extent), boundary_(boundary), span_(span) {
    if (dimension < 1 || dimension > 3)
      throw std::invalid_argument("lattice dimension must be 1, 2 or 3");
    if (extent < 2) throw std::invalid_argument("box needs at least 2 sites per axis");
    if (boundary == Boundary::Periodic && extent < 3)
      throw std::invalid_argument("periodic box needs at least 3 sites per axis");
    if (span.first < 0 || span.last >= extent || span.first > span.last)
      throw std::invalid_argument("field span must be a sub-interval of the axis-1 coordinates");

    site_count_ = 1;
    for (int i = 0; i < dimension; ++i) site_count_ *= extent;

    std::vector<int> c(dimension);
    for (int x = 0; x < site_count_; ++x) {
      coordinates_into(x, c);
      for (int axis = 0; axis < dimension; ++axis) {
        int next = c[axis] + 1;
        if (next == extent) {
          if (boundary == Boundary::Open) continue;
          next = 0;
        }
        auto n = c;
        n[axis] = next;
        Bond b{x, index_of(n), axis, false};
        b.in_field = axis == 0 && in_span(c[0]) && in_span(next);
        if (b.in_field) ++field_bond_count_;
        bonds_.push_back(b);
      }
    }
    if (field_bond_count_ == 0) throw std::invalid_argument("field region contains no bonds");
  }

  int dimension() const { return dimension_; }
  int extent() const { return extent_; }
  Boundary boundary() const { return boundary_; }
  FieldSpan field_span() const { return span_; }
  int site_count() const { return site_count_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  /// |Λ|: number of field-region bonds, the volume used for per-volume quantities.
  int field_bond_count() const { return field_bond_count_; }

  int index_of(const std::vector<int>& c) const {
    int x = 0;
    for (int axis = 0; axis < dimension_; ++axis) x = x * extent_ + c[axis];
    return x;
  }

  std::vector<int> coordinates(int x) const {
    std::vector<int> c(dimension_);
    coordinates_into(x, c);
    return c;
  }

 private:
  bool in_span(int c) const { return c >= span_.first && c <= span_.last; }

  void coordinates_into(int x, std::vector<int>& c) const {
    for (int axis = dimension_ - 1; axis >= 0; --axis) {
      c[axis] = x % extent_;
      x /= extent_;
    }
  }

  int dimension_;
  int extent_;
  Boundary boundary_;
  FieldSpan span_;
  int site_count_ = 0;
  int field_bond_count_ = 0;
  std::vector<Bond> bonds_;
};

/// Box with half-width `half_width` (2·half_width + 1 sites per axis).
/// Without a span the field covers the full axis-1 range.
inline LatticeBox build_box(int dimension, int half_width, Boundary boundary,
                            std::optional<FieldSpan> span = std::nullopt) {
  if (half_width < 1) throw std::invalid_argument("half-width must be >= 1");
  const int n = 2 * half_width + 1;
  return LatticeBox(dimension, n, boundary, span.value_or(FieldSpan{0, n - 1}));
}

/// Box with an arbitrary number of sites per axis (even chains included).
inline LatticeBox build_box_extent(int dimension, int extent, Boundary boundary,
                                   std::optional<FieldSpan> span = std::nullopt) {
  return LatticeBox(dimension, extent, boundary, span.value_or(FieldSpan{0, extent - 1}));
}

inline LatticeBox chain(int sites, Boundary boundary = Boundary::Open) {
  return build_box_extent(1, sites, boundary);
}

/// i.i.d. on-site potential, uniform on [−λ, λ].
struct DisorderField {
  std::vector<double> values;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};

/// Generator identifier recorded in every output.
inline constexpr std::string_view kDisorderGenerator = "mt19937_64-u53/v1";

/// Maps one 64-bit draw to [0, 1) with 53 bits; portable, unlike
/// std::uniform_real_distribution.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline DisorderField sample_disorder(const LatticeBox& box, double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0)) throw std::invalid_argument("disorder amplitude must be >= 0");
  DisorderField field{std::vector<double>(box.site_count(), 0.0), amplitude, seed};
  std::mt19937_64 engine(seed);
  for (auto& v : field.values) v = amplitude * (2.0 * unit_interval(engine()) - 1.0);
  return field;
}

inline DisorderField no_disorder(const LatticeBox& box) {
  return DisorderField{std::vector<double>(box.site_count(), 0.0), 0.0, 0};
}

/// Provenance of an assembled Hamiltonian.
struct HamiltonianProvenance {
  double disorder_amplitude = 0.0;
  std::uint64_t seed = 0;
  double strength = 0.0;
  double time = 0.0;
};

struct OneParticleHamiltonian {
  CMatrix matrix;
  HamiltonianProvenance provenance;
};

/// Tight-binding matrix with Peierls phase θ on field-region bonds:
/// h(x,y) = −e^{iθ} on oriented field bonds, −1 on other bonds, h(y,x) = conj,
/// h(x,x) = V(x).
inline CMatrix hamiltonian_matrix(const LatticeBox& box, const DisorderField& disorder,
                                  double theta) {
  if (static_cast<int>(disorder.values.size()) != box.site_count())
    throw std::invalid_argument("disorder field does not match the box");
  const int n = box.site_count();
  CMatrix h = CMatrix::Zero(n, n);
  for (int x = 0; x < n; ++x) h(x, x) = disorder.values[x];
  const cplx field_hop = theta == 0.0 ? cplx(-1.0, 0.0) : -std::exp(cplx(0.0, theta));
  for (const auto& b : box.bonds()) {
    const cplx t = b.in_field ? field_hop : cplx(-1.0, 0.0);
    h(b.from, b.to) += t;
    h(b.to, b.from) += std::conj(t);
  }
  return h;
}

inline OneParticleHamiltonian assemble_hamiltonian(const LatticeBox& box,
                                                   const DisorderField& disorder,
                                                   const VectorPotential& potential, double t) {
  return {hamiltonian_matrix(box, disorder, potential.phase(t)),
          {disorder.amplitude, disorder.seed, potential.strength, t}};
}

/// ∂h/∂θ: −i·e^{iθ} on oriented field bonds, +i·e^{−iθ} reversed, 0 elsewhere.
inline CMatrix current_matrix(const LatticeBox& box, double theta) {
  const int n = box.site_count();
  CMatrix m = CMatrix::Zero(n, n);
  const cplx d = -kI * std::exp(cplx(0.0, theta));
  for (const auto& b : box.bonds()) {
    if (!b.in_field) continue;
    m(b.from, b.to) += d;
    m(b.to, b.from) += std::conj(d);
  }
  return m;
}

/// ∂²h/∂θ²: e^{iθ} on oriented field bonds, e^{−iθ} reversed.
inline CMatrix diamagnetic_matrix(const LatticeBox& box, double theta) {
  const int n = box.site_count();
  CMatrix m = CMatrix::Zero(n, n);
  const cplx d = std::exp(cplx(0.0, theta));
  for (const auto& b : box.bonds()) {
    if (!b.in_field) continue;
    m(b.from, b.to) += d;
    m(b.to, b.from) += std::conj(d);
  }
  return m;
}

}  // namespace ohmlab

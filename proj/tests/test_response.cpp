// SPDX-License-Identifier: Apache-2.0
#include "ohmlab/response.hpp"

#include "support/fock_oracle.hpp"

#include <boost/numeric/odeint.hpp>
#include <catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>

using namespace ohmlab;
using Catch::Approx;

namespace {

struct Fixture {
  LatticeBox box;
  DisorderField disorder;
  QuasiFreeState state;

  Fixture(int sites, double lambda, std::uint64_t seed, KmsParameters p = {1.0, 0.0})
      : box(chain(sites)),
        disorder(sample_disorder(box, lambda, seed)),
        state(fermi_dirac_symbol(hamiltonian_matrix(box, disorder, 0.0), p)) {}
};

/// Q from the work alone: even part (L(η) + L(−η))/(2η²|Λ|), Richardson
/// extrapolated over η and η/2.
double heat_from_work(const Fixture& f, const CyclicProcess& shape, double eta, double dt) {
  const auto grid = make_time_grid(shape, dt);
  auto even = [&](double e) {
    const double lp = total_work(f.box, f.disorder, f.state, with_strength(shape, e), grid).work;
    const double lm =
        total_work(f.box, f.disorder, f.state, with_strength(negated(shape), e), grid).work;
    return (lp + lm) / (2.0 * e * e * f.box.field_bond_count());
  };
  return (4.0 * even(eta / 2) - even(eta)) / 3.0;
}

double heat_time_domain(const Fixture& f, const CyclicProcess& shape, double step) {
  const int samples = static_cast<int>(std::ceil((shape.end() - shape.start()) / step)) + 2;
  const auto kernel = current_current_correlation(f.state, current_matrix(f.box, 0.0), step, samples);
  return heat_production_quadratic(kernel, shape, f.box.field_bond_count());
}

}  // namespace

TEST_CASE("current observable", "[response][current]") {
  const auto c = current_observable(chain(2), 0.0);
  CHECK(c.paramagnetic(0, 1) == cplx(0, -1));
  CHECK(c.paramagnetic(1, 0) == cplx(0, 1));
  CHECK(c.paramagnetic(0, 0) == 0.0);
  CHECK(c.diamagnetic(0, 1) == 1.0);
  CHECK(c.diamagnetic(1, 0) == 1.0);

  const auto box = build_box_extent(2, 3, Boundary::Open, FieldSpan{0, 1});
  for (double theta : {0.0, 0.4, -1.3}) {
    const auto o = current_observable(box, theta);
    CHECK(hermiticity_defect(o.paramagnetic) == 0.0);
    CHECK(hermiticity_defect(o.diamagnetic) == 0.0);
    for (const auto& b : box.bonds())
      if (!b.in_field) {
        CHECK(o.paramagnetic(b.from, b.to) == 0.0);
        CHECK(o.diamagnetic(b.from, b.to) == 0.0);
      }
  }
}

TEST_CASE("total work without drive is exactly zero", "[response][work]") {
  const Fixture f(8, 1.0, 3);
  const auto p = make_cyclic_process(Envelope::SmoothBump, 0.0, 5.0, 0.0, 1.0);
  const auto w = total_work(f.box, f.disorder, f.state, p, make_time_grid(p, 0.05));
  CHECK(w.work == 0.0);
  CHECK(w.work_quadrature == 0.0);
  CHECK(w.work_raw == 0.0);
}

TEST_CASE("work routes agree and the KMS state is passive", "[response][work][property]") {
  const Fixture f(10, 1.0, 17);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> omega(0.1, 3.0), eta(0.01, 0.3), length(3.0, 10.0);
  for (int trial = 0; trial < 15; ++trial) {
    const auto p = make_cyclic_process(Envelope::SmoothBump, 0.0, length(rng), eta(rng), omega(rng));
    const double dt = default_time_step(p.omega, f.state.eigen.spectral_radius());
    const auto w = total_work(f.box, f.disorder, f.state, p, make_time_grid(p, dt));
    CHECK(w.passive());
    CHECK(w.work > 0.0);
    CHECK(w.route_discrepancy() <= tol::kQuadratureRelative);
    CHECK(w.max_unitarity_defect <= tol::kUnitarityDrift);
  }
}

TEST_CASE("work on two sites matches a dense ODE integration", "[response][work][oracle]") {
  // documented process: bump × sine, s = 0, T = 8, ω = 1.5, η = 0.1; β = 1, μ = 0
  const Fixture f(2, 0.0, 0);
  const auto p = make_cyclic_process(Envelope::SmoothBump, 0.0, 8.0, 0.1, 1.5);
  const auto w = total_work(f.box, f.disorder, f.state, p, make_time_grid(p, 0.01));

  // state: Re/Im of the 2×2 density D, then the accumulated work
  using State = std::array<double, 9>;
  auto h_of = [&](double t) {
    const double th = p.potential.phase(t);
    std::array<cplx, 4> h{0.0, -std::exp(cplx(0, th)), -std::exp(cplx(0, -th)), 0.0};
    return h;
  };
  auto rhs = [&](const State& x, State& dx, double t) {
    std::array<cplx, 4> d{};
    for (int i = 0; i < 4; ++i) d[i] = cplx(x[2 * i], x[2 * i + 1]);
    const auto h = h_of(t);
    std::array<cplx, 4> comm{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        cplx s = 0.0;
        for (int k = 0; k < 2; ++k) s += h[2 * i + k] * d[2 * k + j] - d[2 * i + k] * h[2 * k + j];
        comm[2 * i + j] = cplx(0, -1) * s;  // dD/dt = −i[h, D]
      }
    for (int i = 0; i < 4; ++i) {
      dx[2 * i] = comm[i].real();
      dx[2 * i + 1] = comm[i].imag();
    }
    // Tr(D ∂ₜh), ∂ₜh = θ̇ I(θ) with I(θ) = [[0, −i e^{iθ}], [i e^{−iθ}, 0]]
    const double th = p.potential.phase(t), rate = p.potential.phase_rate(t);
    const cplx i01 = cplx(0, -1) * std::exp(cplx(0, th));
    const cplx i10 = cplx(0, 1) * std::exp(cplx(0, -th));
    dx[8] = rate * (d[1] * i10 + d[2] * i01).real();
  };
  State x{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      x[2 * (2 * i + j)] = f.state.density(i, j).real();
      x[2 * (2 * i + j) + 1] = f.state.density(i, j).imag();
    }
  namespace ode = boost::numeric::odeint;
  ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-13, 1e-13), rhs,
                          x, 0.0, 8.0, 1e-3);
  const double oracle = x[8];
  INFO("oracle work " << oracle << ", stepper work " << w.work);
  CHECK(std::abs(w.work - oracle) <= 1e-6 * std::abs(oracle));
  CHECK(std::abs(w.work_quadrature - oracle) <= 1e-6 * std::abs(oracle));
}

TEST_CASE("non-cyclic drives are flagged", "[response][work]") {
  struct Ramp {
    CMatrix base = CMatrix::Identity(2, 2);
    CMatrix hamiltonian(double t) const { return base * (1.0 + std::max(t, 0.0)); }
    CMatrix hamiltonian_rate(double t) const { return t > 0 ? base : CMatrix(CMatrix::Zero(2, 2)); }
    double support_start() const { return 0.0; }
    double support_end() const { return 1.0; }
  };
  const Ramp ramp;
  const auto state = fermi_dirac_symbol(ramp.base, {1.0, 0.0});
  CHECK_THROWS_AS(total_work(ramp, state, make_time_grid(0.0, 1.0, 0.1)), NumericalContractError);
}

TEST_CASE("Wick reduction matches the Fock-space correlation", "[response][correlation][oracle]") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> beta(0.2, 5.0), mu(-1.5, 1.5), lambda(0.0, 2.0),
      t(-6.0, 6.0), theta(-1.0, 1.0);
  for (int sites : {2, 3}) {
    testing::FockSpace fock(sites);
    for (int trial = 0; trial < 10; ++trial) {
      const auto box = chain(sites);
      const auto d = sample_disorder(box, lambda(rng), rng());
      const double th = theta(rng);
      const KmsParameters p{beta(rng), mu(rng)};
      const CMatrix h = hamiltonian_matrix(box, d, th);
      const auto state = fermi_dirac_symbol(h, p);
      const CMatrix current = current_matrix(box, th);
      const auto gibbs = testing::gibbs_state(fock, h, p.beta, p.mu);
      const auto j = fock.second_quantize(current);

      CHECK(max_abs(testing::two_point(fock, gibbs, sites).transpose() - state.density) <= 1e-12);
      const std::array<double, 3> times{0.0, t(rng), t(rng)};
      const auto c = current_current_correlation(state, current, times);
      for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(std::abs(c[k] - testing::connected_correlation(gibbs, j, times[k])) <= tol::kWickEquivalence);
    }
  }
}

TEST_CASE("correlation kernel symmetry", "[response][correlation]") {
  const Fixture f(6, 1.0, 2);
  const auto k = current_current_correlation(f.state, current_matrix(f.box, 0.0), 0.1, 200);
  CHECK(k.at(0).real() >= 0.0);
  CHECK(std::abs(k.at(0).imag()) <= 1e-14);
  for (int m = 0; m <= 200; ++m) CHECK(std::abs(k.at(-m) - std::conj(k.at(m))) <= tol::kKernelSymmetry);
  const std::array<double, 1> t{0.1 * 37};
  CHECK(std::abs(current_current_correlation(f.state, current_matrix(f.box, 0.0), t)[0] - k.at(37)) <= 1e-13);
}

TEST_CASE("quadratic heat production", "[response][heat]") {
  const Fixture f(6, 1.0, 7);

  SECTION("zero process gives zero heat") {
    const auto flat = make_cyclic_process(Envelope::SmoothBump, 0.0, 5.0, 1.0, 0.0);
    CHECK(heat_time_domain(f, flat, 0.01) == 0.0);
  }
  SECTION("Duhamel value matches the extrapolated work") {
    const auto shape = make_cyclic_process(Envelope::SmoothBump, 0.0, 10.0, 1.0, 1.3);
    const double q = heat_time_domain(f, shape, 0.01);
    const double q_fd = heat_from_work(f, shape, 0.02, 0.01);
    INFO("Duhamel " << q << ", work extrapolation " << q_fd);
    CHECK(std::abs(q - q_fd) <= tol::kJouleRelative * std::abs(q));
  }
  SECTION("heat is nonnegative for random processes") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> omega(0.0, 4.0), length(1.0, 15.0);
    for (int trial = 0; trial < 30; ++trial) {
      const auto env = trial % 2 ? Envelope::SmoothBump : Envelope::SinePower;
      const auto shape = make_cyclic_process(env, 0.0, length(rng), 1.0, omega(rng), 2 + trial % 3);
      CHECK(heat_time_domain(f, shape, 0.02) >= tol::kQuadraticFormFloor);
    }
  }
  SECTION("kernel must cover the process") {
    const auto shape = make_cyclic_process(Envelope::SmoothBump, 0.0, 10.0, 1.0, 1.0);
    const auto short_kernel = current_current_correlation(f.state, current_matrix(f.box, 0.0), 0.01, 100);
    CHECK_THROWS_AS(heat_production_quadratic(short_kernel, shape, 5), NumericalContractError);
  }
}

TEST_CASE("remainder scaling", "[response][scaling]") {
  const Fixture f(12, 1.0, 5);
  const auto shape = make_cyclic_process(Envelope::SmoothBump, 0.0, 8.0, 1.0, 1.0);
  const std::vector<double> etas{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  const auto s = remainder_scaling(f.box, f.disorder, f.state, shape, etas, {0.01, 0.01});
  INFO("slope " << s.slope << " fitted " << s.fitted);
  CHECK(s.heat > 0.0);
  CHECK(s.passes());

  const std::vector<double> with_zero{0.0, 1e-2, 1e-1};
  CHECK_THROWS_AS(remainder_scaling(f.box, f.disorder, f.state, shape, with_zero), std::invalid_argument);
  const std::vector<double> narrow{0.02, 0.03, 0.05};
  CHECK_THROWS_AS(remainder_scaling(f.box, f.disorder, f.state, shape, narrow), std::invalid_argument);
}

TEST_CASE("complete passivity on direct-sum copies", "[response][passivity]") {
  const auto box = chain(2);
  const auto copy = fermi_dirac_symbol(hamiltonian_matrix(box, no_disorder(box), 0.0), {1.0, 0.0});
  const std::vector<QuasiFreeState> copies{copy, copy};

  SECTION("uncoupled processes add up") {
    std::mt19937_64 rng(1);
    auto t1 = random_cyclic_term(2, 0.5, rng);
    auto t2 = random_cyclic_term(2, 0.5, rng);
    auto embed = [](const CMatrix& v, int block) {
      CMatrix out = CMatrix::Zero(4, 4);
      out.block(2 * block, 2 * block, 2, 2) = v;
      return out;
    };
    const auto both = complete_passivity_check(
        copies, {{t1.amplitude, embed(t1.coupling, 0)}, {t2.amplitude, embed(t2.coupling, 1)}}, 0.01);
    auto single = [&](const QuadraticDrive::Term& t) {
      const QuadraticDrive drive(copy.hamiltonian, {t});
      return total_work(drive, copy, make_time_grid(drive.support_start(), drive.support_end(), 0.01)).work;
    };
    const double l1 = single(t1), l2 = single(t2);
    CHECK(l1 >= 0.0);
    CHECK(l2 >= 0.0);
    CHECK(both.work == Approx(l1 + l2).epsilon(1e-7));
  }
  SECTION("random coupling processes never extract work") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
      const auto w = complete_passivity_check(copies, {random_cyclic_term(4, 1.0, rng)});
      CHECK(w.work_raw >= -1e-9);
      CHECK(w.work >= -1e-9);
    }
  }
  SECTION("copy count is limited to 2 or 3") {
    std::mt19937_64 rng(2);
    const std::vector<QuasiFreeState> one{copy};
    CHECK_THROWS_AS(complete_passivity_check(one, {random_cyclic_term(2, 1.0, rng)}), std::invalid_argument);
  }
}

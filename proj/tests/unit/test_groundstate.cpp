#include <cmath>
#include <random>

#include "bdgkit/errors.hpp"
#include "bdgkit/groundstate.hpp"
#include "doctest.h"

using namespace bdgkit;

namespace {

Field2 random_field(const SpectralGrid& g, std::mt19937_64& rng) {
  // Smooth random field: a few random Gaussians so finite differences in the
  // nonlinear terms are well resolved.
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(g.total_points()), b(g.total_points());
  for (int bump = 0; bump < 3; ++bump) {
    std::array<double, 3> c{u(rng), u(rng), u(rng)};
    const double amp1 = u(rng);
    const double amp2 = u(rng);
    for (std::size_t n = 0; n < a.size(); ++n) {
      const auto idx = g.multi_index(n);
      double r2 = 0.0;
      for (int k = 0; k < g.dim(); ++k) {
        const double d = g.coordinate(idx[k]) - c[k];
        r2 += d * d;
      }
      a[n] += amp1 * std::exp(-r2);
      b[n] += amp2 * std::exp(-0.7 * r2);
    }
  }
  return {ScalarField(g, std::move(a)), ScalarField(g, std::move(b))};
}

}  // namespace

TEST_CASE("energy gradient agrees with central finite differences") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    const int dim = 1 + trial % 2;
    const auto g = make_grid(dim, 6.0, dim == 1 ? 64 : 24);
    auto params = PhysParams::josephson(dim);
    params.raman = 0.3 * trial;
    if (dim == 2) params.gamma = {1.0, 1.5};
    const auto phi = random_field(g, rng);
    const auto dir = random_field(g, rng);
    const auto grad = energy_gradient(phi, params);
    const double analytic = inner_product(grad, dir).real();

    const auto x = pack(phi);
    const auto d = pack(dir);
    const double t = 1e-5;
    std::vector<double> xp(x.size()), xm(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
      xp[n] = x[n] + t * d[n];
      xm[n] = x[n] - t * d[n];
    }
    const double fd = (energy(unpack(g, xp), params) - energy(unpack(g, xm), params)) / (2 * t);
    CHECK(std::abs(fd - analytic) <= 1e-6 * std::abs(analytic));
  }
}

TEST_CASE("energy of a complex field agrees with the real path") {
  std::mt19937_64 rng(4);
  const auto g = make_grid(1, 6.0, 32);
  const auto phi = random_field(g, rng);
  const auto params = PhysParams::josephson(1);
  std::vector<complex> a(g.total_points()), b(g.total_points());
  for (std::size_t n = 0; n < a.size(); ++n) {
    a[n] = phi[0].real_values()[n];
    b[n] = phi[1].real_values()[n];
  }
  const Field2 c(ScalarField(g, a), ScalarField(g, b));
  CHECK(energy(c, params) == doctest::Approx(energy(phi, params)).epsilon(1e-13));
}

TEST_CASE("non-interacting ground state is the harmonic Gaussian") {
  const auto g = make_grid(1, 16.0, 128);
  auto params = PhysParams::josephson(1);
  params.beta11 = params.beta12 = params.beta22 = 0.0;
  params.rabi = 0.6;
  const auto gs = minimize_ground_state(g, params, Mode::jj);
  CHECK(gs.residual <= 1e-13);
  CHECK(gs.mu == doctest::Approx(0.5 - 0.3).epsilon(1e-12));
  CHECK(gs.energy == doctest::Approx(gs.mu).epsilon(1e-12));
  const auto guess = gaussian_initial_guess(g, params, Mode::jj);
  for (int j = 0; j < 2; ++j) {
    for (std::size_t n = 0; n < g.total_points(); ++n) {
      CHECK(std::abs(gs.phi[j].real_values()[n] - guess[j].real_values()[n]) < 1e-12);
    }
  }
}

TEST_CASE("JJ ground state: constraint, monotone energy, signs") {
  const auto g = make_grid(1, 16.0, 128);
  const auto params = PhysParams::josephson(1);
  MinimizeTrace trace;
  const auto gs = minimize_ground_state(g, params, Mode::jj, {}, &trace);
  CHECK(gs.residual <= 1e-13);
  CHECK(trace.iterations > 0);
  for (double m : trace.mass_defects) CHECK(m <= 1e-12);
  for (std::size_t i = 1; i < trace.energies.size(); ++i) {
    CHECK(trace.energies[i] <= trace.energies[i - 1] + 1e-12);
  }
  CHECK(norm(gs.phi) == doctest::Approx(1.0).epsilon(1e-13));
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t n = 0; n < g.total_points(); ++n) {
    s1 += gs.phi[0].real_values()[n];
    s2 += gs.phi[1].real_values()[n];
  }
  CHECK(s1 > 0.0);
  CHECK(s2 < 0.0);  // Omega > 0 favours opposite signs

  const auto el = euler_lagrange_residual(gs.phi, params, Mode::jj);
  CHECK(el.residual == doctest::Approx(gs.residual).epsilon(1e-6).scale(1e-13));
  CHECK(el.mu == doctest::Approx(gs.mu).epsilon(1e-14));

  // The gradient at a critical point is parallel to phi: 2 H phi = 2 mu phi.
  const auto grad = energy_gradient(gs.phi, params);
  auto p = pack(gs.phi);
  const auto gv = pack(grad);
  double r = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) r = std::max(r, std::abs(gv[n] - 2 * gs.mu * p[n]));
  CHECK(r < 1e-11);

  // Deterministic: same inputs, bit-identical outputs.
  const auto again = minimize_ground_state(g, params, Mode::jj);
  CHECK(again.energy == gs.energy);
  CHECK(pack(again.phi) == pack(gs.phi));
}

TEST_CASE("NoJJ ground state keeps both masses") {
  const auto g = make_grid(1, 16.0, 128);
  const auto params = PhysParams::no_josephson(1);
  const auto gs = minimize_ground_state(g, params, Mode::no_jj);
  CHECK(gs.residual <= 1e-13);
  CHECK(norm(gs.phi[0]) * norm(gs.phi[0]) == doctest::Approx(0.2).epsilon(1e-13));
  CHECK(norm(gs.phi[1]) * norm(gs.phi[1]) == doctest::Approx(0.8).epsilon(1e-13));
  CHECK(gs.chemical_potential(0) == gs.mu1);
  CHECK(gs.chemical_potential(1) == gs.mu2);
  CHECK(gs.mu1 != doctest::Approx(gs.mu2));
}

TEST_CASE("ground-state preconditions") {
  const auto g = make_grid(1, 8.0, 32);
  auto params = PhysParams::no_josephson(1);
  params.alpha = 0.0;
  try {
    minimize_ground_state(g, params, Mode::no_jj);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::degenerate_constraint);
  }
  params.alpha = 1.0;
  CHECK_THROWS_AS(minimize_ground_state(g, params, Mode::no_jj), Error);
  params.alpha = 0.5;
  params.rabi = 1.0;
  CHECK_THROWS_AS(minimize_ground_state(g, params, Mode::no_jj), Error);
  CHECK_THROWS_AS(minimize_ground_state(g, PhysParams::josephson(2), Mode::jj), Error);

  // Off-constraint candidates are rejected by the residual evaluator.
  auto phi = gaussian_initial_guess(g, PhysParams::josephson(1), Mode::jj);
  phi[0].real_values()[3] += 0.1;
  CHECK_THROWS_AS(euler_lagrange_residual(phi, PhysParams::josephson(1), Mode::jj), Error);

  MinimizeOptions tight;
  tight.max_iterations = 2;
  try {
    minimize_ground_state(g, PhysParams::josephson(1), Mode::jj, tight);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_residual() > 0.0);
  }
}

TEST_CASE("ground state save and load") {
  const auto g = make_grid(1, 8.0, 32);
  const auto gs = minimize_ground_state(g, PhysParams::no_josephson(1), Mode::no_jj);
  const auto stem = std::filesystem::temp_directory_path() / "bdgkit_gs_test";
  save_ground_state(stem, gs);
  const auto back = load_ground_state(stem);
  CHECK(back.mode == Mode::no_jj);
  CHECK(back.mu1 == gs.mu1);
  CHECK(back.mu2 == gs.mu2);
  CHECK(back.energy == gs.energy);
  CHECK(back.params.alpha == gs.params.alpha);
  CHECK(pack(back.phi) == pack(gs.phi));
  std::filesystem::remove(stem.string() + ".bdg1");
  std::filesystem::remove(stem.string() + ".meta");
}

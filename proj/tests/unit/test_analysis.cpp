#include <cmath>
#include <numbers>
#include <random>

#include "bdgkit/analysis.hpp"
#include "bdgkit/errors.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace bdgkit;
using bdgkit::testing::ground;

namespace {

Field2 random_field(const SpectralGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> a(g.total_points()), b(g.total_points());
  for (auto& x : a) x = d(rng);
  for (auto& x : b) x = d(rng);
  return {ScalarField(g, std::move(a)), ScalarField(g, std::move(b))};
}

Field2 combine(double a, const Field2& x, double b, const Field2& y) {
  auto px = pack(x);
  const auto py = pack(y);
  for (std::size_t n = 0; n < px.size(); ++n) px[n] = a * px[n] + b * py[n];
  return unpack(x.grid(), px);
}

}  // namespace

TEST_CASE("relative eigenvalue error") {
  CHECK(eigenvalue_error(1.0000000001, 1.0) == doctest::Approx(1e-10).epsilon(1e-6));
  CHECK(eigenvalue_error(2.0, 2.0) == 0.0);
  CHECK(eigenvalue_error(-1.5, -1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(eigenvalue_error(1.0, 0.0), Error);
}

TEST_CASE("subspace error: inside the span, orthogonal to it, and basis independence") {
  std::mt19937_64 rng(17);
  const auto g = make_grid(1, 4.0, 32);
  const auto a = random_field(g, rng);
  const auto b = random_field(g, rng);
  const std::vector<Field2> span{a, b};
  CHECK(subspace_error(combine(0.3, a, -2.0, b), combine(1.0, a, 1.0, b), span, span) <= 1e-14);

  // e_0 and e_1 against a span supported on the other points
  std::vector<double> e0(2 * g.total_points(), 0.0), e1 = e0, s0 = e0, s1 = e0;
  e0[0] = 1.0;
  e1[1] = 2.0;
  s0[5] = 1.0;
  s1[7] = 1.0;
  s1[9] = -3.0;
  const std::vector<Field2> far{unpack(g, s0), unpack(g, s1)};
  CHECK(subspace_error(unpack(g, e0), unpack(g, e1), far, far) == doctest::Approx(2.0));

  // rotating a degenerate span basis does not change the result
  const auto u = random_field(g, rng);
  const auto v = random_field(g, rng);
  const double c = std::cos(0.7), s = std::sin(0.7);
  const std::vector<Field2> rotated{combine(c, a, s, b), combine(-s, a, c, b)};
  CHECK(std::abs(subspace_error(u, v, span, span) - subspace_error(u, v, rotated, rotated)) <=
        1e-12);

  CHECK_THROWS_AS(subspace_error(Field2::zeros(g), u, span, span), Error);
  CHECK_THROWS_AS(subspace_error(u, v, {}, span), Error);
}

TEST_CASE("error report on a 1D grid reproduces the expected accuracy") {
  const auto& gs = ground(Mode::jj, 1, 64);
  const auto ctx = build_context(gs);
  const auto spec = solve_spectrum(ctx, build_nullspace(ctx), {.n_ev = 6});
  const auto report = error_report(gs, spec);
  REQUIRE(report.directions.size() == 1);
  const auto& d = report.directions[0];
  CHECK(d.exact == 1.0);
  CHECK(d.cluster_size == 1);
  CHECK(d.e_omega > 1e-6);
  CHECK(d.e_omega < 2e-5);
  CHECK(d.e_uv < 1e-2);
  CHECK_THROWS_AS(error_report(gs, spec, {.window = 1e-9}), Error);
}

TEST_CASE("perturbed density") {
  const auto& gs = ground(Mode::jj, 1, 64);
  const auto ctx = build_context(gs);
  const auto spec = solve_spectrum(ctx, build_nullspace(ctx), {.n_ev = 3});
  const auto& mode = spec.modes[2];

  const auto [n1, n2] = perturbed_density(gs, mode, 0.0, 3.3);
  for (std::size_t n = 0; n < gs.phi.grid().total_points(); ++n) {
    const double a = gs.phi[0].value(n).real();
    const double b = gs.phi[1].value(n).real();
    CHECK(n1.real_values()[n] == a * a);
    CHECK(n2.real_values()[n] == b * b);
  }
  double mass = 0.0;
  for (std::size_t n = 0; n < 64; ++n) mass += n1.real_values()[n] + n2.real_values()[n];
  CHECK(mass * gs.phi.grid().cell_volume() == doctest::Approx(1.0).epsilon(1e-10));

  const double eps = 0.1;
  const auto [z1, z2] = perturbed_density(gs, mode, eps, 0.0);
  for (std::size_t n = 0; n < 64; ++n) {
    const double w = gs.phi[0].value(n).real() +
                     eps * (mode.u[0].value(n).real() + mode.v[0].value(n).real());
    CHECK(z1.real_values()[n] == doctest::Approx(w * w).epsilon(1e-14));
  }

  const double t = 1.7;
  const double period = 2 * std::numbers::pi / mode.omega;
  const auto [p1, p2] = perturbed_density(gs, mode, eps, t);
  const auto [q1, q2] = perturbed_density(gs, mode, eps, t + period);
  for (std::size_t n = 0; n < 64; ++n) {
    CHECK(std::abs(p1.real_values()[n] - q1.real_values()[n]) <= 1e-12);
    CHECK(std::abs(p2.real_values()[n] - q2.real_values()[n]) <= 1e-12);
  }
  CHECK_THROWS_AS(perturbed_density(gs, mode, -0.1, 0.0), Error);
}

TEST_CASE("timing slope of synthetic N log N data is one") {
  std::vector<TimingRow> rows;
  for (int n : {64, 128, 256, 512}) {
    const auto nt = static_cast<std::size_t>(n);
    rows.push_back({.n = n, .points = nt, .seconds = 3e-6 * n * std::log(double(n))});
  }
  CHECK(timing_slope(rows) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(timing_slope(std::span(rows).first(1), 3), Error);
}

TEST_CASE("sweeps demand ascending grid sizes") {
  const std::vector<int> bad{64, 32};
  CHECK_THROWS_AS(convergence_sweep(PhysParams::josephson(1), Mode::jj, bad, {}), Error);
  CHECK_THROWS_AS(timing_study(PhysParams::josephson(1), Mode::jj, {}, {}), Error);
}

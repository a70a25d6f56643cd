#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "bdgkit/errors.hpp"
#include "bdgkit/field_io.hpp"
#include "bdgkit/spectral.hpp"
#include "doctest.h"

using namespace bdgkit;

namespace {

std::vector<double> random_real(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<complex> random_complex(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<complex> v(n);
  for (auto& x : v) x = {d(rng), d(rng)};
  return v;
}

// Direct O(N^2d) sum, used as an independent check of the FFT ordering.
std::vector<complex> naive_forward(const SpectralGrid& g, const std::vector<complex>& f) {
  const int n = g.points_per_dim();
  const std::size_t nt = g.total_points();
  std::vector<complex> out(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    const auto km = g.multi_index(k);
    complex s = 0.0;
    for (std::size_t p = 0; p < nt; ++p) {
      const auto pm = g.multi_index(p);
      double phase = 0.0;
      for (int a = 0; a < g.dim(); ++a) phase += double(km[a]) * pm[a];
      s += f[p] * std::polar(1.0, -2.0 * std::numbers::pi * phase / n);
    }
    out[k] = s / double(nt);
  }
  return out;
}

}  // namespace

TEST_CASE("grid construction validates its arguments") {
  CHECK_THROWS_AS(make_grid(0, 1.0, 8), Error);
  CHECK_THROWS_AS(make_grid(4, 1.0, 8), Error);
  CHECK_THROWS_AS(make_grid(1, 1.0, 7), Error);
  CHECK_THROWS_AS(make_grid(1, 1.0, 2), Error);
  CHECK_THROWS_AS(make_grid(1, 0.0, 8), Error);
  CHECK_THROWS_AS(make_grid(1, -2.0, 8), Error);
  try {
    make_grid(1, 1.0, 7);
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::invalid_grid);
  }

  const auto g = make_grid(2, 16.0, 8);
  CHECK(g.total_points() == 64);
  CHECK(g.mesh_size() == doctest::Approx(4.0));
  CHECK(g.coordinate(0) == -16.0);
  CHECK(g.wavenumbers().front() == doctest::Approx(-4 * std::numbers::pi / 16));
  CHECK(g.wavenumber_at_slot(5) == doctest::Approx(-3 * std::numbers::pi / 16));
  const auto idx = g.multi_index(19);
  CHECK(idx[0] == 3);
  CHECK(idx[1] == 2);
}

TEST_CASE("forward transform matches a direct DFT sum") {
  std::mt19937_64 rng(7);
  for (int dim = 1; dim <= 3; ++dim) {
    const auto g = make_grid(dim, 3.0, dim == 3 ? 4 : 6);
    const auto f = random_complex(g.total_points(), rng);
    const auto fhat = forward_transform(ScalarField(g, f));
    const auto fast = fhat.complex_values();
    const auto slow = naive_forward(g, f);
    double err = 0.0;
    for (std::size_t k = 0; k < slow.size(); ++k) err = std::max(err, std::abs(fast[k] - slow[k]));
    CHECK(err < 1e-13);
  }
}

TEST_CASE("transforms round-trip and satisfy Parseval") {
  std::mt19937_64 rng(11);
  for (int dim = 1; dim <= 3; ++dim) {
    const auto g = make_grid(dim, 5.0, dim == 3 ? 8 : 16);
    const ScalarField f(g, random_complex(g.total_points(), rng));
    const auto fhat = forward_transform(f);
    const auto back = backward_transform(fhat);
    double err = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) err = std::max(err, std::abs(back.value(n) - f.value(n)));
    CHECK(err < 1e-13);

    double phys = 0.0;
    double spec = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) {
      phys += std::norm(f.value(n));
      spec += std::norm(fhat.value(n));
    }
    phys *= g.cell_volume();
    spec *= std::pow(2.0 * g.half_width(), dim);
    CHECK(std::abs(phys - spec) / phys <= 1e-12);
  }
}

TEST_CASE("laplacian of a Gaussian matches the analytic formula") {
  // lap exp(-a r^2) = (4 a^2 r^2 - 2 d a) exp(-a r^2); decays well inside L = 8.
  const double a = 0.5;
  for (int dim = 1; dim <= 3; ++dim) {
    const auto g = make_grid(dim, 8.0, dim == 3 ? 48 : 64);
    std::vector<double> f(g.total_points()), exact(g.total_points());
    for (std::size_t n = 0; n < f.size(); ++n) {
      const auto idx = g.multi_index(n);
      double r2 = 0.0;
      for (int k = 0; k < dim; ++k) r2 += g.coordinate(idx[k]) * g.coordinate(idx[k]);
      f[n] = std::exp(-a * r2);
      exact[n] = (4 * a * a * r2 - 2 * dim * a) * f[n];
    }
    const auto lap = apply_laplacian(ScalarField(g, f));
    double err = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) {
      err = std::max(err, std::abs(lap.real_values()[n] - exact[n]));
    }
    CHECK(err < 1e-10);
  }
}

TEST_CASE("derivative of a Gaussian and Nyquist handling") {
  const auto g = make_grid(2, 8.0, 64);
  std::vector<double> f(g.total_points()), dy(g.total_points());
  for (std::size_t n = 0; n < f.size(); ++n) {
    const auto idx = g.multi_index(n);
    const double x = g.coordinate(idx[0]);
    const double y = g.coordinate(idx[1]);
    f[n] = std::exp(-x * x - 0.5 * y * y);
    dy[n] = -y * f[n];
  }
  const auto d = apply_derivative(ScalarField(g, f), 1);
  double err = 0.0;
  for (std::size_t n = 0; n < f.size(); ++n) err = std::max(err, std::abs(d.real_values()[n] - dy[n]));
  CHECK(err < 1e-10);

  // The sawtooth (-1)^n is the pure -N/2 mode: derivative kills it, the
  // Laplacian scales it by -(pi N / 2L)^2.
  const auto g1 = make_grid(1, 2.0, 8);
  std::vector<double> saw(8);
  for (int n = 0; n < 8; ++n) saw[n] = (n % 2 == 0) ? 1.0 : -1.0;
  const auto ds = apply_derivative(ScalarField(g1, saw), 0);
  for (double v : ds.real_values()) CHECK(std::abs(v) < 1e-14);
  const double mu = std::numbers::pi * 4 / 2.0;
  const auto ls = apply_laplacian(ScalarField(g1, saw));
  for (int n = 0; n < 8; ++n) CHECK(ls.real_values()[n] == doctest::Approx(-mu * mu * saw[n]));
}

TEST_CASE("real and complex paths agree") {
  std::mt19937_64 rng(3);
  const auto g = make_grid(2, 4.0, 12);
  const auto r = random_real(g.total_points(), rng);
  std::vector<complex> c(r.begin(), r.end());
  const auto lr = apply_laplacian(ScalarField(g, r));
  const auto lc = apply_laplacian(ScalarField(g, c));
  const auto dr = apply_derivative(ScalarField(g, r), 0);
  const auto dc = apply_derivative(ScalarField(g, c), 0);
  for (std::size_t n = 0; n < r.size(); ++n) {
    CHECK(std::abs(lr.real_values()[n] - lc.value(n)) < 1e-11);
    CHECK(std::abs(dr.real_values()[n] - dc.value(n)) < 1e-11);
  }
}

TEST_CASE("laplacian is symmetric and negative semidefinite") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 3;
    const auto g = make_grid(dim, 1.0 + trial, dim == 3 ? 6 : 10);
    const ScalarField a(g, random_real(g.total_points(), rng));
    const ScalarField b(g, random_real(g.total_points(), rng));
    const double ab = inner_product(apply_laplacian(a), b).real();
    const double ba = inner_product(a, apply_laplacian(b)).real();
    CHECK(std::abs(ab - ba) <= 1e-11 * std::max(1.0, std::abs(ab)));
    CHECK(inner_product(apply_laplacian(a), a).real() <= 0.0);
  }
}

TEST_CASE("inner product and norm") {
  const auto g = make_grid(1, 1.0, 4);
  const ScalarField a(g, std::vector<complex>{{1, 1}, 0, 0, 0});
  const ScalarField b(g, std::vector<complex>{{0, 1}, 0, 0, 0});
  // h = 0.5; (1+i) * conj(i) = 1 - i.
  CHECK(inner_product(a, b).real() == doctest::Approx(0.5));
  CHECK(inner_product(a, b).imag() == doctest::Approx(-0.5));
  CHECK(norm(a) == doctest::Approx(1.0));
  const Field2 f(a, b);
  CHECK(norm(f) == doctest::Approx(std::sqrt(1.5)));
  CHECK_THROWS_AS(Field2(a, ScalarField::zeros(make_grid(1, 2.0, 4))), Error);
  CHECK_THROWS_AS(a.real_values(), Error);
}

TEST_CASE("harmonic potential") {
  const auto g = make_grid(2, 4.0, 8);
  const std::vector<double> gamma{1.0, 2.0};
  const auto v = harmonic_potential(g, gamma);
  const auto idx = g.multi_index(9);
  const double x = g.coordinate(idx[0]);
  const double y = g.coordinate(idx[1]);
  CHECK(v.real_values()[9] == doctest::Approx(0.5 * (x * x + 4 * y * y)));
  CHECK_THROWS_AS(harmonic_potential(g, std::vector<double>{1.0}), Error);
}

TEST_CASE("field files round-trip and reject damage") {
  std::mt19937_64 rng(9);
  const auto g = make_grid(2, 3.5, 6);
  const Field2 f(ScalarField(g, random_real(g.total_points(), rng)),
                 ScalarField(g, random_real(g.total_points(), rng)));
  const auto dir = std::filesystem::temp_directory_path() / "bdgkit_test_io";
  std::filesystem::create_directories(dir);
  const auto path = dir / "f.bdg1";
  write_field_file(path, f);
  const auto back = read_field2_file(path);
  CHECK(back.grid() == g);
  for (int j = 0; j < 2; ++j) {
    for (std::size_t n = 0; n < g.total_points(); ++n) {
      CHECK(back[j].real_values()[n] == f[j].real_values()[n]);
    }
  }
  CHECK(std::filesystem::file_size(path) == 4 + 4 + 4 + 8 + 4 + 1 + 2 * 36 * 8);

  const ScalarField c(g, random_complex(g.total_points(), rng));
  const std::vector<ScalarField> comps{c, c, c};
  write_field_file(dir / "c.bdg1", comps);
  const auto cf = read_field_file(dir / "c.bdg1");
  CHECK(cf.components.size() == 3);
  CHECK(cf.components[2].value(7) == c.value(7));
  CHECK_THROWS_AS(read_field2_file(dir / "c.bdg1"), Error);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(read_field_file(path), Error);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOPE and more";
  }
  CHECK_THROWS_AS(read_field_file(path), Error);
  CHECK_THROWS_AS(read_field_file(dir / "missing.bdg1"), Error);
  std::filesystem::remove_all(dir);
}

#include "bdgkit/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "bdgkit/errors.hpp"

namespace bdgkit {

namespace {

// FFTW's planner is not reentrant; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(fftw_malloc(n)) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* data;
};

int wrap_k(int m, int n) { return m < n / 2 ? m : m - n; }

}  // namespace

namespace detail {

struct GridImpl {
  int dim = 1;
  double half_width = 1.0;
  int n = 4;
  double h = 0.5;
  std::size_t total = 4;
  std::size_t half_total = 3;  // N^{d-1} (N/2+1)
  std::vector<double> natural_mu;
  std::vector<double> slot_mu;
  std::vector<double> half_mu2;

  fftw_plan c2c_forward = nullptr;
  fftw_plan c2c_backward = nullptr;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  GridImpl() = default;
  GridImpl(const GridImpl&) = delete;
  GridImpl& operator=(const GridImpl&) = delete;

  ~GridImpl() {
    std::lock_guard lock(planner_mutex());
    for (fftw_plan p : {c2c_forward, c2c_backward, r2c, c2r}) {
      if (p != nullptr) fftw_destroy_plan(p);
    }
  }
};

}  // namespace detail

// --- SpectralGrid -----------------------------------------------------------

int SpectralGrid::dim() const { return impl_->dim; }
double SpectralGrid::half_width() const { return impl_->half_width; }
int SpectralGrid::points_per_dim() const { return impl_->n; }
double SpectralGrid::mesh_size() const { return impl_->h; }
std::size_t SpectralGrid::total_points() const { return impl_->total; }
double SpectralGrid::cell_volume() const { return std::pow(impl_->h, impl_->dim); }
std::span<const double> SpectralGrid::wavenumbers() const { return impl_->natural_mu; }
double SpectralGrid::wavenumber_at_slot(int m) const { return impl_->slot_mu.at(m); }
double SpectralGrid::coordinate(int i) const { return -impl_->half_width + i * impl_->h; }

std::array<int, 3> SpectralGrid::multi_index(std::size_t n) const {
  std::array<int, 3> idx{0, 0, 0};
  const auto N = static_cast<std::size_t>(impl_->n);
  for (int a = 0; a < impl_->dim; ++a) {
    idx[a] = static_cast<int>(n % N);
    n /= N;
  }
  return idx;
}

bool SpectralGrid::operator==(const SpectralGrid& other) const {
  if (impl_ == other.impl_) return true;
  return impl_->dim == other.impl_->dim && impl_->n == other.impl_->n &&
         impl_->half_width == other.impl_->half_width;
}

SpectralGrid make_grid(int dim, double half_width, int points_per_dim) {
  if (dim < 1 || dim > 3) {
    fail(Error::Kind::invalid_grid, "grid dimension must be 1, 2 or 3, got " + std::to_string(dim));
  }
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    std::ostringstream os;
    os << "domain half-width must be positive, got " << half_width;
    fail(Error::Kind::invalid_domain, os.str());
  }
  if (points_per_dim < 4 || points_per_dim % 2 != 0) {
    fail(Error::Kind::invalid_grid,
         "points per dimension must be even and >= 4, got " + std::to_string(points_per_dim));
  }

  auto impl = std::make_shared<detail::GridImpl>();
  const int n = points_per_dim;
  impl->dim = dim;
  impl->half_width = half_width;
  impl->n = n;
  impl->h = 2.0 * half_width / n;
  impl->total = 1;
  for (int a = 0; a < dim; ++a) impl->total *= static_cast<std::size_t>(n);
  impl->half_total = impl->total / n * (n / 2 + 1);

  const double dk = std::numbers::pi / half_width;
  impl->natural_mu.resize(n);
  impl->slot_mu.resize(n);
  for (int k = -n / 2; k < n / 2; ++k) impl->natural_mu[k + n / 2] = dk * k;
  for (int m = 0; m < n; ++m) impl->slot_mu[m] = dk * wrap_k(m, n);

  // Half-spectrum layout of the r2c transform: the x axis is the fastest and
  // halved one; FFTW sees dims in row-major order (z, y, x).
  impl->half_mu2.resize(impl->half_total);
  const int nh = n / 2 + 1;
  for (std::size_t s = 0; s < impl->half_total; ++s) {
    std::size_t rest = s;
    const int ix = static_cast<int>(rest % nh);
    rest /= nh;
    double sum = 0.0;
    // ix runs 0..N/2; slot N/2 is k = -N/2 whose mu^2 equals (pi N / 2L)^2.
    const double mux = dk * (ix == n / 2 ? -n / 2 : ix);
    sum += mux * mux;
    for (int a = 1; a < dim; ++a) {
      const int m = static_cast<int>(rest % n);
      rest /= n;
      const double mu = impl->slot_mu[m];
      sum += mu * mu;
    }
    impl->half_mu2[s] = sum;
  }

  std::vector<int> dims(dim, n);
  {
    std::lock_guard lock(planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    FftwBuffer cbuf(sizeof(fftw_complex) * impl->total);
    FftwBuffer rbuf(sizeof(double) * impl->total);
    FftwBuffer hbuf(sizeof(fftw_complex) * impl->half_total);
    auto* c = static_cast<fftw_complex*>(cbuf.data);
    auto* r = static_cast<double*>(rbuf.data);
    auto* hc = static_cast<fftw_complex*>(hbuf.data);
    impl->c2c_forward = fftw_plan_dft(dim, dims.data(), c, c, FFTW_FORWARD, flags);
    impl->c2c_backward = fftw_plan_dft(dim, dims.data(), c, c, FFTW_BACKWARD, flags);
    impl->r2c = fftw_plan_dft_r2c(dim, dims.data(), r, hc, FFTW_ESTIMATE);
    impl->c2r = fftw_plan_dft_c2r(dim, dims.data(), hc, r, FFTW_ESTIMATE);
  }
  if (!impl->c2c_forward || !impl->c2c_backward || !impl->r2c || !impl->c2r) {
    fail(Error::Kind::invalid_grid, "FFTW failed to create transform plans");
  }
  return SpectralGrid(std::move(impl));
}

// --- fields -----------------------------------------------------------------

namespace {

void check_size(const SpectralGrid& grid, std::size_t n) {
  if (n != grid.total_points()) {
    std::ostringstream os;
    os << "field has " << n << " samples, grid expects " << grid.total_points();
    fail(Error::Kind::shape, os.str());
  }
}

void check_same_grid(const SpectralGrid& a, const SpectralGrid& b) {
  if (!(a == b)) fail(Error::Kind::shape, "fields live on different grids");
}

}  // namespace

ScalarField::ScalarField(SpectralGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  check_size(grid_, size());
}

ScalarField::ScalarField(SpectralGrid grid, std::vector<complex> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  check_size(grid_, size());
}

ScalarField ScalarField::zeros(const SpectralGrid& grid, FieldKind kind) {
  if (kind == FieldKind::real) return {grid, std::vector<double>(grid.total_points(), 0.0)};
  return {grid, std::vector<complex>(grid.total_points(), complex{})};
}

FieldKind ScalarField::kind() const {
  return std::holds_alternative<std::vector<double>>(values_) ? FieldKind::real
                                                              : FieldKind::complex;
}

std::size_t ScalarField::size() const {
  return std::visit([](const auto& v) { return v.size(); }, values_);
}

std::span<const double> ScalarField::real_values() const {
  if (!is_real()) fail(Error::Kind::shape, "complex field accessed as real");
  return std::get<std::vector<double>>(values_);
}

std::span<double> ScalarField::real_values() {
  if (!is_real()) fail(Error::Kind::shape, "complex field accessed as real");
  return std::get<std::vector<double>>(values_);
}

std::span<const complex> ScalarField::complex_values() const {
  if (is_real()) fail(Error::Kind::shape, "real field accessed as complex");
  return std::get<std::vector<complex>>(values_);
}

std::span<complex> ScalarField::complex_values() {
  if (is_real()) fail(Error::Kind::shape, "real field accessed as complex");
  return std::get<std::vector<complex>>(values_);
}

complex ScalarField::value(std::size_t n) const {
  if (is_real()) return std::get<std::vector<double>>(values_)[n];
  return std::get<std::vector<complex>>(values_)[n];
}

std::vector<complex> ScalarField::to_complex() const {
  if (!is_real()) return std::get<std::vector<complex>>(values_);
  const auto& r = std::get<std::vector<double>>(values_);
  return {r.begin(), r.end()};
}

Field2::Field2(ScalarField first, ScalarField second)
    : components_{std::move(first), std::move(second)} {
  check_same_grid(components_[0].grid(), components_[1].grid());
}

Field2 Field2::zeros(const SpectralGrid& grid, FieldKind kind) {
  return {ScalarField::zeros(grid, kind), ScalarField::zeros(grid, kind)};
}

std::vector<double> pack(const Field2& field) {
  const auto a = field[0].real_values();
  const auto b = field[1].real_values();
  std::vector<double> out(a.size() + b.size());
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

Field2 unpack(const SpectralGrid& grid, std::span<const double> packed) {
  const std::size_t nt = grid.total_points();
  if (packed.size() != 2 * nt) fail(Error::Kind::shape, "packed field has wrong length");
  return {ScalarField(grid, std::vector<double>(packed.begin(), packed.begin() + nt)),
          ScalarField(grid, std::vector<double>(packed.begin() + nt, packed.end()))};
}

// --- transforms -------------------------------------------------------------

namespace {

std::vector<complex> c2c(const SpectralGrid& grid, std::vector<complex> data, bool forward) {
  const auto& impl = grid.impl();
  fftw_execute_dft(forward ? impl.c2c_forward : impl.c2c_backward,
                   reinterpret_cast<fftw_complex*>(data.data()),
                   reinterpret_cast<fftw_complex*>(data.data()));
  return data;
}

}  // namespace

ScalarField forward_transform(const ScalarField& field) {
  const auto& grid = field.grid();
  check_size(grid, field.size());
  auto data = c2c(grid, field.to_complex(), true);
  const double scale = 1.0 / static_cast<double>(grid.total_points());
  for (auto& c : data) c *= scale;
  return {grid, std::move(data)};
}

ScalarField backward_transform(const ScalarField& coefficients) {
  const auto& grid = coefficients.grid();
  check_size(grid, coefficients.size());
  return {grid, c2c(grid, coefficients.to_complex(), false)};
}

std::span<const double> half_spectrum_mu2(const SpectralGrid& grid) {
  return grid.impl().half_mu2;
}

namespace {

// Aligned per-thread buffers for the real-to-complex path; the r2c/c2r plans
// are made for aligned arrays, which lets FFTW use its SIMD kernels.
struct RealScratch {
  double* real = nullptr;
  fftw_complex* half = nullptr;
  std::size_t real_size = 0;
  std::size_t half_size = 0;

  RealScratch() = default;
  RealScratch(const RealScratch&) = delete;
  RealScratch& operator=(const RealScratch&) = delete;
  ~RealScratch() {
    fftw_free(real);
    fftw_free(half);
  }

  void reserve(std::size_t nr, std::size_t nh) {
    if (nr > real_size) {
      fftw_free(real);
      real = static_cast<double*>(fftw_malloc(sizeof(double) * nr));
      real_size = nr;
    }
    if (nh > half_size) {
      fftw_free(half);
      half = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nh));
      half_size = nh;
    }
    if (real == nullptr || half == nullptr) throw std::bad_alloc();
  }
};

// out = c2r(mult(r2c(in))); `mult(s, c)` rescales half-spectrum slot s in place.
template <class Fn>
void real_spectral_map(const SpectralGrid& grid, std::span<const double> in, std::span<double> out,
                       Fn&& mult) {
  const auto& impl = grid.impl();
  check_size(grid, in.size());
  check_size(grid, out.size());
  thread_local RealScratch scratch;
  scratch.reserve(impl.total, impl.half_total);
  std::copy(in.begin(), in.end(), scratch.real);
  fftw_execute_dft_r2c(impl.r2c, scratch.real, scratch.half);
  auto* spec = reinterpret_cast<complex*>(scratch.half);
  for (std::size_t s = 0; s < impl.half_total; ++s) mult(s, spec[s]);
  fftw_execute_dft_c2r(impl.c2r, scratch.half, scratch.real);
  std::copy(scratch.real, scratch.real + impl.total, out.begin());
}

}  // namespace

void fourier_multiply_real(const SpectralGrid& grid, std::span<const double> multiplier,
                           std::span<const double> in, std::span<double> out) {
  const auto& impl = grid.impl();
  if (multiplier.size() != impl.half_total) fail(Error::Kind::shape, "multiplier size mismatch");
  const double scale = 1.0 / static_cast<double>(impl.total);
  real_spectral_map(grid, in, out, [&](std::size_t s, complex& c) { c *= multiplier[s] * scale; });
}

void laplacian_real(const SpectralGrid& grid, std::span<const double> in, std::span<double> out) {
  const auto& impl = grid.impl();
  const double scale = -1.0 / static_cast<double>(impl.total);
  real_spectral_map(grid, in, out,
                    [&](std::size_t s, complex& c) { c *= impl.half_mu2[s] * scale; });
}

void derivative_real(const SpectralGrid& grid, int axis, std::span<const double> in,
                     std::span<double> out) {
  const auto& impl = grid.impl();
  if (axis < 0 || axis >= impl.dim) fail(Error::Kind::shape, "derivative axis out of range");
  const int n = impl.n;
  const int nh = n / 2 + 1;
  const double scale = 1.0 / static_cast<double>(impl.total);
  real_spectral_map(grid, in, out, [&](std::size_t s, complex& c) {
    std::size_t rest = s;
    int m = static_cast<int>(rest % nh);
    rest /= nh;
    for (int a = 1; a <= axis; ++a) {
      m = static_cast<int>(rest % n);
      rest /= n;
    }
    // Slot N/2 is the unmatched k = -N/2 mode: no first-derivative partner.
    const double mu = (m == n / 2) ? 0.0 : impl.slot_mu[m];
    c *= complex(0.0, mu * scale);
  });
}

namespace {

template <class Fn>
ScalarField apply_multiplier(const ScalarField& field, Fn&& multiplier_at_slot) {
  const auto& grid = field.grid();
  check_size(grid, field.size());
  auto data = c2c(grid, field.to_complex(), true);
  const double scale = 1.0 / static_cast<double>(grid.total_points());
  for (std::size_t s = 0; s < data.size(); ++s) data[s] *= multiplier_at_slot(s) * scale;
  return {grid, c2c(grid, std::move(data), false)};
}

}  // namespace

ScalarField apply_laplacian(const ScalarField& field) {
  const auto& grid = field.grid();
  if (field.is_real()) {
    std::vector<double> out(grid.total_points());
    laplacian_real(grid, field.real_values(), out);
    return {grid, std::move(out)};
  }
  return apply_multiplier(field, [&](std::size_t s) -> complex {
    const auto idx = grid.multi_index(s);
    double sum = 0.0;
    for (int a = 0; a < grid.dim(); ++a) {
      const double mu = grid.wavenumber_at_slot(idx[a]);
      sum += mu * mu;
    }
    return -sum;
  });
}

ScalarField apply_derivative(const ScalarField& field, int axis) {
  const auto& grid = field.grid();
  if (axis < 0 || axis >= grid.dim()) fail(Error::Kind::shape, "derivative axis out of range");
  if (field.is_real()) {
    std::vector<double> out(grid.total_points());
    derivative_real(grid, axis, field.real_values(), out);
    return {grid, std::move(out)};
  }
  const int n = grid.points_per_dim();
  return apply_multiplier(field, [&](std::size_t s) -> complex {
    const int m = grid.multi_index(s)[axis];
    return m == n / 2 ? complex{} : complex(0.0, grid.wavenumber_at_slot(m));
  });
}

complex inner_product(const ScalarField& a, const ScalarField& b) {
  check_same_grid(a.grid(), b.grid());
  complex sum{};
  if (a.is_real() && b.is_real()) {
    const auto x = a.real_values();
    const auto y = b.real_values();
    double s = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) s += x[n] * y[n];
    sum = s;
  } else {
    for (std::size_t n = 0; n < a.size(); ++n) sum += a.value(n) * std::conj(b.value(n));
  }
  return sum * a.grid().cell_volume();
}

complex inner_product(const Field2& a, const Field2& b) {
  return inner_product(a[0], b[0]) + inner_product(a[1], b[1]);
}

double norm(const ScalarField& a) { return std::sqrt(std::max(0.0, inner_product(a, a).real())); }

double norm(const Field2& a) { return std::sqrt(std::max(0.0, inner_product(a, a).real())); }

ScalarField harmonic_potential(const SpectralGrid& grid, std::span<const double> gamma) {
  if (static_cast<int>(gamma.size()) != grid.dim()) {
    fail(Error::Kind::shape, "trap frequency vector length must equal the grid dimension");
  }
  for (double g : gamma) {
    if (!(g > 0.0)) fail(Error::Kind::shape, "trap frequencies must be positive");
  }
  std::vector<double> v(grid.total_points());
  for (std::size_t n = 0; n < v.size(); ++n) {
    const auto idx = grid.multi_index(n);
    double s = 0.0;
    for (int a = 0; a < grid.dim(); ++a) {
      const double x = grid.coordinate(idx[a]);
      s += gamma[a] * gamma[a] * x * x;
    }
    v[n] = 0.5 * s;
  }
  return {grid, std::move(v)};
}

}  // namespace bdgkit

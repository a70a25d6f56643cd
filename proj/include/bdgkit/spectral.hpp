#pragma once

// Fourier pseudo-spectral discretization on the periodic box [-L, L)^d.
//
// Grid points are x_n = -L + n h with h = 2L / N, stored x-fastest
// (index = ix + N * (iy + N * iz)). The plane wave W_k(x) = exp(i mu_k (x + L)),
// mu_k = pi k / L, sampled on this lattice is exp(2 pi i n k / N), so discrete
// Fourier coefficients are kept in the usual FFT order: slot m holds
// k = m for m < N/2 and k = m - N otherwise.

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace bdgkit {

using complex = std::complex<double>;

namespace detail {
struct GridImpl;
}

class SpectralGrid {
 public:
  int dim() const;
  double half_width() const;
  int points_per_dim() const;
  double mesh_size() const;
  std::size_t total_points() const;

  // h^d, the quadrature weight of one lattice point.
  double cell_volume() const;

  // mu_k for k = -N/2 .. N/2-1 (natural order).
  std::span<const double> wavenumbers() const;
  // mu_k for FFT slot m (k = m or m - N).
  double wavenumber_at_slot(int m) const;

  // x_i = -L + i h along any axis.
  double coordinate(int i) const;
  // Lattice multi-index (ix, iy, iz) of a flat index; unused axes are 0.
  std::array<int, 3> multi_index(std::size_t n) const;

  // Grids compare equal when dim, N and L agree.
  bool operator==(const SpectralGrid& other) const;

  const detail::GridImpl& impl() const { return *impl_; }

 private:
  friend SpectralGrid make_grid(int, double, int);
  explicit SpectralGrid(std::shared_ptr<const detail::GridImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<const detail::GridImpl> impl_;
};

// dim in {1,2,3}, half_width > 0, points_per_dim even and >= 4.
SpectralGrid make_grid(int dim, double half_width, int points_per_dim);

enum class FieldKind : unsigned char { real = 0, complex = 1 };

class ScalarField {
 public:
  ScalarField(SpectralGrid grid, std::vector<double> values);
  ScalarField(SpectralGrid grid, std::vector<complex> values);

  static ScalarField zeros(const SpectralGrid& grid, FieldKind kind = FieldKind::real);

  const SpectralGrid& grid() const { return grid_; }
  FieldKind kind() const;
  bool is_real() const { return kind() == FieldKind::real; }
  std::size_t size() const;

  // Typed views; asking for the wrong kind is a shape error.
  std::span<const double> real_values() const;
  std::span<double> real_values();
  std::span<const complex> complex_values() const;
  std::span<complex> complex_values();

  complex value(std::size_t n) const;
  std::vector<complex> to_complex() const;

 private:
  SpectralGrid grid_;
  std::variant<std::vector<double>, std::vector<complex>> values_;
};

// Two-component field; both components live on one grid.
class Field2 {
 public:
  Field2(ScalarField first, ScalarField second);

  static Field2 zeros(const SpectralGrid& grid, FieldKind kind = FieldKind::real);

  const SpectralGrid& grid() const { return components_[0].grid(); }
  bool is_real() const { return components_[0].is_real() && components_[1].is_real(); }

  const ScalarField& operator[](int j) const { return components_.at(j); }
  ScalarField& operator[](int j) { return components_.at(j); }

 private:
  std::array<ScalarField, 2> components_;
};

// Real two-component field packed as [phi_1 ; phi_2] (length 2 N_t).
std::vector<double> pack(const Field2& field);
Field2 unpack(const SpectralGrid& grid, std::span<const double> packed);

// Discrete Fourier coefficients, 1/N per dimension, FFT slot order.
ScalarField forward_transform(const ScalarField& field);
// Inverse of forward_transform (no normalization factor).
ScalarField backward_transform(const ScalarField& coefficients);

// Spectral Laplacian; the -N/2 mode keeps its mu^2 multiplier.
ScalarField apply_laplacian(const ScalarField& field);
// Spectral first derivative along `axis`; the -N/2 mode is zeroed.
ScalarField apply_derivative(const ScalarField& field, int axis);

// h^d sum_n sum_j a_j(x_n) conj(b_j(x_n)).
complex inner_product(const Field2& a, const Field2& b);
complex inner_product(const ScalarField& a, const ScalarField& b);
// Discrete L2 norm, sqrt(h^d sum |a|^2).
double norm(const Field2& a);
double norm(const ScalarField& a);

// V(x) = 1/2 sum_sigma gamma_sigma^2 sigma^2.
ScalarField harmonic_potential(const SpectralGrid& grid, std::span<const double> gamma);

// Raw kernels on contiguous real arrays of N_t samples. These are what the
// operator appliers use; they allocate only scratch space.
void laplacian_real(const SpectralGrid& grid, std::span<const double> in, std::span<double> out);
void derivative_real(const SpectralGrid& grid, int axis, std::span<const double> in,
                     std::span<double> out);
// out = multiplier(mu) applied in Fourier space, where multiplier(k) is
// given for each half-spectrum slot of the real transform.
void fourier_multiply_real(const SpectralGrid& grid, std::span<const double> multiplier,
                           std::span<const double> in, std::span<double> out);
// Half-spectrum slot layout used by fourier_multiply_real: returns
// sum_sigma mu_sigma^2 for every slot (length N^{d-1} (N/2+1)).
std::span<const double> half_spectrum_mu2(const SpectralGrid& grid);

}  // namespace bdgkit

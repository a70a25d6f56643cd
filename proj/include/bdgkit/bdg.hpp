#pragma once

// Linearization around a real stationary state. With u = f + g, v = f - g
// the Bogoliubov equations become the pair
//
//   H- g = omega f,   H+ f = omega g,   H+- = A +- B,
//
// where A holds the shifted single-particle operators L_1, L_2 on the
// diagonal and beta12 phi_1 phi_2 + Omega/2 off it, and B is the pointwise
// matrix [[b11 phi_1^2, b12 phi_1 phi_2], [b12 phi_1 phi_2, b22 phi_2^2]].

#include <vector>

#include "bdgkit/groundstate.hpp"

namespace bdgkit {

struct BdgContext {
  GroundState ground;
  std::vector<double> potential;
  // Multiplicative parts of L_1 and L_2 (everything except -lap/2).
  std::vector<double> l1_diag;
  std::vector<double> l2_diag;
  std::vector<double> offdiag_a;  // beta12 phi_1 phi_2 + Omega/2
  std::vector<double> b11;        // beta11 phi_1^2
  std::vector<double> b12;        // beta12 phi_1 phi_2
  std::vector<double> b22;        // beta22 phi_2^2

  const SpectralGrid& grid() const { return ground.phi.grid(); }
  std::size_t total_points() const { return grid().total_points(); }
  // Length of a packed two-component vector.
  std::size_t packed_size() const { return 2 * total_points(); }
};

struct ContextOptions {
  double max_ground_residual = 1e-9;
  // Test hook: builds A - B / A + B with B negated, i.e. a deliberately wrong
  // linearization used to check that structural diagnostics catch it.
  bool negate_b = false;
};

// Rejects complex or insufficiently converged ground states.
BdgContext build_context(const GroundState& ground, const ContextOptions& opts = {});

Field2 apply_hplus(const BdgContext& ctx, const Field2& x);
Field2 apply_hminus(const BdgContext& ctx, const Field2& x);
// Packed variants: x and out are [x_1 ; x_2] of length 2 N_t, out must not alias x.
void apply_hplus(const BdgContext& ctx, std::span<const double> x, std::span<double> out);
void apply_hminus(const BdgContext& ctx, std::span<const double> x, std::span<double> out);

struct CgStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

// Preconditioned CG for H+ y = rhs to relative residual `tol`. Throws an
// indefinite error on a non-positive curvature direction and a convergence
// error after 10 * (2 N_t) iterations.
Field2 apply_hplus_inverse(const BdgContext& ctx, const Field2& rhs, double tol = 1e-11,
                           CgStats* stats = nullptr);
void apply_hplus_inverse(const BdgContext& ctx, std::span<const double> rhs, std::span<double> y,
                         double tol = 1e-11, CgStats* stats = nullptr);

struct NullspaceBasis {
  std::vector<Field2> kernel_g;  // Phi_j, orthonormal
  std::vector<Field2> kernel_f;  // H+^{-1} Phi_j, or Phi_j when semisimple
  double c1 = 0.0;               // NoJJ: second kernel vector is (c1 phi_1, c2 phi_2)
  double c2 = 0.0;
  // Without interactions H+ = H- and H+ Phi_j = 0 as well: the zero eigenvalue
  // has no Jordan block, H+^{-1} Phi_j does not exist and Phi_j itself
  // deflates the f-space.
  bool semisimple = false;
  // Largest observed residuals, for reporting. In the semisimple case
  // hplus_residual is max ||H+ Phi_j||.
  double hminus_residual = 0.0;
  double hplus_residual = 0.0;
};

NullspaceBasis build_nullspace(const BdgContext& ctx, double inner_tol = 1e-11);

struct AnalyticPair {
  int axis = 0;
  double omega = 0.0;
  Field2 u;
  Field2 v;
};

// Dipole (center-of-mass) modes of the harmonic trap: omega = gamma_sigma,
// u,v built from d_sigma Phi and sigma Phi.
std::vector<AnalyticPair> analytic_eigenpairs(const GroundState& ground);

}  // namespace bdgkit

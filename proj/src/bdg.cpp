#include "bdgkit/bdg.hpp"

#include <cmath>
#include <sstream>

#include "bdgkit/errors.hpp"

namespace bdgkit {

namespace {

double weighted_dot(const SpectralGrid& grid, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s * grid.cell_volume();
}

void check_packed(const BdgContext& ctx, std::span<const double> x, std::span<const double> out) {
  if (x.size() != ctx.packed_size() || out.size() != ctx.packed_size()) {
    fail(Error::Kind::shape, "packed vector length does not match the BdG context");
  }
}

// out = [[-lap/2 + d1, o], [o, -lap/2 + d2]] x with d_j = l_j + sign b_jj and
// o = offdiag_a + sign b12.
void apply_block(const BdgContext& ctx, double sign, std::span<const double> x,
                 std::span<double> out) {
  check_packed(ctx, x, out);
  const std::size_t nt = ctx.total_points();
  const auto x1 = x.subspan(0, nt);
  const auto x2 = x.subspan(nt, nt);
  auto o1 = out.subspan(0, nt);
  auto o2 = out.subspan(nt, nt);
  laplacian_real(ctx.grid(), x1, o1);
  laplacian_real(ctx.grid(), x2, o2);
  for (std::size_t n = 0; n < nt; ++n) {
    const double off = ctx.offdiag_a[n] + sign * ctx.b12[n];
    const double a = x1[n];
    const double b = x2[n];
    o1[n] = -0.5 * o1[n] + (ctx.l1_diag[n] + sign * ctx.b11[n]) * a + off * b;
    o2[n] = -0.5 * o2[n] + (ctx.l2_diag[n] + sign * ctx.b22[n]) * b + off * a;
  }
}

Field2 apply_field(const BdgContext& ctx, double sign, const Field2& x) {
  if (!(x.grid() == ctx.grid())) fail(Error::Kind::shape, "field lives on another grid");
  if (!x.is_real()) fail(Error::Kind::shape, "BdG operators act on real fields");
  const auto in = pack(x);
  std::vector<double> out(in.size());
  apply_block(ctx, sign, in, out);
  return unpack(ctx.grid(), out);
}

}  // namespace

BdgContext build_context(const GroundState& ground, const ContextOptions& opts) {
  if (!ground.phi.is_real()) {
    fail(Error::Kind::precondition, "BdG operators require a real ground state");
  }
  if (!(ground.residual <= opts.max_ground_residual)) {
    std::ostringstream os;
    os << "ground-state residual " << ground.residual << " exceeds " << opts.max_ground_residual
       << "; the spectrum near zero would be polluted";
    fail(Error::Kind::precondition, os.str());
  }
  const auto& grid = ground.phi.grid();
  const auto& p = ground.params;
  p.validate(ground.mode, grid.dim());

  BdgContext ctx{.ground = ground};
  const auto v = harmonic_potential(grid, p.gamma);
  ctx.potential.assign(v.real_values().begin(), v.real_values().end());

  const double mu1 = ground.chemical_potential(0);
  const double mu2 = ground.chemical_potential(1);
  const auto phi1 = ground.phi[0].real_values();
  const auto phi2 = ground.phi[1].real_values();
  const std::size_t nt = grid.total_points();
  const double bsign = opts.negate_b ? -1.0 : 1.0;
  ctx.l1_diag.resize(nt);
  ctx.l2_diag.resize(nt);
  ctx.offdiag_a.resize(nt);
  ctx.b11.resize(nt);
  ctx.b12.resize(nt);
  ctx.b22.resize(nt);
  for (std::size_t n = 0; n < nt; ++n) {
    const double a = phi1[n];
    const double b = phi2[n];
    ctx.l1_diag[n] =
        ctx.potential[n] + 0.5 * p.raman + 2 * p.beta11 * a * a + p.beta12 * b * b - mu1;
    ctx.l2_diag[n] =
        ctx.potential[n] - 0.5 * p.raman + p.beta12 * a * a + 2 * p.beta22 * b * b - mu2;
    ctx.offdiag_a[n] = p.beta12 * a * b + 0.5 * p.rabi;
    ctx.b11[n] = bsign * p.beta11 * a * a;
    ctx.b12[n] = bsign * p.beta12 * a * b;
    ctx.b22[n] = bsign * p.beta22 * b * b;
  }
  return ctx;
}

Field2 apply_hplus(const BdgContext& ctx, const Field2& x) { return apply_field(ctx, 1.0, x); }
Field2 apply_hminus(const BdgContext& ctx, const Field2& x) { return apply_field(ctx, -1.0, x); }

void apply_hplus(const BdgContext& ctx, std::span<const double> x, std::span<double> out) {
  apply_block(ctx, 1.0, x, out);
}
void apply_hminus(const BdgContext& ctx, std::span<const double> x, std::span<double> out) {
  apply_block(ctx, -1.0, x, out);
}

void apply_hplus_inverse(const BdgContext& ctx, std::span<const double> rhs, std::span<double> y,
                         double tol, CgStats* stats) {
  check_packed(ctx, rhs, y);
  const auto& grid = ctx.grid();
  const std::size_t nt = ctx.total_points();
  const std::size_t size = ctx.packed_size();

  const auto mu2 = half_spectrum_mu2(grid);
  std::vector<double> precond(mu2.size());
  for (std::size_t s = 0; s < mu2.size(); ++s) precond[s] = 1.0 / (1.0 + 0.5 * mu2[s]);
  auto apply_precond = [&](std::span<const double> in, std::span<double> out) {
    fourier_multiply_real(grid, precond, in.subspan(0, nt), out.subspan(0, nt));
    fourier_multiply_real(grid, precond, in.subspan(nt, nt), out.subspan(nt, nt));
  };

  std::fill(y.begin(), y.end(), 0.0);
  const double bnorm = std::sqrt(weighted_dot(grid, rhs, rhs));
  if (stats != nullptr) *stats = {};
  if (bnorm == 0.0) return;

  std::vector<double> r(rhs.begin(), rhs.end()), z(size), p(size), q(size);
  apply_precond(r, z);
  p = z;
  double rz = weighted_dot(grid, r, z);
  const int cap = static_cast<int>(10 * size);
  double rel = 1.0;
  for (int it = 1; it <= cap; ++it) {
    apply_hplus(ctx, p, q);
    const double curvature = weighted_dot(grid, p, q);
    if (!(curvature > 0.0)) {
      std::ostringstream os;
      os << "H+ is not positive definite: found <p, H+ p> = " << curvature;
      throw VerificationError(Error::Kind::indefinite, os.str(), curvature);
    }
    const double step = rz / curvature;
    for (std::size_t n = 0; n < size; ++n) {
      y[n] += step * p[n];
      r[n] -= step * q[n];
    }
    rel = std::sqrt(weighted_dot(grid, r, r)) / bnorm;
    if (stats != nullptr) *stats = {it, rel};
    if (rel <= tol) return;
    apply_precond(r, z);
    const double rz_next = weighted_dot(grid, r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t n = 0; n < size; ++n) p[n] = z[n] + beta * p[n];
  }
  std::ostringstream os;
  os << "H+ solve did not reach relative residual " << tol << " in " << cap
     << " iterations (last " << rel << ")";
  throw ConvergenceError(os.str(), rel);
}

Field2 apply_hplus_inverse(const BdgContext& ctx, const Field2& rhs, double tol, CgStats* stats) {
  if (!(rhs.grid() == ctx.grid()) || !rhs.is_real()) {
    fail(Error::Kind::shape, "right-hand side must be a real field on the context grid");
  }
  const auto b = pack(rhs);
  std::vector<double> y(b.size());
  apply_hplus_inverse(ctx, b, y, tol, stats);
  return unpack(ctx.grid(), y);
}

NullspaceBasis build_nullspace(const BdgContext& ctx, double inner_tol) {
  const auto& grid = ctx.grid();
  const auto& gs = ctx.ground;
  NullspaceBasis basis;

  std::vector<std::vector<double>> kernel{pack(gs.phi)};
  if (gs.mode == Mode::no_jj) {
    const double alpha = gs.params.alpha;
    if (!(alpha > 0.0 && alpha < 1.0)) {
      fail(Error::Kind::degenerate_constraint, "nullspace construction needs 0 < alpha < 1");
    }
    basis.c1 = -std::sqrt((1.0 - alpha) / alpha);
    basis.c2 = std::sqrt(alpha / (1.0 - alpha));
    auto second = kernel[0];
    const std::size_t nt = grid.total_points();
    for (std::size_t n = 0; n < nt; ++n) {
      second[n] *= basis.c1;
      second[nt + n] *= basis.c2;
    }
    kernel.push_back(std::move(second));
  }

  auto verify = [](double value, double bound, const std::string& what) {
    if (!(value <= bound)) {
      std::ostringstream os;
      os << "nullspace check failed: " << what << " = " << value << " (bound " << bound << ")";
      throw VerificationError(Error::Kind::nullspace_verification, os.str(), value);
    }
  };

  for (std::size_t i = 0; i < kernel.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double ip = weighted_dot(grid, kernel[i], kernel[j]);
      verify(std::abs(ip - (i == j ? 1.0 : 0.0)), 1e-12, "kernel orthonormality defect");
    }
  }

  std::vector<double> work(ctx.packed_size());
  double hplus_kernel = 0.0;
  for (const auto& k : kernel) {
    apply_hplus(ctx, k, work);
    hplus_kernel = std::max(hplus_kernel, std::sqrt(weighted_dot(grid, work, work)));
  }
  basis.semisimple = hplus_kernel <= 1e-9;

  for (const auto& k : kernel) {
    apply_hminus(ctx, k, work);
    const double rm = std::sqrt(weighted_dot(grid, work, work));
    basis.hminus_residual = std::max(basis.hminus_residual, rm);
    verify(rm, 1e-9, "||H- Phi_j||");

    if (basis.semisimple) {
      basis.hplus_residual = hplus_kernel;
      basis.kernel_g.push_back(unpack(grid, k));
      basis.kernel_f.push_back(unpack(grid, k));
      continue;
    }
    std::vector<double> khat(ctx.packed_size());
    apply_hplus_inverse(ctx, k, khat, inner_tol);
    apply_hplus(ctx, khat, work);
    for (std::size_t n = 0; n < work.size(); ++n) work[n] -= k[n];
    const double rp = std::sqrt(weighted_dot(grid, work, work));
    basis.hplus_residual = std::max(basis.hplus_residual, rp);
    verify(rp, 1e-9, "||H+ Phi_hat_j - Phi_j||");

    basis.kernel_g.push_back(unpack(grid, k));
    basis.kernel_f.push_back(unpack(grid, khat));
  }
  return basis;
}

std::vector<AnalyticPair> analytic_eigenpairs(const GroundState& ground) {
  if (!ground.phi.is_real()) fail(Error::Kind::precondition, "analytic pairs need a real ground state");
  const auto& grid = ground.phi.grid();
  const auto& gamma = ground.params.gamma;
  if (static_cast<int>(gamma.size()) != grid.dim()) {
    fail(Error::Kind::shape, "trap frequency vector length must equal the grid dimension");
  }
  const std::size_t nt = grid.total_points();
  const auto phi = pack(ground.phi);

  std::vector<AnalyticPair> pairs;
  for (int axis = 0; axis < grid.dim(); ++axis) {
    const double g = gamma[axis];
    std::vector<double> dphi(2 * nt);
    for (int j = 0; j < 2; ++j) {
      derivative_real(grid, axis, std::span<const double>(phi).subspan(j * nt, nt),
                      std::span<double>(dphi).subspan(j * nt, nt));
    }
    std::vector<double> u(2 * nt), v(2 * nt);
    for (std::size_t n = 0; n < 2 * nt; ++n) {
      const double x = grid.coordinate(grid.multi_index(n % nt)[axis]);
      const double a = dphi[n] / std::sqrt(g);
      const double b = std::sqrt(g) * x * phi[n];
      u[n] = (a - b) / std::sqrt(2.0);
      v[n] = (a + b) / std::sqrt(2.0);
    }
    pairs.push_back({axis, g, unpack(grid, u), unpack(grid, v)});
  }
  return pairs;
}

}  // namespace bdgkit

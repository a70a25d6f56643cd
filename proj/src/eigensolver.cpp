#include "bdgkit/eigensolver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "bdgkit/errors.hpp"
#include "bdgkit/field_io.hpp"

namespace bdgkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(SolverMethod method) {
  return method == SolverMethod::biorthogonal ? "biorthogonal" : "pencil";
}

SolverMethod solver_method_from_string(const std::string& text) {
  if (text == "biorthogonal") return SolverMethod::biorthogonal;
  if (text == "pencil") return SolverMethod::pencil;
  fail(Error::Kind::usage, "unknown solver method '" + text + "'");
}

void SolverOptions::validate() const {
  if (n_ev < 1) fail(Error::Kind::usage, "n_ev must be at least 1");
  if (effective_block_size() < n_ev) fail(Error::Kind::usage, "block_size must be >= n_ev");
  if (!(tol > 0.0)) fail(Error::Kind::usage, "tol must be positive");
  if (!(inner_tol > 0.0)) fail(Error::Kind::usage, "inner_tol must be positive");
  if (max_outer < 1) fail(Error::Kind::usage, "max_outer must be at least 1");
  if (precond_cg_steps < 0) fail(Error::Kind::usage, "precond_cg_steps must be >= 0");
}

namespace {

double wdot(const SpectralGrid& grid, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s * grid.cell_volume();
}

std::span<const double> col(const MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}
std::span<double> col(MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

// Shared machinery for both block methods: operator application on column
// blocks, the Fourier-diagonal preconditioner and the deflation projectors.
class Workspace {
 public:
  Workspace(const BdgContext& ctx, const NullspaceBasis& ns, SolverStats& stats)
      : ctx_(ctx), stats_(stats), nt_(ctx.total_points()) {
    const auto mu2 = half_spectrum_mu2(ctx.grid());
    precond_.resize(mu2.size());
    for (std::size_t s = 0; s < mu2.size(); ++s) precond_[s] = 1.0 / (1.0 + 0.5 * mu2[s]);

    const auto k = static_cast<Eigen::Index>(ns.kernel_g.size());
    const auto m = static_cast<Eigen::Index>(ctx.packed_size());
    z_.resize(m, k);
    zhat_.resize(m, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto a = pack(ns.kernel_g[j]);
      const auto b = pack(ns.kernel_f[j]);
      z_.col(j) = Eigen::Map<const VectorXd>(a.data(), m);
      zhat_.col(j) = Eigen::Map<const VectorXd>(b.data(), m);
    }
    coupling_ = (zhat_.transpose() * z_).partialPivLu();
  }

  Eigen::Index rows() const { return static_cast<Eigen::Index>(ctx_.packed_size()); }

  MatrixXd hplus(const MatrixXd& s) {
    MatrixXd out(s.rows(), s.cols());
    for (Eigen::Index j = 0; j < s.cols(); ++j) apply_hplus(ctx_, col(s, j), col(out, j));
    stats_.matvecs += s.cols();
    return out;
  }

  MatrixXd hminus(const MatrixXd& s) {
    MatrixXd out(s.rows(), s.cols());
    for (Eigen::Index j = 0; j < s.cols(); ++j) apply_hminus(ctx_, col(s, j), col(out, j));
    stats_.matvecs += s.cols();
    return out;
  }

  MatrixXd hplus_inverse(const MatrixXd& s, double tol) {
    MatrixXd out(s.rows(), s.cols());
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      CgStats cg;
      apply_hplus_inverse(ctx_, col(s, j), col(out, j), tol, &cg);
      stats_.matvecs += cg.iterations;
      stats_.inner_solves += 1;
    }
    return out;
  }

  MatrixXd precondition(const MatrixXd& s) {
    MatrixXd out(s.rows(), s.cols());
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (cg_steps_ > 0) {
        truncated_cg(col(s, j), col(out, j));
      } else {
        fourier(col(s, j), col(out, j));
      }
    }
    return out;
  }

  void set_cg_steps(int steps) { cg_steps_ = steps; }

  // g-space: remove kernel_g along itself so the result is orthogonal to kernel_f.
  // This is also the H+^{-1}-orthogonal projection against kernel_g.
  MatrixXd project_g(const MatrixXd& s) const {
    if (z_.cols() == 0) return s;
    return s - z_ * coupling_.solve(zhat_.transpose() * s);
  }

  // f-space: remove kernel_f along itself so the result is orthogonal to kernel_g.
  MatrixXd project_f(const MatrixXd& s) const {
    if (z_.cols() == 0) return s;
    const MatrixXd zt_zhat = z_.transpose() * zhat_;
    return s - zhat_ * zt_zhat.partialPivLu().solve(z_.transpose() * s);
  }

 private:
  void fourier(std::span<const double> in, std::span<double> out) const {
    const auto& grid = ctx_.grid();
    fourier_multiply_real(grid, precond_, in.subspan(0, nt_), out.subspan(0, nt_));
    fourier_multiply_real(grid, precond_, in.subspan(nt_, nt_), out.subspan(nt_, nt_));
  }

  // A fixed number of Fourier-preconditioned CG steps on H+ y = r, started
  // from zero: a cheap approximate inverse that also sees the trap.
  void truncated_cg(std::span<const double> rhs, std::span<double> y) {
    const std::size_t size = rhs.size();
    std::vector<double> r(rhs.begin(), rhs.end()), z(size), p(size), q(size);
    std::fill(y.begin(), y.end(), 0.0);
    fourier(r, z);
    p = z;
    double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double r0 = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
    for (int it = 0; it < cg_steps_ && rz > 0.0; ++it) {
      apply_hplus(ctx_, p, q);
      ++stats_.matvecs;
      const double curvature = std::inner_product(p.begin(), p.end(), q.begin(), 0.0);
      if (!(curvature > 0.0)) break;
      const double step = rz / curvature;
      for (std::size_t n = 0; n < size; ++n) {
        y[n] += step * p[n];
        r[n] -= step * q[n];
      }
      if (std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0)) <= 1e-3 * r0) break;
      fourier(r, z);
      const double rz_next = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t n = 0; n < size; ++n) p[n] = z[n] + beta * p[n];
    }
  }

  const BdgContext& ctx_;
  SolverStats& stats_;
  int cg_steps_ = 0;
  std::size_t nt_;
  std::vector<double> precond_;
  MatrixXd z_;
  MatrixXd zhat_;
  Eigen::PartialPivLU<MatrixXd> coupling_;
};

MatrixXd thin_q(const Eigen::HouseholderQR<MatrixXd>& qr, Eigen::Index cols) {
  return qr.householderQ() * MatrixXd::Identity(qr.rows(), cols);
}

// Orthonormal basis [Q_x, Q_e] where Q_x spans the iterate block x and Q_e
// the part of `extra` outside it. Householder QR keeps the small correction
// directions that a Gram-matrix orthonormalization would lose near
// convergence; columns of `extra` (normalized) that leave less than 1e-10
// outside span(x) and the other kept columns are dropped.
MatrixXd extend_basis(const MatrixXd& x, const MatrixXd& extra) {
  const Eigen::HouseholderQR<MatrixXd> qx(x);
  const MatrixXd q = thin_q(qx, x.cols());
  if (extra.cols() == 0) return q;
  MatrixXd y = extra;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double n = y.col(j).norm();
    if (n > 0.0) y.col(j) /= n;
  }
  for (int pass = 0; pass < 2; ++pass) y -= q * (q.transpose() * y);
  const Eigen::ColPivHouseholderQR<MatrixXd> qy(y);
  const auto& r = qy.matrixQR();
  Eigen::Index rank = 0;
  while (rank < std::min(r.rows(), r.cols()) && std::abs(r(rank, rank)) > 1e-10) ++rank;
  MatrixXd qe = qy.householderQ() * MatrixXd::Identity(y.rows(), rank);
  qe -= q * (q.transpose() * qe);
  const Eigen::HouseholderQR<MatrixXd> qe2(qe);
  MatrixXd out(x.rows(), x.cols() + rank);
  out.leftCols(x.cols()) = q;
  out.rightCols(rank) = thin_q(qe2, rank);
  return out;
}

MatrixXd hcat(std::initializer_list<const MatrixXd*> blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto* b : blocks) {
    if (b->cols() == 0) continue;
    rows = b->rows();
    cols += b->cols();
  }
  MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  for (const auto* b : blocks) {
    if (b->cols() == 0) continue;
    out.middleCols(at, b->cols()) = *b;
    at += b->cols();
  }
  return out;
}

MatrixXd select_cols(const MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t q = 0; q < idx.size(); ++q) out.col(static_cast<Eigen::Index>(q)) = m.col(idx[q]);
  return out;
}

MatrixXd random_block(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = d(rng);
  }
  return out;
}

// Residual of a Ritz pair after scaling to <f, g> = 1/4.
double pair_residual(const SpectralGrid& grid, double omega, std::span<const double> f,
                     std::span<const double> g, std::span<const double> hminus_g,
                     std::span<const double> hplus_f) {
  const double s = wdot(grid, f, g);
  if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
  const double c = 1.0 / std::sqrt(4.0 * s);
  double r1 = 0.0;
  double r2 = 0.0;
  for (std::size_t n = 0; n < f.size(); ++n) {
    const double a = hminus_g[n] - omega * f[n];
    const double b = hplus_f[n] - omega * g[n];
    r1 += a * a;
    r2 += b * b;
  }
  const double w = grid.cell_volume();
  return c * (std::sqrt(r1 * w) + std::sqrt(r2 * w));
}

struct RawModes {
  std::vector<double> omega;
  MatrixXd f;
  MatrixXd g;
};

[[noreturn]] void partial_failure(const std::vector<double>& omega,
                                  const std::vector<double>& residual, int n_ev, double tol,
                                  int max_outer) {
  std::ostringstream os;
  os << "eigensolver stopped after " << max_outer << " iterations; converged modes:";
  int count = 0;
  for (int i = 0; i < n_ev; ++i) {
    if (residual[i] <= tol * std::max(1.0, omega[i])) {
      os << ' ' << (i + 1) << ":" << omega[i];
      ++count;
    }
  }
  if (count == 0) os << " none";
  double worst = 0.0;
  for (int i = 0; i < n_ev; ++i) worst = std::max(worst, residual[i]);
  os << " (worst residual " << worst << ")";
  throw VerificationError(Error::Kind::partial_result, os.str(), worst);
}

RawModes run_biorthogonal(const BdgContext& ctx, Workspace& ws, const SolverOptions& opts,
                          SolverStats& stats) {
  const auto& grid = ctx.grid();
  const int nb = opts.effective_block_size();
  const Eigen::Index m = ws.rows();

  MatrixXd x = ws.project_g(ws.precondition(random_block(m, nb, opts.seed)));
  MatrixXd y = ws.project_f(x);
  MatrixXd wx(m, 0), wy(m, 0), px(m, 0), py(m, 0);
  std::vector<double> omega(nb), residual(nb);

  for (int it = 1;; ++it) {
    stats.iterations = it;
    const MatrixXd ex = hcat({&wx, &px});
    const MatrixXd ey = hcat({&wy, &py});
    const MatrixXd u = extend_basis(x, ex);
    const MatrixXd v = extend_basis(y, ey);
    const MatrixXd hu = ws.hminus(u);
    const MatrixXd hv = ws.hplus(v);

    MatrixXd k = u.transpose() * hu;
    k = 0.5 * (k + k.transpose()).eval();
    MatrixXd mr = v.transpose() * hv;
    mr = 0.5 * (mr + mr.transpose()).eval();
    const MatrixXd e = u.transpose() * v;
    const MatrixXd minv_et = mr.llt().solve(e.transpose());
    MatrixXd gmat = e * minv_et;
    gmat = 0.5 * (gmat + gmat.transpose()).eval();

    // G a = theta K a with theta = 1/omega^2: the largest theta are the wanted
    // smallest positive omega.
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(gmat, k);
    if (es.info() != Eigen::Success) {
      fail(Error::Kind::convergence, "projected eigenproblem failed (H- not positive on the subspace)");
    }
    const auto nsub = es.eigenvalues().size();
    if (nsub < nb) {
      fail(Error::Kind::size, "search subspace collapsed below the block size");
    }
    MatrixXd a(u.cols(), nb), b(v.cols(), nb);
    for (int i = 0; i < nb; ++i) {
      const double theta = es.eigenvalues()(nsub - 1 - i);
      if (!(theta > 0.0)) fail(Error::Kind::convergence, "projected pair has no positive Ritz value");
      omega[i] = 1.0 / std::sqrt(theta);
      a.col(i) = es.eigenvectors().col(nsub - 1 - i);
      b.col(i) = omega[i] * minv_et * a.col(i);
    }

    x = u * a;
    y = v * b;
    const MatrixXd hx = hu * a;
    const MatrixXd hy = hv * b;
    for (int i = 0; i < nb; ++i) {
      residual[i] = pair_residual(grid, omega[i], col(y, i), col(x, i), col(hx, i), col(hy, i));
    }

    bool done = true;
    std::vector<Eigen::Index> active;
    for (int i = 0; i < nb; ++i) {
      const bool ok = residual[i] <= opts.tol * std::max(1.0, omega[i]);
      if (i < opts.n_ev && !ok) done = false;
      if (!ok) active.push_back(i);
    }
    if (done) break;
    if (it >= opts.max_outer) partial_failure(omega, residual, opts.n_ev, opts.tol, opts.max_outer);

    const MatrixXd om = VectorXd::Map(omega.data(), nb).asDiagonal();
    const MatrixXd rx = hx - y * om;
    const MatrixXd ry = hy - x * om;
    wx = ws.project_g(ws.precondition(select_cols(rx, active)));
    wy = ws.project_f(ws.precondition(select_cols(ry, active)));

    // Previous-direction blocks: the part of the new iterate outside span(X_old).
    px = select_cols(u.rightCols(u.cols() - nb) * a.bottomRows(u.cols() - nb), active);
    py = select_cols(v.rightCols(v.cols() - nb) * b.bottomRows(v.cols() - nb), active);
  }

  RawModes out;
  out.omega.assign(omega.begin(), omega.begin() + opts.n_ev);
  out.f = y.leftCols(opts.n_ev);
  out.g = x.leftCols(opts.n_ev);
  return out;
}

RawModes run_pencil(const BdgContext& ctx, Workspace& ws, const SolverOptions& opts,
                    SolverStats& stats) {
  const auto& grid = ctx.grid();
  const int nb = opts.effective_block_size();
  const Eigen::Index m = ws.rows();

  MatrixXd x = ws.project_g(ws.precondition(random_block(m, nb, opts.seed)));
  MatrixXd w(m, 0), p(m, 0);
  std::vector<double> omega(nb), residual(nb);
  MatrixXd f(m, nb);

  for (int it = 1;; ++it) {
    stats.iterations = it;
    const MatrixXd extra = hcat({&w, &p});
    const MatrixXd u = extend_basis(x, extra);
    // H+^{-1} is applied to the orthonormal basis itself. Carrying images
    // through the (possibly large) orthonormalization coefficients would
    // amplify the inner-solve error until the pencil loses definiteness.
    const MatrixXd bu = ws.hplus_inverse(u, opts.inner_tol);
    const MatrixXd au = ws.hminus(u);

    MatrixXd ar = u.transpose() * au;
    ar = 0.5 * (ar + ar.transpose()).eval();
    MatrixXd br = u.transpose() * bu;
    br = 0.5 * (br + br.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(ar, br);
    if (es.info() != Eigen::Success) {
      fail(Error::Kind::convergence, "projected pencil failed (H+^{-1} not positive on the subspace)");
    }
    if (es.eigenvalues().size() < nb) {
      fail(Error::Kind::size, "search subspace collapsed below the block size");
    }
    const MatrixXd a = es.eigenvectors().leftCols(nb);
    for (int i = 0; i < nb; ++i) {
      const double lam = es.eigenvalues()(i);
      if (!(lam > 0.0)) fail(Error::Kind::convergence, "non-positive Ritz value on the deflated pencil");
      omega[i] = std::sqrt(lam);
    }
    x = u * a;
    const MatrixXd bx = bu * a;
    const MatrixXd ax = au * a;

    // f = H- g / omega; the pair residual needs H+ f for the wanted modes.
    for (int i = 0; i < nb; ++i) f.col(i) = ax.col(i) / omega[i];
    const MatrixXd hf = ws.hplus(f.leftCols(opts.n_ev));
    for (int i = 0; i < nb; ++i) {
      if (i < opts.n_ev) {
        residual[i] = pair_residual(grid, omega[i], col(f, i), col(x, i), col(ax, i), col(hf, i));
      } else {
        residual[i] = std::numeric_limits<double>::infinity();
      }
    }

    bool done = true;
    std::vector<Eigen::Index> active;
    for (int i = 0; i < nb; ++i) {
      const bool ok = residual[i] <= opts.tol * std::max(1.0, omega[i]);
      if (i < opts.n_ev && !ok) done = false;
      if (!ok) active.push_back(i);
    }
    if (done) break;
    if (it >= opts.max_outer) partial_failure(omega, residual, opts.n_ev, opts.tol, opts.max_outer);

    MatrixXd r = ax - bx * VectorXd::Map(omega.data(), nb).cwiseAbs2().asDiagonal();
    w = ws.project_g(ws.precondition(select_cols(r, active)));

    p = select_cols(u.rightCols(u.cols() - nb) * a.bottomRows(u.cols() - nb), active);
  }

  RawModes out;
  out.omega.assign(omega.begin(), omega.begin() + opts.n_ev);
  out.f = f.leftCols(opts.n_ev);
  out.g = x.leftCols(opts.n_ev);
  return out;
}

std::vector<double> to_vec(const MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), m.col(j).data() + m.rows()};
}

}  // namespace

ModePair make_mode_pair(const BdgContext& ctx, double omega, std::span<const double> f,
                        std::span<const double> g) {
  const auto& grid = ctx.grid();
  const std::size_t size = ctx.packed_size();
  if (f.size() != size || g.size() != size) fail(Error::Kind::shape, "mode has wrong length");
  const double s = wdot(grid, f, g);
  if (!(s > 0.0)) {
    fail(Error::Kind::invariant, "mode pair has non-positive <f, g>; cannot normalize");
  }
  const double c = 1.0 / std::sqrt(4.0 * s);
  std::vector<double> fs(size), gs(size), us(size), vs(size);
  for (std::size_t n = 0; n < size; ++n) {
    fs[n] = c * f[n];
    gs[n] = c * g[n];
    us[n] = fs[n] + gs[n];
    vs[n] = fs[n] - gs[n];
  }
  std::vector<double> hm(size), hp(size);
  apply_hminus(ctx, gs, hm);
  apply_hplus(ctx, fs, hp);
  const double res = pair_residual(grid, omega, fs, gs, hm, hp);
  return ModePair{.omega = omega,
                  .f = unpack(grid, fs),
                  .g = unpack(grid, gs),
                  .u = unpack(grid, us),
                  .v = unpack(grid, vs),
                  .residual = res};
}

BiorthResult biorthonormalize(const SpectralGrid& grid, std::vector<std::vector<double>> f,
                              std::vector<std::vector<double>> g) {
  if (f.size() != g.size()) fail(Error::Kind::shape, "biorthonormalize needs equal block sizes");
  BiorthResult out;
  for (std::size_t j = 0; j < f.size(); ++j) {
    auto fj = std::move(f[j]);
    auto gj = std::move(g[j]);
    if (fj.size() != gj.size()) fail(Error::Kind::shape, "column length mismatch");
    const double fnorm = std::sqrt(wdot(grid, fj, fj));
    const double gnorm = std::sqrt(wdot(grid, gj, gj));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < out.f.size(); ++i) {
        const double cf = wdot(grid, fj, out.g[i]);
        for (std::size_t n = 0; n < fj.size(); ++n) fj[n] -= cf * out.f[i][n];
        const double cg = wdot(grid, gj, out.f[i]);
        for (std::size_t n = 0; n < gj.size(); ++n) gj[n] -= cg * out.g[i][n];
      }
    }
    const double s = wdot(grid, fj, gj);
    if (!(std::abs(s) >= 1e-13 * fnorm * gnorm) || s == 0.0) continue;
    const double scale = 1.0 / std::sqrt(std::abs(s));
    for (auto& v : fj) v *= scale;
    for (auto& v : gj) v *= (s < 0.0 ? -scale : scale);
    out.f.push_back(std::move(fj));
    out.g.push_back(std::move(gj));
  }
  out.rank = static_cast<int>(out.f.size());
  return out;
}

BiorthCheck check_biorthogonality(const std::vector<ModePair>& modes) {
  BiorthCheck out;
  const std::size_t k = modes.size();
  out.gram.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      out.gram[i][j] = inner_product(modes[i].f, modes[j].g).real();
      if (i == j) continue;
      const double wi = std::abs(modes[i].omega);
      const double wj = std::abs(modes[j].omega);
      if (std::abs(wi - wj) <= 1e-6 * std::max(wi, wj)) continue;
      out.max_defect = std::max(out.max_defect, std::abs(out.gram[i][j]));
    }
  }
  return out;
}

SpectrumResult solve_spectrum(const BdgContext& ctx, const NullspaceBasis& nullspace,
                              const SolverOptions& opts) {
  opts.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int nb = opts.effective_block_size();
  const auto kdim = nullspace.kernel_g.size();
  if (static_cast<std::size_t>(nb) >= ctx.packed_size() - kdim) {
    std::ostringstream os;
    os << "block size " << nb << " exceeds what a grid with " << ctx.packed_size()
       << " unknowns resolves";
    fail(Error::Kind::size, os.str());
  }
  if (nullspace.kernel_f.size() != kdim || kdim == 0) {
    fail(Error::Kind::precondition, "solve_spectrum needs a verified nullspace basis");
  }

  SpectrumResult result{.nullspace = nullspace};
  Workspace ws(ctx, nullspace, result.stats);
  ws.set_cg_steps(opts.precond_cg_steps);
  RawModes raw = opts.method == SolverMethod::biorthogonal
                     ? run_biorthogonal(ctx, ws, opts, result.stats)
                     : run_pencil(ctx, ws, opts, result.stats);

  // Ascending order, then bring each (f, g) to <f, g> = 1 and clean up the
  // cross terms across all returned modes.
  std::vector<int> order(raw.omega.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return raw.omega[a] < raw.omega[b]; });
  std::vector<std::vector<double>> fs, gs;
  std::vector<double> omegas;
  for (int i : order) {
    fs.push_back(to_vec(raw.f, i));
    gs.push_back(to_vec(raw.g, i));
    omegas.push_back(raw.omega[i]);
  }
  auto bio = biorthonormalize(ctx.grid(), std::move(fs), std::move(gs));
  if (bio.rank != static_cast<int>(omegas.size())) {
    fail(Error::Kind::invariant, "returned modes are not biorthogonally independent");
  }
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    result.modes.push_back(make_mode_pair(ctx, omegas[i], bio.f[i], bio.g[i]));
  }

  const auto check = check_biorthogonality(result.modes);
  for (std::size_t i = 0; i < result.modes.size(); ++i) {
    auto& mode = result.modes[i];
    double defect = 0.0;
    for (std::size_t j = 0; j < result.modes.size(); ++j) {
      const double wi = mode.omega;
      const double wj = result.modes[j].omega;
      if (i == j || std::abs(wi - wj) <= 1e-6 * std::max(wi, wj)) continue;
      defect = std::max(defect, std::abs(check.gram[i][j]));
    }
    mode.biorth_defect = defect;

    std::ostringstream os;
    os.precision(3);
    if (!(mode.omega > 0.0)) {
      os << "mode " << i + 1 << " has non-positive omega " << mode.omega;
    } else if (!(mode.residual <= opts.tol * std::max(1.0, mode.omega))) {
      os << "mode " << i + 1 << " residual " << mode.residual << " above tolerance";
    } else if (std::abs(check.gram[i][i] - 0.25) > 1e-10) {
      os << "mode " << i + 1 << " has <f, g> = " << check.gram[i][i];
    } else if (defect > 1e-9) {
      os << "mode " << i + 1 << " biorthogonality defect " << defect;
    }
    if (!os.str().empty()) throw VerificationError(Error::Kind::invariant, os.str(), mode.residual);
  }

  result.stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

DenseSpectrum dense_oracle_solve(const BdgContext& ctx, int limit, double zero_tol) {
  const auto m = static_cast<Eigen::Index>(ctx.packed_size());
  if (m > limit) {
    std::ostringstream os;
    os << "dense oracle limited to " << limit << " unknowns, grid has " << m;
    fail(Error::Kind::size, os.str());
  }
  MatrixXd hp(m, m), hm(m, m);
  std::vector<double> unit(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    unit[j] = 1.0;
    apply_hplus(ctx, unit, col(hp, j));
    apply_hminus(ctx, unit, col(hm, j));
    unit[j] = 0.0;
  }
  // [f; g] -> [H- g; H+ f]
  MatrixXd block = MatrixXd::Zero(2 * m, 2 * m);
  block.topRightCorner(m, m) = hm;
  block.bottomLeftCorner(m, m) = hp;

  Eigen::EigenSolver<MatrixXd> es(block);
  if (es.info() != Eigen::Success) fail(Error::Kind::convergence, "dense eigensolver failed");

  DenseSpectrum out;
  const auto& lambda = es.eigenvalues();
  std::vector<std::pair<double, Eigen::Index>> positive;
  double worst_imag = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    out.eigenvalues.push_back(lambda(i));
    if (std::abs(lambda(i)) <= zero_tol) {
      ++out.zero_multiplicity;
      continue;
    }
    worst_imag = std::max(worst_imag, std::abs(lambda(i).imag()));
    if (lambda(i).real() > 0.0) positive.emplace_back(lambda(i).real(), i);
  }
  if (worst_imag > 1e-8) {
    std::ostringstream os;
    os << "dense spectrum has an eigenvalue with imaginary part " << worst_imag
       << "; the operator pair is not of linear-response type";
    throw VerificationError(Error::Kind::structure_violation, os.str(), worst_imag);
  }
  std::sort(positive.begin(), positive.end());

  const auto vecs = es.eigenvectors();
  for (const auto& [omega, idx] : positive) {
    Eigen::VectorXcd z = vecs.col(idx);
    Eigen::Index arg = 0;
    z.cwiseAbs().maxCoeff(&arg);
    z *= std::conj(z(arg)) / std::abs(z(arg));
    const VectorXd re = z.real();
    std::vector<double> f(re.data(), re.data() + m);
    std::vector<double> g(re.data() + m, re.data() + 2 * m);
    out.modes.push_back(make_mode_pair(ctx, omega, f, g));
  }
  return out;
}

void write_spectrum_csv(const std::filesystem::path& path, const std::vector<ModePair>& modes) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(Error::Kind::io, "cannot open for writing: " + path.string());
  os.precision(17);
  os << "index,omega,residual,biorth_defect\n";
  for (std::size_t i = 0; i < modes.size(); ++i) {
    os << i + 1 << ',' << modes[i].omega << ',' << modes[i].residual << ','
       << modes[i].biorth_defect << '\n';
  }
  if (!os) fail(Error::Kind::io, "write failed: " + path.string());
}

void write_mode_file(const std::filesystem::path& path, const ModePair& mode) {
  const std::vector<ScalarField> comps{mode.u[0], mode.u[1], mode.v[0], mode.v[1]};
  write_field_file(path, comps);
}

ModePair read_mode_file(const BdgContext& ctx, const std::filesystem::path& path, double omega) {
  const auto file = read_field_file(path);
  if (file.components.size() != 4 || !(file.grid == ctx.grid())) {
    fail(Error::Kind::io, "mode file does not match the current grid: " + path.string());
  }
  const std::size_t nt = ctx.total_points();
  std::vector<double> f(2 * nt), g(2 * nt);
  for (int j = 0; j < 2; ++j) {
    const auto u = file.components[j].real_values();
    const auto v = file.components[2 + j].real_values();
    for (std::size_t n = 0; n < nt; ++n) {
      f[j * nt + n] = 0.5 * (u[n] + v[n]);
      g[j * nt + n] = 0.5 * (u[n] - v[n]);
    }
  }
  return make_mode_pair(ctx, omega, f, g);
}

}  // namespace bdgkit

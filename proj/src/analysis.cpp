#include "bdgkit/analysis.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bdgkit/errors.hpp"

namespace bdgkit {

double eigenvalue_error(double computed, double exact) {
  if (exact == 0.0) fail(Error::Kind::division, "relative eigenvalue error with exact value 0");
  return std::abs(computed - exact) / std::abs(exact);
}

namespace {

Eigen::MatrixXd orthonormal_span(std::span<const Field2> span) {
  if (span.empty()) fail(Error::Kind::precondition, "empty analytic span");
  const auto first = pack(span[0]);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(first.size()), static_cast<Eigen::Index>(span.size()));
  for (std::size_t j = 0; j < span.size(); ++j) {
    if (!(span[j].grid() == span[0].grid())) fail(Error::Kind::shape, "span mixes grids");
    const auto v = pack(span[j]);
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(v.data(), m.rows());
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  const auto rank = qr.rank();
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), rank);
}

double projection_residual(const Field2& x, const Eigen::MatrixXd& q) {
  const auto v = pack(x);
  if (static_cast<Eigen::Index>(v.size()) != q.rows()) {
    fail(Error::Kind::shape, "computed vector and analytic span live on different grids");
  }
  const Eigen::Map<const Eigen::VectorXd> xv(v.data(), q.rows());
  const double nx = xv.norm();
  if (nx == 0.0) fail(Error::Kind::degenerate_input, "zero-norm computed vector");
  return (xv - q * (q.transpose() * xv)).norm() / nx;
}

}  // namespace

double subspace_error(const Field2& u, const Field2& v, std::span<const Field2> u_span,
                      std::span<const Field2> v_span) {
  return projection_residual(u, orthonormal_span(u_span)) +
         projection_residual(v, orthonormal_span(v_span));
}

ErrorReport error_report(const GroundState& ground, const SpectrumResult& spectrum,
                         const MatchOptions& match) {
  const auto& grid = ground.phi.grid();
  ErrorReport report;
  report.n = grid.points_per_dim();
  report.dim = grid.dim();
  report.mode = ground.mode;
  report.stats = spectrum.stats;

  const auto analytic = analytic_eigenpairs(ground);
  const auto& modes = spectrum.modes;
  auto close = [&](double a, double b) {
    return std::abs(a - b) <= match.cluster_tol * std::max(std::abs(a), std::abs(b));
  };

  for (const auto& pair : analytic) {
    std::vector<Field2> u_span, v_span;
    for (const auto& other : analytic) {
      if (close(other.omega, pair.omega)) {
        u_span.push_back(other.u);
        v_span.push_back(other.v);
      }
    }

    DirectionError best{.axis = pair.axis, .exact = pair.omega};
    best.e_uv = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < modes.size(); ++i) {
      if (eigenvalue_error(modes[i].omega, pair.omega) > match.window) continue;
      int cluster = 0;
      double worst = 0.0;
      for (const auto& m : modes) {
        if (!close(m.omega, modes[i].omega)) continue;
        ++cluster;
        worst = std::max(worst, subspace_error(m.u, m.v, u_span, v_span));
      }
      const bool better =
          worst < best.e_uv ||
          (worst == best.e_uv && eigenvalue_error(modes[i].omega, pair.omega) < best.e_omega);
      if (better) {
        best.computed = modes[i].omega;
        best.mode_index = static_cast<int>(i);
        best.cluster_size = cluster;
        best.e_uv = worst;
        best.e_omega = eigenvalue_error(modes[i].omega, pair.omega);
      }
    }
    if (best.mode_index < 0) {
      std::ostringstream os;
      os << "no computed mode within relative distance " << match.window << " of omega = "
         << pair.omega << " (axis " << pair.axis << ")";
      fail(Error::Kind::invariant, os.str());
    }
    report.directions.push_back(best);
  }
  return report;
}

std::pair<ScalarField, ScalarField> perturbed_density(const GroundState& ground,
                                                      const ModePair& mode, double epsilon,
                                                      double t) {
  if (!(epsilon >= 0.0)) fail(Error::Kind::precondition, "perturbation strength must be >= 0");
  const auto& grid = ground.phi.grid();
  if (!(mode.u.grid() == grid)) fail(Error::Kind::shape, "mode and ground state grids differ");
  const complex forward = std::polar(1.0, -mode.omega * t);
  const complex backward = std::polar(1.0, mode.omega * t);
  std::vector<double> dens[2];
  for (int j = 0; j < 2; ++j) {
    dens[j].resize(grid.total_points());
    for (std::size_t n = 0; n < grid.total_points(); ++n) {
      const complex value = ground.phi[j].value(n) +
                            epsilon * (mode.u[j].value(n) * forward +
                                       std::conj(mode.v[j].value(n)) * backward);
      dens[j][n] = std::norm(value);
    }
  }
  return {ScalarField(grid, std::move(dens[0])), ScalarField(grid, std::move(dens[1]))};
}

namespace {

void check_sizes(std::span<const int> grid_sizes) {
  if (grid_sizes.empty()) fail(Error::Kind::usage, "no grid sizes given");
  for (std::size_t i = 1; i < grid_sizes.size(); ++i) {
    if (grid_sizes[i] <= grid_sizes[i - 1]) fail(Error::Kind::usage, "grid sizes must ascend");
  }
}

struct Pipeline {
  GroundState ground;
  SpectrumResult spectrum;
};

Pipeline run_pipeline(const PhysParams& params, Mode mode, int n, const SweepOptions& opts) {
  const auto grid = make_grid(opts.dim, opts.half_width, n);
  auto ground = minimize_ground_state(grid, params, mode, opts.minimize);
  const auto ctx = build_context(ground);
  const auto ns = build_nullspace(ctx, opts.solver.inner_tol);
  auto spectrum = solve_spectrum(ctx, ns, opts.solver);
  return {std::move(ground), std::move(spectrum)};
}

}  // namespace

std::vector<ErrorReport> convergence_sweep(const PhysParams& params, Mode mode,
                                           std::span<const int> grid_sizes,
                                           const SweepOptions& opts) {
  check_sizes(grid_sizes);
  std::vector<ErrorReport> out;
  for (int n : grid_sizes) {
    const auto run = run_pipeline(params, mode, n, opts);
    out.push_back(error_report(run.ground, run.spectrum, opts.match));
  }
  return out;
}

std::vector<TimingRow> timing_study(const PhysParams& params, Mode mode,
                                    std::span<const int> grid_sizes, const SweepOptions& opts) {
  check_sizes(grid_sizes);
  std::vector<TimingRow> rows;
  for (int n : grid_sizes) {
    const auto run = run_pipeline(params, mode, n, opts);
    const auto& grid = run.ground.phi.grid();
    rows.push_back({.n = n,
                    .unknowns = 2 * grid.total_points(),
                    .points = grid.total_points(),
                    .seconds = run.spectrum.stats.seconds,
                    .matvecs = run.spectrum.stats.matvecs,
                    .iterations = run.spectrum.stats.iterations});
  }
  return rows;
}

double timing_slope(std::span<const TimingRow> rows, int count) {
  if (count < 2 || static_cast<int>(rows.size()) < count) {
    fail(Error::Kind::usage, "timing slope needs at least two rows");
  }
  const auto tail = rows.last(static_cast<std::size_t>(count));
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& r : tail) {
    const double nt = static_cast<double>(r.points);
    const double x = std::log(nt * std::log(nt));
    const double y = std::log(r.seconds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(count);
  const double denom = k * sxx - sx * sx;
  if (denom == 0.0) fail(Error::Kind::degenerate_input, "timing rows share one problem size");
  return (k * sxy - sx * sy) / denom;
}

void write_error_csv(const std::filesystem::path& path, std::span<const ErrorReport> reports) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(Error::Kind::io, "cannot open for writing: " + path.string());
  os.precision(17);
  os << "mode,dim,N,axis,exact,computed,cluster,E_omega,E_uv,iterations,matvecs\n";
  for (const auto& r : reports) {
    for (const auto& d : r.directions) {
      os << to_string(r.mode) << ',' << r.dim << ',' << r.n << ',' << "xyz"[d.axis] << ','
         << d.exact << ',' << d.computed << ',' << d.cluster_size << ',' << d.e_omega << ','
         << d.e_uv << ',' << r.stats.iterations << ',' << r.stats.matvecs << '\n';
    }
  }
  if (!os) fail(Error::Kind::io, "write failed: " + path.string());
}

void write_timing_csv(const std::filesystem::path& path, std::span<const TimingRow> rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(Error::Kind::io, "cannot open for writing: " + path.string());
  os.precision(17);
  os << "N,points,unknowns,seconds,matvecs,iterations\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.points << ',' << r.unknowns << ',' << r.seconds << ',' << r.matvecs
       << ',' << r.iterations << '\n';
  }
  if (!os) fail(Error::Kind::io, "write failed: " + path.string());
}

}  // namespace bdgkit

#include "bdgkit/groundstate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "bdgkit/errors.hpp"
#include "bdgkit/field_io.hpp"

namespace bdgkit {

const char* to_string(Mode mode) { return mode == Mode::jj ? "jj" : "nojj"; }

Mode mode_from_string(const std::string& text) {
  if (text == "jj" || text == "JJ") return Mode::jj;
  if (text == "nojj" || text == "NoJJ" || text == "no_jj") return Mode::no_jj;
  fail(Error::Kind::usage, "unknown mode '" + text + "' (expected jj or nojj)");
}

double PhysParams::beta(int j, int l) const {
  if (j == 0 && l == 0) return beta11;
  if (j == 1 && l == 1) return beta22;
  return beta12;
}

PhysParams PhysParams::josephson(int dim) {
  PhysParams p;
  p.rabi = 1.0;
  p.raman = 0.0;
  p.gamma.assign(dim, 1.0);
  return p;
}

PhysParams PhysParams::no_josephson(int dim) {
  PhysParams p;
  p.rabi = 0.0;
  p.raman = 0.0;
  p.alpha = 0.2;
  p.gamma.assign(dim, 1.0);
  return p;
}

void PhysParams::validate(Mode mode, int dim) const {
  if (static_cast<int>(gamma.size()) != dim) {
    fail(Error::Kind::shape, "trap frequency vector length must equal the grid dimension");
  }
  for (double g : gamma) {
    if (!(g > 0.0)) fail(Error::Kind::precondition, "trap frequencies must be positive");
  }
  for (double v : {beta11, beta12, beta22, rabi, raman, alpha}) {
    if (!std::isfinite(v)) fail(Error::Kind::precondition, "non-finite physical parameter");
  }
  if (mode == Mode::no_jj) {
    if (rabi != 0.0) {
      fail(Error::Kind::precondition, "per-component mass mode requires Omega = 0");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
      std::ostringstream os;
      os << "degenerate constraint: per-component mass mode needs 0 < alpha < 1, got " << alpha;
      fail(Error::Kind::degenerate_constraint, os.str());
    }
  }
}

double GroundState::chemical_potential(int j) const {
  if (mode == Mode::jj) return mu;
  return j == 0 ? mu1 : mu2;
}

namespace {

// Packed real two-component vectors [phi_1 ; phi_2] and the pieces of the
// nonlinear Hamiltonian that do not change between iterations.
struct Problem {
  SpectralGrid grid;
  PhysParams params;
  Mode mode;
  std::size_t nt;
  double weight;
  std::vector<double> potential;

  Problem(const SpectralGrid& g, const PhysParams& p, Mode m)
      : grid(g), params(p), mode(m), nt(g.total_points()), weight(g.cell_volume()) {
    const auto v = harmonic_potential(g, p.gamma);
    potential.assign(v.real_values().begin(), v.real_values().end());
  }

  std::span<const double> comp(std::span<const double> x, int j) const {
    return x.subspan(j * nt, nt);
  }
  std::span<double> comp(std::span<double> x, int j) const { return x.subspan(j * nt, nt); }

  double dot(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
    return s * weight;
  }

  // out = H(phi) phi, the left-hand side of the Euler-Lagrange equations.
  void apply_h(std::span<const double> phi, std::span<double> out) const {
    const auto& p = params;
    const auto p1 = comp(phi, 0);
    const auto p2 = comp(phi, 1);
    auto o1 = comp(out, 0);
    auto o2 = comp(out, 1);
    laplacian_real(grid, p1, o1);
    laplacian_real(grid, p2, o2);
    for (std::size_t n = 0; n < nt; ++n) {
      const double a = p1[n];
      const double b = p2[n];
      const double a2 = a * a;
      const double b2 = b * b;
      o1[n] = -0.5 * o1[n] + (potential[n] + 0.5 * p.raman + p.beta11 * a2 + p.beta12 * b2) * a +
              0.5 * p.rabi * b;
      o2[n] = -0.5 * o2[n] + (potential[n] - 0.5 * p.raman + p.beta12 * a2 + p.beta22 * b2) * b +
              0.5 * p.rabi * a;
    }
  }

  double energy(std::span<const double> phi) const {
    const auto& p = params;
    const auto p1 = comp(phi, 0);
    const auto p2 = comp(phi, 1);
    std::vector<double> lap(nt);
    double kinetic = 0.0;
    for (int j = 0; j < 2; ++j) {
      laplacian_real(grid, comp(phi, j), lap);
      kinetic -= 0.5 * dot(lap, comp(phi, j));
    }
    double rest = 0.0;
    for (std::size_t n = 0; n < nt; ++n) {
      const double a2 = p1[n] * p1[n];
      const double b2 = p2[n] * p2[n];
      rest += potential[n] * (a2 + b2) + 0.5 * p.beta11 * a2 * a2 + p.beta12 * a2 * b2 +
              0.5 * p.beta22 * b2 * b2 + 0.5 * p.raman * (a2 - b2) + p.rabi * p1[n] * p2[n];
    }
    return kinetic + rest * weight;
  }

  std::array<double, 2> component_mass(std::span<const double> phi) const {
    return {dot(comp(phi, 0), comp(phi, 0)), dot(comp(phi, 1), comp(phi, 1))};
  }

  std::array<double, 2> target_mass() const {
    if (mode == Mode::jj) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    return {params.alpha, 1.0 - params.alpha};
  }

  double mass_defect(std::span<const double> phi) const {
    const auto m = component_mass(phi);
    if (mode == Mode::jj) return std::abs(m[0] + m[1] - 1.0);
    const auto t = target_mass();
    return std::max(std::abs(m[0] - t[0]), std::abs(m[1] - t[1]));
  }

  // Projection back onto the constraint set.
  void retract(std::span<double> phi) const {
    if (mode == Mode::jj) {
      const double s = 1.0 / std::sqrt(dot(phi, phi));
      for (double& v : phi) v *= s;
      return;
    }
    const auto t = target_mass();
    for (int j = 0; j < 2; ++j) {
      auto c = comp(phi, j);
      const double s = std::sqrt(t[j] / dot(c, c));
      for (double& v : c) v *= s;
    }
  }

  EulerLagrange residual(std::span<const double> phi, std::span<const double> hphi) const {
    EulerLagrange el;
    std::vector<double> r(2 * nt);
    if (mode == Mode::jj) {
      el.mu = dot(hphi, phi) / dot(phi, phi);
      el.mu1 = el.mu2 = el.mu;
    } else {
      el.mu1 = dot(comp(hphi, 0), comp(phi, 0)) / dot(comp(phi, 0), comp(phi, 0));
      el.mu2 = dot(comp(hphi, 1), comp(phi, 1)) / dot(comp(phi, 1), comp(phi, 1));
      el.mu = std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t n = 0; n < nt; ++n) {
      r[n] = hphi[n] - el.mu1 * phi[n];
      r[nt + n] = hphi[nt + n] - el.mu2 * phi[nt + n];
    }
    el.residual = std::sqrt(dot(r, r));
    return el;
  }
};

std::vector<double> packed_real(const Field2& phi) {
  if (!phi.is_real()) fail(Error::Kind::shape, "expected a real two-component field");
  return pack(phi);
}

}  // namespace

double energy(const Field2& phi, const PhysParams& params) {
  const auto& grid = phi.grid();
  if (static_cast<int>(params.gamma.size()) != grid.dim()) {
    fail(Error::Kind::shape, "trap frequency vector length must equal the grid dimension");
  }
  if (phi.is_real()) return Problem(grid, params, Mode::jj).energy(pack(phi));

  const auto v = harmonic_potential(grid, params.gamma);
  const auto pot = v.real_values();
  double kinetic = 0.0;
  for (int j = 0; j < 2; ++j) {
    kinetic -= 0.5 * inner_product(apply_laplacian(phi[j]), phi[j]).real();
  }
  double rest = 0.0;
  for (std::size_t n = 0; n < grid.total_points(); ++n) {
    const complex a = phi[0].value(n);
    const complex b = phi[1].value(n);
    const double a2 = std::norm(a);
    const double b2 = std::norm(b);
    rest += pot[n] * (a2 + b2) + 0.5 * params.beta11 * a2 * a2 + params.beta12 * a2 * b2 +
            0.5 * params.beta22 * b2 * b2 + 0.5 * params.raman * (a2 - b2) +
            params.rabi * (a * std::conj(b)).real();
  }
  return kinetic + rest * grid.cell_volume();
}

Field2 energy_gradient(const Field2& phi, const PhysParams& params) {
  const Problem problem(phi.grid(), params, Mode::jj);
  const auto x = packed_real(phi);
  std::vector<double> g(x.size());
  problem.apply_h(x, g);
  for (double& v : g) v *= 2.0;
  return unpack(phi.grid(), g);
}

EulerLagrange euler_lagrange_residual(const Field2& phi, const PhysParams& params, Mode mode) {
  params.validate(mode, phi.grid().dim());
  const Problem problem(phi.grid(), params, mode);
  const auto x = packed_real(phi);
  const double defect = problem.mass_defect(x);
  if (!(defect <= 1e-10)) {
    std::ostringstream os;
    os << "candidate violates the mass constraint by " << defect;
    fail(Error::Kind::precondition, os.str());
  }
  std::vector<double> hx(x.size());
  problem.apply_h(x, hx);
  return problem.residual(x, hx);
}

Field2 gaussian_initial_guess(const SpectralGrid& grid, const PhysParams& params, Mode mode) {
  params.validate(mode, grid.dim());
  std::vector<double> g(grid.total_points());
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto idx = grid.multi_index(n);
    double value = 1.0;
    for (int a = 0; a < grid.dim(); ++a) {
      const double gam = params.gamma[a];
      const double x = grid.coordinate(idx[a]);
      value *= std::pow(gam / std::numbers::pi, 0.25) * std::exp(-0.5 * gam * x * x);
    }
    g[n] = value;
  }
  double c1 = 0.0;
  double c2 = 0.0;
  if (mode == Mode::jj) {
    c1 = std::sqrt(0.5);
    c2 = (params.rabi > 0.0 ? -1.0 : 1.0) * std::sqrt(0.5);
  } else {
    c1 = std::sqrt(params.alpha);
    c2 = std::sqrt(1.0 - params.alpha);
  }
  std::vector<double> a(g.size());
  std::vector<double> b(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    a[n] = c1 * g[n];
    b[n] = c2 * g[n];
  }
  return {ScalarField(grid, std::move(a)), ScalarField(grid, std::move(b))};
}

GroundState minimize_ground_state(const SpectralGrid& grid, const PhysParams& params, Mode mode,
                                  const MinimizeOptions& opts, MinimizeTrace* trace) {
  params.validate(mode, grid.dim());
  const Problem problem(grid, params, mode);
  const std::size_t nt = problem.nt;

  std::vector<double> phi =
      opts.initial ? packed_real(*opts.initial) : pack(gaussian_initial_guess(grid, params, mode));
  if (phi.size() != 2 * nt) fail(Error::Kind::shape, "initial guess lives on another grid");
  problem.retract(phi);

  // Fourier-diagonal preconditioner (alpha_p + mu^2/2)^{-1}, alpha_p = max V.
  const double alpha_p =
      std::max(1.0, *std::max_element(problem.potential.begin(), problem.potential.end()));
  const auto mu2 = half_spectrum_mu2(grid);
  std::vector<double> precond(mu2.size());
  for (std::size_t s = 0; s < mu2.size(); ++s) precond[s] = 1.0 / (alpha_p + 0.5 * mu2[s]);

  auto apply_precond = [&](std::span<const double> in, std::span<double> out) {
    for (int j = 0; j < 2; ++j) {
      fourier_multiply_real(grid, precond, problem.comp(in, j), problem.comp(out, j));
    }
  };

  // Tangent search direction d = P(H phi) - lambda P phi with the lambda(s)
  // that make d orthogonal to phi (per component in NoJJ mode).
  std::vector<double> hphi(2 * nt), p_hphi(2 * nt), p_phi(2 * nt), dir(2 * nt);
  auto direction = [&](std::span<const double> x, std::span<double> d) {
    apply_precond(hphi, p_hphi);
    apply_precond(x, p_phi);
    if (mode == Mode::jj) {
      const double lambda = problem.dot(hphi, p_phi) / problem.dot(x, p_phi);
      for (std::size_t n = 0; n < d.size(); ++n) d[n] = p_hphi[n] - lambda * p_phi[n];
    } else {
      for (int j = 0; j < 2; ++j) {
        const auto hj = problem.comp(std::span<const double>(hphi), j);
        const auto pj = problem.comp(std::span<const double>(p_phi), j);
        const auto phj = problem.comp(std::span<const double>(p_hphi), j);
        auto dj = problem.comp(d, j);
        const double lambda = problem.dot(hj, pj) / problem.dot(problem.comp(x, j), pj);
        for (std::size_t n = 0; n < nt; ++n) dj[n] = phj[n] - lambda * pj[n];
      }
    }
  };

  const double eps = std::numeric_limits<double>::epsilon();
  double e = problem.energy(phi);
  problem.apply_h(phi, hphi);
  EulerLagrange el = problem.residual(phi, hphi);
  if (trace != nullptr) {
    trace->energies.push_back(e);
    trace->residuals.push_back(el.residual);
    trace->mass_defects.push_back(problem.mass_defect(phi));
  }

  std::vector<double> phi_prev, dir_prev, trial(2 * nt);
  double tau = 1.0;
  int iter = 0;
  while (el.residual > opts.tolerance) {
    if (iter >= opts.max_iterations) {
      std::ostringstream os;
      os << "ground-state minimization did not converge in " << opts.max_iterations
         << " iterations (residual " << el.residual << ")";
      throw ConvergenceError(os.str(), el.residual);
    }
    direction(phi, dir);

    // Barzilai-Borwein step from the last accepted pair.
    if (!phi_prev.empty()) {
      double ss = 0.0;
      double sy = 0.0;
      for (std::size_t n = 0; n < phi.size(); ++n) {
        const double s = phi[n] - phi_prev[n];
        const double y = dir[n] - dir_prev[n];
        ss += s * s;
        sy += s * y;
      }
      if (sy > 0.0 && std::isfinite(ss / sy)) tau = std::clamp(ss / sy, 1e-4, 1e4);
    }

    // Backtrack until the energy does not increase beyond round-off.
    const double slack = 64.0 * eps * std::max(1.0, std::abs(e));
    double e_trial = 0.0;
    int halvings = 0;
    for (;;) {
      for (std::size_t n = 0; n < phi.size(); ++n) trial[n] = phi[n] - tau * dir[n];
      problem.retract(trial);
      e_trial = problem.energy(trial);
      if (e_trial <= e + slack) break;
      if (++halvings > 60) {
        throw ConvergenceError("ground-state line search failed to decrease the energy",
                               el.residual);
      }
      tau *= 0.5;
    }

    phi_prev = phi;
    dir_prev = dir;
    phi.swap(trial);
    e = e_trial;
    problem.apply_h(phi, hphi);
    el = problem.residual(phi, hphi);
    ++iter;
    if (trace != nullptr) {
      trace->energies.push_back(e);
      trace->residuals.push_back(el.residual);
      trace->mass_defects.push_back(problem.mass_defect(phi));
    }
  }

  // Sign convention: phi_1 positive; with Omega != 0 the ground state pairs it
  // with -sign(Omega) |phi_2|. Without coupling each component is positive.
  auto sum = [&](int j) {
    double s = 0.0;
    for (double v : problem.comp(std::span<const double>(phi), j)) s += v;
    return s;
  };
  if (mode == Mode::jj) {
    if (sum(0) < 0.0 || (sum(0) == 0.0 && params.rabi * sum(1) > 0.0)) {
      for (double& v : phi) v = -v;
    }
  } else {
    for (int j = 0; j < 2; ++j) {
      if (sum(j) < 0.0) {
        for (double& v : problem.comp(std::span<double>(phi), j)) v = -v;
      }
    }
  }
  problem.apply_h(phi, hphi);
  el = problem.residual(phi, hphi);
  if (trace != nullptr) trace->iterations = iter;

  GroundState gs{.phi = unpack(grid, phi), .mode = mode, .params = params};
  gs.mu = el.mu;
  gs.mu1 = el.mu1;
  gs.mu2 = el.mu2;
  gs.energy = problem.energy(phi);
  gs.residual = el.residual;
  return gs;
}

// --- persistence ------------------------------------------------------------

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::map<std::string, std::string>& kv, const std::string& key,
                    const std::filesystem::path& file) {
  const auto it = kv.find(key);
  if (it == kv.end()) fail(Error::Kind::io, "missing key '" + key + "' in " + file.string());
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail(Error::Kind::io, "bad value for '" + key + "' in " + file.string());
  }
}

}  // namespace

void save_ground_state(const std::filesystem::path& stem, const GroundState& gs) {
  write_field_file(with_suffix(stem, ".bdg1"), gs.phi);
  const auto meta = with_suffix(stem, ".meta");
  std::ofstream os(meta, std::ios::trunc);
  if (!os) fail(Error::Kind::io, "cannot open for writing: " + meta.string());
  const auto& p = gs.params;
  const auto& grid = gs.phi.grid();
  os << "mode=" << to_string(gs.mode) << '\n';
  if (gs.mode == Mode::jj) {
    os << "mu=" << fmt17(gs.mu) << '\n';
  } else {
    os << "mu1=" << fmt17(gs.mu1) << '\n' << "mu2=" << fmt17(gs.mu2) << '\n';
  }
  os << "energy=" << fmt17(gs.energy) << '\n'
     << "residual=" << fmt17(gs.residual) << '\n'
     << "beta11=" << fmt17(p.beta11) << '\n'
     << "beta12=" << fmt17(p.beta12) << '\n'
     << "beta22=" << fmt17(p.beta22) << '\n'
     << "omega_rabi=" << fmt17(p.rabi) << '\n'
     << "delta=" << fmt17(p.raman) << '\n'
     << "alpha=" << fmt17(p.alpha) << '\n'
     << "gamma=";
  for (std::size_t i = 0; i < p.gamma.size(); ++i) os << (i ? "," : "") << fmt17(p.gamma[i]);
  os << '\n'
     << "L=" << fmt17(grid.half_width()) << '\n'
     << "N=" << grid.points_per_dim() << '\n'
     << "dim=" << grid.dim() << '\n';
  if (!os) fail(Error::Kind::io, "write failed: " + meta.string());
}

GroundState load_ground_state(const std::filesystem::path& stem) {
  const auto meta = with_suffix(stem, ".meta");
  std::ifstream is(meta);
  if (!is) fail(Error::Kind::io, "cannot open ground-state metadata: " + meta.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(Error::Kind::io, "malformed line in " + meta.string());
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }

  Field2 phi = read_field2_file(with_suffix(stem, ".bdg1"));
  const auto& grid = phi.grid();
  if (static_cast<int>(parse_double(kv, "dim", meta)) != grid.dim() ||
      static_cast<int>(parse_double(kv, "N", meta)) != grid.points_per_dim() ||
      parse_double(kv, "L", meta) != grid.half_width()) {
    fail(Error::Kind::io, "ground-state metadata disagrees with its field file");
  }

  PhysParams p;
  p.beta11 = parse_double(kv, "beta11", meta);
  p.beta12 = parse_double(kv, "beta12", meta);
  p.beta22 = parse_double(kv, "beta22", meta);
  p.rabi = parse_double(kv, "omega_rabi", meta);
  p.raman = parse_double(kv, "delta", meta);
  p.alpha = parse_double(kv, "alpha", meta);
  p.gamma.clear();
  {
    const auto it = kv.find("gamma");
    if (it == kv.end()) fail(Error::Kind::io, "missing key 'gamma' in " + meta.string());
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) p.gamma.push_back(std::stod(item));
  }

  const auto mode_it = kv.find("mode");
  if (mode_it == kv.end()) fail(Error::Kind::io, "missing key 'mode' in " + meta.string());
  GroundState gs{.phi = std::move(phi), .mode = mode_from_string(mode_it->second), .params = p};
  if (gs.mode == Mode::jj) {
    gs.mu = gs.mu1 = gs.mu2 = parse_double(kv, "mu", meta);
  } else {
    gs.mu = std::numeric_limits<double>::quiet_NaN();
    gs.mu1 = parse_double(kv, "mu1", meta);
    gs.mu2 = parse_double(kv, "mu2", meta);
  }
  gs.energy = parse_double(kv, "energy", meta);
  gs.residual = parse_double(kv, "residual", meta);
  return gs;
}

}  // namespace bdgkit

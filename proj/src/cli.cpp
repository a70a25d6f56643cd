#include "bdgkit/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "bdgkit/field_io.hpp"

namespace bdgkit {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    fail(Error::Kind::usage, "config: bad value for '" + key + "': '" + text + "'");
  }
  return value;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) fail(Error::Kind::usage, "config: empty list for '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  fail(Error::Kind::usage, "config: '" + key + "' expects true or false");
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(Error::Kind::usage, "config: " + what);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(Error::Kind::usage, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      fail(Error::Kind::usage, "config line " + std::to_string(lineno) + ": empty key or value");
    }
    if (!entries.emplace(key, value).second) fail(Error::Kind::usage, "config: repeated key '" + key + "'");
  }

  RunConfig cfg;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    auto v = it->second;
    entries.erase(it);
    return v;
  };

  if (auto v = take("mode")) cfg.mode = mode_from_string(*v);
  if (auto v = take("dim")) cfg.dim = parse_number<int>("dim", *v);
  require(cfg.dim >= 1 && cfg.dim <= 3, "dim must be 1, 2 or 3");
  cfg.physics = cfg.mode == Mode::jj ? PhysParams::josephson(cfg.dim)
                                     : PhysParams::no_josephson(cfg.dim);
  cfg.half_width = cfg.dim == 3 ? 8.0 : 16.0;
  if (auto v = take("L")) cfg.half_width = parse_number<double>("L", *v);
  if (auto v = take("N")) cfg.n = parse_number<int>("N", *v);

  auto& p = cfg.physics;
  if (auto v = take("beta11")) p.beta11 = parse_number<double>("beta11", *v);
  if (auto v = take("beta12")) p.beta12 = parse_number<double>("beta12", *v);
  if (auto v = take("beta22")) p.beta22 = parse_number<double>("beta22", *v);
  if (auto v = take("omega")) p.rabi = parse_number<double>("omega", *v);
  if (auto v = take("delta")) p.raman = parse_number<double>("delta", *v);
  if (auto v = take("alpha")) p.alpha = parse_number<double>("alpha", *v);
  if (auto v = take("gamma")) p.gamma = parse_list<double>("gamma", *v);
  require(static_cast<int>(p.gamma.size()) == cfg.dim, "gamma needs one entry per dimension");

  if (auto v = take("gs_tolerance")) cfg.minimize.tolerance = parse_number<double>("gs_tolerance", *v);
  if (auto v = take("gs_max_iterations")) {
    cfg.minimize.max_iterations = parse_number<int>("gs_max_iterations", *v);
  }

  auto& s = cfg.solver;
  if (auto v = take("n_ev")) s.n_ev = parse_number<int>("n_ev", *v);
  if (auto v = take("tol")) s.tol = parse_number<double>("tol", *v);
  if (auto v = take("max_outer")) s.max_outer = parse_number<int>("max_outer", *v);
  if (auto v = take("block_size")) s.block_size = parse_number<int>("block_size", *v);
  if (auto v = take("inner_tol")) s.inner_tol = parse_number<double>("inner_tol", *v);
  if (auto v = take("precond_cg_steps")) {
    s.precond_cg_steps = parse_number<int>("precond_cg_steps", *v);
  }
  if (auto v = take("method")) s.method = solver_method_from_string(*v);
  if (auto v = take("seed")) s.seed = parse_number<std::uint64_t>("seed", *v);
  s.validate();

  if (auto v = take("sweep")) cfg.sweep = parse_list<int>("sweep", *v);
  if (auto v = take("dense_n")) cfg.dense_n = parse_number<int>("dense_n", *v);
  if (auto v = take("saturation")) cfg.saturation = parse_number<double>("saturation", *v);
  if (auto v = take("match_window")) cfg.match_window = parse_number<double>("match_window", *v);
  if (auto v = take("perturb_modes")) cfg.perturb_modes = parse_list<int>("perturb_modes", *v);
  if (auto v = take("epsilon")) cfg.epsilon = parse_number<double>("epsilon", *v);
  if (auto v = take("times")) cfg.times = parse_list<double>("times", *v);
  if (auto v = take("negate_b")) cfg.negate_b = parse_bool("negate_b", *v);
  require(cfg.epsilon >= 0.0, "epsilon must be >= 0");
  require(cfg.match_window > 0.0, "match_window must be positive");

  if (!entries.empty()) fail(Error::Kind::usage, "config: unknown key '" + entries.begin()->first + "'");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Error::Kind::io, "config not found: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

int exit_code(Error::Kind kind) {
  using K = Error::Kind;
  switch (kind) {
    case K::usage:
    case K::invalid_grid:
    case K::invalid_domain:
    case K::shape:
    case K::precondition:
    case K::degenerate_constraint:
    case K::size:
    case K::unsupported:
      return 2;
    case K::convergence:
    case K::partial_result:
      return 3;
    case K::io:
      return 5;
    case K::indefinite:
    case K::nullspace_verification:
    case K::structure_violation:
    case K::division:
    case K::degenerate_input:
    case K::invariant:
      return 4;
  }
  return 4;
}

namespace layout {

namespace {
std::string numbered(const char* fmt, int a, int b = 0, int c = 0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}
}  // namespace

std::filesystem::path mode_file(const std::filesystem::path& out, int index) {
  return out / numbered("mode_%04d.bdg1", index);
}
std::filesystem::path density_file(const std::filesystem::path& out, int mode, int time_index,
                                   int component) {
  return out / numbered("density_m%04d_t%02d_c%d.bdg1", mode, time_index, component);
}
std::filesystem::path ground_density_file(const std::filesystem::path& out, int component) {
  return out / numbered("ground_density_c%d.bdg1", component);
}

}  // namespace layout

namespace {

void prepare(const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) fail(Error::Kind::io, "cannot create output directory " + out.string() + ": " + ec.message());
}

void check_consistent(const RunConfig& cfg, const GroundState& gs, const std::filesystem::path& where) {
  const auto& a = cfg.physics;
  const auto& b = gs.params;
  const bool same = gs.phi.grid() == cfg.grid() && gs.mode == cfg.mode && a.beta11 == b.beta11 &&
                    a.beta12 == b.beta12 && a.beta22 == b.beta22 && a.rabi == b.rabi &&
                    a.raman == b.raman && a.gamma == b.gamma &&
                    (cfg.mode == Mode::jj || a.alpha == b.alpha);
  if (!same) {
    fail(Error::Kind::invariant, "ground state in " + where.string() +
                                     " does not match the configuration (grid, mode or physics)");
  }
}

GroundState compute_ground(const RunConfig& cfg, std::ostream& log) {
  auto gs = minimize_ground_state(cfg.grid(), cfg.physics, cfg.mode, cfg.minimize);
  log.precision(15);
  log << "energy " << gs.energy << '\n';
  if (gs.mode == Mode::jj) {
    log << "mu " << gs.mu << '\n';
  } else {
    log << "mu1 " << gs.mu1 << "\nmu2 " << gs.mu2 << '\n';
  }
  log.precision(3);
  log << "residual " << std::scientific << gs.residual << std::defaultfloat << '\n';
  return gs;
}

// Reuses the stored ground state when present, otherwise computes and stores it.
GroundState obtain_ground(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const auto stem = layout::ground(out);
  if (std::filesystem::exists(stem.string() + ".meta")) {
    auto gs = load_ground_state(stem);
    check_consistent(cfg, gs, out);
    log << "using stored ground state " << stem.string() << '\n';
    return gs;
  }
  auto gs = compute_ground(cfg, log);
  save_ground_state(stem, gs);
  return gs;
}

std::vector<double> read_spectrum_omegas(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Error::Kind::io, "spectrum not found: " + path.string() + " (run bdg first)");
  std::string line;
  std::getline(in, line);
  std::vector<double> omegas;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string index, omega;
    if (!std::getline(ss, index, ',') || !std::getline(ss, omega, ',')) {
      fail(Error::Kind::io, "malformed spectrum row in " + path.string());
    }
    omegas.push_back(parse_number<double>("omega", omega));
  }
  return omegas;
}

}  // namespace

int cmd_groundstate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  prepare(out);
  const auto gs = compute_ground(cfg, log);
  save_ground_state(layout::ground(out), gs);
  log << "wrote " << layout::ground(out).string() << ".{bdg1,meta}\n";
  return 0;
}

int cmd_bdg(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  cfg.solver.validate();
  prepare(out);
  const auto gs = obtain_ground(cfg, out, log);
  const auto ctx = build_context(gs, {.negate_b = cfg.negate_b});
  const auto ns = build_nullspace(ctx, cfg.solver.inner_tol);
  const auto spec = solve_spectrum(ctx, ns, cfg.solver);
  write_spectrum_csv(out / "spectrum.csv", spec.modes);
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    write_mode_file(layout::mode_file(out, static_cast<int>(i) + 1), spec.modes[i]);
  }
  log << "iterations " << spec.stats.iterations << ", matvecs " << spec.stats.matvecs << ", "
      << spec.stats.seconds << " s\n";
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%4zu  %.15f  residual %.2e\n", i + 1, spec.modes[i].omega,
                  spec.modes[i].residual);
    log << buf;
  }
  return 0;
}

int cmd_perturb(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const auto stem = layout::ground(out);
  if (!std::filesystem::exists(stem.string() + ".meta")) {
    fail(Error::Kind::io, "ground state not found in " + out.string() + " (run bdg first)");
  }
  const auto gs = load_ground_state(stem);
  check_consistent(cfg, gs, out);
  const auto omegas = read_spectrum_omegas(out / "spectrum.csv");
  const auto ctx = build_context(gs);

  for (int j = 0; j < 2; ++j) {
    const auto phi = gs.phi[j].real_values();
    std::vector<double> dens(phi.size());
    for (std::size_t n = 0; n < phi.size(); ++n) dens[n] = phi[n] * phi[n];
    const std::vector<ScalarField> comp{ScalarField(gs.phi.grid(), std::move(dens))};
    write_field_file(layout::ground_density_file(out, j + 1), comp);
  }

  for (int index : cfg.perturb_modes) {
    if (index < 1 || index > static_cast<int>(omegas.size())) {
      std::ostringstream os;
      os << "mode index " << index << " out of range 1.." << omegas.size();
      fail(Error::Kind::usage, os.str());
    }
  }
  for (int index : cfg.perturb_modes) {
    const auto mode = read_mode_file(ctx, layout::mode_file(out, index), omegas[index - 1]);
    for (std::size_t k = 0; k < cfg.times.size(); ++k) {
      const auto [n1, n2] = perturbed_density(gs, mode, cfg.epsilon, cfg.times[k]);
      const int ti = static_cast<int>(k);
      write_field_file(layout::density_file(out, index, ti, 1), std::vector<ScalarField>{n1});
      write_field_file(layout::density_file(out, index, ti, 2), std::vector<ScalarField>{n2});
    }
    log << "mode " << index << " omega " << omegas[index - 1] << ": " << cfg.times.size()
        << " snapshots\n";
  }
  return 0;
}

int cmd_validate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  if (cfg.sweep.size() < 2) fail(Error::Kind::usage, "validate: need >= 2 grid sizes in 'sweep'");
  for (std::size_t i = 1; i < cfg.sweep.size(); ++i) {
    if (cfg.sweep[i] <= cfg.sweep[i - 1]) fail(Error::Kind::usage, "validate: sweep must ascend");
  }
  cfg.solver.validate();
  prepare(out);
  const ContextOptions copts{.negate_b = cfg.negate_b};
  bool all = true;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    log << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    all = all && ok;
  };
  auto guarded = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const Error& e) {
      report(false, name, e.what());
    }
  };
  auto grid_at = [&](int n) { return make_grid(cfg.dim, cfg.half_width, n); };

  guarded("convergence", [&] {
    std::vector<ErrorReport> reports;
    for (int n : cfg.sweep) {
      const auto gs = minimize_ground_state(grid_at(n), cfg.physics, cfg.mode, cfg.minimize);
      const auto ctx = build_context(gs, copts);
      const auto spec = solve_spectrum(ctx, build_nullspace(ctx, cfg.solver.inner_tol), cfg.solver);
      reports.push_back(error_report(gs, spec, {.window = cfg.match_window}));
    }
    write_error_csv(out / "errors.csv", reports);
    bool ok = true;
    std::ostringstream os;
    os.precision(3);
    for (std::size_t k = 0; k < reports.size(); ++k) {
      os << (k ? ", " : "") << "N=" << reports[k].n << ":";
      for (std::size_t s = 0; s < reports[k].directions.size(); ++s) {
        const double e = reports[k].directions[s].e_omega;
        os << ' ' << e;
        if (k > 0) {
          const double prev = reports[k - 1].directions[s].e_omega;
          ok = ok && (e <= prev || e <= cfg.saturation);
        }
      }
    }
    report(ok, "convergence", "E_omega " + os.str());
  });

  guarded("oracle", [&] {
    const auto gs = minimize_ground_state(grid_at(cfg.dense_n), cfg.physics, cfg.mode, cfg.minimize);
    const auto ctx = build_context(gs, copts);
    const auto dense = dense_oracle_solve(ctx);
    const int count = std::min(cfg.solver.n_ev, 10);
    auto opts = cfg.solver;
    opts.n_ev = count;
    const auto spec = solve_spectrum(ctx, build_nullspace(ctx, cfg.solver.inner_tol), opts);
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
      worst = std::max(worst, std::abs(spec.modes[i].omega - dense.modes.at(i).omega));
    }
    double asym = 0.0;
    for (const auto& lam : dense.eigenvalues) {
      double nearest = INFINITY;
      for (const auto& other : dense.eigenvalues) nearest = std::min(nearest, std::abs(lam + other));
      asym = std::max(asym, nearest / std::max(1.0, std::abs(lam)));
    }
    const int expected = cfg.mode == Mode::jj ? 2 : 4;
    std::ostringstream os;
    os.precision(3);
    os << "max |omega - omega_dense| " << worst << ", zero multiplicity " << dense.zero_multiplicity
       << " (expected " << expected << "), +-omega asymmetry " << asym;
    report(worst <= 1e-8 && dense.zero_multiplicity == expected && asym <= 1e-9, "oracle", os.str());
  });

  guarded("invariants", [&] {
    const auto gs = minimize_ground_state(grid_at(cfg.n), cfg.physics, cfg.mode, cfg.minimize);
    const auto ctx = build_context(gs, copts);
    const auto ns = build_nullspace(ctx, cfg.solver.inner_tol);
    const auto spec = solve_spectrum(ctx, ns, cfg.solver);
    const auto check = check_biorthogonality(spec.modes);
    double norm_defect = 0.0, fg_defect = 0.0;
    for (std::size_t i = 0; i < spec.modes.size(); ++i) {
      const auto& m = spec.modes[i];
      norm_defect = std::max(norm_defect, std::abs(std::pow(norm(m.u), 2) - std::pow(norm(m.v), 2) - 1.0));
      fg_defect = std::max(fg_defect, std::abs(check.gram[i][i] - 0.25));
    }
    std::ostringstream os;
    os.precision(3);
    os << "biorthogonality " << check.max_defect << ", normalization " << norm_defect
       << ", <f,g> " << fg_defect << ", nullspace " << ns.hminus_residual << " / "
       << ns.hplus_residual;
    report(check.max_defect <= 1e-9 && norm_defect <= 1e-9 && fg_defect <= 1e-10 &&
               ns.hminus_residual <= 1e-9 && ns.hplus_residual <= 1e-9,
           "invariants", os.str());
  });

  return all ? 0 : 4;
}

int cmd_timing(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  if (cfg.sweep.size() < 3) fail(Error::Kind::usage, "timing: need >= 3 grid sizes in 'sweep'");
  cfg.solver.validate();
  prepare(out);
  SweepOptions opts{.dim = cfg.dim, .half_width = cfg.half_width, .solver = cfg.solver,
                    .minimize = cfg.minimize};
  const auto rows = timing_study(cfg.physics, cfg.mode, cfg.sweep, opts);
  write_timing_csv(out / "timing.csv", rows);
  for (const auto& r : rows) {
    log << "N=" << r.n << " N_t=" << r.points << " " << r.seconds << " s, " << r.matvecs
        << " matvecs, " << r.iterations << " iterations\n";
  }
  log << "slope vs N_t log N_t: " << timing_slope(rows) << '\n';
  return 0;
}

}  // namespace bdgkit

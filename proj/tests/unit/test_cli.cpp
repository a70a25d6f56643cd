#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "bdgkit/cli.hpp"
#include "bdgkit/field_io.hpp"
#include "doctest.h"

using namespace bdgkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Error::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return Error::Kind::invariant;
}

}  // namespace

TEST_CASE("config defaults follow the standard parameter sets") {
  const auto jj = parse_config("");
  CHECK(jj.mode == Mode::jj);
  CHECK(jj.physics.beta11 == 100.0);
  CHECK(jj.physics.beta12 == 94.0);
  CHECK(jj.physics.beta22 == 97.0);
  CHECK(jj.physics.rabi == 1.0);
  CHECK(jj.physics.raman == 0.0);
  CHECK(jj.half_width == 16.0);

  const auto nojj = parse_config("mode = nojj  # per-component masses\n\n  dim=2\n");
  CHECK(nojj.mode == Mode::no_jj);
  CHECK(nojj.physics.rabi == 0.0);
  CHECK(nojj.physics.alpha == 0.2);
  CHECK(nojj.physics.gamma == std::vector<double>{1.0, 1.0});
}

TEST_CASE("config keys override defaults") {
  const auto cfg = parse_config(
      "dim = 2\ngamma = 1, 2\nN = 64\nL = 12.5\nbeta12 = 90\nn_ev = 20\ntol = 1e-10\n"
      "method = pencil\nseed = 99\nsweep = 16,32,64\nperturb_modes = 3,15\nepsilon = 0\n"
      "times = 7.4, 9.2\nprecond_cg_steps = 0\nnegate_b = true\n");
  CHECK(cfg.physics.gamma == std::vector<double>{1.0, 2.0});
  CHECK(cfg.n == 64);
  CHECK(cfg.half_width == 12.5);
  CHECK(cfg.physics.beta12 == 90.0);
  CHECK(cfg.solver.n_ev == 20);
  CHECK(cfg.solver.tol == 1e-10);
  CHECK(cfg.solver.method == SolverMethod::pencil);
  CHECK(cfg.solver.seed == 99u);
  CHECK(cfg.solver.precond_cg_steps == 0);
  CHECK(cfg.sweep == std::vector<int>{16, 32, 64});
  CHECK(cfg.perturb_modes == std::vector<int>{3, 15});
  CHECK(cfg.epsilon == 0.0);
  CHECK(cfg.times == std::vector<double>{7.4, 9.2});
  CHECK(cfg.negate_b);
}

TEST_CASE("malformed configs are usage errors") {
  for (const char* text : {"n_ev = ten\n", "frobnicate = 1\n", "N = 64\nN = 128\n", "N\n",
                           "dim = 2\ngamma = 1\n", "dim = 4\n", "n_ev = 0\n", "epsilon = -1\n",
                           "mode = triple\n", "negate_b = maybe\n", "tol = 1e-9x\n"}) {
    CAPTURE(std::string(text));
    CHECK(kind_of([&] { parse_config(text); }) == Error::Kind::usage);
  }
  CHECK(kind_of([] { load_config("/nonexistent/bdgkit.cfg"); }) == Error::Kind::io);
  try {
    load_config("/nonexistent/bdgkit.cfg");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("config not found") != std::string::npos);
  }
}

TEST_CASE("error kinds map onto the documented exit codes") {
  CHECK(exit_code(Error::Kind::usage) == 2);
  CHECK(exit_code(Error::Kind::degenerate_constraint) == 2);
  CHECK(exit_code(Error::Kind::convergence) == 3);
  CHECK(exit_code(Error::Kind::partial_result) == 3);
  CHECK(exit_code(Error::Kind::invariant) == 4);
  CHECK(exit_code(Error::Kind::nullspace_verification) == 4);
  CHECK(exit_code(Error::Kind::io) == 5);
}

TEST_CASE("groundstate, bdg and perturb pipeline through the output directory") {
  TempDir tmp("bdgkit_cli_pipeline");
  const auto cfg = parse_config("N = 128\nn_ev = 6\nperturb_modes = 2\ntimes = 0, 1.5\n");
  std::ostringstream log;

  REQUIRE(cmd_groundstate(cfg, tmp.path, log) == 0);
  CHECK(log.str().find("residual") != std::string::npos);
  const auto gs = load_ground_state(layout::ground(tmp.path));
  CHECK(gs.residual <= 1e-13);

  REQUIRE(cmd_bdg(cfg, tmp.path, log) == 0);
  std::ifstream csv(tmp.path / "spectrum.csv");
  std::string line;
  std::getline(csv, line);
  bool has_dipole = false;
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const double omega = std::stod(line.substr(line.find(',') + 1));
    has_dipole = has_dipole || std::abs(omega - 1.0) <= 1e-9;
  }
  CHECK(rows == 6);
  CHECK(has_dipole);

  // mode files reproduce the in-memory amplitudes
  const auto ctx = build_context(gs);
  const auto spec = solve_spectrum(ctx, build_nullspace(ctx), cfg.solver);
  const auto file = read_field_file(layout::mode_file(tmp.path, 2));
  const auto u1 = file.components[0].real_values();
  const auto mem = spec.modes[1].u[0].real_values();
  for (std::size_t n = 0; n < u1.size(); ++n) CHECK(u1[n] == mem[n]);

  REQUIRE(cmd_perturb(cfg, tmp.path, log) == 0);
  for (int t : {0, 1}) {
    for (int c : {1, 2}) CHECK(fs::exists(layout::density_file(tmp.path, 2, t, c)));
  }

  auto zero = cfg;
  zero.epsilon = 0.0;
  REQUIRE(cmd_perturb(zero, tmp.path, log) == 0);
  for (int c : {1, 2}) {
    CHECK(slurp(layout::density_file(tmp.path, 2, 1, c)) ==
          slurp(layout::ground_density_file(tmp.path, c)));
  }

  auto out_of_range = cfg;
  out_of_range.perturb_modes = {7};
  CHECK(kind_of([&] { cmd_perturb(out_of_range, tmp.path, log); }) == Error::Kind::usage);

  auto other_grid = cfg;
  other_grid.n = 64;
  CHECK(kind_of([&] { cmd_bdg(other_grid, tmp.path, log); }) == Error::Kind::invariant);
}

TEST_CASE("identical config and seed give identical spectrum files") {
  TempDir a("bdgkit_cli_det_a"), b("bdgkit_cli_det_b");
  const auto cfg = parse_config("mode = nojj\nN = 64\nn_ev = 5\n");
  std::ostringstream log;
  cmd_bdg(cfg, a.path, log);
  cmd_bdg(cfg, b.path, log);
  CHECK(slurp(a.path / "spectrum.csv") == slurp(b.path / "spectrum.csv"));
  CHECK(slurp(layout::mode_file(a.path, 3)) == slurp(layout::mode_file(b.path, 3)));
}

TEST_CASE("commands reject degenerate inputs") {
  TempDir tmp("bdgkit_cli_errors");
  std::ostringstream log;
  CHECK(kind_of([&] { cmd_groundstate(parse_config("mode = nojj\nalpha = 0\n"), tmp.path, log); }) ==
        Error::Kind::degenerate_constraint);
  CHECK(kind_of([&] { cmd_validate(parse_config("sweep = 64\n"), tmp.path, log); }) ==
        Error::Kind::usage);
  CHECK(kind_of([&] { cmd_timing(parse_config("sweep = 32, 64\n"), tmp.path, log); }) ==
        Error::Kind::usage);
  CHECK(kind_of([&] { cmd_perturb(parse_config(""), tmp.path / "empty", log); }) == Error::Kind::io);
}

TEST_CASE("validate passes on the default 1D suite and catches a wrong-sign linearization") {
  TempDir tmp("bdgkit_cli_validate");
  std::ostringstream log;
  CHECK(cmd_validate(parse_config("N = 128\n"), tmp.path, log) == 0);
  CHECK(log.str().find("FAIL") == std::string::npos);
  CHECK(fs::exists(tmp.path / "errors.csv"));

  std::ostringstream bad;
  CHECK(cmd_validate(parse_config("N = 64\nsweep = 32, 64\nnegate_b = true\n"), tmp.path, bad) == 4);
  CHECK(bad.str().find("FAIL") != std::string::npos);
}

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bdgkit/analysis.hpp"
#include "bdgkit/errors.hpp"

namespace bdgkit {

// Everything one command needs. Physics defaults follow the standard
// parameter set of the selected mode; explicit keys override them.
struct RunConfig {
  Mode mode = Mode::jj;
  PhysParams physics = PhysParams::josephson(1);
  int dim = 1;
  double half_width = 16.0;  // 8 when dim = 3 and L is not given
  int n = 128;

  MinimizeOptions minimize;
  SolverOptions solver;

  std::vector<int> sweep{32, 64, 128};    // validate, timing
  int dense_n = 32;                       // validate: dense oracle grid
  double saturation = 1e-11;              // validate: E_omega floor
  double match_window = 0.2;              // validate: analytic matching window

  std::vector<int> perturb_modes{1};      // 1-based mode indices
  double epsilon = 0.1;
  std::vector<double> times{0.0};

  // Test hook: flips the sign of the B block so diagnostics must object.
  bool negate_b = false;

  SpectralGrid grid() const { return make_grid(dim, half_width, n); }
};

// key = value lines, `#` starts a comment. Unknown or repeated keys and
// malformed values are usage errors.
RunConfig parse_config(const std::string& text);
// Missing file: I/O error "config not found: <path>".
RunConfig load_config(const std::filesystem::path& path);

// 0 success, 2 usage, 3 convergence, 4 invariant violation, 5 I/O.
int exit_code(Error::Kind kind);

// Each command writes into `out` (created if needed) and reports on `log`.
// Failures surface as exceptions; validate returns 4 when a check fails.
int cmd_groundstate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_bdg(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_perturb(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_validate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_timing(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// File layout inside the output directory.
namespace layout {
inline std::filesystem::path ground(const std::filesystem::path& out) { return out / "ground"; }
std::filesystem::path mode_file(const std::filesystem::path& out, int index);  // 1-based
std::filesystem::path density_file(const std::filesystem::path& out, int mode, int time_index,
                                   int component);
std::filesystem::path ground_density_file(const std::filesystem::path& out, int component);
}  // namespace layout

}  // namespace bdgkit

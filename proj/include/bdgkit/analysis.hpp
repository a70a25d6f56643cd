#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "bdgkit/eigensolver.hpp"

namespace bdgkit {

// |computed - exact| / |exact|; exact = 0 is a division error.
double eigenvalue_error(double computed, double exact);

// ||u - P u|| / ||u|| + ||v - P v|| / ||v||, P the l2-orthogonal projector
// onto the span of the given analytic vectors (any basis of it).
double subspace_error(const Field2& u, const Field2& v, std::span<const Field2> u_span,
                      std::span<const Field2> v_span);

struct DirectionError {
  int axis = 0;
  double exact = 0.0;     // gamma_sigma
  double computed = 0.0;  // matched omega
  int mode_index = -1;    // 0-based index into the spectrum
  int cluster_size = 0;   // computed modes sharing the matched omega
  double e_omega = 0.0;
  double e_uv = 0.0;      // worst member of the matched cluster
};

struct ErrorReport {
  int n = 0;
  int dim = 1;
  Mode mode = Mode::jj;
  std::vector<DirectionError> directions;
  SolverStats stats;
};

struct MatchOptions {
  // Candidates lie within this relative distance of gamma_sigma; among them
  // the one whose amplitudes best fit the analytic span wins.
  double window = 1e-3;
  // Relative spread below which computed modes form one degenerate cluster.
  double cluster_tol = 1e-6;
};

// Compares a computed spectrum with the dipole modes of the trap.
ErrorReport error_report(const GroundState& ground, const SpectrumResult& spectrum,
                         const MatchOptions& match = {});

// n_j(x,t) = |phi_j + eps (u_j e^{-i omega t} + conj(v_j) e^{i omega t})|^2.
std::pair<ScalarField, ScalarField> perturbed_density(const GroundState& ground,
                                                      const ModePair& mode, double epsilon,
                                                      double t);

struct SweepOptions {
  int dim = 1;
  double half_width = 16.0;
  SolverOptions solver;
  MinimizeOptions minimize;
  MatchOptions match{.window = 0.2};
};

// Ground state, nullspace, spectrum and error report for each N (ascending).
std::vector<ErrorReport> convergence_sweep(const PhysParams& params, Mode mode,
                                           std::span<const int> grid_sizes,
                                           const SweepOptions& opts);

struct TimingRow {
  int n = 0;
  std::size_t unknowns = 0;  // 2 N_t
  std::size_t points = 0;    // N_t
  double seconds = 0.0;      // eigensolver wall time
  long long matvecs = 0;
  int iterations = 0;
};

std::vector<TimingRow> timing_study(const PhysParams& params, Mode mode,
                                    std::span<const int> grid_sizes, const SweepOptions& opts);

// Least-squares slope of log(seconds) against log(N_t log N_t) over the
// last `count` rows.
double timing_slope(std::span<const TimingRow> rows, int count = 3);

// Wall times are left out so identical runs give identical files.
void write_error_csv(const std::filesystem::path& path, std::span<const ErrorReport> reports);
void write_timing_csv(const std::filesystem::path& path, std::span<const TimingRow> rows);

}  // namespace bdgkit

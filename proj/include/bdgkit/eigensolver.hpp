#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bdgkit/bdg.hpp"

namespace bdgkit {

enum class SolverMethod {
  // Two-sided block iteration on (H-, H+) directly: g- and f-blocks are
  // extended separately and the projected pair is solved exactly. No inner
  // H+ solves.
  biorthogonal,
  // Block iteration on the symmetric-definite pencil H- g = omega^2 H+^{-1} g
  // with H+^{-1} applied by preconditioned CG.
  pencil,
};

const char* to_string(SolverMethod method);
SolverMethod solver_method_from_string(const std::string& text);

struct SolverOptions {
  int n_ev = 10;
  double tol = 1e-9;
  int max_outer = 2000;
  int block_size = 0;  // 0 selects n_ev + 8
  double inner_tol = 1e-11;
  // Preconditioner: 0 uses the Fourier-diagonal (1 + mu^2/2)^{-1} alone;
  // k > 0 runs up to k steps of CG on H+ preconditioned by it. The diagonal
  // alone ignores the trap and needs ~20x more outer iterations in 2D.
  int precond_cg_steps = 20;
  std::uint64_t seed = 20240607;
  SolverMethod method = SolverMethod::biorthogonal;

  int effective_block_size() const { return block_size > 0 ? block_size : n_ev + 8; }
  void validate() const;
};

struct ModePair {
  double omega = 0.0;
  Field2 f;
  Field2 g;
  Field2 u;  // f + g
  Field2 v;  // f - g
  double residual = 0.0;       // ||H- g - omega f|| + ||H+ f - omega g||
  double biorth_defect = 0.0;  // max_j |<f, g_j>| over modes of different omega
};

struct SolverStats {
  int iterations = 0;
  long long matvecs = 0;       // H+ and H- applications, inner solves included
  long long inner_solves = 0;  // H+^{-1} applications (pencil method)
  double seconds = 0.0;
};

struct SpectrumResult {
  std::vector<ModePair> modes;  // ascending omega
  NullspaceBasis nullspace;
  SolverStats stats;
};

// Rescales (f, g) so <f, g> = 1/4 and fills u, v, residual. omega > 0.
ModePair make_mode_pair(const BdgContext& ctx, double omega, std::span<const double> f,
                        std::span<const double> g);

struct BiorthResult {
  std::vector<std::vector<double>> f;
  std::vector<std::vector<double>> g;
  int rank = 0;
};

// Two-sided modified Gram-Schmidt with one reorthogonalization pass:
// <f'_i, g'_j> = delta_ij in the h^d-weighted inner product. Pairs whose
// bilinear norm drops below 1e-13 ||f|| ||g|| are discarded.
BiorthResult biorthonormalize(const SpectralGrid& grid, std::vector<std::vector<double>> f,
                              std::vector<std::vector<double>> g);

struct BiorthCheck {
  double max_defect = 0.0;
  // gram[i][j] = <f_i, g_j>
  std::vector<std::vector<double>> gram;
};

// Max |<f_i, g_j>| over i != j with |omega_i| != |omega_j| (relative 1e-6).
BiorthCheck check_biorthogonality(const std::vector<ModePair>& modes);

SpectrumResult solve_spectrum(const BdgContext& ctx, const NullspaceBasis& nullspace,
                              const SolverOptions& opts);

struct DenseSpectrum {
  // All eigenvalues of the 4 N_t block operator [[0, H-], [H+, 0]] acting on [f; g].
  std::vector<complex> eigenvalues;
  int zero_multiplicity = 0;
  // Positive omega ascending with real (f, g), <f, g> = 1/4.
  std::vector<ModePair> modes;
};

// Brute-force reference: H+ and H- assembled column by column from the
// matrix-free appliers, full block eigenproblem solved densely.
DenseSpectrum dense_oracle_solve(const BdgContext& ctx, int limit = 4096,
                                 double zero_tol = 1e-4);

// `index,omega,residual,biorth_defect`, 1-based index, 17 significant digits.
void write_spectrum_csv(const std::filesystem::path& path, const std::vector<ModePair>& modes);
// Four components u_1, u_2, v_1, v_2 in one BDG1 file.
void write_mode_file(const std::filesystem::path& path, const ModePair& mode);
// Reads a mode file back; f and g are reconstructed from u and v.
ModePair read_mode_file(const BdgContext& ctx, const std::filesystem::path& path, double omega);

}  // namespace bdgkit

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "bdgkit/spectral.hpp"

namespace bdgkit {

// JJ: internal Josephson junction (Rabi coupling), one total-mass constraint.
// NoJJ: Omega = 0, each component keeps its own mass (alpha, 1 - alpha).
enum class Mode { jj, no_jj };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& text);

struct PhysParams {
  double beta11 = 100.0;
  double beta12 = 94.0;  // = beta21
  double beta22 = 97.0;
  double rabi = 1.0;   // Omega
  double raman = 0.0;  // delta
  std::vector<double> gamma{1.0};
  double alpha = 0.2;  // mass of component 1, NoJJ only

  double beta(int j, int l) const;

  // Parameter sets used throughout the accuracy experiments.
  static PhysParams josephson(int dim);
  static PhysParams no_josephson(int dim);

  // Checks the invariants that the given mode relies on.
  void validate(Mode mode, int dim) const;
};

struct GroundState {
  Field2 phi;
  Mode mode = Mode::jj;
  double mu = 0.0;   // JJ
  double mu1 = 0.0;  // NoJJ
  double mu2 = 0.0;  // NoJJ
  double energy = 0.0;
  PhysParams params;
  double residual = 0.0;

  // mu in JJ mode, mu_j in NoJJ mode (j = 0, 1).
  double chemical_potential(int j) const;
};

// Discrete energy; kinetic part is evaluated spectrally as
// 1/2 sum_j <-lap phi_j, phi_j>. Accepts real or complex fields.
double energy(const Field2& phi, const PhysParams& params);

// Gradient of energy() with respect to the (real) samples, expressed in the
// h^d-weighted inner product: dE[d] = <energy_gradient(phi), d>. Equals 2 H(phi) phi.
Field2 energy_gradient(const Field2& phi, const PhysParams& params);

struct EulerLagrange {
  double residual = 0.0;
  double mu = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
};

// Rayleigh-quotient chemical potential(s) and the l2 norm of H phi - mu phi.
// The candidate must satisfy the mode's mass constraint(s) to 1e-10.
EulerLagrange euler_lagrange_residual(const Field2& phi, const PhysParams& params, Mode mode);

struct MinimizeOptions {
  double tolerance = 1e-13;
  int max_iterations = 50000;
  // Starting field; defaults to the non-interacting Gaussian pair.
  std::optional<Field2> initial;
};

struct MinimizeTrace {
  std::vector<double> energies;   // accepted iterates, first entry is the start
  std::vector<double> residuals;
  std::vector<double> mass_defects;  // max |constraint - target| after each update
  int iterations = 0;
};

GroundState minimize_ground_state(const SpectralGrid& grid, const PhysParams& params, Mode mode,
                                  const MinimizeOptions& opts = {},
                                  MinimizeTrace* trace = nullptr);

// Non-interacting harmonic ground state scaled to the mode's masses, with the
// JJ sign convention (phi_2 carries -sign(Omega)).
Field2 gaussian_initial_guess(const SpectralGrid& grid, const PhysParams& params, Mode mode);

// `<stem>.bdg1` holds phi, `<stem>.meta` the key=value sidecar.
void save_ground_state(const std::filesystem::path& stem, const GroundState& gs);
GroundState load_ground_state(const std::filesystem::path& stem);

}  // namespace bdgkit

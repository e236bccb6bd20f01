#pragma once

#include "polaron/fields.hpp"

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace polaron {

// Insulating filling impossible: bands Z and Z+1 overlap.
class H7Violated : public std::runtime_error {
 public:
  explicit H7Violated(const std::string& what) : std::runtime_error("H7 violated: " + what) {}
};

// Normalized Gaussian nucleus; center in Cartesian coordinates within the cell.
struct Nucleus {
  Eigen::VectorXd center;
  double width = 0.1;
  double charge = 1.0;
};

enum class Mixing { Anderson, Linear };

struct CrystalSpec {
  LatticeCell cell = LatticeCell::cubic(1, 1.0);
  std::vector<Nucleus> nuclei;
  double background = 0.0;  // uniform nuclear charge per cell
  int electrons = 1;        // Z per cell
  double ecut = 20.0;       // plane waves with |xi + G|^2 / 2 <= ecut
  std::vector<int> kpoints{1};
  std::vector<int> grid;    // density grid per axis; empty picks the smallest alias-free grid
  Mixing mixing = Mixing::Anderson;
  double mixing_beta = 0.1;
  int mixing_history = 10;
  double tolerance = 1e-8;
  int max_iterations = 200;
  int cells = 1;            // unit cells in this computational cell

  // Neutrality (sum of charges = Z to 1e-10), positive widths, sizes.
  void validate() const;
  double nuclear_charge() const;
  // Same crystal on a block of reps cells (Gamma-point sampling).
  CrystalSpec supercell(const std::vector<int>& reps) const;
  // Alias-free density grid for the cutoff.
  std::vector<int> density_grid() const;
  // mu on the grid: periodic sum of the Gaussians plus the background.
  ScalarField nuclear_density(GridPtr g) const;
};

// Gamma-centred uniform k-grid xi = B (j / nk), j in [-nk/2, nk/2).
std::vector<Eigen::VectorXd> kpoint_grid(const LatticeCell& cell, const std::vector<int>& nk);

struct BlochState {
  Eigen::VectorXd xi;
  Eigen::VectorXd energies;        // ascending
  Eigen::MatrixXcd coefficients;   // basis x bands, orthonormal columns
  Eigen::MatrixXi basis;           // d x basis integer reciprocal coordinates of G
};

// Lowest nbands eigenpairs of -(1/2) Lap_xi + V in the plane-wave basis at each xi.
std::vector<BlochState> bloch_bands(const ScalarField& V, double ecut, const std::vector<Eigen::VectorXd>& kpts,
                                    int nbands);
// Plane-wave Hamiltonian at one xi (for Hermiticity checks).
Eigen::MatrixXcd bloch_hamiltonian(const ScalarField& V, double ecut, const Eigen::VectorXd& xi,
                                   Eigen::MatrixXi* basis = nullptr);

// Lowest nev eigenpairs of a Hermitian matrix (LAPACK zheevr, lower triangle; H is overwritten).
void hermitian_lowest(Eigen::MatrixXcd& H, int nev, Eigen::VectorXd& w, Eigen::MatrixXcd& Z);

struct FermiLevel {
  double fermi = 0.0;
  double gap = 0.0;
  double homo = 0.0;
  double lumo = 0.0;
};
// Insulating filling of the lowest Z bands at every k-point; midgap Fermi level.
FermiLevel fermi_level(const std::vector<BlochState>& bands, int electrons);

// k-averaged density of the lowest `electrons` bands on the grid.
ScalarField band_density(const std::vector<BlochState>& bands, int electrons, GridPtr g);
// k-averaged kinetic energy of the occupied bands.
double band_kinetic(const std::vector<BlochState>& bands, int electrons, const LatticeCell& cell);

struct CrystalGroundState {
  CrystalSpec spec;
  GridPtr grid;
  std::vector<BlochState> bands;
  double fermi = 0.0;
  double gap = 0.0;
  ScalarField rho;      // rho^0_per
  ScalarField V;        // V^0_per = (rho - mu) * G, zero cell mean
  ScalarField mu;       // nuclear density on the grid (including any external density)
  double energy = 0.0;  // energy of the computational cell
  double energy_per_cell = 0.0;
  double kinetic = 0.0;
  int cells = 1;
  int iterations = 0;
  bool converged = false;
  bool vacuum = false;
  std::string message;
  std::vector<double> residual_history;
  std::vector<double> energy_history;
};
nlohmann::json to_json(const CrystalGroundState& g);

// One SCF problem: fixed nuclear (plus external) density, electron count, basis, k-points.
struct ScfProblem {
  CrystalSpec spec;             // mixing and tolerance controls
  GridPtr grid;
  ScalarField mu;               // total positive background: nuclei minus an electron-like defect
  int electrons = 1;            // per computational cell
  int cells = 1;
  std::vector<Eigen::VectorXd> kpoints;
};
ScfProblem make_scf_problem(const CrystalSpec& spec);

struct ScfStep {
  std::vector<BlochState> bands;
  FermiLevel fermi;
  ScalarField V;
  ScalarField rho_out;
  double kinetic = 0.0;
  double energy = 0.0;  // energy of the filled state built from V[rho_in]
  double residual = 0.0;
};
// The fixed-point map rho_in -> rho_out, with the energy of the output state.
ScfStep scf_step(const ScfProblem& p, const ScalarField& rho_in);

// kinetic + (1/2) D_G(rho - mu, rho - mu) with the periodic kernel of the cell.
double crystal_energy(double kinetic, const ScalarField& rho, const ScalarField& mu);

// Self-consistent ground state; `warm` seeds the input density.
CrystalGroundState solve_scf(const ScfProblem& p, const ScalarField* warm = nullptr);
CrystalGroundState scf_ground_state(const CrystalSpec& spec);

}  // namespace polaron

#pragma once

#include "polaron/defect.hpp"
#include "polaron/multipolaron.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace polaron {

// Lowest state of (1/(2m))(-Lap) + V on the unit cell, periodic boundary.
struct CellEigenResult {
  double mass = 1.0;
  double lambda = 0.0;  // lowest eigenvalue
  double energy = 0.0;  // E^per_m = |cell| * lambda (normalization int |u|^2 = |cell|)
  ScalarField u;        // positive, int |u|^2 = |cell|
  ScalarField f;        // Lap f = 2V, zero mean
  double e_per = 0.0;   // int V f
  double f_residual = 0.0;
  double u_min = 0.0;
  double volume = 1.0;
};
// V must have zero cell mean.
CellEigenResult cell_eigenproblem(const ScalarField& V, double m);
// min over a Gamma-centred k-grid of the lowest band of (1/(2m))(-Lap) + V.
double band_minimum(const ScalarField& V, double m, const std::vector<int>& nk);
nlohmann::json to_json(const CellEigenResult& r);

// Crystal plus a macroscopic box of side `box`. At scale m the micro supercell has
// box / (m * cell side) cells per axis, and the macro grid is that supercell grid
// scaled by m (x = m y), so macro and micro fields share one array.
class MacroModel {
 public:
  MacroModel(CrystalSpec spec, CrystalGroundState ground, double box);
  // Solves the unit-cell ground state first.
  static MacroModel build(const CrystalSpec& spec, double box);

  const CrystalSpec& spec() const { return spec_; }
  const CrystalGroundState& ground() const { return ground_; }
  double box() const { return box_; }
  int dim() const { return spec_.cell.dim(); }
  bool trivial() const { return spec_.electrons == 0; }

  // Throws "incommensurate scales" unless box / (m * side) is an integer on every axis.
  int cells_per_axis(double m) const;
  // Pristine supercell for scale m; cached and shared between threads.
  const Supercell& supercell(double m) const;
  GridPtr macro_grid(double m) const;
  // The macroscopic box as a cell, identical for every m.
  const LatticeCell& box_cell() const { return box_cell_; }

 private:
  struct Cache {
    std::mutex mu;
    std::map<int, std::shared_ptr<const Supercell>> cells;
    std::map<int, std::shared_ptr<std::once_flag>> once;
  };
  CrystalSpec spec_;
  CrystalGroundState ground_;
  double box_;
  LatticeCell box_cell_;
  std::shared_ptr<Cache> cache_;
};

// ---------------------------------------------------------------- dielectric tensor

struct DielectricOptions {
  std::vector<double> m_ladder{0.5, 0.25, 0.125};
  // Probes in macro coordinates (offsets from the box centre). Empty: one Gaussian
  // of width 1/sqrt(2), plus one dipole-modulated Gaussian per axis when d > 1.
  std::vector<std::vector<GaussianCharge>> probes;
  double q_max = 2.0;          // macro wave numbers used in the fit
  double fit_threshold = 0.05;  // relative least-squares residual at the smallest m
};
std::vector<std::vector<GaussianCharge>> default_probes(int d);
// nu_m(y) = m^3 nu(m y) expressed as Gaussians in micro coordinates.
std::vector<GaussianCharge> scale_to_micro(const std::vector<GaussianCharge>& nu, double m, int d);

DielectricTensor extract_dielectric(const MacroModel& model, const DielectricOptions& opt = {});
DielectricTensor extract_dielectric(const CrystalSpec& spec, const CrystalGroundState& ground,
                                    const std::vector<double>& m_ladder,
                                    const std::vector<std::vector<GaussianCharge>>& probes, double box);
nlohmann::json to_json(const DielectricTensor& e);

// ---------------------------------------------------------------- coupled model

struct CoupledOptions {
  NPolaronOptions npolaron;  // repulsion model and descent controls for Psi
  Symmetry symmetry = Symmetry::Symmetric;
  double initial_width = 1.0;
  int max_outer = 60;
  double outer_tolerance = 1e-9;  // stop when the outer energy moves less than this
  int inner_iterations = 400;
};

struct CoupledEnergy {
  double kinetic = 0.0;
  double repulsion = 0.0;
  double periodic = 0.0;  // m^-1 int V0(x/m) rho
  double crystal = 0.0;   // m^(d-4) F_crys[m^3 rho(m .)]
  double total = 0.0;
  double micro_total = 0.0;
  double rescaling_error = 0.0;  // |total - micro_total| / max(1, |total|)
  bool crystal_converged = true;
  bool gap_closed = false;
};
nlohmann::json to_json(const CoupledEnergy& e);

// Psi must live on model.macro_grid(m). Densities use the physical charge (int rho = N).
CoupledEnergy coupled_energy(const ManyBodyWaveFunction& psi, const MacroModel& model, double m,
                             const CoupledOptions& opt = {});

struct CoupledResult {
  double mass = 1.0;
  int particles = 1;
  CoupledEnergy parts;
  double energy = 0.0;
  ManyBodyWaveFunction state;
  Eigen::VectorXcd polaron;  // Psi / prod_j u_m(x_j / m)
  double reconstruction_error = 0.0;
  double threshold = 0.0;  // m^-1 min band of (1/(2m))(-Lap) + V0: bottom of the periodic spectrum
  double binding_margin = 0.0;
  bool bound = false;  // margin > 10 x SCF tolerance (N = 1)
  int outer_iterations = 0;
  bool converged = false;
  bool spreading = false;
  bool monotone = true;
  std::vector<double> energies;
  std::string message;
};
nlohmann::json to_json(const CoupledResult& r);

CoupledResult minimize_coupled(const MacroModel& model, int n, double m, const CoupledOptions& opt = {});

// ---------------------------------------------------------------- macroscopic limit

struct MacrolimitReport {
  std::vector<double> m_ladder;
  std::vector<double> crystal_terms;  // m^(d-4) F_crys[m^3 |psi(m .)|^2]
  double pekar = 0.0;                 // F^P_eps[|psi|^2]
  std::vector<double> gaps;
  std::vector<double> relative_gaps;
  std::vector<bool> converged;
  bool decreasing = false;
  bool all_converged = false;
  DielectricTensor eps;
};
nlohmann::json to_json(const MacrolimitReport& r);

MacrolimitReport macrolimit_check(const Orbital& psi, const MacroModel& model, const std::vector<double>& m_ladder,
                                  const DielectricTensor& eps);

struct PekarLimitReport {
  int particles = 1;
  std::vector<double> m_ladder;
  std::vector<double> coupled;  // E_m(N)
  double e_per = 0.0;           // int V0 f^per, per unit cell
  double pekar = 0.0;           // E^P_eps(N) on the macro box
  double limit = 0.0;           // N e_per / |cell| + E^P
  std::vector<double> discrepancy;
  std::vector<double> relative;  // discrepancy / |E^P|
  bool decreasing = false;
  bool degenerate = false;  // trivial crystal: no coupling, E^P from alpha = 0
  bool all_converged = false;
  std::vector<std::string> warnings;
};
nlohmann::json to_json(const PekarLimitReport& r);

PekarLimitReport pekar_limit_check(const MacroModel& model, int n, const std::vector<double>& m_ladder,
                                   const DielectricTensor& eps, const CoupledOptions& opt = {});

}  // namespace polaron

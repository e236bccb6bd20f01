#pragma once

#include "polaron/pekar.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace polaron {

enum class Symmetry { None, Symmetric, Antisymmetric };
std::string to_string(Symmetry s);
Symmetry symmetry_from_string(const std::string& s);

// Paper: rho_Psi integrates to 1. Physical: rho_Psi integrates to N.
enum class ChargeConvention { Paper, Physical };
std::string to_string(ChargeConvention c);
ChargeConvention charge_convention_from_string(const std::string& s);

// Kernel of the Pekar self-attraction. Auto picks Coulomb in 3-D and
// SoftCoulomb (same width as the pair repulsion) in lower dimensions.
enum class PekarKernel { Auto, Coulomb, SoftCoulomb };
std::string to_string(PekarKernel k);
PekarKernel pekar_kernel_from_string(const std::string& s);

// N-particle state on (grid)^N; particle 1 is the slowest index.
struct ManyBodyWaveFunction {
  int particles = 1;
  GridPtr grid;
  Eigen::VectorXcd values;
  Symmetry symmetry = Symmetry::None;

  ManyBodyWaveFunction() = default;
  // Validates size, normalization to 1e-10 and the declared symmetry under one transposition.
  ManyBodyWaveFunction(int n, GridPtr g, Eigen::VectorXcd v, Symmetry s);
  static ManyBodyWaveFunction normalized(int n, GridPtr g, Eigen::VectorXcd v, Symmetry s);

  std::size_t one_body_size() const { return grid->size(); }
  double norm() const;
  // Unsymmetrized product of orbitals (one per particle), projected on `s` and renormalized.
  static ManyBodyWaveFunction product(const std::vector<Orbital>& orbitals, Symmetry s);
};

// Values with particle axes reordered: result(x_1..x_N) = psi(x_perm[0], ..., x_perm[N-1]).
Eigen::VectorXcd permute_particles(const Eigen::VectorXcd& psi, int n, std::size_t m, const std::vector<int>& perm);
// (Anti)symmetrizing projection over all N! permutations; None leaves psi unchanged.
void project_symmetry(Eigen::VectorXcd& psi, int n, std::size_t m, Symmetry s);
// Largest |psi - sign * psi(swap i,j)| relative to max |psi|.
double symmetry_defect(const ManyBodyWaveFunction& psi, int i, int j);

// Average of the N one-particle marginals, scaled to integrate to 1 (Paper) or N (Physical).
ScalarField density_from_wavefunction(const ManyBodyWaveFunction& psi,
                                      ChargeConvention c = ChargeConvention::Paper);

struct NPolaronOptions {
  Boundary boundary = Boundary::Free;
  ChargeConvention charge = ChargeConvention::Paper;
  PekarKernel kernel = PekarKernel::Auto;
  // soft-Coulomb width in units of the grid spacing (analog mode only)
  double soft_width = 1.0;
  int max_tensor_dims = 6;
  double memory_budget_bytes = 2.0e9;
  DescentOptions descent;
};

struct NPolaronEnergy {
  double energy = 0.0;
  double kinetic = 0.0;
  double repulsion = 0.0;
  double interaction = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  bool analog_mode = false;
  double soft_width = 0.0;  // absolute a, 0 when the true Coulomb repulsion is used
  std::string kernel;
  std::string charge;
};
nlohmann::json to_json(const NPolaronEnergy& e);

NPolaronEnergy npolaron_energy(const ManyBodyWaveFunction& psi, const PekarCoupling& c,
                               const NPolaronOptions& opt = {});

struct NPolaronResult {
  NPolaronEnergy parts;
  int iterations = 0;
  bool converged = false;
  bool spreading = false;
  bool diverged = false;
  std::string message;
  std::vector<double> energies;
};
nlohmann::json to_json(const NPolaronResult& r);

struct NPolaronRun {
  NPolaronResult result;
  ManyBodyWaveFunction state;
};
NPolaronRun minimize_npolaron(const ManyBodyWaveFunction& init, const PekarCoupling& c,
                              const NPolaronOptions& opt = {});

// The functional on the tensor grid, also usable on unnormalized states.
class NPolaronFunctional {
 public:
  NPolaronFunctional(int n, GridPtr g, const PekarCoupling& c, const NPolaronOptions& opt);
  double operator()(const Eigen::VectorXcd& psi, Eigen::VectorXcd* hpsi, NPolaronEnergy* parts = nullptr) const;
  void precondition(Eigen::VectorXcd& x) const;
  // Density (with the configured charge convention) of an unnormalized state.
  Eigen::VectorXd density(const Eigen::VectorXcd& psi) const;
  // Pair potential w(x_k - x_l) between one-body grid points i and j.
  double pair(std::size_t i, std::size_t j) const;
  const std::vector<int>& tensor_shape() const { return shape_; }
  bool analog() const { return analog_; }
  double soft_width() const { return a_; }
  PekarKernel kernel() const { return kernel_; }

 private:
  int n_;
  GridPtr grid_;
  NPolaronOptions opt_;
  PekarKernel kernel_;
  bool analog_;
  double a_ = 0.0;
  double charge_;
  KernelSymbol sym_;
  Eigen::VectorXd wdiff_;    // pair potential indexed by the one-body displacement index
  Eigen::VectorXd vrep_;     // sum over pairs on the tensor grid
  Eigen::VectorXd k2_;       // tensor |K|^2
  std::vector<int> shape_;
};

// Throws when the tensor grid exceeds the dimension or memory budget.
void check_tensor_budget(int n, const Grid& g, const NPolaronOptions& opt);

struct SplitVerdict {
  int k = 0;
  double margin = 0.0;  // E(N-k) + E(k) - E(N)
  std::string verdict;  // strict, weak, violated, unbound
  bool weak_holds = true;
};

struct BindingReport {
  int particles = 0;
  std::map<int, double> energies;
  std::map<int, bool> converged;
  std::map<int, bool> spreading;
  std::vector<SplitVerdict> splits;
  double strict_tolerance = 0.0;
  double weak_tolerance = 0.0;
  bool inconclusive = false;
  bool strict_binding = false;  // every split strict
  nlohmann::json grid;
};
nlohmann::json to_json(const BindingReport& r);

struct BindingOptions {
  NPolaronOptions npolaron;
  Symmetry symmetry = Symmetry::Symmetric;
  double cluster_width = 0.0;    // 0: taken from the k = 1 minimizer
  double cluster_spacing = 0.5;  // separation of the initial Gaussians in widths
  double strict_factor = 10.0;   // strict margin in units of the residual tolerance
  double weak_relative = 1e-4;
};
BindingReport binding_check(int n, GridPtr g, const PekarCoupling& c, const BindingOptions& opt = {});

// Gaussian cluster of n particles centred in the cell, projected on `s`.
ManyBodyWaveFunction gaussian_cluster(int n, GridPtr g, double width, double spacing, Symmetry s);

}  // namespace polaron

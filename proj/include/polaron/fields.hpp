#pragma once

#include "polaron/grid.hpp"

#include <string>
#include <vector>

namespace polaron {

// Free: image-free truncated kernel, fields must decay inside the box.
// Periodic: lattice-periodic Green function with the k = 0 mode dropped
// (uniform compensating background).
enum class Boundary { Free, Periodic };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

// Symmetric d x d dielectric matrix plus how it was obtained.
struct DielectricTensor {
  Eigen::MatrixXd eps;
  double fit_residual = 0.0;
  std::vector<double> m_ladder;
  std::vector<Eigen::MatrixXd> ladder_fits;
  std::vector<double> ladder_residuals;

  DielectricTensor() = default;
  explicit DielectricTensor(Eigen::MatrixXd e) : eps(std::move(e)) {}
  static DielectricTensor identity(int d) { return DielectricTensor(Eigen::MatrixXd::Identity(d, d)); }
  static DielectricTensor scalar(int d, double e) { return DielectricTensor(e * Eigen::MatrixXd::Identity(d, d)); }

  int dim() const { return static_cast<int>(eps.rows()); }
  // Throws unless symmetric positive definite.
  void validate() const;
  Eigen::VectorXd eigenvalues() const;
};

// Fourier symbol of the Green function of -div(eps grad) on this grid, and
// the additive constant c such that the canonical kernel is (symbol) - c.
// eps == nullptr means the identity.
struct KernelSymbol {
  Eigen::VectorXd khat;
  double constant = 0.0;
};
KernelSymbol coulomb_symbol(const Grid& g, Boundary b, const Eigen::MatrixXd* eps = nullptr);

// Bilinear form of a kernel symbol: (|box|/N^2) sum conj(f^) g^ K^ - c (int f)(int g).
double kernel_energy(const ScalarField& f, const ScalarField& g, const KernelSymbol& k);
// Potential K * f on the grid.
ScalarField kernel_potential(const ScalarField& f, const KernelSymbol& k);

struct FieldEnergy {
  double value = 0.0;
  double boundary_ratio = 0.0;  // largest boundary value relative to the field maximum
  std::vector<std::string> warnings;
};

// D(f,g) with the image-free kernel.
FieldEnergy coulomb_energy_free(const ScalarField& f, const ScalarField& g);

// D_G(f,g) on one unit cell; G normalized so that min over the grid is zero.
// extra_constant shifts G for testing the mean coupling.
double periodic_green_energy(const ScalarField& f, const ScalarField& g, const LatticeCell& cell,
                             double extra_constant = 0.0);
// The additive constant g0 fixing min G = 0 on the grid of a unit cell.
double periodic_green_constant(const Grid& g);

// F^P_eps[rho] = (1/2)(D_eps(rho,rho) - D(rho,rho)).
double pekar_interaction(const ScalarField& rho, const DielectricTensor& eps, Boundary b = Boundary::Free);

// W with -div(eps grad W) = 4 pi rho.
ScalarField solve_poisson_aniso(const ScalarField& rho, const DielectricTensor& eps, Boundary b = Boundary::Free);

// Largest |rho| on the box faces relative to max |rho|.
double boundary_ratio(const ScalarField& f);

// Translate by an arbitrary vector through a Fourier phase (periodic wrap).
ScalarField fourier_shift(const ScalarField& f, const Eigen::VectorXd& tau);
// Circular mean position along each lattice axis, from the first Fourier mode.
Eigen::VectorXd circular_center(const ScalarField& f);
// Shift so that the circular mean sits at the cell centre.
ScalarField center_density(const ScalarField& f);

}  // namespace polaron

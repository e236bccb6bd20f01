#pragma once

#include "polaron/descent.hpp"
#include "polaron/fields.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace polaron {

// Normalized one-particle state.
class Orbital {
 public:
  // Throws unless ||psi|| = 1 to 1e-10; use normalized() to rescale.
  explicit Orbital(ComplexField psi);
  static Orbital normalized(ComplexField psi);

  const ComplexField& field() const { return psi_; }
  const GridPtr& grid() const { return psi_.grid; }
  const Eigen::VectorXcd& values() const { return psi_.values; }
  double norm() const { return norm_; }
  ScalarField density() const;

 private:
  ComplexField psi_;
  double norm_ = 1.0;
};

Orbital gaussian_orbital(GridPtr g, double width, const Eigen::VectorXd& center);
// Gaussian centred in the cell.
Orbital gaussian_orbital(GridPtr g, double width);
// Smooth random state: a Gaussian envelope times random low Fourier modes.
Orbital random_orbital(GridPtr g, double width, std::uint64_t seed);

// Either F = -(alpha/2) D(rho, rho) or F = F^P_eps[rho].
struct PekarCoupling {
  double alpha = 0.0;
  std::optional<DielectricTensor> eps;

  static PekarCoupling isotropic(double alpha);
  static PekarCoupling dielectric(DielectricTensor eps);
  // alpha of the isotropic part: 1 - 1/(mean eigenvalue) for a tensor.
  double effective_alpha() const;
};

// Symbol S with F[rho] = (1/2) kernel_energy(rho, rho, S).
KernelSymbol pekar_symbol(const Grid& g, const PekarCoupling& c, Boundary b);

struct PekarResult {
  double energy = 0.0;
  double kinetic = 0.0;
  double interaction = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool spreading = false;
  bool diverged = false;
  double ipr = 0.0;
  std::string message;
  std::vector<double> energies;
  std::vector<std::string> warnings;
};
nlohmann::json to_json(const PekarResult& r);

// Energy parts of a normalized orbital; lambda and residual are filled too.
PekarResult pekar_energy(const Orbital& psi, const PekarCoupling& c, Boundary b = Boundary::Free);

struct PekarOptions {
  Boundary boundary = Boundary::Free;
  DescentOptions descent;
};

struct PekarRun {
  PekarResult result;
  Orbital orbital;
};
PekarRun minimize_pekar(const Orbital& init, const PekarCoupling& c, const PekarOptions& opt = {});

struct ChoquardResidual {
  double lambda = 0.0;
  double residual = 0.0;
};
// H psi = -(1/2) Lap psi + U[|psi|^2] psi, lambda = <psi, H psi>, residual = ||H psi - lambda psi||.
ChoquardResidual choquard_residual(const Orbital& psi, const PekarCoupling& c, Boundary b = Boundary::Free);

// Initial Gaussian width from the alpha scaling: the optimal 3-D Gaussian has width 3 sqrt(pi/2) / alpha.
double pekar_initial_width(const PekarCoupling& c);

// The unconstrained functional on the grid, for derivative checks:
// returns T + F for any (not necessarily normalized) psi and fills H psi.
class PekarFunctional {
 public:
  PekarFunctional(GridPtr g, const PekarCoupling& c, Boundary b);
  double operator()(const Eigen::VectorXcd& psi, Eigen::VectorXcd* hpsi, double* kinetic = nullptr,
                    double* interaction = nullptr) const;
  const GridPtr& grid() const { return grid_; }

 private:
  GridPtr grid_;
  KernelSymbol sym_;
};

// Inverse participation ratio int |psi|^4 of a normalized state.
double inverse_participation(const Eigen::VectorXcd& psi, double dv);

// Multiply by 1 / (1 + |k|^2 / 2) in Fourier space.
void kinetic_precondition(const Grid& g, Eigen::VectorXcd& x);

}  // namespace polaron

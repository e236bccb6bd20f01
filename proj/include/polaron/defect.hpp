#pragma once

#include "polaron/crystal.hpp"

#include <functional>
#include <string>
#include <vector>

namespace polaron {

// Normalized Gaussian charge, placed relative to the centre of whatever cell it is drawn on.
struct GaussianCharge {
  Eigen::VectorXd offset;
  double width = 1.0;
  double charge = 1.0;
};
// Periodic sum of the Gaussians on g, built mode by mode (exact integral).
ScalarField gaussian_defect(GridPtr g, const std::vector<GaussianCharge>& parts);

// Pristine crystal on an L x ... x L block of unit cells, Gamma point only.
struct Supercell {
  int L = 1;
  ScfProblem problem;
  CrystalGroundState ground;
};
// Throws if the pristine SCF does not converge.
Supercell make_supercell(const CrystalSpec& unit, int L);

// nu is electron-like: the defect run sees nuclear density mu - nu.
struct DefectRun {
  int L = 1;
  double energy = 0.0;  // F_crys at this supercell
  double e_defect = 0.0;
  double e_pristine = 0.0;
  ScalarField nu;
  ScalarField rho_q;
  double gap = 0.0;
  double boundary_ratio = 0.0;
  int iterations = 0;
  bool converged = false;
  bool gap_closed = false;
  std::string message;
};
DefectRun defect_run(const Supercell& sc, const ScalarField& nu);

struct DefectProblem {
  CrystalSpec unit;
  std::function<ScalarField(GridPtr)> density;  // nu drawn on a supercell grid
  std::vector<int> ladder{8, 16, 32};
  double ladder_threshold = 1e-4;  // |F(L_max) - F(L_prev)| for a converged ladder
};

struct DefectResponse {
  std::vector<DefectRun> runs;
  double extrapolated = 0.0;  // F of F + c/L through the two largest supercells
  double fit_slope = 0.0;     // c
  double ladder_change = 0.0;
  bool ladder_converged = false;
  bool extrapolation_consistent = false;
  bool converged = false;  // every run converged and the ladder is stable
  std::vector<std::string> warnings;

  const DefectRun& largest() const { return runs.back(); }
};
DefectResponse defect_energy(const DefectProblem& p);
// rho_Q on the largest supercell of the ladder.
ScalarField response_density(const DefectProblem& p);

struct DecouplingRow {
  int separation = 0;  // in unit cells along the first axis
  double delta = 0.0;
  double f_joint = 0.0, f1 = 0.0, f2 = 0.0;
  bool converged = false;
};
// Delta(R) = F[rho1 + rho2(. - R a_1)] - F[rho1] - F[rho2] on one supercell of L cells per axis.
// L = 0 picks 2 R_max + 4.
std::vector<DecouplingRow> decoupling_test(const CrystalSpec& unit, const std::vector<GaussianCharge>& rho1,
                                           const std::vector<GaussianCharge>& rho2,
                                           const std::vector<int>& separations, int L = 0);

nlohmann::json to_json(const DefectRun& r);
nlohmann::json to_json(const DefectResponse& r);
nlohmann::json to_json(const std::vector<DecouplingRow>& rows);

}  // namespace polaron

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace polaron {

struct DescentOptions {
  int max_iterations = 10000;
  double residual_tol = 1e-6;
  double initial_step = 1.0;
  int max_backtracks = 50;
  bool conjugate = true;
  bool detect_spreading = true;
  double spreading_drop = 4.0;  // stop when IPR < IPR0 / spreading_drop
  // A converged density whose boundary value exceeds this fraction of its
  // maximum fills the box: also diagnosed as spreading.
  double delocalized_ratio = 0.1;
};

// Energy minimization on the unit L2 sphere. `evaluate` returns the energy
// and, if requested, H x (half the L2 gradient of the unconstrained functional).
struct DescentProblem {
  std::function<double(const Eigen::VectorXcd&, Eigen::VectorXcd*)> evaluate;
  std::function<void(Eigen::VectorXcd&)> precondition;  // optional
  std::function<void(Eigen::VectorXcd&)> project;       // optional symmetry projection
  std::function<double(const Eigen::VectorXcd&)> ipr;   // optional spreading indicator
  double dv = 1.0;
};

struct DescentResult {
  double energy = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool spreading = false;
  bool diverged = false;
  double ipr_initial = 0.0;
  double ipr_final = 0.0;
  std::vector<double> energies;  // accepted energies, non-increasing
  std::string message;
};

// Normalizes x in place (after projection) and returns the final state in x.
DescentResult minimize_on_sphere(const DescentProblem& p, Eigen::VectorXcd& x, const DescentOptions& opt);

// <x, y> with the grid volume element.
inline std::complex<double> inner(const Eigen::VectorXcd& x, const Eigen::VectorXcd& y, double dv) {
  return x.dot(y) * dv;
}

}  // namespace polaron

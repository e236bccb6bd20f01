#include "polaron/descent.hpp"

#include <cmath>
#include <stdexcept>

namespace polaron {

namespace {

void normalize(Eigen::VectorXcd& x, double dv) {
  const double n = std::sqrt(x.squaredNorm() * dv);
  if (!(n > 0.0)) throw std::runtime_error("descent: state vanished");
  x /= n;
}

}  // namespace

DescentResult minimize_on_sphere(const DescentProblem& p, Eigen::VectorXcd& x, const DescentOptions& opt) {
  const double dv = p.dv;
  if (p.project) p.project(x);
  normalize(x, dv);

  DescentResult res;
  Eigen::VectorXcd hx;
  double E = p.evaluate(x, &hx);
  res.energies.push_back(E);
  if (p.ipr) res.ipr_initial = res.ipr_final = p.ipr(x);

  Eigen::VectorXcd dir, g_old, r_old;
  double step = opt.initial_step;
  int stalls = 0;
  for (int it = 0;; ++it) {
    const std::complex<double> lam = inner(x, hx, dv);
    Eigen::VectorXcd r = hx - lam * x;
    if (p.project) p.project(r);
    res.lambda = lam.real();
    res.residual = std::sqrt(r.squaredNorm() * dv);
    res.energy = E;
    res.iterations = it;
    if (res.residual <= opt.residual_tol) {
      res.converged = true;
      res.message = "residual below tolerance";
      break;
    }
    if (it >= opt.max_iterations) {
      res.message = "iteration limit reached";
      break;
    }
    if (p.ipr && opt.detect_spreading) {
      res.ipr_final = p.ipr(x);
      if (res.ipr_final < res.ipr_initial / opt.spreading_drop) {
        res.spreading = true;
        res.message = "spreading: inverse participation ratio fell below 1/" +
                      std::to_string(opt.spreading_drop) + " of its initial value";
        break;
      }
    }

    Eigen::VectorXcd g = r;
    if (p.precondition) p.precondition(g);
    if (p.project) p.project(g);
    g -= inner(x, g, dv) * x;

    bool restart = !opt.conjugate || dir.size() == 0;
    if (!restart) {
      const double den = inner(r_old, g_old, dv).real();
      double beta = den > 0.0 ? inner(r, g - g_old, dv).real() / den : 0.0;
      beta = std::max(0.0, beta);
      dir = -g + beta * dir;
      dir -= inner(x, dir, dv) * x;
      if (inner(r, dir, dv).real() >= 0.0) restart = true;
    }
    if (restart) dir = -g;
    g_old = g;
    r_old = r;

    // dE/dt along x + t dir, before renormalization
    const double slope = 2.0 * inner(hx, dir, dv).real();
    if (!(slope < 0.0)) {
      res.message = "no descent direction (roundoff floor)";
      break;
    }
    bool accepted = false;
    double t = step;
    Eigen::VectorXcd xt, ht;
    double Et = E;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      xt = x + t * dir;
      if (p.project) p.project(xt);
      normalize(xt, dv);
      Et = p.evaluate(xt, &ht);
      if (std::isfinite(Et) && Et <= E + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // below roundoff the Armijo test cannot succeed; a finite rise means divergence
      if (std::isfinite(Et) && Et > E + 1e-10 * std::max(1.0, std::abs(E))) {
        res.diverged = true;
        res.message = "energy increased after maximal backtracking";
      } else {
        res.message = "line search stalled at the roundoff floor";
      }
      break;
    }
    // Tiny accepted steps that no longer move the energy: roundoff floor.
    stalls = (t < 1e-6 && E - Et <= 1e-14 * std::abs(E)) ? stalls + 1 : 0;
    if (stalls >= 3) {
      res.message = "line search stalled at the roundoff floor";
      break;
    }
    x = std::move(xt);
    hx = std::move(ht);
    E = Et;
    res.energies.push_back(E);
    step = std::min(t * 2.0, 1e3);
  }
  if (p.ipr) res.ipr_final = p.ipr(x);
  return res;
}

}  // namespace polaron

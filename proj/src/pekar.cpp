#include "polaron/pekar.hpp"

#include "polaron/fft.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace polaron {

Orbital::Orbital(ComplexField psi) : psi_(std::move(psi)) {
  if (!psi_.grid || static_cast<std::size_t>(psi_.values.size()) != psi_.grid->size())
    throw std::invalid_argument("orbital: values do not match grid");
  norm_ = std::sqrt(psi_.norm2());
  if (std::abs(norm_ - 1.0) > 1e-10)
    throw std::invalid_argument("orbital is not normalized (norm " + std::to_string(norm_) + ")");
}

Orbital Orbital::normalized(ComplexField psi) {
  const double n = std::sqrt(psi.norm2());
  if (!(n > 0.0)) throw std::invalid_argument("orbital: zero state cannot be normalized");
  psi.values /= n;
  return Orbital(std::move(psi));
}

ScalarField Orbital::density() const { return ScalarField(psi_.grid, psi_.values.cwiseAbs2()); }

Orbital gaussian_orbital(GridPtr g, double width, const Eigen::VectorXd& center) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(g->size()));
  for (std::size_t i = 0; i < g->size(); ++i) {
    const Eigen::VectorXd r = g->minimum_image(g->point(i) - center);
    v[static_cast<Eigen::Index>(i)] = std::exp(-0.5 * r.squaredNorm() / (width * width));
  }
  return Orbital::normalized(ComplexField{g, std::move(v)});
}

Orbital gaussian_orbital(GridPtr g, double width) {
  return gaussian_orbital(g, width, 0.5 * g->cell().vectors() * Eigen::VectorXd::Ones(g->dim()));
}

Orbital random_orbital(GridPtr g, double width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int d = g->dim();
  Eigen::VectorXd center = 0.5 * g->cell().vectors() * Eigen::VectorXd::Ones(d);
  for (int a = 0; a < d; ++a) center[a] += 0.3 * width * u(rng);
  struct Mode {
    Eigen::VectorXd k;
    double amp, phase;
  };
  std::vector<Mode> modes;
  for (int m = 0; m < 4; ++m) {
    Eigen::VectorXd k(d);
    for (int a = 0; a < d; ++a) k[a] = u(rng) / width;
    modes.push_back({k, 0.3 * u(rng), 3.14159 * u(rng)});
  }
  Eigen::VectorXcd v(static_cast<Eigen::Index>(g->size()));
  for (std::size_t i = 0; i < g->size(); ++i) {
    const Eigen::VectorXd r = g->minimum_image(g->point(i) - center);
    double mod = 1.0;
    for (const auto& m : modes) mod += m.amp * std::cos(m.k.dot(r) + m.phase);
    v[static_cast<Eigen::Index>(i)] = mod * std::exp(-0.5 * r.squaredNorm() / (width * width));
  }
  return Orbital::normalized(ComplexField{g, std::move(v)});
}

PekarCoupling PekarCoupling::isotropic(double alpha) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("coupling strength must be finite");
  PekarCoupling c;
  c.alpha = alpha;
  return c;
}

PekarCoupling PekarCoupling::dielectric(DielectricTensor eps) {
  eps.validate();
  PekarCoupling c;
  c.alpha = 1.0 - 1.0 / eps.eigenvalues().mean();
  c.eps = std::move(eps);
  return c;
}

double PekarCoupling::effective_alpha() const { return alpha; }

KernelSymbol pekar_symbol(const Grid& g, const PekarCoupling& c, Boundary b) {
  const KernelSymbol k1 = coulomb_symbol(g, b);
  KernelSymbol s;
  if (c.eps) {
    if (c.eps->dim() != g.dim()) throw std::invalid_argument("dielectric tensor dimension does not match the grid");
    const KernelSymbol ke = coulomb_symbol(g, b, &c.eps->eps);
    s.khat = ke.khat - k1.khat;
    s.constant = ke.constant - k1.constant;
  } else {
    s.khat = -c.alpha * k1.khat;
    s.constant = -c.alpha * k1.constant;
  }
  return s;
}

PekarFunctional::PekarFunctional(GridPtr g, const PekarCoupling& c, Boundary b)
    : grid_(std::move(g)), sym_(pekar_symbol(*grid_, c, b)) {}

double PekarFunctional::operator()(const Eigen::VectorXcd& psi, Eigen::VectorXcd* hpsi, double* kinetic,
                                   double* interaction) const {
  const Grid& G = *grid_;
  const double dv = G.dv();
  const double n = static_cast<double>(G.size());
  Eigen::VectorXcd ph = fft::forward(G, psi);
  const double T = 0.5 * (G.k2().array() * ph.cwiseAbs2().array()).sum() * dv / n;

  const Eigen::VectorXd rho = psi.cwiseAbs2();
  Eigen::VectorXcd rh = fft::forward(G, rho);
  for (Eigen::Index i = 0; i < rh.size(); ++i) rh[i] *= sym_.khat[i];
  Eigen::VectorXd U = fft::inverse_real(G, rh);
  if (sym_.constant != 0.0) U.array() -= sym_.constant * rho.sum() * dv;
  const double F = 0.5 * rho.dot(U) * dv;

  if (hpsi) {
    for (Eigen::Index i = 0; i < ph.size(); ++i) ph[i] *= 0.5 * G.k2()[i];
    *hpsi = fft::inverse(G, ph);
    hpsi->array() += U.array().cast<std::complex<double>>() * psi.array();
  }
  if (kinetic) *kinetic = T;
  if (interaction) *interaction = F;
  return T + F;
}

double inverse_participation(const Eigen::VectorXcd& psi, double dv) {
  return psi.cwiseAbs2().squaredNorm() * dv;
}

void kinetic_precondition(const Grid& g, Eigen::VectorXcd& x) {
  Eigen::VectorXcd xh = fft::forward(g, x);
  for (Eigen::Index i = 0; i < xh.size(); ++i) xh[i] /= 1.0 + 0.5 * g.k2()[i];
  x = fft::inverse(g, xh);
}

namespace {

void fill_energy(const PekarFunctional& fn, const Eigen::VectorXcd& psi, PekarResult& r) {
  const double dv = fn.grid()->dv();
  Eigen::VectorXcd h;
  r.energy = fn(psi, &h, &r.kinetic, &r.interaction);
  const std::complex<double> lam = psi.dot(h) * dv;
  r.lambda = lam.real();
  r.residual = std::sqrt((h - lam * psi).squaredNorm() * dv);
  r.ipr = inverse_participation(psi, dv);
}

void boundary_warning(const Orbital& psi, Boundary b, PekarResult& r) {
  if (b != Boundary::Free) return;
  const double ratio = boundary_ratio(psi.density());
  if (ratio > 1e-8)
    r.warnings.push_back("density not negligible at the box boundary: relative magnitude " + std::to_string(ratio));
}

}  // namespace

PekarResult pekar_energy(const Orbital& psi, const PekarCoupling& c, Boundary b) {
  PekarFunctional fn(psi.grid(), c, b);
  PekarResult r;
  fill_energy(fn, psi.values(), r);
  r.converged = false;
  boundary_warning(psi, b, r);
  return r;
}

ChoquardResidual choquard_residual(const Orbital& psi, const PekarCoupling& c, Boundary b) {
  const PekarResult r = pekar_energy(psi, c, b);
  return {r.lambda, r.residual};
}

double pekar_initial_width(const PekarCoupling& c) {
  const double a = c.effective_alpha();
  return a > 1e-3 ? 3.0 * std::sqrt(0.5 * std::numbers::pi) / a : 2e3;
}

PekarRun minimize_pekar(const Orbital& init, const PekarCoupling& c, const PekarOptions& opt) {
  const GridPtr g = init.grid();
  PekarFunctional fn(g, c, opt.boundary);
  DescentProblem p;
  p.dv = g->dv();
  p.evaluate = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd* hx) { return fn(x, hx); };
  p.precondition = [&](Eigen::VectorXcd& x) { kinetic_precondition(*g, x); };
  p.ipr = [&](const Eigen::VectorXcd& x) { return inverse_participation(x, p.dv); };

  Eigen::VectorXcd x = init.values();
  const DescentResult d = minimize_on_sphere(p, x, opt.descent);
  Orbital out = Orbital::normalized(ComplexField{g, std::move(x)});

  PekarResult r;
  fill_energy(fn, out.values(), r);
  r.iterations = d.iterations;
  r.converged = d.converged;
  r.spreading = d.spreading;
  r.diverged = d.diverged;
  r.message = d.message;
  r.energies = d.energies;
  if (opt.descent.detect_spreading && r.converged) {
    const double ratio = boundary_ratio(out.density());
    if (ratio > opt.descent.delocalized_ratio) {
      r.converged = false;
      r.spreading = true;
      r.message = "spreading: converged density fills the box (boundary/max = " + std::to_string(ratio) + ")";
    }
  }
  boundary_warning(out, opt.boundary, r);
  return {std::move(r), std::move(out)};
}

nlohmann::json to_json(const PekarResult& r) {
  nlohmann::json j;
  j["energy"] = r.energy;
  j["kinetic"] = r.kinetic;
  j["interaction"] = r.interaction;
  j["lambda"] = r.lambda;
  j["residual"] = r.residual;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["spreading"] = r.spreading;
  j["diverged"] = r.diverged;
  j["inverse_participation"] = r.ipr;
  j["message"] = r.message;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace polaron

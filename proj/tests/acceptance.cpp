// One line per acceptance criterion; exit status 1 if any fails.
#include "polaron/macro.hpp"
#include "polaron/parallel.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace polaron;
using testing_support::rel;

namespace {

constexpr double kPi = std::numbers::pi;

// Pinned tolerances.
constexpr double kKernelRel = 1e-10;
constexpr double kSelfEnergyRel = 5e-3;
constexpr double kHydrogenicRel = 1e-2;
constexpr double kScalingRel = 1e-3;
constexpr double kVirialRel = 1e-3;
constexpr double kChoquardResidual = 1e-6;
constexpr double kEmptyLattice = 1e-10;
constexpr double kCosineGap = 1e-6;
constexpr double kFixedPoint = 1e-10;
constexpr double kQuadraticRel = 0.05;
constexpr double kDecouplingFraction = 0.25;
constexpr double kVacuumEps = 1e-6;
constexpr double kOffDiagonal = 1e-3;
constexpr double kEigenFloor = 1.0 - 1e-6;
constexpr double kRelativeGap = 0.15;
constexpr double kExpansionSpread = 1.5;
constexpr double kEnergySpread = 2.0;
constexpr double kRescaling = 1e-10;
constexpr double kWeakRel = 1e-4;
constexpr double kBruteForce = 1e-8;

struct Outcome {
  bool pass = true;
  std::ostringstream note;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " FAILED(" << what << ")";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.note << " exception: " << e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s > limit_s) {
    o.pass = false;
    o.note << " FAILED(runtime)";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %s:%s | %.1f s (limit %.0f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.note.str().c_str(), s, limit_s);
  std::fflush(stdout);
}

std::string sci(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", x);
  return b;
}

Eigen::VectorXd at(double x) { return Eigen::VectorXd::Constant(1, x); }

GridPtr cube(int d, double side, int n) { return make_grid(LatticeCell::cubic(d, side), std::vector<int>(d, n)); }

CrystalSpec chain(int jcell = 5, int nk = 1) {
  CrystalSpec s;
  s.cell = LatticeCell::cubic(1, 2.0);
  s.nuclei = {{at(0.0), 0.2, 1.0}};
  s.electrons = 1;
  s.ecut = 0.5 * std::pow(2.0 * kPi * jcell / 2.0, 2) * (1.0 + 1e-9);
  s.kpoints = {nk};
  s.tolerance = 1e-10;
  return s;
}

CrystalSpec vacuum1d() {
  CrystalSpec s = chain();
  s.nuclei.clear();
  s.electrons = 0;
  return s;
}

std::vector<GaussianCharge> quadrupole(double t = 1.0, double shift = 0.0) {
  return {{at(shift - 1.0), 0.6, 0.5 * t}, {at(shift), 0.6, -t}, {at(shift + 1.0), 0.6, 0.5 * t}};
}

// Band-limited e^{-beta r}, Fourier transform proportional to 1/(k^2 + beta^2)^2.
Orbital hydrogenic(GridPtr g, double beta) {
  const Eigen::VectorXd c = 0.5 * g->cell().vectors() * Eigen::Vector3d::Ones();
  Eigen::VectorXcd h(static_cast<Eigen::Index>(g->size()));
  for (std::size_t i = 0; i < g->size(); ++i)
    h[static_cast<Eigen::Index>(i)] =
        std::polar(1.0 / std::pow(g->k2()[static_cast<Eigen::Index>(i)] + beta * beta, 2), -g->kvec(i).dot(c));
  return Orbital::normalized(ComplexField{g, fft::inverse(*g, h)});
}

PekarRun pekar_minimizer(double alpha) {
  const auto c = PekarCoupling::isotropic(alpha);
  return minimize_pekar(gaussian_orbital(cube(3, 48.0 / alpha, 64), pekar_initial_width(c)), c);
}

}  // namespace

int main() {
  std::printf("acceptance run, %d worker thread(s)\n", thread_count());

  criterion(1, "kernel identity F^P_{eps Id} = -(1-1/eps)/2 D", 10, [](Outcome& o) {
    double worst = 0.0;
    for (int d : {1, 2, 3}) {
      auto g = cube(d, 8.0, d == 3 ? 16 : 32);
      for (int s = 0; s < 20; ++s) {
        const auto rho = testing_support::random_bandlimited(g, 3, 900 + s);
        const double D = kernel_energy(rho, rho, coulomb_symbol(*g, Boundary::Free));
        for (double e : {2.0, 5.5}) {
          const double F = pekar_interaction(rho, DielectricTensor::scalar(d, e));
          worst = std::max(worst, std::abs(F + 0.5 * (1.0 - 1.0 / e) * D) / std::abs(D));
        }
      }
    }
    o.note << " 20 random rho x d in {1,2,3} x eps in {2,5.5}, max rel dev " << sci(worst) << " (tol "
           << sci(kKernelRel) << ")";
    o.require(worst <= kKernelRel, "identity");
  });

  criterion(2, "Gaussian Coulomb self-energy at 64^3, box 16 sigma", 10, [](Outcome& o) {
    const double sigma = 1.0;
    auto g = cube(3, 16.0 * sigma, 64);
    const auto rho = testing_support::gaussian_density(g, sigma);
    const double D = coulomb_energy_free(rho, rho).value;
    const double exact = 1.0 / (sigma * std::sqrt(kPi));
    o.note << " D = " << D << " vs 1/(sigma sqrt pi) = " << exact << ", rel " << sci(rel(D, exact)) << " (tol "
           << sci(kSelfEnergyRel) << ")";
    o.require(rel(D, exact) <= kSelfEnergyRel, "self-energy");
  });

  criterion(3, "hydrogenic Pekar energy beta^2/2 - 5 alpha beta/16", 60, [](Outcome& o) {
    const double eps = 2.0, alpha = 1.0 - 1.0 / eps;
    for (double beta : {0.5, 1.0, 2.0}) {
      const auto r = pekar_energy(hydrogenic(cube(3, 40.0 / beta, 128), beta),
                                  PekarCoupling::dielectric(DielectricTensor::scalar(3, eps)));
      const double exact = beta * beta / 2.0 - 5.0 * alpha * beta / 16.0;
      o.note << " beta=" << beta << ": rel " << sci(rel(r.energy, exact)) << ";";
      o.require(rel(r.energy, exact) <= kHydrogenicRel, "beta " + std::to_string(beta));
    }
    o.note << " (eps = 2, 128^3, tol " << sci(kHydrogenicRel) << ")";
  });

  std::optional<PekarRun> unit_run;
  criterion(4, "Pekar scaling law E*(alpha) = alpha^2 E*(1) at 64^3", 600, [&](Outcome& o) {
    unit_run.emplace(pekar_minimizer(1.0));
    o.require(unit_run->result.converged, "alpha = 1 converged");
    const double e1 = unit_run->result.energy;
    o.note << " E*(1) = " << e1 << ";";
    for (double alpha : {0.5, 2.0}) {
      const auto r = pekar_minimizer(alpha);
      o.require(r.result.converged, "converged");
      const double dev = rel(r.result.energy / (alpha * alpha), e1);
      o.note << " alpha=" << alpha << ": rel " << sci(dev) << ";";
      o.require(dev <= kScalingRel, "alpha " + std::to_string(alpha));
    }
    o.note << " (box 48/alpha, tol " << sci(kScalingRel) << ")";
  });

  criterion(5, "virial identity and Choquard residual at the minimizer", 60, [&](Outcome& o) {
    if (!unit_run) unit_run.emplace(pekar_minimizer(1.0));
    const double T = unit_run->result.kinetic, F = unit_run->result.interaction;
    const double virial = std::abs(2.0 * T - std::abs(F)) / std::abs(F);
    const double literal = std::abs(2.0 * T - std::abs(2.0 * F)) / std::abs(2.0 * F);
    const double res = choquard_residual(unit_run->orbital, PekarCoupling::isotropic(1.0)).residual;
    o.note << " |2T - |F||/|F| = " << sci(virial) << " (tol " << sci(kVirialRel) << "), residual " << sci(res)
           << " (tol " << sci(kChoquardResidual) << "); literal 2T = |2F| reading deviates by " << sci(literal)
           << ", see the ledger on the virial statement";
    o.require(virial <= kVirialRel, "virial");
    o.require(res <= kChoquardResidual, "residual");
  });

  criterion(6, "crystal: empty lattice, H7, cosine gap, homogeneous fixed point", 240, [](Outcome& o) {
    {
      Eigen::MatrixXd A(2, 2);
      A << 1.3, 0.0, 0.4, 1.1;
      const LatticeCell cell(A);
      auto g = make_grid(cell, {24, 24});
      const auto bands = bloch_bands(ScalarField(g), 30.0, kpoint_grid(cell, {3, 4}), 6);
      double worst = 0.0;
      for (const auto& b : bands) {
        std::vector<double> ref;
        for (int i = -20; i <= 20; ++i)
          for (int j = -20; j <= 20; ++j)
            ref.push_back(0.5 * (b.xi + cell.reciprocal() * Eigen::Vector2d(i, j)).squaredNorm());
        std::sort(ref.begin(), ref.end());
        for (int n = 0; n < 6; ++n) worst = std::max(worst, std::abs(b.energies[n] - ref[n]));
      }
      o.note << " empty lattice max dev " << sci(worst) << " (tol " << sci(kEmptyLattice) << ");";
      o.require(worst <= kEmptyLattice, "empty lattice");
    }
    {
      CrystalSpec s;
      s.cell = LatticeCell::cubic(1, 1.0);
      s.background = 1.0;
      s.electrons = 1;
      s.ecut = 100.0;
      s.kpoints = {16};
      bool raised = false;
      try {
        scf_ground_state(s);
      } catch (const H7Violated& e) {
        raised = std::string(e.what()).find("H7 violated") != std::string::npos;
      }
      o.note << " metallic spec raises H7: " << (raised ? "yes" : "no") << ";";
      o.require(raised, "H7");
    }
    {
      auto g = make_grid(LatticeCell::cubic(1, 1.0), {64});
      Eigen::VectorXd v(64);
      for (std::size_t i = 0; i < 64; ++i) v[static_cast<Eigen::Index>(i)] = 2.0 * std::cos(2.0 * kPi * g->point(i)[0]);
      const ScalarField V(g, v);
      const auto kpts = kpoint_grid(g->cell(), {8});
      const double gap = fermi_level(bloch_bands(V, 300.0, kpts, 2), 1).gap;
      const double ref = fermi_level(bloch_bands(V, 1200.0, kpts, 2), 1).gap;
      o.note << " cosine gap " << gap << " vs 4x cutoff " << sci(std::abs(gap - ref)) << " (tol " << sci(kCosineGap)
             << ");";
      o.require(std::abs(gap - ref) <= kCosineGap, "cosine gap");
    }
    {
      CrystalSpec s;
      s.cell = LatticeCell::cubic(3, 1.0);
      s.background = 1.0;
      s.electrons = 1;
      s.ecut = 25.0;
      s.kpoints = {3, 3, 3};
      const auto p = make_scf_problem(s);
      const auto step = scf_step(p, ScalarField(p.grid, Eigen::VectorXd::Constant(p.grid->size(), 1.0)));
      o.note << " homogeneous 3-D residual after one step " << sci(step.residual) << " (tol " << sci(kFixedPoint)
             << ")";
      o.require(step.residual <= kFixedPoint, "fixed point");
    }
  });

  criterion(7, "defect response properties and the L = 8, 16, 32 ladder", 600, [](Outcome& o) {
    const Supercell sc = make_supercell(chain(), 8);
    const auto g = sc.problem.grid;
    const double tol = 10 * sc.problem.spec.tolerance;
    const DefectRun zero = defect_run(sc, ScalarField(g));
    o.note << " F[0] = " << zero.energy << ";";
    o.require(zero.energy == 0.0, "F[0]");

    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> pos(-1.5, 1.5), wid(0.5, 0.9), q(-0.6, 0.6);
    std::vector<std::vector<GaussianCharge>> nus;
    std::vector<double> F;
    double fmax = -1e300;
    for (int i = 0; i < 10; ++i) {
      std::vector<GaussianCharge> p;
      double total = 0.0;
      for (int k = 0; k < 2; ++k) {
        p.push_back({at(pos(rng)), wid(rng), q(rng)});
        total += p.back().charge;
      }
      p.push_back({at(pos(rng)), wid(rng), -total});
      const DefectRun r = defect_run(sc, gaussian_defect(g, p));
      o.require(r.converged, "random defect converged");
      nus.push_back(p);
      F.push_back(r.energy);
      fmax = std::max(fmax, r.energy);
    }
    o.note << " max F over 10 random nu " << sci(fmax) << " (<= " << sci(tol) << ");";
    o.require(fmax <= tol, "sign");

    double worst_concave = -1e300;
    for (int i = 0; i < 5; ++i) {
      auto mix = nus[2 * i];
      for (auto& c : mix) c.charge *= 0.5;
      for (auto c : nus[2 * i + 1]) {
        c.charge *= 0.5;
        mix.push_back(c);
      }
      const DefectRun m = defect_run(sc, gaussian_defect(g, mix));
      worst_concave = std::max(worst_concave, 0.5 * (F[2 * i] + F[2 * i + 1]) - m.energy);
    }
    o.note << " concavity worst violation " << sci(worst_concave) << ";";
    o.require(worst_concave <= tol, "concavity");

    const Supercell s16 = make_supercell(chain(), 16);
    std::vector<double> ratio;
    for (double t : {0.05, 0.1, 0.2}) ratio.push_back(defect_run(s16, gaussian_defect(s16.problem.grid, quadrupole(t))).energy / (t * t));
    const double lo = *std::min_element(ratio.begin(), ratio.end()), hi = *std::max_element(ratio.begin(), ratio.end());
    o.note << " F[t nu]/t^2 spread " << sci((hi - lo) / std::abs(lo)) << " (tol " << sci(kQuadraticRel) << ");";
    o.require((hi - lo) / std::abs(lo) <= kQuadraticRel, "quadratic");

    DefectProblem p;
    p.unit = chain();
    p.density = [](GridPtr gg) { return gaussian_defect(gg, quadrupole()); };
    const DefectResponse lad = defect_energy(p);
    o.note << " ladder F = " << lad.runs[0].energy << ", " << lad.runs[1].energy << ", " << lad.runs[2].energy
           << ", extrapolated " << lad.extrapolated;
    o.require(lad.converged, "ladder converged");
  });

  criterion(8, "decoupling of distant defects", 600, [](Outcome& o) {
    const auto rows = decoupling_test(chain(), quadrupole(), quadrupole(), {2, 8});
    const double d2 = std::abs(rows[0].delta), d8 = std::abs(rows[1].delta), f1 = std::abs(rows[1].f1);
    o.note << " |Delta(2)| = " << sci(d2) << ", |Delta(8)| = " << sci(d8) << ", |F1| = " << sci(f1) << " (ratio "
           << sci(d8 / f1) << ", tol " << kDecouplingFraction << ")";
    o.require(rows[0].converged && rows[1].converged, "converged");
    o.require(d8 <= d2, "decay");
    o.require(d8 <= kDecouplingFraction * f1, "fraction");
  });

  criterion(9, "dielectric tensor: vacuum, cubic symmetry, eigenvalues >= 1", 900, [](Outcome& o) {
    const DielectricTensor vac = extract_dielectric(MacroModel::build(vacuum1d(), 8.0));
    const double dv = (vac.eps - Eigen::MatrixXd::Identity(1, 1)).cwiseAbs().maxCoeff();
    o.note << " vacuum |eps - 1| = " << sci(dv) << " (tol " << sci(kVacuumEps) << ");";
    o.require(dv <= kVacuumEps, "vacuum");

    CrystalSpec s;
    s.cell = LatticeCell::cubic(3, 1.0);
    s.nuclei = {{Eigen::VectorXd::Zero(3), 0.2, 1.0}};
    s.electrons = 1;
    s.ecut = 0.5 * std::pow(2.0 * kPi, 2) * 3.0 * (1.0 + 1e-9);
    s.kpoints = {3, 3, 3};
    s.tolerance = 1e-8;
    DielectricOptions opt;
    opt.m_ladder = {1.0};
    opt.q_max = 4.0;
    const DielectricTensor cubic = extract_dielectric(MacroModel::build(s, 3.0), opt);
    double off = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (a != b) off = std::max(off, std::abs(cubic.eps(a, b)));
    const double bound = kOffDiagonal * cubic.eps.trace() / 3.0;
    o.note << " cubic eps_11 = " << cubic.eps(0, 0) << ", max off-diagonal " << sci(off) << " (<= " << sci(bound)
           << ");";
    o.require(off <= bound, "off-diagonal");

    const DielectricTensor ch = extract_dielectric(MacroModel::build(chain(), 8.0));
    const double lo = std::min({vac.eigenvalues().minCoeff(), cubic.eigenvalues().minCoeff(), ch.eigenvalues().minCoeff()});
    o.note << " chain eps = " << ch.eps(0, 0) << ", smallest eigenvalue " << lo << " (>= " << kEigenFloor << ")";
    o.require(lo >= kEigenFloor, "eigenvalues");
  });

  criterion(10, "macroscopic limit of the crystal term", 900, [](Outcome& o) {
    const MacroModel model = MacroModel::build(chain(), 8.0);
    const DielectricTensor eps = extract_dielectric(model);
    const Orbital psi = gaussian_orbital(make_grid(model.box_cell(), {64}), 1.0);
    const MacrolimitReport r = macrolimit_check(psi, model, {0.5, 0.25, 0.125}, eps);
    o.note << " relative gaps";
    for (double g : r.relative_gaps) o.note << " " << sci(g);
    o.note << " (strictly decreasing, last < " << kRelativeGap << ")";
    o.require(r.all_converged, "converged");
    o.require(r.decreasing, "decreasing");
    o.require(r.relative_gaps.back() < kRelativeGap, "final gap");
  });

  criterion(11, "cell eigenproblem invariants and small-mass expansion", 60, [](Outcome& o) {
    const CrystalGroundState gs = scf_ground_state(chain());
    std::vector<double> ru, re;
    double umin = 1e300, norm_dev = 0.0, fres = 0.0;
    for (double m : {0.25, 0.125, 0.0625}) {
      const CellEigenResult r = cell_eigenproblem(gs.V, m);
      umin = std::min(umin, r.u_min);
      norm_dev = std::max(norm_dev, std::abs(r.u.values.squaredNorm() * gs.V.grid->dv() - r.volume) / r.volume);
      fres = std::max(fres, r.f_residual);
      ru.push_back((r.u.values.array() - 1.0 - m * r.f.values.array()).abs().maxCoeff() / (m * m));
      re.push_back(std::abs(r.energy / m - r.e_per) / m);
    }
    auto spread = [](const std::vector<double>& x) {
      return *std::max_element(x.begin(), x.end()) / *std::min_element(x.begin(), x.end());
    };
    o.note << " min u " << umin << ", normalization dev " << sci(norm_dev) << ", f residual " << sci(fres)
           << "; expansion spread " << spread(ru) << " (<= " << kExpansionSpread << "), energy spread " << spread(re)
           << " (<= " << kEnergySpread << ")";
    o.require(umin > 0.0, "positivity");
    o.require(norm_dev <= 1e-10, "normalization");
    o.require(fres <= 1e-8, "f residual");
    o.require(spread(ru) <= kExpansionSpread, "expansion");
    o.require(spread(re) <= kEnergySpread, "energy");
  });

  criterion(12, "coupled model: rescaling, binding below the band, Pekar limit", 1200, [](Outcome& o) {
    const MacroModel model = MacroModel::build(chain(), 8.0);
    double worst = 0.0;
    for (double m : {0.5, 0.25, 0.125}) {
      const auto psi = ManyBodyWaveFunction::product({gaussian_orbital(model.macro_grid(m), 1.0)}, Symmetry::None);
      worst = std::max(worst, coupled_energy(psi, model, m).rescaling_error);
    }
    const auto pair = gaussian_cluster(2, model.macro_grid(0.5), 1.0, 0.5, Symmetry::Symmetric);
    worst = std::max(worst, coupled_energy(pair, model, 0.5).rescaling_error);

    const CoupledResult a = minimize_coupled(model, 1, 0.125);
    const CoupledResult b = minimize_coupled(MacroModel::build(chain(7), 8.0), 1, 0.125);
    worst = std::max({worst, a.parts.rescaling_error, b.parts.rescaling_error});
    const double need = 10 * model.spec().tolerance;
    o.note << " rescaling max " << sci(worst) << " (tol " << sci(kRescaling) << "); E_1/8(1) = " << a.energy
           << " vs threshold " << a.threshold << ", margin " << a.binding_margin << " (refined " << b.binding_margin
           << ", need > " << sci(need) << ");";
    o.require(worst <= kRescaling, "rescaling");
    o.require(a.converged && b.converged && a.monotone && b.monotone, "alternation");
    o.require(a.binding_margin > need && b.binding_margin > need, "binding");

    const DielectricTensor eps = extract_dielectric(model);
    const PekarLimitReport p = pekar_limit_check(model, 1, {0.5, 0.25, 0.125}, eps);
    o.note << " Pekar-limit relative discrepancy";
    for (double r : p.relative) o.note << " " << sci(r);
    o.note << " (decreasing, last < " << kRelativeGap << ")";
    o.require(p.all_converged, "ladder converged");
    o.require(p.decreasing, "decreasing");
    o.require(p.relative.back() < kRelativeGap, "final discrepancy");
  });

  criterion(13, "binding checker in the 1-D analog", 900, [](Outcome& o) {
    BindingOptions opt;
    opt.npolaron.charge = ChargeConvention::Physical;
    auto line = [](int n) { return make_grid(LatticeCell::cubic(1, 20.0), {n}); };
    double worst_weak = -1e300;
    std::ostringstream excess;
    auto weak = [&](const BindingReport& r, const std::string& label) {
      const double EN = r.energies.at(r.particles);
      double w = -1e300;
      for (const auto& s : r.splits) w = std::max(w, -s.margin - kWeakRel * std::abs(EN));
      excess << " " << label << " " << sci(w) << ";";
      worst_weak = std::max(worst_weak, w);
    };
    std::vector<double> margins;
    for (int n : {64, 128}) {
      const auto r = binding_check(2, line(n), PekarCoupling::dielectric(DielectricTensor::scalar(1, 10.0)), opt);
      weak(r, "eps=10 N=2 n=" + std::to_string(n));
      o.require(!r.inconclusive && r.strict_binding, "strict at n = " + std::to_string(n));
      margins.push_back(r.splits.at(0).margin);
    }
    const auto three = binding_check(3, line(64), PekarCoupling::dielectric(DielectricTensor::scalar(1, 10.0)), opt);
    weak(three, "eps=10 N=3");
    const auto free = binding_check(2, line(64), PekarCoupling::dielectric(DielectricTensor::identity(1)), opt);
    weak(free, "alpha=0 N=2");
    o.note << " eps=10 N=2 margins " << sci(margins[0]) << " (n=64), " << sci(margins[1])
           << " (n=128); N=3 strict " << (three.strict_binding ? "yes" : "no") << "; alpha=0 strict "
           << (free.strict_binding ? "yes" : "no") << "; weak-inequality excess (must be <= 0):" << excess.str()
           << " a positive excess for the unbound alpha = 0 pair is the finite-box effect in the ledger";
    o.require(margins[0] > 0.0 && margins[1] > 0.0, "sign stable");
    o.require(!free.strict_binding, "alpha = 0");
    o.require(worst_weak <= 0.0, "weak inequalities");
  });

  criterion(14, "brute-force N = 2 energy on a 6-point grid", 10, [](Outcome& o) {
    const double L = 3.0, h = 0.5, eps = 3.0, alpha = 1.0 - 1.0 / eps;
    const int n = 6;
    auto g = make_grid(LatticeCell::cubic(1, L), {n});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd v(n * n);
    for (auto& z : v) z = {nd(rng), nd(rng)};
    const ManyBodyWaveFunction psi = ManyBodyWaveFunction::normalized(2, g, v, Symmetry::None);
    auto at2 = [&](int a, int b) { return psi.values[a * n + b]; };
    Eigen::MatrixXd D2 = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int q = -n / 2; q < n / 2; ++q) {
          const double k = 2 * kPi * q / L;
          D2(i, j) -= k * k * std::cos(k * (i - j) * h) / n;
        }
    double T = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        std::complex<double> lap = 0.0;
        for (int c = 0; c < n; ++c) lap += D2(a, c) * at2(c, b) + D2(b, c) * at2(a, c);
        T += -0.5 * (std::conj(at2(a, b)) * lap).real() * h * h;
      }
    auto dist = [&](int a, int b) {
      double z = (a - b) * h;
      z -= L * std::round(z / L);
      return std::abs(z);
    };
    const auto e = npolaron_energy(psi, PekarCoupling::dielectric(DielectricTensor::scalar(1, eps)));
    const double a = e.soft_width;
    double R = 0.0, F = 0.0;
    std::vector<double> rho(n, 0.0);
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        R += std::norm(at2(x, y)) / std::sqrt(dist(x, y) * dist(x, y) + a * a) * h * h;
        rho[x] += 0.5 * (std::norm(at2(x, y)) + std::norm(at2(y, x))) * h;
      }
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) F -= 0.5 * alpha * rho[x] * rho[y] / std::sqrt(dist(x, y) * dist(x, y) + a * a) * h * h;
    const double dev = std::abs(e.energy - (T + R + F));
    o.note << " |E - E_oracle| = " << sci(dev) << " (tol " << sci(kBruteForce) << ")";
    o.require(dev <= kBruteForce, "oracle");
  });

  std::printf("%d of 14 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

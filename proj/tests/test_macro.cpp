#include <doctest.h>

#include "polaron/macro.hpp"
#include "support.hpp"

using namespace polaron;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd at(double x) { return Eigen::VectorXd::Constant(1, x); }

// 1-D chain, cell length 2, one Gaussian nucleus per cell; insulating with gap ~0.74.
CrystalSpec chain(int jcell = 5) {
  CrystalSpec s;
  s.cell = LatticeCell::cubic(1, 2.0);
  s.nuclei = {{at(0.0), 0.2, 1.0}};
  s.electrons = 1;
  s.ecut = 0.5 * std::pow(2.0 * kPi * jcell / 2.0, 2) * (1.0 + 1e-9);
  s.kpoints = {1};
  s.tolerance = 1e-10;
  return s;
}

CrystalSpec vacuum(int d, double side) {
  CrystalSpec s;
  s.cell = LatticeCell::cubic(d, side);
  s.electrons = 0;
  s.ecut = 0.5 * std::pow(2.0 * kPi * 3.0 / side, 2) * (1.0 + 1e-9);
  s.kpoints = std::vector<int>(d, 1);
  return s;
}

// Shared across cases: supercells are cached inside the model.
const MacroModel& chain_model() {
  static const MacroModel m = MacroModel::build(chain(), 8.0);
  return m;
}

const DielectricTensor& chain_eps() {
  static const DielectricTensor e = extract_dielectric(chain_model());
  return e;
}

ManyBodyWaveFunction gaussian_state(GridPtr g, double width) {
  return ManyBodyWaveFunction::product({gaussian_orbital(g, width)}, Symmetry::None);
}

}  // namespace

TEST_CASE("cell eigenproblem without a potential") {
  auto g = make_grid(LatticeCell::cubic(2, 1.5), {8, 8});
  const CellEigenResult r = cell_eigenproblem(ScalarField(g), 0.25);
  CHECK(std::abs(r.lambda) < 1e-13);
  CHECK(r.energy == doctest::Approx(0.0));
  CHECK((r.u.values.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(r.f.max_abs() == 0.0);
  CHECK(r.e_per == 0.0);
}

TEST_CASE("cell eigenproblem with a cosine potential") {
  auto g = make_grid(LatticeCell::cubic(1, 2.0), {32});
  const double c = 0.7, b = kPi;  // b = 2 pi / cell length
  Eigen::VectorXd v(32), fexact(32);
  for (std::size_t i = 0; i < 32; ++i) {
    const double x = g->point(i)[0];
    v[static_cast<Eigen::Index>(i)] = c * std::cos(b * x);
    fexact[static_cast<Eigen::Index>(i)] = -(2.0 * c / (b * b)) * std::cos(b * x);
  }
  const CellEigenResult r = cell_eigenproblem(ScalarField(g, v), 0.125);
  CHECK((r.f.values - fexact).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.f_residual < 1e-8);
  CHECK(r.u_min > 0.0);
  CHECK(r.u.values.squaredNorm() * g->dv() == doctest::Approx(2.0).epsilon(1e-12));
  // int V f = -(2c^2/b^2) * (cell / 2)
  CHECK(r.e_per == doctest::Approx(-2.0 * c * c / (b * b)).epsilon(1e-12));

  CHECK_THROWS_AS(cell_eigenproblem(ScalarField(g, Eigen::VectorXd(v.array() + 0.1)), 1.0), std::invalid_argument);
}

TEST_CASE("small-mass expansion of the periodic ground state") {
  const ScalarField& V = chain_model().ground().V;
  std::vector<double> ru, re;
  for (double m : {0.25, 0.125, 0.0625}) {
    const CellEigenResult r = cell_eigenproblem(V, m);
    CHECK(r.u_min > 0.0);
    CHECK(r.u.values.squaredNorm() * V.grid->dv() == doctest::Approx(r.volume).epsilon(1e-12));
    CHECK(r.f_residual < 1e-8);
    ru.push_back((r.u.values.array() - 1.0 - m * r.f.values.array()).abs().maxCoeff() / (m * m));
    re.push_back(std::abs(r.energy / m - r.e_per) / m);
    // the band minimum sits at the zone centre for this potential
    CHECK(band_minimum(V, m, {6}) <= r.lambda + 1e-12);
  }
  auto spread = [](const std::vector<double>& x) {
    return *std::max_element(x.begin(), x.end()) / *std::min_element(x.begin(), x.end());
  };
  CHECK(spread(ru) <= 1.5);
  CHECK(spread(re) <= 2.0);
}

TEST_CASE("macro box and scales") {
  const MacroModel& model = chain_model();
  CHECK(model.cells_per_axis(0.5) == 8);
  CHECK(model.cells_per_axis(0.125) == 32);
  CHECK_THROWS_WITH_AS(model.cells_per_axis(0.3), doctest::Contains("incommensurate scales"), std::invalid_argument);
  const GridPtr gx = model.macro_grid(0.25);
  CHECK(gx->shape() == model.supercell(0.25).problem.grid->shape());
  CHECK(gx->volume() == doctest::Approx(8.0));
  CHECK(&model.supercell(0.25) == &model.supercell(0.25));
}

TEST_CASE("vacuum does not polarize") {
  const MacroModel model = MacroModel::build(vacuum(1, 2.0), 8.0);
  CHECK(model.trivial());
  const DielectricTensor e = extract_dielectric(model);
  CHECK((e.eps - Eigen::MatrixXd::Identity(1, 1)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("dielectric constant of the insulating chain") {
  const DielectricTensor& e = chain_eps();
  REQUIRE(e.ladder_fits.size() == 3);
  CHECK(e.eigenvalues().minCoeff() >= 1.0 - 1e-6);
  CHECK(e.fit_residual <= 0.05);
  for (std::size_t i = 1; i < e.ladder_residuals.size(); ++i)
    CHECK(e.ladder_residuals[i] < e.ladder_residuals[i - 1]);
  const auto j = to_json(e);
  CHECK(j["ladder_fits"].size() == 3);

  DielectricOptions strict;
  strict.fit_threshold = 1e-3;
  CHECK_THROWS_WITH_AS(extract_dielectric(chain_model(), strict), doctest::Contains("fit residual"),
                       std::runtime_error);
}

TEST_CASE("cubic crystal gives a scalar tensor") {
  CrystalSpec s;
  s.cell = LatticeCell::cubic(3, 1.0);
  s.nuclei = {{Eigen::VectorXd::Zero(3), 0.2, 1.0}};
  s.electrons = 1;
  s.ecut = 0.5 * std::pow(2.0 * kPi, 2) * 3.0 * (1.0 + 1e-9);
  s.kpoints = {3, 3, 3};
  s.tolerance = 1e-8;
  const MacroModel model = MacroModel::build(s, 3.0);
  DielectricOptions o;
  o.m_ladder = {1.0};
  o.q_max = 4.0;
  const DielectricTensor e = extract_dielectric(model, o);
  const double tr = e.eps.trace();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) CHECK(std::abs(e.eps(a, b)) <= 1e-3 * tr / 3);
  CHECK(e.eigenvalues().minCoeff() >= 1.0 - 1e-6);
  CHECK(e.eps(0, 0) > 1.0);
}

TEST_CASE("coupled energy in macro and micro variables") {
  const MacroModel& model = chain_model();
  for (double m : {0.5, 0.25}) {
    const auto psi = gaussian_state(model.macro_grid(m), 1.0);
    const CoupledEnergy e = coupled_energy(psi, model, m);
    CHECK(e.crystal_converged);
    CHECK(e.rescaling_error <= 1e-10);
    CHECK(e.crystal < 0.0);
    CHECK(e.total == doctest::Approx(e.kinetic + e.repulsion + e.periodic + e.crystal));
  }
  SUBCASE("two particles") {
    const double m = 0.5;
    const auto psi = gaussian_cluster(2, model.macro_grid(m), 1.0, 0.5, Symmetry::Symmetric);
    const CoupledEnergy e = coupled_energy(psi, model, m);
    CHECK(e.rescaling_error <= 1e-10);
    CHECK(e.repulsion > 0.0);
  }
  SUBCASE("wrong grid") {
    const auto psi = gaussian_state(model.macro_grid(0.5), 1.0);
    CHECK_THROWS_WITH_AS(coupled_energy(psi, model, 0.25), doctest::Contains("incommensurate"),
                         std::invalid_argument);
  }
}

TEST_CASE("coupled energy without a crystal is the vacuum energy") {
  const MacroModel model = MacroModel::build(vacuum(1, 2.0), 8.0);
  const double m = 0.25;
  const Orbital o = gaussian_orbital(model.macro_grid(m), 0.8);
  const CoupledEnergy e = coupled_energy(ManyBodyWaveFunction::product({o}, Symmetry::None), model, m);
  CHECK(e.crystal == 0.0);
  CHECK(e.periodic == 0.0);
  const PekarResult free = pekar_energy(o, PekarCoupling::isotropic(0.0), Boundary::Periodic);
  CHECK(e.total == doctest::Approx(free.kinetic).epsilon(1e-12));
}

TEST_CASE("small polaron binds below the periodic band") {
  const MacroModel& model = chain_model();
  const CoupledResult r = minimize_coupled(model, 1, 0.125);
  CHECK(r.converged);
  CHECK(r.monotone);
  for (std::size_t i = 1; i < r.energies.size(); ++i) CHECK(r.energies[i] <= r.energies[i - 1] + 1e-12);
  CHECK(r.reconstruction_error <= 1e-10);
  CHECK(r.parts.rescaling_error <= 1e-10);
  CHECK(r.bound);
  CHECK(r.binding_margin > 10 * model.spec().tolerance);

  // a finer plane-wave cutoff keeps the margin
  const MacroModel fine = MacroModel::build(chain(7), 8.0);
  const CoupledResult rf = minimize_coupled(fine, 1, 0.125);
  CHECK(rf.bound);
  CHECK(rf.binding_margin == doctest::Approx(r.binding_margin).epsilon(0.01));
}

TEST_CASE("no binding without a crystal") {
  const MacroModel model = MacroModel::build(vacuum(1, 2.0), 8.0);
  const CoupledResult r = minimize_coupled(model, 1, 0.25);
  CHECK(r.spreading);
  CHECK_FALSE(r.bound);
  CHECK(r.message.find("spreads") != std::string::npos);
}

TEST_CASE("two polarons in the coupled model") {
  const MacroModel& model = chain_model();
  CoupledOptions o;
  o.max_outer = 20;
  const CoupledResult r = minimize_coupled(model, 2, 0.5, o);
  CHECK(r.monotone);
  CHECK(r.reconstruction_error <= 1e-10);
  CHECK(r.parts.rescaling_error <= 1e-10);
  CHECK(symmetry_defect(r.state, 0, 1) < 1e-10);
}

TEST_CASE("crystal term approaches the Pekar interaction") {
  const MacroModel& model = chain_model();
  const Orbital psi = gaussian_orbital(make_grid(model.box_cell(), {64}), 1.0);
  const MacrolimitReport rep = macrolimit_check(psi, model, {0.5, 0.25, 0.125}, chain_eps());
  CHECK(rep.all_converged);
  CHECK(rep.decreasing);
  CHECK(rep.relative_gaps.back() < 0.15);
  // m = 1/4: within 30%
  CHECK(rep.relative_gaps[1] < 0.30);

  SUBCASE("trivial crystal") {
    const MacroModel vac = MacroModel::build(vacuum(1, 2.0), 8.0);
    const Orbital p = gaussian_orbital(make_grid(vac.box_cell(), {64}), 1.0);
    const MacrolimitReport t = macrolimit_check(p, vac, {0.5, 0.25}, DielectricTensor::identity(1));
    for (double gap : t.gaps) CHECK(gap == 0.0);
  }
}

TEST_CASE("coupled energy approaches the Pekar limit") {
  const MacroModel& model = chain_model();
  const PekarLimitReport rep = pekar_limit_check(model, 1, {0.5, 0.25, 0.125}, chain_eps());
  CHECK(rep.all_converged);
  CHECK(rep.decreasing);
  CHECK(rep.relative.back() < 0.15);
  CHECK(rep.e_per < 0.0);
  CHECK(rep.pekar < 0.0);
  const auto j = to_json(rep);
  CHECK(j["coupled"].size() == 3);
}

TEST_CASE("Pekar limit without a crystal is degenerate") {
  const MacroModel model = MacroModel::build(vacuum(1, 2.0), 8.0);
  const PekarLimitReport rep = pekar_limit_check(model, 1, {0.5, 0.25}, DielectricTensor::identity(1));
  CHECK(rep.degenerate);
  CHECK(rep.e_per == 0.0);
  CHECK(rep.pekar == 0.0);
  CHECK(!rep.warnings.empty());
}

#include <doctest.h>

#include "polaron/multipolaron.hpp"
#include "support.hpp"

#include <random>

using namespace polaron;
using testing_support::rel;

namespace {

constexpr double kPi = std::numbers::pi;

GridPtr line(double L, int n) { return make_grid(LatticeCell::cubic(1, L), {n}); }

ManyBodyWaveFunction random_state(int N, GridPtr g, std::uint64_t seed, Symmetry s = Symmetry::None) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::size_t total = 1;
  for (int j = 0; j < N; ++j) total *= g->size();
  Eigen::VectorXcd v(static_cast<Eigen::Index>(total));
  for (auto& z : v) z = {nd(rng), nd(rng)};
  project_symmetry(v, N, g->size(), s);
  return ManyBodyWaveFunction::normalized(N, g, v, s);
}

bool non_increasing(const std::vector<double>& e) {
  for (std::size_t i = 1; i < e.size(); ++i)
    if (e[i] > e[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("wavefunction invariants are enforced") {
  auto g = line(4.0, 8);
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(64);
  CHECK_THROWS(ManyBodyWaveFunction(2, g, v, Symmetry::None));
  CHECK_THROWS(ManyBodyWaveFunction::normalized(2, g, Eigen::VectorXcd::Ones(63), Symmetry::None));
  const auto sym = ManyBodyWaveFunction::normalized(2, g, v, Symmetry::Symmetric);
  CHECK(symmetry_defect(sym, 0, 1) == 0.0);
  // a symmetric state declared antisymmetric is rejected
  CHECK_THROWS(ManyBodyWaveFunction::normalized(2, g, v, Symmetry::Antisymmetric));
  const auto r = random_state(3, g, 4, Symmetry::Antisymmetric);
  CHECK(symmetry_defect(r, 0, 2) < 1e-12);
  CHECK(symmetry_defect(r, 1, 2) < 1e-12);
}

TEST_CASE("density from the wavefunction") {
  SUBCASE("product state") {
    auto g = make_grid(LatticeCell::box({6.0, 5.0}), {8, 8});
    const Orbital psi = random_orbital(g, 1.0, 3);
    const auto rho = density_from_wavefunction(ManyBodyWaveFunction::product({psi, psi}, Symmetry::None));
    CHECK((rho.values - psi.density().values).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("antisymmetrized orthonormal pair against a brute-force double sum") {
    auto g = line(8.0, 8);
    const std::size_t m = 8;
    const double h = g->dv();
    Eigen::VectorXcd p1(8), p2(8);
    for (std::size_t i = 0; i < m; ++i) {
      const double x = g->point(i)[0];
      p1[static_cast<Eigen::Index>(i)] = std::cos(2 * kPi * x / 8.0);
      p2[static_cast<Eigen::Index>(i)] = std::complex<double>(std::sin(4 * kPi * x / 8.0), 0.3 * std::cos(6 * kPi * x / 8.0));
    }
    p1 /= std::sqrt(p1.squaredNorm() * h);
    p2 -= p1.dot(p2) * h * p1;
    p2 /= std::sqrt(p2.squaredNorm() * h);
    Eigen::VectorXcd v(64);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        v[static_cast<Eigen::Index>(a * m + b)] = (p1[a] * p2[b] - p2[a] * p1[b]) / std::sqrt(2.0);
    const ManyBodyWaveFunction psi(2, g, v, Symmetry::Antisymmetric);
    const auto rho = density_from_wavefunction(psi);
    for (std::size_t x = 0; x < m; ++x) {
      double brute = 0.0;
      for (std::size_t y = 0; y < m; ++y) brute += std::norm(v[static_cast<Eigen::Index>(x * m + y)]) * h;
      const double oracle = 0.5 * (std::norm(p1[x]) + std::norm(p2[x]));
      CHECK(std::abs(rho.values[static_cast<Eigen::Index>(x)] - brute) < 1e-12);
      CHECK(std::abs(brute - oracle) < 1e-12);
    }
  }
  SUBCASE("normalization under both charge conventions") {
    auto g = line(5.0, 6);
    for (int s = 0; s < 5; ++s) {
      const auto psi = random_state(3, g, 40 + s);
      CHECK(std::abs(density_from_wavefunction(psi).integral() - 1.0) < 1e-10);
      CHECK(std::abs(density_from_wavefunction(psi, ChargeConvention::Physical).integral() - 3.0) < 1e-10);
    }
  }
}

TEST_CASE("N = 1 reduces to the single-polaron functional") {
  SUBCASE("3-D Coulomb") {
    auto g = make_grid(LatticeCell::cubic(3, 16.0), {16, 16, 16});
    const Orbital psi = random_orbital(g, 2.0, 8);
    Eigen::MatrixXd e(3, 3);
    e << 2.0, 0.1, 0.0, 0.1, 3.0, 0.0, 0.0, 0.0, 2.5;
    const auto c = PekarCoupling::dielectric(DielectricTensor(e));
    const auto a = npolaron_energy(ManyBodyWaveFunction(1, g, psi.values(), Symmetry::None), c);
    const auto b = pekar_energy(psi, c);
    CHECK(std::abs(a.energy - b.energy) <= 1e-12 * std::abs(b.energy));
    CHECK(std::abs(a.lambda - b.lambda) <= 1e-12 * std::abs(b.lambda));
    CHECK(std::abs(a.residual - b.residual) <= 1e-10 * b.residual);
    CHECK(a.repulsion == 0.0);
    CHECK(!a.analog_mode);
  }
  SUBCASE("1-D with the Coulomb Pekar kernel") {
    auto g = line(20.0, 64);
    const Orbital psi = random_orbital(g, 2.0, 9);
    NPolaronOptions o;
    o.kernel = PekarKernel::Coulomb;
    const auto c = PekarCoupling::isotropic(0.7);
    const auto a = npolaron_energy(ManyBodyWaveFunction(1, g, psi.values(), Symmetry::None), c, o);
    CHECK(std::abs(a.energy - pekar_energy(psi, c).energy) <= 1e-12 * std::abs(a.energy));
    CHECK(a.analog_mode);
  }
}

TEST_CASE("far-apart pair: repulsion approaches 1/R") {
  auto g = make_grid(LatticeCell::cubic(2, 24.0), {32, 32});
  const double w = 0.6;
  for (double R : {6.0, 9.0}) {
    Eigen::Vector2d c1(12.0 - R / 2, 12.0), c2(12.0 + R / 2, 12.0);
    const auto psi = ManyBodyWaveFunction::product({gaussian_orbital(g, w, c1), gaussian_orbital(g, w, c2)}, Symmetry::None);
    const auto e = npolaron_energy(psi, PekarCoupling::isotropic(0.0));
    CHECK(rel(e.repulsion, 1.0 / R) < 0.02);
  }
}

TEST_CASE("identity tensor gives no Pekar term; permutation invariance") {
  auto g = line(6.0, 8);
  const auto psi = random_state(3, g, 12);
  const auto e = npolaron_energy(psi, PekarCoupling::dielectric(DielectricTensor::identity(1)));
  CHECK(e.interaction == 0.0);
  const auto c = PekarCoupling::dielectric(DielectricTensor::scalar(1, 4.0));
  const double ref = npolaron_energy(psi, c).energy;
  for (std::vector<int> perm : {std::vector<int>{1, 0, 2}, {2, 0, 1}, {2, 1, 0}}) {
    const ManyBodyWaveFunction q(3, g, permute_particles(psi.values, 3, 8, perm), Symmetry::None);
    CHECK(std::abs(npolaron_energy(q, c).energy - ref) <= 1e-12 * std::abs(ref));
  }
}

TEST_CASE("brute-force equivalence on a 6-point grid") {
  const double L = 3.0;
  const int n = 6;
  auto g = line(L, n);
  const double h = L / n;
  const auto psi = random_state(2, g, 77);
  const double eps = 3.0, alpha = 1.0 - 1.0 / eps;
  const auto& v = psi.values;
  auto at = [&](int a, int b) { return v[a * n + b]; };
  // spectral second derivative as an explicit matrix
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
      for (int c = 0; c < n; ++c) lap += D2(a, c) * at(c, b) + D2(b, c) * at(a, c);
      T += -0.5 * (std::conj(at(a, b)) * lap).real() * h * h;
    }
  auto dist = [&](int a, int b) {
    double z = (a - b) * h;
    z -= L * std::round(z / L);
    return std::abs(z);
  };
  for (auto conv : {ChargeConvention::Paper, ChargeConvention::Physical}) {
    NPolaronOptions o;
    o.charge = conv;
    const auto e = npolaron_energy(psi, PekarCoupling::dielectric(DielectricTensor::scalar(1, eps)), o);
    const double soft = e.soft_width;
    CHECK(soft == doctest::Approx(h));
    double Rep = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) Rep += std::norm(at(a, b)) / std::sqrt(dist(a, b) * dist(a, b) + soft * soft) * h * h;
    const double q = conv == ChargeConvention::Paper ? 1.0 : 2.0;
    std::vector<double> rho(n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) rho[a] += 0.5 * q * (std::norm(at(a, b)) + std::norm(at(b, a))) * h;
    double F = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        F += -0.5 * alpha * rho[a] * rho[b] / std::sqrt(dist(a, b) * dist(a, b) + soft * soft) * h * h;
    CHECK(std::abs(e.kinetic - T) < 1e-8);
    CHECK(std::abs(e.repulsion - Rep) < 1e-8);
    CHECK(std::abs(e.interaction - F) < 1e-8);
    CHECK(std::abs(e.energy - (T + Rep + F)) < 1e-8);
  }
}

TEST_CASE("tensor budget guard") {
  auto g3 = make_grid(LatticeCell::cubic(3, 8.0), {8, 8, 8});
  NPolaronOptions o;
  CHECK_THROWS_WITH(check_tensor_budget(3, *g3, o), doctest::Contains("N*d"));
  o.memory_budget_bytes = 1e6;
  CHECK_THROWS_WITH(check_tensor_budget(2, *g3, o), doctest::Contains("GB"));
  CHECK_THROWS(binding_check(3, g3, PekarCoupling::isotropic(0.5)));
}

TEST_CASE("minimization: symmetry preservation, mass and monotonicity") {
  auto g = line(16.0, 32);
  NPolaronOptions o;
  o.descent.max_iterations = 100;
  o.descent.residual_tol = 0.0;
  o.descent.detect_spreading = false;
  const auto init = gaussian_cluster(2, g, 1.5, 1.0, Symmetry::Antisymmetric);
  const auto run = minimize_npolaron(init, PekarCoupling::dielectric(DielectricTensor::scalar(1, 5.0)), o);
  CHECK(run.result.iterations >= 50);
  CHECK(symmetry_defect(run.state, 0, 1) < 1e-8);
  CHECK(std::abs(run.state.norm() - 1.0) < 1e-12);
  CHECK(non_increasing(run.result.energies));
}

TEST_CASE("no interaction: repulsive pair spreads") {
  auto g = line(40.0, 64);
  const auto run = minimize_npolaron(gaussian_cluster(2, g, 1.0, 1.0, Symmetry::Symmetric),
                                     PekarCoupling::dielectric(DielectricTensor::identity(1)));
  CHECK(run.result.spreading);
  CHECK(run.result.parts.energy >= 0.0);
  CHECK(non_increasing(run.result.energies));
}

TEST_CASE("binding checker in the 1-D analog") {
  BindingOptions o;
  o.npolaron.charge = ChargeConvention::Physical;
  SUBCASE("strong coupling binds, stably under refinement") {
    double sign = 0.0;
    for (int n : {64, 128}) {
      const auto rep = binding_check(2, line(20.0, n), PekarCoupling::dielectric(DielectricTensor::scalar(1, 10.0)), o);
      REQUIRE(!rep.inconclusive);
      REQUIRE(rep.splits.size() == 1);
      CHECK(rep.splits[0].verdict == "strict");
      CHECK(rep.splits[0].weak_holds);
      CHECK(rep.splits[0].margin > 10.0 * o.npolaron.descent.residual_tol);
      CHECK(rep.energies.at(2) <= 2.0 * rep.energies.at(1) + 1e-4 * std::abs(rep.energies.at(2)));
      if (sign != 0.0) CHECK(sign * rep.splits[0].margin > 0.0);
      sign = rep.splits[0].margin;
    }
  }
  SUBCASE("no coupling: no strict binding") {
    const auto rep = binding_check(2, line(20.0, 64), PekarCoupling::dielectric(DielectricTensor::identity(1)), o);
    CHECK(!rep.strict_binding);
    for (const auto& s : rep.splits) CHECK(s.verdict != "strict");
  }
  SUBCASE("report JSON") {
    const auto j = to_json(binding_check(2, line(20.0, 32), PekarCoupling::dielectric(DielectricTensor::scalar(1, 10.0)), o));
    CHECK(j.contains("energies"));
    CHECK(j.contains("splits"));
    CHECK(j["grid"]["analog_mode"] == true);
    CHECK(j["grid"]["soft_width"].get<double>() > 0.0);
  }
}

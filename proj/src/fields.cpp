#include "polaron/fields.hpp"

#include "polaron/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polaron {

namespace {

constexpr double kPi = std::numbers::pi;

template <class Fn>
void for_each_k(const Grid& g, Fn&& fn) {
  const int d = g.dim();
  const auto& n = g.shape();
  std::vector<int> idx(d, 0);
  Eigen::VectorXd j(d);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int a = 0; a < d; ++a) j[a] = idx[a] >= n[a] / 2 ? idx[a] - n[a] : idx[a];
    fn(i, Eigen::VectorXd(g.cell().reciprocal() * j));
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < n[a]) break;
      idx[a] = 0;
    }
  }
}

// Fourier transform of the radially truncated Green function at |k| = kappa.
double truncated_symbol(int d, double kappa, double R) {
  const double x = kappa * R;
  if (d == 2) {
    if (x < 1e-4) return kPi * R * R * (1.0 - x * x / 8.0);
    return 4.0 * kPi * (1.0 - std::cyl_bessel_j(0.0, x)) / (kappa * kappa);
  }
  if (x < 1e-8) return 2.0 * kPi * R * R;
  const double s = std::sin(0.5 * x);
  return 8.0 * kPi * s * s / (kappa * kappa);
}

void check_same_grid(const ScalarField& f, const ScalarField& g) {
  if (!f.grid || !g.grid || !f.grid->same_as(*g.grid))
    throw std::invalid_argument("fields live on mismatched grids");
}

void check_eps(const Grid& g, const DielectricTensor& eps) {
  if (eps.dim() != g.dim()) throw std::invalid_argument("dielectric tensor dimension does not match the grid");
  eps.validate();
}

}  // namespace

std::string to_string(Boundary b) { return b == Boundary::Free ? "free" : "periodic"; }

Boundary boundary_from_string(const std::string& s) {
  if (s == "free") return Boundary::Free;
  if (s == "periodic") return Boundary::Periodic;
  throw std::invalid_argument("unknown boundary '" + s + "' (expected free or periodic)");
}

void DielectricTensor::validate() const {
  if (eps.rows() != eps.cols() || eps.rows() < 1) throw std::invalid_argument("dielectric tensor must be square");
  const double scale = eps.cwiseAbs().maxCoeff();
  if ((eps - eps.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, scale))
    throw std::invalid_argument("dielectric tensor is not symmetric");
  if (eigenvalues().minCoeff() <= 0.0) throw std::invalid_argument("dielectric tensor is not positive definite");
}

Eigen::VectorXd DielectricTensor::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (eps + eps.transpose()));
  return es.eigenvalues();
}

KernelSymbol coulomb_symbol(const Grid& g, Boundary b, const Eigen::MatrixXd* eps) {
  const int d = g.dim();
  const Eigen::MatrixXd E = eps ? *eps : Eigen::MatrixXd::Identity(d, d);
  KernelSymbol ks;
  ks.khat.resize(static_cast<Eigen::Index>(g.size()));
  if (b == Boundary::Periodic) {
    for_each_k(g, [&](std::size_t i, const Eigen::VectorXd& k) {
      const double q = k.dot(E * k);
      ks.khat[static_cast<Eigen::Index>(i)] = q > 0.0 ? 4.0 * kPi / q : 0.0;
    });
    return ks;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E);
  const double lmax = es.eigenvalues().maxCoeff();
  const double det = E.determinant();
  const double rho = g.cell().inscribed_radius() / std::sqrt(lmax);
  for_each_k(g, [&](std::size_t i, const Eigen::VectorXd& k) {
    ks.khat[static_cast<Eigen::Index>(i)] = truncated_symbol(d, std::sqrt(std::max(0.0, k.dot(E * k))), rho);
  });
  if (d == 1) ks.constant = 2.0 * kPi * rho / std::sqrt(det);
  if (d == 2) ks.constant = (2.0 * std::log(rho) + 0.5 * std::log(det)) / std::sqrt(det);
  return ks;
}

double kernel_energy(const ScalarField& f, const ScalarField& g, const KernelSymbol& k) {
  check_same_grid(f, g);
  const Grid& G = *f.grid;
  const Eigen::VectorXcd fh = fft::forward(G, f.values);
  const Eigen::VectorXcd gh = (&f == &g) ? fh : fft::forward(G, g.values);
  double s = 0.0;
  for (Eigen::Index i = 0; i < fh.size(); ++i) s += (std::conj(fh[i]) * gh[i]).real() * k.khat[i];
  s *= G.dv() / static_cast<double>(G.size());
  if (k.constant != 0.0) s -= k.constant * f.integral() * g.integral();
  return s;
}

ScalarField kernel_potential(const ScalarField& f, const KernelSymbol& k) {
  const Grid& G = *f.grid;
  Eigen::VectorXcd fh = fft::forward(G, f.values);
  for (Eigen::Index i = 0; i < fh.size(); ++i) fh[i] *= k.khat[i];
  Eigen::VectorXd w = fft::inverse_real(G, fh);
  if (k.constant != 0.0) w.array() -= k.constant * f.integral();
  return ScalarField(f.grid, std::move(w));
}

double boundary_ratio(const ScalarField& f) {
  const double mx = f.max_abs();
  return mx > 0.0 ? f.boundary_max() / mx : 0.0;
}

FieldEnergy coulomb_energy_free(const ScalarField& f, const ScalarField& g) {
  check_same_grid(f, g);
  FieldEnergy out;
  out.value = kernel_energy(f, g, coulomb_symbol(*f.grid, Boundary::Free));
  out.boundary_ratio = std::max(boundary_ratio(f), boundary_ratio(g));
  if (out.boundary_ratio > 1e-8)
    out.warnings.push_back("field not negligible at the box boundary: relative magnitude " +
                           std::to_string(out.boundary_ratio));
  return out;
}

double periodic_green_constant(const Grid& g) {
  const auto ks = coulomb_symbol(g, Boundary::Periodic);
  // G on the grid = (1/|cell|) sum_b K(b) e^{ib.x} = (N/|cell|) * IDFT(K)
  const Eigen::VectorXd G = fft::inverse_real(g, ks.khat.cast<std::complex<double>>()) *
                            (static_cast<double>(g.size()) / g.volume());
  return -G.minCoeff();
}

double periodic_green_energy(const ScalarField& f, const ScalarField& g, const LatticeCell& cell,
                             double extra_constant) {
  check_same_grid(f, g);
  if (!(f.grid->cell() == cell)) throw std::invalid_argument("periodic Green energy: fields are not on this cell");
  const auto ks = coulomb_symbol(*f.grid, Boundary::Periodic);
  const double g0 = periodic_green_constant(*f.grid) + extra_constant;
  return kernel_energy(f, g, ks) + g0 * f.integral() * g.integral();
}

double pekar_interaction(const ScalarField& rho, const DielectricTensor& eps, Boundary b) {
  const Grid& G = *rho.grid;
  check_eps(G, eps);
  const auto k1 = coulomb_symbol(G, b);
  const auto ke = coulomb_symbol(G, b, &eps.eps);
  const Eigen::VectorXcd rh = fft::forward(G, rho.values);
  double s = 0.0;
  for (Eigen::Index i = 0; i < rh.size(); ++i) s += std::norm(rh[i]) * (ke.khat[i] - k1.khat[i]);
  s *= G.dv() / static_cast<double>(G.size());
  const double q = rho.integral();
  s -= (ke.constant - k1.constant) * q * q;
  return 0.5 * s;
}

ScalarField solve_poisson_aniso(const ScalarField& rho, const DielectricTensor& eps, Boundary b) {
  check_eps(*rho.grid, eps);
  if (std::abs(eps.eps.determinant()) < 1e-14) throw std::invalid_argument("dielectric tensor is singular");
  return kernel_potential(rho, coulomb_symbol(*rho.grid, b, &eps.eps));
}

ScalarField fourier_shift(const ScalarField& f, const Eigen::VectorXd& tau) {
  const Grid& G = *f.grid;
  Eigen::VectorXcd fh = fft::forward(G, f.values);
  const auto& n = G.shape();
  for (std::size_t i = 0; i < G.size(); ++i) {
    // Nyquist modes carry no well-defined phase for real data; keep them real.
    const auto j = G.frequency(i);
    bool nyq = false;
    for (int a = 0; a < G.dim(); ++a) nyq = nyq || j[a] == -n[a] / 2;
    const double ph = G.kvec(i).dot(tau);
    if (nyq)
      fh[i] *= std::cos(ph);
    else
      fh[i] *= std::polar(1.0, -ph);
  }
  return ScalarField(f.grid, fft::inverse_real(G, fh), f.neutral);
}

Eigen::VectorXd circular_center(const ScalarField& f) {
  const Grid& G = *f.grid;
  const int d = G.dim();
  Eigen::VectorXd frac(d);
  for (int a = 0; a < d; ++a) {
    std::complex<double> z = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i) {
      const int idx = G.multi_index(i)[a];
      z += f.values[static_cast<Eigen::Index>(i)] * std::polar(1.0, 2.0 * kPi * idx / G.shape()[a]);
    }
    double t = std::arg(z) / (2.0 * kPi);
    if (t < 0.0) t += 1.0;
    frac[a] = t;
  }
  return G.cell().vectors() * frac;
}

ScalarField center_density(const ScalarField& f) {
  const Eigen::VectorXd mid = 0.5 * f.grid->cell().vectors() * Eigen::VectorXd::Ones(f.grid->dim());
  return fourier_shift(f, mid - circular_center(f));
}

}  // namespace polaron

#include "polaron/crystal.hpp"

#include "polaron/fft.hpp"
#include "polaron/parallel.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace polaron {

namespace {

constexpr double kPi = std::numbers::pi;

int total_cells(const std::vector<int>& reps) {
  int c = 1;
  for (int r : reps) c *= r;
  return c;
}

// Integer reciprocal coordinates j with |xi + B j|^2 / 2 <= ecut.
Eigen::MatrixXi plane_wave_basis(const LatticeCell& cell, double ecut, const Eigen::VectorXd& xi) {
  const int d = cell.dim();
  const double kmax = std::sqrt(2.0 * ecut);
  std::vector<int> lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    // j_a = A_a . (xi + B j) / (2 pi) - A_a . xi / (2 pi)
    const double ext = kmax * cell.vectors().col(a).norm() / (2.0 * kPi);
    const double sh = cell.vectors().col(a).dot(xi) / (2.0 * kPi);
    lo[a] = static_cast<int>(std::floor(-ext - sh)) - 1;
    hi[a] = static_cast<int>(std::ceil(ext - sh)) + 1;
  }
  std::vector<Eigen::VectorXi> keep;
  Eigen::VectorXi j(d);
  for (int a = 0; a < d; ++a) j[a] = lo[a];
  while (true) {
    const Eigen::VectorXd k = xi + cell.reciprocal() * j.cast<double>();
    if (0.5 * k.squaredNorm() <= ecut * (1.0 + 1e-12)) keep.push_back(j);
    int a = d - 1;
    for (; a >= 0; --a) {
      if (++j[a] <= hi[a]) break;
      j[a] = lo[a];
    }
    if (a < 0) break;
  }
  Eigen::MatrixXi out(d, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = keep[c];
  return out;
}

std::size_t wrapped_index(const Grid& g, const Eigen::VectorXi& j) {
  std::vector<int> idx(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    const int n = g.shape()[a];
    idx[a] = ((j[a] % n) + n) % n;
  }
  return g.flat_index(idx);
}

void check_resolution(const Grid& g, const Eigen::MatrixXi& basis) {
  for (int a = 0; a < g.dim(); ++a) {
    const int span = basis.row(a).maxCoeff() - basis.row(a).minCoeff();
    if (g.shape()[a] < 2 * span + 1) {
      std::ostringstream os;
      os << "crystal grid too coarse for the cutoff: axis " << a << " has " << g.shape()[a]
         << " points, needs at least " << 2 * span + 1;
      throw std::invalid_argument(os.str());
    }
  }
}

}  // namespace

void hermitian_lowest(Eigen::MatrixXcd& H, int nev, Eigen::VectorXd& w, Eigen::MatrixXcd& Z) {
  const lapack_int n = static_cast<lapack_int>(H.rows());
  Eigen::VectorXd wall(n);
  Z.resize(n, nev);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(std::max(1, nev)));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n,
                                         reinterpret_cast<lapack_complex_double*>(H.data()), n, 0.0, 0.0, 1, nev,
                                         0.0, &found, wall.data(), reinterpret_cast<lapack_complex_double*>(Z.data()),
                                         n, isuppz.data());
  if (info != 0 || found != nev) throw std::runtime_error("zheevr failed with info " + std::to_string(info));
  w = wall.head(nev);
}

// ---------------------------------------------------------------- spec

double CrystalSpec::nuclear_charge() const {
  double q = background;
  for (const auto& n : nuclei) q += n.charge;
  return q;
}

void CrystalSpec::validate() const {
  std::vector<std::string> errs;
  const int d = cell.dim();
  if (electrons < 0) errs.push_back("electrons: must be >= 0");
  if (std::abs(nuclear_charge() - electrons) > 1e-10)
    errs.push_back("neutrality: nuclear charge per cell " + std::to_string(nuclear_charge()) +
                   " differs from Z = " + std::to_string(electrons));
  for (std::size_t i = 0; i < nuclei.size(); ++i) {
    if (!(nuclei[i].width > 0.0)) errs.push_back("nuclei[" + std::to_string(i) + "].width: must be > 0");
    if (nuclei[i].center.size() != d) errs.push_back("nuclei[" + std::to_string(i) + "].center: wrong dimension");
  }
  if (!(ecut > 0.0)) errs.push_back("ecut: must be > 0");
  if (static_cast<int>(kpoints.size()) != d) errs.push_back("kpoints: need one count per axis");
  for (int k : kpoints)
    if (k < 1) errs.push_back("kpoints: counts must be >= 1");
  if (!grid.empty() && static_cast<int>(grid.size()) != d) errs.push_back("grid: need one size per axis");
  if (!(mixing_beta > 0.0 && mixing_beta <= 1.0)) errs.push_back("mixing_beta: must lie in (0, 1]");
  if (mixing_history < 1) errs.push_back("mixing_history: must be >= 1");
  if (!(tolerance > 0.0)) errs.push_back("tolerance: must be > 0");
  if (max_iterations < 1) errs.push_back("max_iterations: must be >= 1");
  if (!errs.empty()) {
    std::string msg = "invalid crystal spec:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
}

CrystalSpec CrystalSpec::supercell(const std::vector<int>& reps) const {
  CrystalSpec s = *this;
  const int d = cell.dim();
  if (static_cast<int>(reps.size()) != d) throw std::invalid_argument("supercell: repetition count must match dimension");
  const int cells = total_cells(reps);
  s.cell = cell.supercell(reps);
  s.nuclei.clear();
  std::vector<int> r(d, 0);
  for (int c = 0; c < cells; ++c) {
    const Eigen::VectorXd shift = cell.vectors() * Eigen::Map<const Eigen::VectorXi>(r.data(), d).cast<double>();
    for (const auto& n : nuclei) s.nuclei.push_back({n.center + shift, n.width, n.charge});
    for (int a = d - 1; a >= 0; --a) {
      if (++r[a] < reps[a]) break;
      r[a] = 0;
    }
  }
  s.background = background * cells;
  s.electrons = electrons * cells;
  s.cells = this->cells * cells;
  s.kpoints.assign(d, 1);
  const auto g = density_grid();
  s.grid.resize(d);
  for (int a = 0; a < d; ++a) s.grid[a] = g[a] * reps[a];
  return s;
}

std::vector<int> CrystalSpec::density_grid() const {
  if (!grid.empty()) return grid;
  const int d = cell.dim();
  std::vector<int> span(d, 0);
  for (const auto& xi : kpoint_grid(cell, kpoints)) {
    const auto b = plane_wave_basis(cell, ecut, xi);
    for (int a = 0; a < d; ++a) span[a] = std::max(span[a], b.row(a).maxCoeff() - b.row(a).minCoeff());
  }
  std::vector<int> n(d);
  for (int a = 0; a < d; ++a) n[a] = 2 * span[a] + 2;
  return n;
}

ScalarField CrystalSpec::nuclear_density(GridPtr g) const {
  // Periodic Gaussian sum built mode by mode, so the cell integral is exact.
  const Grid& G = *g;
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(G.size()));
  const double N = static_cast<double>(G.size());
  for (std::size_t i = 0; i < G.size(); ++i) {
    const Eigen::VectorXd k = G.kvec(i);
    std::complex<double> s = (i == 0) ? background : 0.0;
    for (const auto& n : nuclei) s += n.charge * std::polar(std::exp(-0.5 * n.width * n.width * k.squaredNorm()), -k.dot(n.center));
    // inverse DFT carries 1/N; grid values are sum_k mu^(k) e^{ikx} / |cell|
    h[static_cast<Eigen::Index>(i)] = s * N / G.volume();
  }
  return ScalarField(g, fft::inverse_real(G, h));
}

std::vector<Eigen::VectorXd> kpoint_grid(const LatticeCell& cell, const std::vector<int>& nk) {
  const int d = cell.dim();
  if (static_cast<int>(nk.size()) != d) throw std::invalid_argument("k-point grid: need one count per axis");
  std::vector<Eigen::VectorXd> out;
  std::vector<int> j(d);
  for (int a = 0; a < d; ++a) j[a] = -nk[a] / 2;
  while (true) {
    Eigen::VectorXd f(d);
    for (int a = 0; a < d; ++a) f[a] = static_cast<double>(j[a]) / nk[a];
    out.push_back(cell.reciprocal() * f);
    int a = d - 1;
    for (; a >= 0; --a) {
      if (++j[a] < nk[a] - nk[a] / 2) break;
      j[a] = -nk[a] / 2;
    }
    if (a < 0) break;
  }
  return out;
}

// ---------------------------------------------------------------- bands

Eigen::MatrixXcd bloch_hamiltonian(const ScalarField& V, double ecut, const Eigen::VectorXd& xi,
                                   Eigen::MatrixXi* basis_out) {
  const Grid& G = *V.grid;
  const Eigen::MatrixXi basis = plane_wave_basis(G.cell(), ecut, xi);
  check_resolution(G, basis);
  const Eigen::VectorXcd Vh = fft::forward(G, V.values) / static_cast<double>(G.size());
  const Eigen::Index nb = basis.cols();
  Eigen::MatrixXcd H(nb, nb);
  for (Eigen::Index c = 0; c < nb; ++c) {
    // Filled from one triangle so the matrix is Hermitian to the last bit.
    for (Eigen::Index r = c + 1; r < nb; ++r) {
      H(r, c) = Vh[static_cast<Eigen::Index>(wrapped_index(G, basis.col(r) - basis.col(c)))];
      H(c, r) = std::conj(H(r, c));
    }
    const Eigen::VectorXd k = xi + G.cell().reciprocal() * basis.col(c).cast<double>();
    H(c, c) = Vh[0].real() + 0.5 * k.squaredNorm();
  }
  if (basis_out) *basis_out = basis;
  return H;
}

std::vector<BlochState> bloch_bands(const ScalarField& V, double ecut, const std::vector<Eigen::VectorXd>& kpts,
                                    int nbands) {
  if (nbands < 1) throw std::invalid_argument("bloch_bands: need at least one band");
  std::vector<BlochState> out(kpts.size());
  parallel_for(kpts.size(), [&](std::size_t i) {
    BlochState& s = out[i];
    s.xi = kpts[i];
    Eigen::MatrixXcd H = bloch_hamiltonian(V, ecut, kpts[i], &s.basis);
    if (H.rows() < nbands)
      throw std::invalid_argument("cutoff too small: " + std::to_string(H.rows()) + " plane waves for " +
                                  std::to_string(nbands) + " bands");
    hermitian_lowest(H, nbands, s.energies, s.coefficients);
  });
  return out;
}

FermiLevel fermi_level(const std::vector<BlochState>& bands, int electrons) {
  if (electrons <= 0) throw std::invalid_argument("no electrons: Fermi level undefined for Z = 0");
  FermiLevel f;
  f.homo = -std::numeric_limits<double>::infinity();
  f.lumo = std::numeric_limits<double>::infinity();
  for (const auto& b : bands) {
    if (b.energies.size() <= electrons) throw std::invalid_argument("fermi_level: need Z + 1 bands per k-point");
    f.homo = std::max(f.homo, b.energies[electrons - 1]);
    f.lumo = std::min(f.lumo, b.energies[electrons]);
  }
  f.gap = f.lumo - f.homo;
  f.fermi = 0.5 * (f.homo + f.lumo);
  if (!(f.gap > 1e-10 * std::max(1.0, std::abs(f.homo)))) {
    std::ostringstream os;
    os.precision(12);
    os << "band " << electrons << " reaches " << f.homo << " and band " << electrons + 1 << " starts at " << f.lumo
       << " (gap " << f.gap << ")";
    throw H7Violated(os.str());
  }
  return f;
}

ScalarField band_density(const std::vector<BlochState>& bands, int electrons, GridPtr g) {
  const Grid& G = *g;
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(G.size()));
  const double scale = static_cast<double>(G.size()) / std::sqrt(G.volume());
  Eigen::VectorXcd buf(static_cast<Eigen::Index>(G.size()));
  for (const auto& b : bands) {
    std::vector<Eigen::Index> slot(static_cast<std::size_t>(b.basis.cols()));
    for (Eigen::Index c = 0; c < b.basis.cols(); ++c) slot[c] = static_cast<Eigen::Index>(wrapped_index(G, b.basis.col(c)));
    for (int n = 0; n < electrons; ++n) {
      buf.setZero();
      for (Eigen::Index c = 0; c < b.basis.cols(); ++c) buf[slot[c]] = b.coefficients(c, n);
      rho += (fft::inverse(G, buf) * scale).cwiseAbs2();
    }
  }
  if (!bands.empty()) rho /= static_cast<double>(bands.size());
  return ScalarField(g, std::move(rho));
}

double band_kinetic(const std::vector<BlochState>& bands, int electrons, const LatticeCell& cell) {
  double t = 0.0;
  for (const auto& b : bands) {
    for (Eigen::Index c = 0; c < b.basis.cols(); ++c) {
      const double k2 = (b.xi + cell.reciprocal() * b.basis.col(c).cast<double>()).squaredNorm();
      t += 0.5 * k2 * b.coefficients.row(c).head(electrons).squaredNorm();
    }
  }
  return bands.empty() ? 0.0 : t / static_cast<double>(bands.size());
}

double crystal_energy(double kinetic, const ScalarField& rho, const ScalarField& mu) {
  const ScalarField q(rho.grid, rho.values - mu.values);
  return kinetic + 0.5 * kernel_energy(q, q, coulomb_symbol(*rho.grid, Boundary::Periodic));
}

// ---------------------------------------------------------------- SCF

ScfProblem make_scf_problem(const CrystalSpec& spec) {
  spec.validate();
  ScfProblem p;
  p.spec = spec;
  p.grid = make_grid(spec.cell, spec.density_grid());
  p.mu = spec.nuclear_density(p.grid);
  p.electrons = spec.electrons;
  p.cells = spec.cells;
  p.kpoints = kpoint_grid(spec.cell, spec.kpoints);
  return p;
}

ScfStep scf_step(const ScfProblem& p, const ScalarField& rho_in) {
  ScfStep s;
  const auto ks = coulomb_symbol(*p.grid, Boundary::Periodic);
  s.V = kernel_potential(ScalarField(p.grid, rho_in.values - p.mu.values), ks);
  s.bands = bloch_bands(s.V, p.spec.ecut, p.kpoints, p.electrons + 1);
  s.fermi = fermi_level(s.bands, p.electrons);
  s.rho_out = band_density(s.bands, p.electrons, p.grid);
  s.kinetic = band_kinetic(s.bands, p.electrons, p.grid->cell());
  s.energy = crystal_energy(s.kinetic, s.rho_out, p.mu);
  s.residual = std::sqrt((s.rho_out.values - rho_in.values).squaredNorm() * p.grid->dv());
  return s;
}

CrystalGroundState solve_scf(const ScfProblem& p, const ScalarField* warm) {
  CrystalGroundState st;
  st.spec = p.spec;
  st.grid = p.grid;
  st.mu = p.mu;
  st.cells = p.cells;
  if (p.electrons == 0) {
    // Vacuum: nothing to fill, nothing to screen.
    st.rho = ScalarField(p.grid);
    st.V = kernel_potential(ScalarField(p.grid, -p.mu.values), coulomb_symbol(*p.grid, Boundary::Periodic));
    st.energy = crystal_energy(0.0, st.rho, p.mu);
    st.energy_per_cell = st.energy / p.cells;
    st.converged = true;
    st.vacuum = true;
    st.message = "vacuum (no electrons)";
    return st;
  }
  Eigen::VectorXd rho = warm ? warm->values
                             : Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.grid->size()),
                                                         p.electrons / p.grid->volume());
  std::vector<Eigen::VectorXd> X, F;
  const double beta = p.spec.mixing_beta;
  ScfStep last;
  for (int it = 0; it < p.spec.max_iterations; ++it) {
    try {
      last = scf_step(p, ScalarField(p.grid, rho));
    } catch (const H7Violated& e) {
      throw H7Violated(std::string(e.what()).substr(13) + " at SCF iteration " + std::to_string(it));
    }
    st.iterations = it + 1;
    st.residual_history.push_back(last.residual);
    st.energy_history.push_back(last.energy / p.cells);
    if (last.residual <= p.spec.tolerance) {
      st.converged = true;
      break;
    }
    const Eigen::VectorXd f = last.rho_out.values - rho;
    if (p.spec.mixing == Mixing::Linear) {
      rho += beta * f;
      continue;
    }
    X.push_back(rho);
    F.push_back(f);
    if (static_cast<int>(X.size()) > p.spec.mixing_history + 1) {
      X.erase(X.begin());
      F.erase(F.begin());
    }
    if (X.size() > 1) {
      const Eigen::Index m = static_cast<Eigen::Index>(X.size()) - 1;
      Eigen::MatrixXd dF(rho.size(), m), dX(rho.size(), m);
      for (Eigen::Index i = 0; i < m; ++i) {
        dF.col(i) = F[i + 1] - F[i];
        dX.col(i) = X[i + 1] - X[i];
      }
      const Eigen::VectorXd gam = dF.completeOrthogonalDecomposition().solve(f);
      rho += beta * f - (dX + beta * dF) * gam;
    } else {
      rho += beta * f;
    }
  }
  st.bands = last.bands;
  st.fermi = last.fermi.fermi;
  st.gap = last.fermi.gap;
  st.rho = ScalarField(p.grid, rho);
  st.V = last.V;
  st.kinetic = last.kinetic / p.cells;
  st.energy = last.energy;
  st.energy_per_cell = last.energy / p.cells;
  st.message = st.converged ? "converged" : "SCF not converged within " + std::to_string(p.spec.max_iterations) + " iterations";
  return st;
}

CrystalGroundState scf_ground_state(const CrystalSpec& spec) { return solve_scf(make_scf_problem(spec)); }

nlohmann::json to_json(const CrystalGroundState& g) {
  nlohmann::json j;
  j["fermi_level"] = g.fermi;
  j["gap"] = g.gap;
  j["energy_per_cell"] = g.energy_per_cell;
  j["energy"] = g.energy;
  j["kinetic_per_cell"] = g.kinetic;
  j["cells"] = g.cells;
  j["iterations"] = g.iterations;
  j["converged"] = g.converged;
  j["vacuum"] = g.vacuum;
  j["message"] = g.message;
  j["residual_history"] = g.residual_history;
  j["energy_history"] = g.energy_history;
  j["grid"] = g.grid ? g.grid->shape() : std::vector<int>{};
  j["cell_volume"] = g.grid ? g.grid->volume() : 0.0;
  j["electron_count"] = g.rho.grid ? g.rho.integral() : 0.0;
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : g.bands) {
    bands.push_back({{"xi", std::vector<double>(b.xi.data(), b.xi.data() + b.xi.size())},
                     {"energies", std::vector<double>(b.energies.data(), b.energies.data() + b.energies.size())}});
  }
  j["bands"] = bands;
  return j;
}

}  // namespace polaron

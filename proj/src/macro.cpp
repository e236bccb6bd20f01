#include "polaron/macro.hpp"

#include "polaron/fft.hpp"
#include "polaron/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace polaron {

namespace {

std::size_t wrap_index(const Grid& g, const std::vector<int>& j) {
  std::vector<int> idx(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    const int n = g.shape()[a];
    idx[a] = ((j[a] % n) + n) % n;
  }
  return g.flat_index(idx);
}

// (1/(2m))|xi + k|^2 + V in the basis of all grid frequencies (the spectral grid operator).
Eigen::MatrixXcd cell_hamiltonian(const ScalarField& V, double m, const Eigen::VectorXd& xi) {
  const Grid& G = *V.grid;
  if (G.size() > 4096) throw std::invalid_argument("cell eigenproblem: grid too large for the dense solver");
  const Eigen::VectorXcd Vh = fft::forward(G, V.values) / static_cast<double>(G.size());
  const auto n = static_cast<Eigen::Index>(G.size());
  std::vector<std::vector<int>> freq(G.size());
  for (std::size_t i = 0; i < G.size(); ++i) freq[i] = G.frequency(i);
  Eigen::MatrixXcd H(n, n);
  std::vector<int> diff(G.dim());
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = c + 1; r < n; ++r) {
      for (int a = 0; a < G.dim(); ++a) diff[a] = freq[r][a] - freq[c][a];
      H(r, c) = Vh[static_cast<Eigen::Index>(wrap_index(G, diff))];
      H(c, r) = std::conj(H(r, c));
    }
    H(c, c) = Vh[0].real() + (xi + G.kvec(static_cast<std::size_t>(c))).squaredNorm() / (2.0 * m);
  }
  return H;
}

void check_zero_mean(const ScalarField& V) {
  const double scale = std::max(1.0, V.max_abs());
  if (std::abs(V.values.mean()) > 1e-10 * scale)
    throw std::invalid_argument("cell eigenproblem: V must have zero cell mean (mean " +
                                std::to_string(V.values.mean()) + ")");
}

// Sum_j U(x_j) on the N-fold tensor grid, particle 1 slowest.
Eigen::VectorXd tensor_sum(const Eigen::VectorXd& U, int n) {
  const std::size_t M = static_cast<std::size_t>(U.size());
  std::size_t total = 1;
  for (int j = 0; j < n; ++j) total *= M;
  Eigen::VectorXd out(static_cast<Eigen::Index>(total));
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t r = t;
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      s += U[static_cast<Eigen::Index>(r % M)];
      r /= M;
    }
    out[static_cast<Eigen::Index>(t)] = s;
  }
  return out;
}

// Prod_j u(x_j) on the tensor grid.
Eigen::VectorXd tensor_product(const Eigen::VectorXd& u, int n) {
  const std::size_t M = static_cast<std::size_t>(u.size());
  std::size_t total = 1;
  for (int j = 0; j < n; ++j) total *= M;
  Eigen::VectorXd out(static_cast<Eigen::Index>(total));
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t r = t;
    double s = 1.0;
    for (int j = 0; j < n; ++j) {
      s *= u[static_cast<Eigen::Index>(r % M)];
      r /= M;
    }
    out[static_cast<Eigen::Index>(t)] = s;
  }
  return out;
}

// Unit-cell field repeated over the supercell grid.
Eigen::VectorXd tile(const ScalarField& cellf, const Grid& super) {
  const auto& nc = cellf.grid->shape();
  for (int a = 0; a < super.dim(); ++a)
    if (super.shape()[a] % nc[a] != 0) throw std::invalid_argument("tile: supercell grid is not a multiple of the cell grid");
  Eigen::VectorXd out(static_cast<Eigen::Index>(super.size()));
  std::vector<int> idx(super.dim());
  for (std::size_t i = 0; i < super.size(); ++i) {
    const auto mi = super.multi_index(i);
    for (int a = 0; a < super.dim(); ++a) idx[a] = mi[a] % nc[a];
    out[static_cast<Eigen::Index>(i)] = cellf.values[static_cast<Eigen::Index>(cellf.grid->flat_index(idx))];
  }
  return out;
}

NPolaronOptions repulsion_options(const CoupledOptions& opt) {
  NPolaronOptions o = opt.npolaron;
  o.boundary = Boundary::Periodic;
  o.charge = ChargeConvention::Physical;
  return o;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return !v.empty();
}

struct EnergyWithResponse {
  CoupledEnergy parts;
  DefectRun run;
};

EnergyWithResponse evaluate_coupled(const ManyBodyWaveFunction& psi, const MacroModel& model, double m,
                                    const CoupledOptions& opt) {
  const GridPtr gx = model.macro_grid(m);
  if (!psi.grid->same_as(*gx)) {
    std::ostringstream os;
    os << "incommensurate scales: the state is not on the macro grid for m = " << m;
    throw std::invalid_argument(os.str());
  }
  const int N = psi.particles;
  const int d = model.dim();
  const Supercell& sc = model.supercell(m);
  const GridPtr gy = sc.problem.grid;
  const auto nopt = repulsion_options(opt);
  const PekarCoupling none = PekarCoupling::isotropic(0.0);

  EnergyWithResponse out;
  CoupledEnergy& e = out.parts;
  NPolaronEnergy px;
  NPolaronFunctional fx(N, gx, none, nopt);
  fx(psi.values, nullptr, &px);
  e.kinetic = px.kinetic;
  e.repulsion = px.repulsion;
  const Eigen::VectorXd rho = fx.density(psi.values);
  e.periodic = sc.ground.V.values.dot(rho) * gx->dv() / m;

  const ScalarField nu(gy, std::pow(m, 3) * rho);
  out.run = defect_run(sc, nu);
  e.gap_closed = out.run.gap_closed;
  e.crystal_converged = out.run.converged && !out.run.gap_closed;
  e.crystal = std::pow(m, d - 4) * out.run.energy;
  e.total = e.kinetic + e.repulsion + e.periodic + e.crystal;

  // Same state in micro variables: Phi(y) = m^(dN/2) Psi(m y).
  const Eigen::VectorXcd phi = psi.values * std::pow(m, 0.5 * d * N);
  NPolaronEnergy py;
  NPolaronFunctional fy(N, gy, none, nopt);
  fy(phi, nullptr, &py);
  const double pot = sc.ground.V.values.dot(fy.density(phi)) * gy->dv();
  e.micro_total = py.kinetic / (m * m) + (py.repulsion + pot) / m + e.crystal;
  e.rescaling_error = std::abs(e.total - e.micro_total) / std::max(1.0, std::abs(e.total));
  return out;
}

}  // namespace

// ---------------------------------------------------------------- cell eigenproblem

CellEigenResult cell_eigenproblem(const ScalarField& V, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("cell eigenproblem: mass must be > 0");
  check_zero_mean(V);
  const Grid& G = *V.grid;
  const GridPtr g = V.grid;
  CellEigenResult r;
  r.mass = m;
  r.volume = G.volume();

  Eigen::MatrixXcd H = cell_hamiltonian(V, m, Eigen::VectorXd::Zero(G.dim()));
  Eigen::VectorXd w;
  Eigen::MatrixXcd Z;
  hermitian_lowest(H, 1, w, Z);
  r.lambda = w[0];
  r.energy = r.volume * r.lambda;

  Eigen::VectorXcd u = fft::inverse(G, Eigen::VectorXcd(Z.col(0))) * static_cast<double>(G.size());
  Eigen::Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  u *= std::conj(u[imax]) / std::abs(u[imax]);
  Eigen::VectorXd ur = u.real();
  ur *= std::sqrt(r.volume / (ur.squaredNorm() * G.dv()));
  r.u = ScalarField(g, ur);
  r.u_min = ur.minCoeff();

  const Eigen::VectorXcd vh = fft::forward(G, V.values);
  Eigen::VectorXcd fh = Eigen::VectorXcd::Zero(vh.size());
  for (Eigen::Index i = 1; i < vh.size(); ++i) fh[i] = -2.0 * vh[i] / G.k2()[i];
  r.f = ScalarField(g, fft::inverse_real(G, fh));
  Eigen::VectorXcd lap = fh;
  for (Eigen::Index i = 0; i < lap.size(); ++i) lap[i] *= -G.k2()[i];
  r.f_residual = (fft::inverse_real(G, lap) - 2.0 * V.values).cwiseAbs().maxCoeff();
  r.e_per = V.values.dot(r.f.values) * G.dv();
  return r;
}

double band_minimum(const ScalarField& V, double m, const std::vector<int>& nk) {
  check_zero_mean(V);
  const auto kpts = kpoint_grid(V.grid->cell(), nk);
  std::vector<double> low(kpts.size());
  parallel_for(kpts.size(), [&](std::size_t i) {
    Eigen::MatrixXcd H = cell_hamiltonian(V, m, kpts[i]);
    Eigen::VectorXd w;
    Eigen::MatrixXcd Z;
    hermitian_lowest(H, 1, w, Z);
    low[i] = w[0];
  });
  return *std::min_element(low.begin(), low.end());
}

nlohmann::json to_json(const CellEigenResult& r) {
  return {{"mass", r.mass},         {"lambda", r.lambda}, {"E_per_m", r.energy},   {"E_per", r.e_per},
          {"f_residual", r.f_residual}, {"u_min", r.u_min}, {"cell_volume", r.volume}};
}

// ---------------------------------------------------------------- model

MacroModel::MacroModel(CrystalSpec spec, CrystalGroundState ground, double box)
    : spec_(std::move(spec)),
      ground_(std::move(ground)),
      box_(box),
      box_cell_(LatticeCell::cubic(spec_.cell.dim(), 1.0)),
      cache_(std::make_shared<Cache>()) {
  if (!(box > 0.0)) throw std::invalid_argument("macro box must be > 0");
  if (!ground_.converged) throw std::invalid_argument("macro model needs a converged crystal ground state");
  Eigen::MatrixXd A = spec_.cell.vectors();
  for (int a = 0; a < dim(); ++a) A.col(a) *= box_ / A.col(a).norm();
  box_cell_ = LatticeCell(A);
}

MacroModel MacroModel::build(const CrystalSpec& spec, double box) {
  auto g = scf_ground_state(spec);
  if (!g.converged) throw std::runtime_error("crystal SCF did not converge: " + g.message);
  return MacroModel(spec, std::move(g), box);
}

int MacroModel::cells_per_axis(double m) const {
  if (!(m > 0.0)) throw std::invalid_argument("scale m must be > 0");
  int L = 0;
  for (int a = 0; a < dim(); ++a) {
    const double x = box_ / (m * spec_.cell.vectors().col(a).norm());
    const int r = static_cast<int>(std::lround(x));
    if (r < 1 || std::abs(x - r) > 1e-9 * x || (L != 0 && r != L)) {
      std::ostringstream os;
      os << "incommensurate scales: box " << box_ << " at m = " << m << " holds " << x << " cells along axis " << a;
      throw std::invalid_argument(os.str());
    }
    L = r;
  }
  return L;
}

const Supercell& MacroModel::supercell(double m) const {
  const int L = cells_per_axis(m);
  std::shared_ptr<std::once_flag> flag;
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto& f = cache_->once[L];
    if (!f) f = std::make_shared<std::once_flag>();
    flag = f;
  }
  std::call_once(*flag, [&] {
    auto sc = std::make_shared<const Supercell>(make_supercell(spec_, L));
    std::lock_guard<std::mutex> lock(cache_->mu);
    cache_->cells[L] = std::move(sc);
  });
  std::lock_guard<std::mutex> lock(cache_->mu);
  return *cache_->cells.at(L);
}

GridPtr MacroModel::macro_grid(double m) const { return make_grid(box_cell_, supercell(m).problem.grid->shape()); }

// ---------------------------------------------------------------- dielectric tensor

std::vector<std::vector<GaussianCharge>> default_probes(int d) {
  const double w = 1.0 / std::sqrt(2.0);
  std::vector<std::vector<GaussianCharge>> out{{{Eigen::VectorXd::Zero(d), w, 1.0}}};
  if (d > 1)
    for (int a = 0; a < d; ++a)
      out.push_back({{Eigen::VectorXd::Zero(d), w, 1.0}, {0.5 * Eigen::VectorXd::Unit(d, a), w, -0.5}});
  return out;
}

std::vector<GaussianCharge> scale_to_micro(const std::vector<GaussianCharge>& nu, double m, int d) {
  std::vector<GaussianCharge> out = nu;
  for (auto& p : out) {
    p.offset /= m;
    p.width /= m;
    p.charge *= std::pow(m, 3 - d);
  }
  return out;
}

DielectricTensor extract_dielectric(const MacroModel& model, const DielectricOptions& opt) {
  const int d = model.dim();
  const auto probes = opt.probes.empty() ? default_probes(d) : opt.probes;
  if (opt.m_ladder.empty()) throw std::invalid_argument("dielectric: empty m ladder");
  std::vector<double> ladder = opt.m_ladder;
  std::sort(ladder.begin(), ladder.end(), std::greater<>());
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) pairs.emplace_back(a, b);
  const auto P = static_cast<Eigen::Index>(pairs.size());

  std::vector<Eigen::MatrixXd> fits(ladder.size());
  std::vector<double> residuals(ladder.size());
  parallel_for(ladder.size(), [&](std::size_t li) {
    const double m = ladder[li];
    const Supercell& sc = model.supercell(m);
    const Grid& G = *sc.problem.grid;
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    for (const auto& probe : probes) {
      const ScalarField nu = gaussian_defect(sc.problem.grid, scale_to_micro(probe, m, d));
      const DefectRun run = defect_run(sc, nu);
      if (run.gap_closed) throw H7Violated(run.message);
      if (!run.converged) throw std::runtime_error("dielectric: defect run did not converge at m = " + std::to_string(m));
      const Eigen::VectorXcd th = fft::forward(G, Eigen::VectorXd(nu.values + run.rho_q.values));
      const Eigen::VectorXcd nh = fft::forward(G, nu.values);
      for (std::size_t i = 1; i < G.size(); ++i) {
        const Eigen::VectorXd k = G.kvec(i);
        const double kn = k.norm();
        if (kn / m > opt.q_max) continue;
        const Eigen::VectorXd q = k / kn;
        Eigen::RowVectorXd re(P), im(P);
        for (Eigen::Index p = 0; p < P; ++p) {
          const auto [a, b] = pairs[static_cast<std::size_t>(p)];
          const double c = (a == b ? 1.0 : 2.0) * q[a] * q[b];
          re[p] = c * th[static_cast<Eigen::Index>(i)].real();
          im[p] = c * th[static_cast<Eigen::Index>(i)].imag();
        }
        rows.push_back(re);
        rhs.push_back(nh[static_cast<Eigen::Index>(i)].real());
        rows.push_back(im);
        rhs.push_back(nh[static_cast<Eigen::Index>(i)].imag());
      }
    }
    if (rows.size() < static_cast<std::size_t>(2 * P))
      throw std::invalid_argument("dielectric: too few Fourier modes below q_max at m = " + std::to_string(m));
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), P);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      A.row(static_cast<Eigen::Index>(r)) = rows[r];
      b[static_cast<Eigen::Index>(r)] = rhs[r];
    }
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    Eigen::MatrixXd eps(d, d);
    for (Eigen::Index p = 0; p < P; ++p) {
      const auto [a, c] = pairs[static_cast<std::size_t>(p)];
      eps(a, c) = eps(c, a) = x[p];
    }
    fits[li] = eps;
    residuals[li] = (A * x - b).norm() / std::max(b.norm(), 1e-300);
  });

  DielectricTensor out(fits.back());
  out.fit_residual = residuals.back();
  out.m_ladder = ladder;
  out.ladder_fits = fits;
  out.ladder_residuals = residuals;
  if (out.fit_residual > opt.fit_threshold) {
    std::ostringstream os;
    os << "dielectric fit residual " << out.fit_residual << " above threshold " << opt.fit_threshold << " at m = "
       << ladder.back();
    throw std::runtime_error(os.str());
  }
  return out;
}

DielectricTensor extract_dielectric(const CrystalSpec& spec, const CrystalGroundState& ground,
                                    const std::vector<double>& m_ladder,
                                    const std::vector<std::vector<GaussianCharge>>& probes, double box) {
  DielectricOptions opt;
  opt.m_ladder = m_ladder;
  opt.probes = probes;
  return extract_dielectric(MacroModel(spec, ground, box), opt);
}

nlohmann::json to_json(const DielectricTensor& e) {
  auto mat = [](const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(M.cols()));
      for (Eigen::Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
      rows.push_back(r);
    }
    return rows;
  };
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : e.ladder_fits) fits.push_back(mat(f));
  const Eigen::VectorXd ev = e.eigenvalues();
  return {{"eps", mat(e.eps)},
          {"eigenvalues", std::vector<double>(ev.data(), ev.data() + ev.size())},
          {"fit_residual", e.fit_residual},
          {"m_ladder", e.m_ladder},
          {"ladder_fits", fits},
          {"ladder_residuals", e.ladder_residuals}};
}

// ---------------------------------------------------------------- coupled model

CoupledEnergy coupled_energy(const ManyBodyWaveFunction& psi, const MacroModel& model, double m,
                             const CoupledOptions& opt) {
  return evaluate_coupled(psi, model, m, opt).parts;
}

nlohmann::json to_json(const CoupledEnergy& e) {
  return {{"kinetic", e.kinetic},
          {"repulsion", e.repulsion},
          {"periodic", e.periodic},
          {"crystal", e.crystal},
          {"total", e.total},
          {"micro_total", e.micro_total},
          {"rescaling_error", e.rescaling_error},
          {"crystal_converged", e.crystal_converged},
          {"gap_closed", e.gap_closed}};
}

CoupledResult minimize_coupled(const MacroModel& model, int n, double m, const CoupledOptions& opt) {
  if (n < 1) throw std::invalid_argument("coupled: need at least one particle");
  const GridPtr gx = model.macro_grid(m);
  const auto nopt = repulsion_options(opt);
  check_tensor_budget(n, *gx, nopt);
  const Supercell& sc = model.supercell(m);
  const int d = model.dim();
  const Symmetry sym = n == 1 ? Symmetry::None : opt.symmetry;

  CoupledResult res;
  res.mass = m;
  res.particles = n;
  ManyBodyWaveFunction psi = n == 1 ? ManyBodyWaveFunction::product({gaussian_orbital(gx, opt.initial_width)}, sym)
                                    : gaussian_cluster(n, gx, opt.initial_width, 0.5, sym);
  const NPolaronFunctional fx(n, gx, PekarCoupling::isotropic(0.0), nopt);
  const Eigen::VectorXd U0 = sc.ground.V.values / m;
  const auto ks = coulomb_symbol(*sc.problem.grid, Boundary::Periodic);
  const double dvn = std::pow(gx->dv(), n);

  EnergyWithResponse cur = evaluate_coupled(psi, model, m, opt);
  res.energies.push_back(cur.parts.total);
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    if (cur.parts.gap_closed) {
      res.message = "gap closed under the polaron density: " + cur.run.message;
      break;
    }
    // Surrogate: the crystal term replaced by its tangent at the current density.
    const Eigen::VectorXd phi = kernel_potential(cur.run.rho_q, ks).values;
    const Eigen::VectorXd Ut = tensor_sum(U0 + phi / m, n);
    DescentProblem p;
    p.dv = dvn;
    p.evaluate = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd* hx) {
      double e = fx(x, hx);
      e += (Ut.array() * x.array().abs2()).sum() * dvn;
      if (hx) hx->array() += Ut.array() * x.array();
      return e;
    };
    p.precondition = [&](Eigen::VectorXcd& x) { fx.precondition(x); };
    if (sym != Symmetry::None) p.project = [&](Eigen::VectorXcd& x) { project_symmetry(x, n, gx->size(), sym); };
    p.ipr = [&](const Eigen::VectorXcd& x) { return inverse_participation(x, dvn); };
    DescentOptions dopt = nopt.descent;
    dopt.max_iterations = opt.inner_iterations;
    Eigen::VectorXcd x = psi.values;
    const DescentResult dr = minimize_on_sphere(p, x, dopt);
    psi = ManyBodyWaveFunction::normalized(n, gx, x, sym);
    res.outer_iterations = outer + 1;
    if (dr.spreading) {
      res.spreading = true;
      res.message = "state spreads over the box: no binding (" + dr.message + ")";
      cur = evaluate_coupled(psi, model, m, opt);
      res.energies.push_back(cur.parts.total);
      break;
    }
    const double prev = cur.parts.total;
    cur = evaluate_coupled(psi, model, m, opt);
    res.energies.push_back(cur.parts.total);
    if (cur.parts.total > prev + 1e-10 * std::max(1.0, std::abs(prev))) res.monotone = false;
    if (std::abs(prev - cur.parts.total) <= opt.outer_tolerance) {
      res.converged = dr.converged || dr.message.find("roundoff") != std::string::npos;
      res.message = res.converged ? "converged" : "outer energy stalled: " + dr.message;
      break;
    }
  }
  if (res.message.empty()) res.message = "outer loop did not converge in " + std::to_string(opt.max_outer) + " steps";
  if (res.converged && nopt.descent.detect_spreading) {
    const double ratio = boundary_ratio(density_from_wavefunction(psi));
    if (ratio > nopt.descent.delocalized_ratio) {
      res.converged = false;
      res.spreading = true;
      res.message = "state spreads over the box: converged density fills it (boundary/max = " +
                    std::to_string(ratio) + "), no binding";
    }
  }

  res.parts = cur.parts;
  res.energy = cur.parts.total;
  res.state = psi;

  const CellEigenResult cell = cell_eigenproblem(model.ground().V, m);
  if (!(cell.u_min > 1e-8))
    throw std::runtime_error("periodic ground state u is not resolved: min u = " + std::to_string(cell.u_min));
  const Eigen::VectorXd u = tensor_product(tile(cell.u, *sc.problem.grid), n);
  res.polaron = psi.values.array() / u.array().cast<std::complex<double>>();
  const Eigen::VectorXcd back = res.polaron.array() * u.array().cast<std::complex<double>>();
  res.reconstruction_error = (back - psi.values).cwiseAbs().maxCoeff() / psi.values.cwiseAbs().maxCoeff();

  res.threshold = band_minimum(model.ground().V, m, model.spec().kpoints) / m;
  if (n == 1) {
    res.binding_margin = res.threshold - res.energy;
    res.bound = !res.spreading && res.binding_margin > 10.0 * model.spec().tolerance;
  }
  (void)d;
  return res;
}

nlohmann::json to_json(const CoupledResult& r) {
  return {{"mass", r.mass},
          {"particles", r.particles},
          {"energy", r.energy},
          {"parts", to_json(r.parts)},
          {"threshold", r.threshold},
          {"binding_margin", r.binding_margin},
          {"bound", r.bound},
          {"reconstruction_error", r.reconstruction_error},
          {"outer_iterations", r.outer_iterations},
          {"converged", r.converged},
          {"spreading", r.spreading},
          {"monotone", r.monotone},
          {"energies", r.energies},
          {"message", r.message}};
}

// ---------------------------------------------------------------- macroscopic limit

MacrolimitReport macrolimit_check(const Orbital& psi, const MacroModel& model, const std::vector<double>& m_ladder,
                                  const DielectricTensor& eps) {
  if (!(psi.grid()->cell() == model.box_cell()))
    throw std::invalid_argument("macrolimit: the orbital does not live on the macro box");
  const int d = model.dim();
  MacrolimitReport rep;
  rep.eps = eps;
  rep.m_ladder = m_ladder;
  std::sort(rep.m_ladder.begin(), rep.m_ladder.end(), std::greater<>());
  rep.pekar = model.trivial() ? 0.0 : pekar_interaction(psi.density(), eps, Boundary::Periodic);
  const std::size_t L = rep.m_ladder.size();
  rep.crystal_terms.assign(L, 0.0);
  rep.gaps.assign(L, 0.0);
  rep.relative_gaps.assign(L, 0.0);
  rep.converged.assign(L, false);
  parallel_for(L, [&](std::size_t i) {
    const double m = rep.m_ladder[i];
    const GridPtr gx = model.macro_grid(m);
    const ComplexField pm = fft::resample(psi.field(), gx);
    const Supercell& sc = model.supercell(m);
    const ScalarField nu(sc.problem.grid, std::pow(m, 3) * pm.values.cwiseAbs2());
    const DefectRun run = defect_run(sc, nu);
    rep.crystal_terms[i] = std::pow(m, d - 4) * run.energy;
    rep.converged[i] = run.converged && !run.gap_closed;
    rep.gaps[i] = std::abs(rep.crystal_terms[i] - rep.pekar);
    rep.relative_gaps[i] = rep.pekar != 0.0 ? rep.gaps[i] / std::abs(rep.pekar) : rep.gaps[i];
  });
  rep.all_converged = std::all_of(rep.converged.begin(), rep.converged.end(), [](bool b) { return b; });
  rep.decreasing = strictly_decreasing(rep.gaps);
  return rep;
}

nlohmann::json to_json(const MacrolimitReport& r) {
  return {{"m_ladder", r.m_ladder},
          {"crystal_terms", r.crystal_terms},
          {"pekar", r.pekar},
          {"gaps", r.gaps},
          {"relative_gaps", r.relative_gaps},
          {"converged", r.converged},
          {"decreasing", r.decreasing},
          {"all_converged", r.all_converged},
          {"eps", to_json(r.eps)}};
}

PekarLimitReport pekar_limit_check(const MacroModel& model, int n, const std::vector<double>& m_ladder,
                                   const DielectricTensor& eps, const CoupledOptions& opt) {
  PekarLimitReport rep;
  rep.particles = n;
  rep.m_ladder = m_ladder;
  std::sort(rep.m_ladder.begin(), rep.m_ladder.end(), std::greater<>());
  if (rep.m_ladder.empty()) throw std::invalid_argument("pekar limit: empty m ladder");
  rep.e_per = cell_eigenproblem(model.ground().V, 1.0).e_per;
  rep.degenerate = model.trivial();

  // E^P on the coarsest macro grid of the ladder.
  const GridPtr gp = model.macro_grid(rep.m_ladder.front());
  if (rep.degenerate) {
    rep.pekar = 0.0;
    rep.warnings.push_back("trivial crystal: eps = Id, alpha = 0, E^P is the infimum 0 of a spreading problem");
  } else if (n == 1) {
    PekarOptions po;
    po.boundary = Boundary::Periodic;
    po.descent = opt.npolaron.descent;
    const auto run = minimize_pekar(gaussian_orbital(gp, opt.initial_width), PekarCoupling::dielectric(eps), po);
    rep.pekar = run.result.energy;
    if (!run.result.converged) rep.warnings.push_back("Pekar minimization: " + run.result.message);
  } else {
    NPolaronOptions no = repulsion_options(opt);
    no.kernel = PekarKernel::Coulomb;
    const auto run = minimize_npolaron(gaussian_cluster(n, gp, opt.initial_width, 0.5, opt.symmetry),
                                       PekarCoupling::dielectric(eps), no);
    rep.pekar = run.result.parts.energy;
    if (!run.result.converged) rep.warnings.push_back("N-polaron minimization: " + run.result.message);
  }
  rep.limit = n * rep.e_per / model.spec().cell.volume() + rep.pekar;

  const std::size_t L = rep.m_ladder.size();
  rep.coupled.assign(L, 0.0);
  std::vector<bool> ok(L, false);
  parallel_for(L, [&](std::size_t i) {
    const auto r = minimize_coupled(model, n, rep.m_ladder[i], opt);
    rep.coupled[i] = r.energy;
    ok[i] = r.converged || (rep.degenerate && r.spreading);
  });
  for (std::size_t i = 0; i < L; ++i) {
    rep.discrepancy.push_back(std::abs(rep.coupled[i] - rep.limit));
    rep.relative.push_back(rep.pekar != 0.0 ? rep.discrepancy.back() / std::abs(rep.pekar) : rep.discrepancy.back());
  }
  rep.all_converged = std::all_of(ok.begin(), ok.end(), [](bool b) { return b; });
  rep.decreasing = strictly_decreasing(rep.discrepancy);
  return rep;
}

nlohmann::json to_json(const PekarLimitReport& r) {
  return {{"particles", r.particles},   {"m_ladder", r.m_ladder},       {"coupled", r.coupled},
          {"E_per", r.e_per},           {"pekar", r.pekar},             {"limit", r.limit},
          {"discrepancy", r.discrepancy}, {"relative", r.relative},     {"decreasing", r.decreasing},
          {"degenerate", r.degenerate}, {"all_converged", r.all_converged}, {"warnings", r.warnings}};
}

}  // namespace polaron

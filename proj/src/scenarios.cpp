#include "polaron/scenarios.hpp"

#include "polaron/io.hpp"
#include "polaron/macro.hpp"
#include "polaron/parallel.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

namespace polaron {

using json = nlohmann::json;

namespace {

void not_converged(ResultRecord& r, const std::string& why) {
  r.status = "not converged";
  r.exit_code = kExitNotConverged;
  r.warnings.push_back(why);
}

Table series(const std::string& name, const std::string& col, const std::vector<double>& v) {
  Table t{name, {"iteration", col}, {}};
  for (std::size_t i = 0; i < v.size(); ++i) t.rows.push_back({static_cast<double>(i), v[i]});
  return t;
}

void run_pekar(const json& doc, ResultRecord& r) {
  const json& p = doc["pekar"];
  const GridPtr g = grid_from(doc["grid"]);
  const PekarCoupling c = coupling_from(p);
  const double w = p["initial_width"].get<double>() > 0.0 ? p["initial_width"].get<double>() : pekar_initial_width(c);
  PekarOptions opt;
  opt.boundary = boundary_from_string(p["boundary"].get<std::string>());
  opt.descent.residual_tol = p["tolerance"].get<double>();
  opt.descent.max_iterations = p["max_iterations"].get<int>();
  const Orbital init = p["init"] == "random" ? random_orbital(g, w, r.seed.value_or(0)) : gaussian_orbital(g, w);
  const PekarRun run = minimize_pekar(init, c, opt);
  r.outputs = to_json(run.result);
  r.outputs["initial_width"] = w;
  for (const auto& wmsg : run.result.warnings) r.warnings.push_back(wmsg);
  r.tables.push_back(series("energies", "energy", run.result.energies));
  r.fields.emplace_back("density", run.orbital.density());
  if (!run.result.converged) not_converged(r, run.result.message);
}

void run_npolaron(const json& doc, ResultRecord& r) {
  const json& b = doc["npolaron"];
  const GridPtr g = grid_from(doc["grid"]);
  const PekarCoupling c = coupling_from(b);
  const NPolaronOptions opt = npolaron_options_from(b);
  const int n = b["particles"].get<int>();
  const Symmetry sym = symmetry_from_string(b["symmetry"].get<std::string>());
  const double w = b["initial_width"].get<double>() > 0.0
                       ? b["initial_width"].get<double>()
                       : std::min(pekar_initial_width(c), 0.5 * g->cell().inscribed_radius());
  const NPolaronRun run = minimize_npolaron(gaussian_cluster(n, g, w, b["spacing"].get<double>(), sym), c, opt);
  r.outputs = to_json(run.result);
  r.tables.push_back(series("energies", "energy", run.result.energies));
  r.fields.emplace_back("density", density_from_wavefunction(run.state, opt.charge));
  if (!run.result.converged) not_converged(r, run.result.message);
}

void run_binding(const json& doc, ResultRecord& r) {
  const json& b = doc["npolaron"];
  const GridPtr g = grid_from(doc["grid"]);
  BindingOptions opt;
  opt.npolaron = npolaron_options_from(b);
  opt.symmetry = symmetry_from_string(b["symmetry"].get<std::string>());
  opt.cluster_width = b["initial_width"].get<double>();
  opt.cluster_spacing = b["spacing"].get<double>();
  const BindingReport rep = binding_check(b["particles"].get<int>(), g, coupling_from(b), opt);
  r.outputs = to_json(rep);
  Table t{"splits", {"k", "margin", "weak_holds"}, {}};
  for (const auto& s : rep.splits) t.rows.push_back({double(s.k), s.margin, s.weak_holds ? 1.0 : 0.0});
  r.tables.push_back(t);
  if (rep.inconclusive) not_converged(r, "binding check inconclusive: a minimization did not converge or spread");
}

void run_crystal(const json& doc, ResultRecord& r) {
  const CrystalGroundState g = scf_ground_state(crystal_from(doc["crystal"]));
  r.outputs = to_json(g);
  Table t{"scf", {"iteration", "residual", "energy"}, {}};
  for (std::size_t i = 0; i < g.residual_history.size(); ++i)
    t.rows.push_back({double(i), g.residual_history[i], i < g.energy_history.size() ? g.energy_history[i] : 0.0});
  r.tables.push_back(t);
  if (!g.vacuum) {
    r.fields.emplace_back("density", g.rho);
    r.fields.emplace_back("potential", g.V);
  }
  if (!g.converged) not_converged(r, g.message);
}

void run_defect(const json& doc, ResultRecord& r) {
  DefectProblem p;
  p.unit = crystal_from(doc["crystal"]);
  const auto charges = charges_from(doc["defect"]["charges"]);
  p.density = [charges](GridPtr g) { return gaussian_defect(g, charges); };
  p.ladder = doc["defect"]["ladder"].get<std::vector<int>>();
  p.ladder_threshold = doc["defect"]["threshold"].get<double>();
  const DefectResponse res = defect_energy(p);
  r.outputs = to_json(res);
  r.warnings.insert(r.warnings.end(), res.warnings.begin(), res.warnings.end());
  Table t{"ladder", {"L", "F_crys", "gap", "converged"}, {}};
  for (const auto& x : res.runs) t.rows.push_back({double(x.L), x.energy, x.gap, x.converged ? 1.0 : 0.0});
  r.tables.push_back(t);
  r.fields.emplace_back("response_density", res.largest().rho_q);
  if (!res.converged) {
    r.status = "not converged";
    r.exit_code = kExitNotConverged;
  }
}

void run_decoupling(const json& doc, ResultRecord& r) {
  const json& b = doc["decoupling"];
  const auto rows = decoupling_test(crystal_from(doc["crystal"]), charges_from(b["rho1"]), charges_from(b["rho2"]),
                                    b["separations"].get<std::vector<int>>(), b["supercell"].get<int>());
  r.outputs = {{"rows", to_json(rows)}};
  Table t{"decoupling", {"separation", "delta", "F_joint", "F_1", "F_2", "converged"}, {}};
  bool ok = true;
  for (const auto& x : rows) {
    t.rows.push_back({double(x.separation), x.delta, x.f_joint, x.f1, x.f2, x.converged ? 1.0 : 0.0});
    ok = ok && x.converged;
  }
  r.tables.push_back(t);
  if (!ok) not_converged(r, "a defect run of the decoupling test did not converge");
}

MacroModel model_from(const json& doc) {
  return MacroModel::build(crystal_from(doc["crystal"]), doc["macro"]["box"].get<double>());
}

DielectricOptions dielectric_options(const json& m) {
  DielectricOptions o;
  o.m_ladder = m["m_ladder"].get<std::vector<double>>();
  o.q_max = m["q_max"].get<double>();
  o.fit_threshold = m["fit_threshold"].get<double>();
  for (const auto& p : m["probes"]) o.probes.push_back(charges_from(p));
  return o;
}

CoupledOptions coupled_options(const json& c) {
  CoupledOptions o;
  o.npolaron.soft_width = c["soft_width"].get<double>();
  o.npolaron.descent.residual_tol = c["tolerance"].get<double>();
  o.symmetry = symmetry_from_string(c["symmetry"].get<std::string>());
  o.initial_width = c["initial_width"].get<double>();
  o.max_outer = c["max_outer"].get<int>();
  o.outer_tolerance = c["outer_tolerance"].get<double>();
  o.inner_iterations = c["inner_iterations"].get<int>();
  return o;
}

void run_dielectric(const json& doc, ResultRecord& r) {
  const MacroModel model = model_from(doc);
  const DielectricTensor e = extract_dielectric(model, dielectric_options(doc["macro"]));
  r.outputs = to_json(e);
  const int d = e.dim();
  Table t{"dielectric", {"m", "fit_residual"}, {}};
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) t.header.push_back("eps_" + std::to_string(a) + std::to_string(b));
  for (std::size_t i = 0; i < e.m_ladder.size(); ++i) {
    std::vector<double> row{e.m_ladder[i], e.ladder_residuals[i]};
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) row.push_back(e.ladder_fits[i](a, b));
    t.rows.push_back(row);
  }
  r.tables.push_back(t);
}

void run_macrolimit(const json& doc, ResultRecord& r) {
  const MacroModel model = model_from(doc);
  const DielectricOptions o = dielectric_options(doc["macro"]);
  const DielectricTensor e = extract_dielectric(model, o);
  const int n = doc["macrolimit"]["grid"].get<int>();
  const Orbital psi =
      gaussian_orbital(make_grid(model.box_cell(), std::vector<int>(model.dim(), n)), doc["macrolimit"]["psi_width"].get<double>());
  const MacrolimitReport rep = macrolimit_check(psi, model, o.m_ladder, e);
  r.outputs = to_json(rep);
  Table t{"macrolimit", {"m", "crystal_term", "pekar", "gap", "relative_gap", "converged"}, {}};
  for (std::size_t i = 0; i < rep.m_ladder.size(); ++i)
    t.rows.push_back({rep.m_ladder[i], rep.crystal_terms[i], rep.pekar, rep.gaps[i], rep.relative_gaps[i],
                      rep.converged[i] ? 1.0 : 0.0});
  r.tables.push_back(t);
  if (!rep.all_converged) not_converged(r, "a defect run of the ladder did not converge");
}

void run_coupled(const json& doc, ResultRecord& r) {
  const MacroModel model = model_from(doc);
  const json& c = doc["coupled"];
  const CoupledResult res = minimize_coupled(model, c["particles"].get<int>(), c["m"].get<double>(), coupled_options(c));
  r.outputs = to_json(res);
  r.tables.push_back(series("outer", "energy", res.energies));
  r.fields.emplace_back("density", density_from_wavefunction(res.state, ChargeConvention::Physical));
  if (!res.converged) not_converged(r, res.message);
}

void run_pekar_limit(const json& doc, ResultRecord& r) {
  const MacroModel model = model_from(doc);
  const DielectricOptions o = dielectric_options(doc["macro"]);
  const DielectricTensor e = model.trivial() ? DielectricTensor::identity(model.dim()) : extract_dielectric(model, o);
  const json& c = doc["coupled"];
  const PekarLimitReport rep = pekar_limit_check(model, c["particles"].get<int>(), o.m_ladder, e, coupled_options(c));
  r.outputs = to_json(rep);
  r.outputs["eps"] = to_json(e);
  r.warnings.insert(r.warnings.end(), rep.warnings.begin(), rep.warnings.end());
  Table t{"pekar_limit", {"m", "coupled", "limit", "discrepancy", "relative"}, {}};
  for (std::size_t i = 0; i < rep.m_ladder.size(); ++i)
    t.rows.push_back({rep.m_ladder[i], rep.coupled[i], rep.limit, rep.discrepancy[i], rep.relative[i]});
  r.tables.push_back(t);
  if (!rep.all_converged) not_converged(r, "a coupled minimization of the ladder did not converge");
}

}  // namespace

json to_json(const ResultRecord& r) {
  return {{"scenario", r.scenario},
          {"config_hash", r.config_hash},
          {"version", r.version},
          {"seed", r.seed ? json(*r.seed) : json(nullptr)},
          {"status", r.status},
          {"exit_code", r.exit_code},
          {"wall_time_s", r.wall_time},
          {"threads", r.threads},
          {"warnings", r.warnings},
          {"config", r.config},
          {"outputs", r.outputs}};
}

ResultRecord run_scenario(const RunConfig& c) {
  ResultRecord r;
  r.scenario = c.scenario;
  r.config_hash = c.hash;
  r.seed = c.seed;
  r.config = c.doc;
  r.threads = thread_count();
  const auto t0 = std::chrono::steady_clock::now();
  const json& doc = c.doc;
  try {
    if (c.scenario == "pekar-min") run_pekar(doc, r);
    else if (c.scenario == "npolaron") run_npolaron(doc, r);
    else if (c.scenario == "binding") run_binding(doc, r);
    else if (c.scenario == "crystal-scf") run_crystal(doc, r);
    else if (c.scenario == "defect") run_defect(doc, r);
    else if (c.scenario == "decoupling") run_decoupling(doc, r);
    else if (c.scenario == "dielectric") run_dielectric(doc, r);
    else if (c.scenario == "macrolimit") run_macrolimit(doc, r);
    else if (c.scenario == "coupled") run_coupled(doc, r);
    else if (c.scenario == "pekar-limit") run_pekar_limit(doc, r);
    else throw ConfigError(kExitInvalid, {"scenario: unknown \"" + c.scenario + "\""});
  } catch (const std::invalid_argument& e) {
    throw ConfigError(kExitInvalid, {e.what()});
  } catch (const ConfigError&) {
    throw;
  } catch (const std::runtime_error& e) {
    // H7 violations, unconverged SCF and rejected fits all end here with a record
    r.outputs = {{"error", e.what()}};
    not_converged(r, e.what());
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string write_record(const ResultRecord& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string path = (fs::path(dir) / "record.json").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(r).dump(2) << "\n";
  for (const auto& t : r.tables) io::write_csv((fs::path(dir) / (t.name + ".csv")).string(), t.header, t.rows);
  for (const auto& [name, f] : r.fields) io::write_field((fs::path(dir) / (name + ".bin")).string(), f);
  return path;
}

}  // namespace polaron

#include "polaron/config.hpp"

#include "polaron/macro.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

namespace polaron {

using json = nlohmann::json;

ConfigError::ConfigError(int code, std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string s = code == kExitParse ? "parse error" : "invalid config";
        for (const auto& p : problems) s += "\n  " + p;
        return s;
      }()),
      code_(code),
      problems_(std::move(problems)) {}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"pekar-min", "npolaron",   "binding",    "crystal-scf", "defect",
                                              "decoupling", "dielectric", "macrolimit", "coupled",     "pekar-limit"};
  return names;
}

namespace {

struct Errors {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& msg) { list.push_back(path + ": " + msg); }
};

std::string join_path(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

// Reads the fields of one object and builds its normalized copy. Keys never
// asked for are reported as unknown by finish().
class Block {
 public:
  Block(const json* src, std::string path, Errors& err) : path_(std::move(path)), err_(err) {
    if (src && !src->is_null()) {
      if (src->is_object()) src_ = src;
      else err_.add(path_, "must be an object");
    }
  }

  bool has(const std::string& k) const { return src_ && src_->contains(k); }
  const json* raw(const std::string& k) {
    used_.insert(k);
    return has(k) ? &src_->at(k) : nullptr;
  }
  std::string at(const std::string& k) const { return join_path(path_, k); }
  const std::string& path() const { return path_; }
  Errors& errors() { return err_; }

  double number(const std::string& k, std::optional<double> def, bool positive = false, bool nonneg = false) {
    const json* v = raw(k);
    double x = def.value_or(0.0);
    if (!v) {
      if (!def) err_.add(at(k), "required");
    } else if (!v->is_number()) {
      err_.add(at(k), "must be a number");
    } else {
      x = v->get<double>();
      if (!std::isfinite(x)) err_.add(at(k), "must be finite");
      else if (positive && !(x > 0.0)) err_.add(at(k), "must be > 0");
      else if (nonneg && x < 0.0) err_.add(at(k), "must be >= 0");
    }
    out[k] = x;
    return x;
  }

  int integer(const std::string& k, std::optional<int> def, int min_value) {
    const json* v = raw(k);
    int x = def.value_or(0);
    if (!v) {
      if (!def) err_.add(at(k), "required");
    } else if (!v->is_number_integer()) {
      err_.add(at(k), "must be an integer");
    } else {
      x = v->get<int>();
      if (x < min_value) err_.add(at(k), "must be >= " + std::to_string(min_value));
    }
    out[k] = x;
    return x;
  }

  std::string choice(const std::string& k, const std::string& def, const std::vector<std::string>& allowed) {
    const json* v = raw(k);
    std::string x = def;
    if (v) {
      if (!v->is_string()) {
        err_.add(at(k), "must be a string");
      } else {
        x = v->get<std::string>();
        if (std::find(allowed.begin(), allowed.end(), x) == allowed.end()) {
          std::string opts;
          for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
          err_.add(at(k), "must be one of " + opts);
          x = def;
        }
      }
    }
    out[k] = x;
    return x;
  }

  // A number expands to d copies; a list must have length d.
  std::vector<double> numbers(const std::string& k, int d, std::optional<double> def, bool positive) {
    const json* v = raw(k);
    std::vector<double> x(static_cast<std::size_t>(std::max(d, 0)), def.value_or(0.0));
    if (!v) {
      if (!def) err_.add(at(k), "required");
    } else if (v->is_number()) {
      std::fill(x.begin(), x.end(), v->get<double>());
    } else if (v->is_array() && static_cast<int>(v->size()) == d &&
               std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
      for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = v->at(static_cast<std::size_t>(a)).get<double>();
    } else {
      err_.add(at(k), "must be a number or a list of " + std::to_string(d) + " numbers");
    }
    if (positive)
      for (double e : x)
        if (!(e > 0.0)) {
          err_.add(at(k), "entries must be > 0");
          break;
        }
    out[k] = x;
    return x;
  }

  std::vector<int> integers(const std::string& k, int d, std::optional<int> def, int min_value) {
    const json* v = raw(k);
    std::vector<int> x(static_cast<std::size_t>(std::max(d, 0)), def.value_or(0));
    if (!v) {
      if (!def) err_.add(at(k), "required");
    } else if (v->is_number_integer()) {
      std::fill(x.begin(), x.end(), v->get<int>());
    } else if (v->is_array() && static_cast<int>(v->size()) == d &&
               std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number_integer(); })) {
      for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = v->at(static_cast<std::size_t>(a)).get<int>();
    } else {
      err_.add(at(k), "must be an integer or a list of " + std::to_string(d) + " integers");
    }
    for (int e : x)
      if (e < min_value) {
        err_.add(at(k), "entries must be >= " + std::to_string(min_value));
        break;
      }
    out[k] = x;
    return x;
  }

  // Free-length list of numbers.
  std::vector<double> list(const std::string& k, const std::vector<double>& def, bool positive) {
    const json* v = raw(k);
    std::vector<double> x = def;
    if (v) {
      if (!v->is_array() || v->empty() || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
        err_.add(at(k), "must be a non-empty list of numbers");
      } else {
        x = v->get<std::vector<double>>();
        if (positive && std::any_of(x.begin(), x.end(), [](double e) { return !(e > 0.0); }))
          err_.add(at(k), "entries must be > 0");
      }
    }
    out[k] = x;
    return x;
  }

  void finish() {
    if (!src_) return;
    for (const auto& [k, v] : src_->items())
      if (!used_.count(k)) err_.add(at(k), "unknown key");
  }

  json out = json::object();

 private:
  const json* src_ = nullptr;
  std::string path_;
  Errors& err_;
  std::set<std::string> used_;
};

// eps (number or d x d matrix) or alpha, exactly one.
void read_coupling(Block& b, int d) {
  const bool has_eps = b.has("eps"), has_alpha = b.has("alpha");
  if (has_eps && has_alpha) b.errors().add(b.path(), "give either eps or alpha, not both");
  if (!has_eps && !has_alpha) {
    b.errors().add(b.path(), "needs eps or alpha");
    return;
  }
  if (has_alpha) {
    b.number("alpha", std::nullopt, false, true);
    return;
  }
  const json* e = b.raw("eps");
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d);
  if (e->is_number()) {
    M *= e->get<double>();
  } else if (e->is_array() && static_cast<int>(e->size()) == d) {
    for (int i = 0; i < d; ++i) {
      const json& row = e->at(static_cast<std::size_t>(i));
      if (!row.is_array() || static_cast<int>(row.size()) != d) {
        b.errors().add(b.at("eps"), "must be a number or a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
        return;
      }
      for (int j = 0; j < d; ++j) M(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
  } else {
    b.errors().add(b.at("eps"), "must be a number or a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
    return;
  }
  try {
    DielectricTensor(M).validate();
  } catch (const std::exception& ex) {
    b.errors().add(b.at("eps"), ex.what());
  }
  json rows = json::array();
  for (int i = 0; i < d; ++i) {
    std::vector<double> r(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) r[static_cast<std::size_t>(j)] = M(i, j);
    rows.push_back(r);
  }
  b.out["eps"] = rows;
}

// Grid block; box absent means auto_box (resolved by the caller, 0 = required).
json read_grid(const json* src, Errors& err, int default_dim, double auto_box) {
  Block b(src, "grid", err);
  const int d = b.integer("dim", default_dim, 1);
  if (d > 3) err.add("grid.dim", "must be 1, 2 or 3");
  const int dd = std::clamp(d, 1, 3);
  b.integers("n", dd, std::nullopt, 4);
  if (b.has("box") || !(auto_box > 0.0)) b.numbers("box", dd, std::nullopt, true);
  else b.out["box"] = std::vector<double>(static_cast<std::size_t>(dd), auto_box);
  b.finish();
  return b.out;
}

json read_charges(const json* src, const std::string& path, int d, Errors& err, bool allow_empty) {
  json out = json::array();
  if (!src || !src->is_array()) {
    err.add(path, "must be a list of {offset, width, charge}");
    return out;
  }
  if (src->empty() && !allow_empty) err.add(path, "must not be empty");
  for (std::size_t i = 0; i < src->size(); ++i) {
    Block b(&src->at(i), path + "[" + std::to_string(i) + "]", err);
    b.numbers("offset", d, 0.0, false);
    b.number("width", std::nullopt, true);
    b.number("charge", std::nullopt);
    b.finish();
    out.push_back(b.out);
  }
  return out;
}

json read_crystal(const json* src, Errors& err) {
  Block b(src, "crystal", err);
  if (!src) err.add("crystal", "required for this scenario");
  const int d = std::clamp(b.integer("dim", 1, 1), 1, 3);
  // cell: side length, list of lengths, or matrix whose rows are the lattice vectors
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d);
  if (const json* c = b.raw("cell")) {
    if (c->is_number()) {
      A *= c->get<double>();
    } else if (c->is_array() && static_cast<int>(c->size()) == d && c->at(0).is_number()) {
      for (int a = 0; a < d; ++a) A(a, a) = c->at(static_cast<std::size_t>(a)).get<double>();
    } else if (c->is_array() && static_cast<int>(c->size()) == d) {
      for (int a = 0; a < d; ++a) {
        const json& row = c->at(static_cast<std::size_t>(a));
        if (!row.is_array() || static_cast<int>(row.size()) != d) {
          err.add("crystal.cell", "lattice vector rows must have " + std::to_string(d) + " entries");
          break;
        }
        for (int k = 0; k < d; ++k) A(k, a) = row.at(static_cast<std::size_t>(k)).get<double>();
      }
    } else {
      err.add("crystal.cell", "must be a side length, a list of lengths or a matrix of lattice vectors");
    }
  }
  if (!(std::abs(A.determinant()) > 0.0)) err.add("crystal.cell", "lattice vectors must be independent");
  json rows = json::array();
  for (int a = 0; a < d; ++a) {
    std::vector<double> r(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) r[static_cast<std::size_t>(k)] = A(k, a);
    rows.push_back(r);
  }
  b.out["cell"] = rows;

  json nuclei = json::array();
  if (const json* n = b.raw("nuclei")) {
    if (!n->is_array()) err.add("crystal.nuclei", "must be a list");
    else
      for (std::size_t i = 0; i < n->size(); ++i) {
        Block nb(&n->at(i), "crystal.nuclei[" + std::to_string(i) + "]", err);
        nb.numbers("center", d, 0.0, false);
        nb.number("width", std::nullopt, true);
        nb.number("charge", 1.0);
        nb.finish();
        nuclei.push_back(nb.out);
      }
  }
  b.out["nuclei"] = nuclei;
  b.number("background", 0.0);
  b.integer("electrons", std::nullopt, 0);
  if (b.has("jcell") && b.has("ecut")) err.add("crystal", "give either ecut or jcell, not both");
  if (b.has("jcell")) {
    const int j = b.integer("jcell", 1, 1);
    b.out.erase("jcell");
    double lmin = A.col(0).norm();
    for (int a = 1; a < d; ++a) lmin = std::min(lmin, A.col(a).norm());
    b.out["ecut"] = 0.5 * std::pow(2.0 * std::numbers::pi * j / lmin, 2) * (1.0 + 1e-9);
  } else {
    b.number("ecut", std::nullopt, true);
  }
  b.integers("kpoints", d, 1, 1);
  if (b.has("grid")) b.integers("grid", d, std::nullopt, 2);
  b.choice("mixing", "anderson", {"anderson", "linear"});
  b.number("beta", 0.1, true);
  b.integer("history", 10, 1);
  b.number("tolerance", 1e-8, true);
  b.integer("max_iterations", 200, 1);
  b.finish();

  if (err.list.empty()) {
    try {
      crystal_from(b.out).validate();
    } catch (const std::invalid_argument& e) {
      std::istringstream lines(e.what());
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) err.list.push_back("crystal." + line.substr(line.find_first_not_of(' ')));
    }
  }
  return b.out;
}

json read_npolaron(const json* src, int d, Errors& err, const std::string& charge_default) {
  Block b(src, "npolaron", err);
  if (!src) err.add("npolaron", "required for this scenario");
  b.integer("particles", 2, 1);
  read_coupling(b, d);
  b.choice("symmetry", "symmetric", {"none", "symmetric", "antisymmetric"});
  b.choice("charge", charge_default, {"paper", "physical"});
  b.choice("kernel", "auto", {"auto", "coulomb", "soft-coulomb"});
  b.number("soft_width", 1.0, true);
  b.choice("boundary", "free", {"free", "periodic"});
  b.number("initial_width", 0.0, false, true);
  b.number("spacing", 0.5, true);
  b.number("tolerance", 1e-6, true);
  b.integer("max_iterations", 10000, 1);
  b.finish();
  return b.out;
}

bool commensurate(const Eigen::MatrixXd& A, double box, double m) {
  int L = 0;
  for (int a = 0; a < A.cols(); ++a) {
    const double x = box / (m * A.col(a).norm());
    const int r = static_cast<int>(std::lround(x));
    if (r < 1 || std::abs(x - r) > 1e-9 * x || (L && r != L)) return false;
    L = r;
  }
  return true;
}

Eigen::MatrixXd cell_matrix(const json& rows) {
  const int d = static_cast<int>(rows.size());
  Eigen::MatrixXd A(d, d);
  for (int a = 0; a < d; ++a)
    for (int k = 0; k < d; ++k) A(k, a) = rows.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(k)).get<double>();
  return A;
}

json normalize(const json& j, Errors& err) {
  json out = json::object();
  if (!j.is_object()) {
    err.add("config", "must be a JSON object");
    return out;
  }
  Block top(&j, "", err);
  const std::string scenario = top.choice("scenario", "", scenario_names());
  if (!top.has("scenario")) err.add("scenario", "required");
  out["scenario"] = scenario;
  if (const json* o = top.raw("output")) {
    if (o->is_string()) out["output"] = o->get<std::string>();
    else err.add("output", "must be a string");
  } else {
    out["output"] = "polaron_out";
  }
  if (const json* s = top.raw("seed")) {
    if (s->is_number_unsigned()) out["seed"] = s->get<std::uint64_t>();
    else if (s->is_number_integer() && s->get<std::int64_t>() >= 0) out["seed"] = s->get<std::uint64_t>();
    else err.add("seed", "must be a non-negative integer");
  }
  const auto block = [&](const char* k) { return top.raw(k); };

  if (scenario == "pekar-min") {
    const json* gsrc = block("grid");
    const int d = gsrc && gsrc->is_object() && gsrc->contains("dim") && gsrc->at("dim").is_number_integer()
                      ? std::clamp(gsrc->at("dim").get<int>(), 1, 3)
                      : 3;
    Block p(block("pekar"), "pekar", err);
    if (!top.has("pekar")) err.add("pekar", "required for this scenario");
    read_coupling(p, d);
    p.choice("boundary", "free", {"free", "periodic"});
    p.choice("init", "gaussian", {"gaussian", "random"});
    p.number("initial_width", 0.0, false, true);
    p.number("tolerance", 1e-6, true);
    p.integer("max_iterations", 10000, 1);
    p.finish();
    double auto_box = 0.0;
    if (err.list.empty()) {
      const double w = p.out["initial_width"].get<double>() > 0.0 ? p.out["initial_width"].get<double>()
                                                                   : pekar_initial_width(coupling_from(p.out));
      auto_box = w < 1e3 ? 6.0 * w : 0.0;
    }
    if (!gsrc) err.add("grid", "required for this scenario");
    out["grid"] = read_grid(gsrc, err, 3, auto_box);
    out["pekar"] = p.out;
  } else if (scenario == "npolaron" || scenario == "binding") {
    const json* gsrc = block("grid");
    if (!gsrc) err.add("grid", "required for this scenario");
    out["grid"] = read_grid(gsrc, err, 1, 0.0);
    const int d = out["grid"]["dim"].get<int>();
    out["npolaron"] = read_npolaron(block("npolaron"), std::clamp(d, 1, 3), err,
                                    scenario == "binding" ? "physical" : "paper");
    if (scenario == "binding" && out["npolaron"]["particles"].get<int>() < 2)
      err.add("npolaron.particles", "binding needs at least 2 particles");
    if (err.list.empty()) {
      try {
        check_tensor_budget(out["npolaron"]["particles"].get<int>(), *grid_from(out["grid"]),
                            npolaron_options_from(out["npolaron"]));
      } catch (const std::exception& e) {
        err.add("npolaron.particles", e.what());
      }
    }
  } else if (!scenario.empty()) {
    out["crystal"] = read_crystal(block("crystal"), err);
    const int d = out["crystal"]["dim"].get<int>();
    if (scenario == "defect") {
      Block b(block("defect"), "defect", err);
      if (!top.has("defect")) err.add("defect", "required for this scenario");
      b.out["charges"] = read_charges(b.raw("charges"), "defect.charges", d, err, false);
      const json* lad = b.raw("ladder");
      std::vector<int> ladder{8, 16, 32};
      if (lad) {
        if (lad->is_array() && !lad->empty() &&
            std::all_of(lad->begin(), lad->end(), [](const json& e) { return e.is_number_integer() && e.get<int>() >= 1; }))
          ladder = lad->get<std::vector<int>>();
        else err.add("defect.ladder", "must be a non-empty list of positive integers");
      }
      b.out["ladder"] = ladder;
      b.number("threshold", 1e-4, true);
      b.finish();
      out["defect"] = b.out;
    } else if (scenario == "decoupling") {
      Block b(block("decoupling"), "decoupling", err);
      if (!top.has("decoupling")) err.add("decoupling", "required for this scenario");
      b.out["rho1"] = read_charges(b.raw("rho1"), "decoupling.rho1", d, err, false);
      b.out["rho2"] = read_charges(b.raw("rho2"), "decoupling.rho2", d, err, true);
      const json* s = b.raw("separations");
      std::vector<int> seps{2, 4, 8};
      if (s) {
        if (s->is_array() && !s->empty() &&
            std::all_of(s->begin(), s->end(), [](const json& e) { return e.is_number_integer() && e.get<int>() >= 0; }))
          seps = s->get<std::vector<int>>();
        else err.add("decoupling.separations", "must be a non-empty list of non-negative integers");
      }
      b.out["separations"] = seps;
      const int L = b.integer("supercell", 0, 0);
      const int rmax = *std::max_element(seps.begin(), seps.end());
      if (L != 0 && L < 2 * rmax)
        err.add("decoupling.supercell", "too small for the largest separation (need >= " + std::to_string(2 * rmax) + ")");
      b.finish();
      out["decoupling"] = b.out;
    } else if (scenario != "crystal-scf") {
      Block b(block("macro"), "macro", err);
      if (!top.has("macro")) err.add("macro", "required for this scenario");
      const double box = b.number("box", std::nullopt, true);
      const auto ladder = b.list("m_ladder", {0.5, 0.25, 0.125}, true);
      b.number("q_max", 2.0, true);
      b.number("fit_threshold", 0.05, true);
      json probes = json::array();
      if (const json* p = b.raw("probes")) {
        if (!p->is_array()) err.add("macro.probes", "must be a list of charge lists");
        else
          for (std::size_t i = 0; i < p->size(); ++i)
            probes.push_back(read_charges(&p->at(i), "macro.probes[" + std::to_string(i) + "]", d, err, false));
      }
      b.out["probes"] = probes;
      b.finish();
      const bool cell_ok = err.list.empty();
      if (cell_ok)
        for (std::size_t i = 0; i < ladder.size(); ++i)
          if (!commensurate(cell_matrix(out["crystal"]["cell"]), box, ladder[i]))
            err.add("macro.m_ladder[" + std::to_string(i) + "]",
                    "incommensurate scales: box / (m * cell side) is not the same integer on every axis");
      out["macro"] = b.out;

      if (scenario == "macrolimit") {
        Block ml(block("macrolimit"), "macrolimit", err);
        ml.number("psi_width", 1.0, true);
        ml.integer("grid", 64, 8);
        ml.finish();
        out["macrolimit"] = ml.out;
      } else if (scenario == "coupled" || scenario == "pekar-limit") {
        Block c(block("coupled"), "coupled", err);
        c.integer("particles", 1, 1);
        if (scenario == "coupled") {
          const double m = c.number("m", *std::min_element(ladder.begin(), ladder.end()), true);
          if (cell_ok && !commensurate(cell_matrix(out["crystal"]["cell"]), box, m))
            err.add("coupled.m", "incommensurate scales with macro.box");
        }
        c.choice("symmetry", "symmetric", {"none", "symmetric", "antisymmetric"});
        c.number("initial_width", 1.0, true);
        c.integer("max_outer", 60, 1);
        c.number("outer_tolerance", 1e-9, true);
        c.integer("inner_iterations", 400, 1);
        c.number("soft_width", 1.0, true);
        c.number("tolerance", 1e-6, true);
        c.finish();
        out["coupled"] = c.out;
      }
    }
  }
  top.finish();
  return out;
}

}  // namespace

json parse_json(const std::string& text) {
  // The callback sees every key; a per-depth set of names catches repeats.
  std::vector<std::set<std::string>> seen;
  std::vector<std::string> dups;
  auto cb = [&](int depth, json::parse_event_t ev, json& parsed) {
    switch (ev) {
      case json::parse_event_t::object_start:
        seen.resize(static_cast<std::size_t>(depth) + 1);
        seen[static_cast<std::size_t>(depth)].clear();
        break;
      case json::parse_event_t::key: {
        auto& keys = seen[static_cast<std::size_t>(depth) - 1];
        const std::string k = parsed.get<std::string>();
        if (!keys.insert(k).second) dups.push_back(k);
        break;
      }
      default:
        break;
    }
    return true;
  };
  json j;
  try {
    j = json::parse(text, cb);
  } catch (const json::parse_error& e) {
    throw ConfigError(kExitParse, {e.what()});
  }
  if (!dups.empty()) {
    std::vector<std::string> msgs;
    for (const auto& k : dups) msgs.push_back("duplicate key \"" + k + "\"");
    throw ConfigError(kExitParse, msgs);
  }
  return j;
}

RunConfig config_from_json(const json& j) {
  const json& src = j.is_object() && j.contains("config") && j.contains("config_hash") ? j.at("config") : j;
  Errors err;
  json doc = normalize(src, err);
  if (!err.list.empty()) throw ConfigError(kExitInvalid, err.list);
  RunConfig c;
  c.scenario = doc["scenario"].get<std::string>();
  c.output = doc["output"].get<std::string>();
  if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
  c.hash = config_hash(doc);
  c.doc = std::move(doc);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(kExitParse, {"cannot open " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(parse_json(ss.str()));
}

std::string config_hash(const json& normalized) {
  json h = normalized;
  h.erase("output");  // where results go is not part of the problem
  const std::string s = h.dump();
  std::uint64_t x = 14695981039346656037ull;
  for (unsigned char c : s) {
    x ^= c;
    x *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

GridPtr grid_from(const json& g) {
  const auto n = g.at("n").get<std::vector<int>>();
  return make_grid(LatticeCell::box(g.at("box").get<std::vector<double>>()), n);
}

PekarCoupling coupling_from(const json& b) {
  if (b.contains("alpha")) return PekarCoupling::isotropic(b.at("alpha").get<double>());
  const auto rows = b.at("eps").get<std::vector<std::vector<double>>>();
  const auto d = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd M(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return PekarCoupling::dielectric(DielectricTensor(M));
}

CrystalSpec crystal_from(const json& c) {
  CrystalSpec s;
  s.cell = LatticeCell(cell_matrix(c.at("cell")));
  for (const auto& n : c.at("nuclei")) {
    const auto v = n.at("center").get<std::vector<double>>();
    s.nuclei.push_back({Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
                        n.at("width").get<double>(), n.at("charge").get<double>()});
  }
  s.background = c.at("background").get<double>();
  s.electrons = c.at("electrons").get<int>();
  s.ecut = c.at("ecut").get<double>();
  s.kpoints = c.at("kpoints").get<std::vector<int>>();
  if (c.contains("grid")) s.grid = c.at("grid").get<std::vector<int>>();
  s.mixing = c.at("mixing").get<std::string>() == "linear" ? Mixing::Linear : Mixing::Anderson;
  s.mixing_beta = c.at("beta").get<double>();
  s.mixing_history = c.at("history").get<int>();
  s.tolerance = c.at("tolerance").get<double>();
  s.max_iterations = c.at("max_iterations").get<int>();
  return s;
}

std::vector<GaussianCharge> charges_from(const json& list) {
  std::vector<GaussianCharge> out;
  for (const auto& q : list) {
    const auto v = q.at("offset").get<std::vector<double>>();
    out.push_back({Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
                   q.at("width").get<double>(), q.at("charge").get<double>()});
  }
  return out;
}

NPolaronOptions npolaron_options_from(const json& b) {
  NPolaronOptions o;
  o.boundary = boundary_from_string(b.at("boundary").get<std::string>());
  o.charge = charge_convention_from_string(b.at("charge").get<std::string>());
  o.kernel = pekar_kernel_from_string(b.at("kernel").get<std::string>());
  o.soft_width = b.at("soft_width").get<double>();
  o.descent.residual_tol = b.at("tolerance").get<double>();
  o.descent.max_iterations = b.at("max_iterations").get<int>();
  return o;
}

}  // namespace polaron

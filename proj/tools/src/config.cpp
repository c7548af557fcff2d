#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace jcl::app {

namespace {

using PK = ParamKind;

const std::vector<ParamSpec> kC = {{"C", PK::NumberOrName, "geometry constant: number, zero or geometry"}};

std::vector<ParamSpec> with_c(std::vector<ParamSpec> v) {
  v.insert(v.end(), kC.begin(), kC.end());
  return v;
}

}  // namespace

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> reg = {
      {"solve", "Graphical J-curve equation",
       "Picard solve of the graphical J-curve system; convergence and optional exact-solution error",
       {{"expect_exact", PK::Bool, "compare with the trace (flat ambient, harmonic trace)"},
        {"tol_error", PK::Number, "sup-norm error bound"}}},
      {"refinement", "Graphical J-curve equation",
       "solve at h, h/2, ...; error or mean-curvature residual ratios under halving",
       {{"levels", PK::Integer, "number of grids (>= 2)"},
        {"quantity", PK::String, "error or mc_residual"},
        {"ratio_min", PK::Number, "smallest accepted ratio"},
        {"ratio_max", PK::Number, "largest accepted ratio"},
        {"h", PK::Number, "coarsest spacing (default: the grid spacing)"},
        {"trace", PK::String, "z2, z3 or plane (default: the surface trace)"}}},
      {"type1_certificates", "OrthoBoundary",
       "boundary angle, conormal derivative of beta and geodesic curvature of the segment",
       {}},
      {"second_fundamental", "Second fundamental form",
       "|B| at the centre, |A| = |B|, |grad A| = |grad B|, Gauss equation closure",
       {{"expected_B", PK::Number, "|B| at the centre"},
        {"expected_H", PK::Number, "|H| at the centre"},
        {"tol_factor", PK::Number, "tolerance factor times h^2 for |B| and |H|"}}},
      {"coarea", "coarea formula", "F(b) - F(a) against the integral of level-line weights",
       {{"n_levels", PK::Integer, "number of candidate levels"},
        {"tau_max", PK::Number, "largest level (0: automatic)"},
        {"f", PK::String, "one, one_plus_s or one_plus_beta2"}}},
      {"monotonicity", "Monotonicity - Type 0 / Monotonicity",
       "G(tau) F(tau) non-decreasing across regular levels; area corollary for f = 1",
       with_c({{"lambda", PK::Number, "Laplacian lower-bound parameter"},
               {"b", PK::Number, "outer radius"},
               {"eps", PK::Number, "area corollary epsilon"},
               {"n_levels", PK::Integer, "number of candidate levels"},
               {"f", PK::String, "one, one_plus_s or one_plus_beta2"}})},
      {"mean_value", "Mean Value Inequality", "f at the centre against the averaged integral over S_b",
       with_c({{"lambda", PK::Number, "Laplacian lower-bound parameter"},
               {"b", PK::Number, "radius"},
               {"n_levels", PK::Integer, "number of candidate levels"},
               {"f", PK::String, "one, one_plus_s or one_plus_beta2"}})},
      {"laplacian_beta", "LaplacianEstimate",
       "|Laplacian of beta^2 - 4| <= 4 C beta pointwise, and the integration-by-parts identity",
       with_c({{"r", PK::Number, "radius of S_r"}})},
      {"hessian_sandwich", "HessianEstimate", "space-form Hessian comparison values over C beta in (0, 1]",
       {{"step", PK::Number, "grid step in C beta"}},
       false},
      {"monotone_product", "AnalysisLemma1", "step-function product lemma on three constructed instances", {}, false},
      {"curvature_threshold", "Curvature Threshold",
       "empirical hbar over a degenerating family, refinement and rescaling checks",
       {{"family", PK::String, "node, critical or plane"},
        {"k_values", PK::NumberList, "family parameters"},
        {"radius_factors", PK::NumberList, "radii in units of the member length scale"},
        {"cells", PK::Integer, "cells across the member radius"},
        {"refine", PK::Bool, "repeat at half the spacing"},
        {"rescale_c", PK::Number, "metric rescaling factor for the consistency check"}},
       false},
      {"eps_regularity", "epsilon-regularity", "total curvature on S_r against the weighted curvature sup",
       {{"r", PK::Number, "radius"}, {"hbar", PK::Number, "candidate constant"}, {"c", PK::Number, "bound constant"}}},
      {"local_graph", "Uniform Local Graphs",
       "gradient, second-derivative and distance comparisons on the graphical patch at the centre",
       {}},
  };
  return reg;
}

const CheckInfo* find_check(const std::string& name) {
  for (const auto& c : check_registry())
    if (c.name == name) return &c;
  return nullptr;
}

double CheckConfig::number(const std::string& key, double fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (auto p = std::get_if<double>(&it->second)) return *p;
  throw Error(ErrorKind::ParseError, "check '" + name + "': key '" + key + "' is not a number");
}

int CheckConfig::integer(const std::string& key, int fallback) const {
  return static_cast<int>(number(key, fallback));
}

std::string CheckConfig::text(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (auto p = std::get_if<std::string>(&it->second)) return *p;
  throw Error(ErrorKind::ParseError, "check '" + name + "': key '" + key + "' is not a name");
}

bool CheckConfig::flag(const std::string& key, bool fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (auto p = std::get_if<bool>(&it->second)) return *p;
  throw Error(ErrorKind::ParseError, "check '" + name + "': key '" + key + "' is not a boolean");
}

std::vector<double> CheckConfig::numbers(const std::string& key, std::vector<double> fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (auto p = std::get_if<std::vector<double>>(&it->second)) return *p;
  throw Error(ErrorKind::ParseError, "check '" + name + "': key '" + key + "' is not a list");
}

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& msg) {
  std::ostringstream os;
  if (node.Mark().line >= 0) os << "line " << node.Mark().line + 1 << ": ";
  os << msg;
  throw Error(ErrorKind::ParseError, os.str());
}

void require_map(const YAML::Node& node, const std::string& what) {
  if (!node.IsMap()) fail(node, what + " must be a mapping");
}

void allow_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& kv : node) {
    std::string k = kv.first.as<std::string>();
    if (!allowed.count(k)) fail(kv.first, "unknown key '" + k + "' in " + where);
  }
}

double as_number(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, "key '" + key + "' must be a number");
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    fail(n, "key '" + key + "' must be a number");
  }
}

int as_int(const YAML::Node& n, const std::string& key) {
  double v = as_number(n, key);
  if (v != static_cast<int>(v)) fail(n, "key '" + key + "' must be an integer");
  return static_cast<int>(v);
}

bool as_bool(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, "key '" + key + "' must be true or false");
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    fail(n, "key '" + key + "' must be true or false");
  }
}

std::string as_text(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) fail(n, "key '" + key + "' must be a name");
  return n.as<std::string>();
}

std::vector<double> as_numbers(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) fail(n, "key '" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& e : n) out.push_back(as_number(e, key));
  return out;
}

bool is_number(const YAML::Node& n) {
  if (!n.IsScalar()) return false;
  try {
    n.as<double>();
    return true;
  } catch (const YAML::Exception&) {
    return false;
  }
}

void parse_manifold(const YAML::Node& n, ManifoldConfig& m) {
  require_map(n, "manifold");
  allow_keys(n, {"family", "dim", "eps", "rho", "gradient", "hessian", "half_width", "derivatives"}, "manifold");
  if (n["family"]) m.family = as_text(n["family"], "family");
  static const std::set<std::string> families{"flat", "perturbed_j", "conformal", "sphere"};
  if (!families.count(m.family)) fail(n["family"], "unknown manifold family '" + m.family + "'");
  if (n["dim"]) m.dim = as_int(n["dim"], "dim");
  if (m.dim < 2 || m.dim % 2) fail(n["dim"] ? n["dim"] : n, "dim must be even and >= 2");
  if (n["eps"]) m.eps = as_number(n["eps"], "eps");
  if (n["rho"]) m.rho = as_number(n["rho"], "rho");
  if (n["gradient"]) m.gradient = as_numbers(n["gradient"], "gradient");
  if (n["hessian"]) m.hessian = as_number(n["hessian"], "hessian");
  if (n["half_width"]) m.half_width = as_number(n["half_width"], "half_width");
  if (n["derivatives"]) {
    std::string d = as_text(n["derivatives"], "derivatives");
    if (d != "analytic" && d != "fd") fail(n["derivatives"], "derivatives must be analytic or fd");
    m.finite_difference = d == "fd";
  }
  if (m.family == "sphere") m.dim = 2;
}

void parse_grid(const YAML::Node& n, GridConfig& g) {
  require_map(n, "grid");
  allow_keys(n, {"shape", "r", "h"}, "grid");
  g.present = true;
  if (n["shape"]) {
    std::string s = as_text(n["shape"], "shape");
    if (s == "disc") g.shape = Shape::Disc;
    else if (s == "half_disc") g.shape = Shape::HalfDisc;
    else fail(n["shape"], "shape must be disc or half_disc");
  }
  if (n["r"]) g.r = as_number(n["r"], "r");
  if (n["h"]) g.h = as_number(n["h"], "h");
  if (!(g.r > 0) || !(g.h > 0) || g.h > g.r) fail(n, "grid needs 0 < h <= r");
}

void parse_surface(const YAML::Node& n, SurfaceConfig& s) {
  require_map(n, "surface");
  allow_keys(n, {"kind", "trace", "coeffs", "boundary", "rho"}, "surface");
  if (n["kind"]) s.kind = as_text(n["kind"], "kind");
  if (s.kind != "solve" && s.kind != "graph" && s.kind != "sphere_patch")
    fail(n["kind"], "surface kind must be solve, graph or sphere_patch");
  if (n["trace"]) {
    s.trace_name = as_text(n["trace"], "trace");
    if (s.trace_name == "z2") s.coeffs = {0.0, 0.0, 1.0};
    else if (s.trace_name == "z3") s.coeffs = {0.0, 0.0, 0.0, 1.0};
    else if (s.trace_name == "plane") s.coeffs = {0.0};
    else if (s.trace_name != "polynomial") fail(n["trace"], "trace must be z2, z3, plane or polynomial");
  }
  if (n["coeffs"]) {
    if (s.trace_name != "polynomial") fail(n["coeffs"], "coeffs need trace: polynomial");
    const YAML::Node& c = n["coeffs"];
    if (!c.IsSequence()) fail(c, "coeffs must be a list of [re, im] pairs");
    s.coeffs.clear();
    for (const auto& e : c) {
      auto v = as_numbers(e, "coeffs");
      if (v.size() != 2) fail(e, "each coefficient is a pair [re, im]");
      s.coeffs.emplace_back(v[0], v[1]);
    }
  } else if (s.trace_name == "polynomial") {
    fail(n, "trace: polynomial needs coeffs");
  }
  if (n["boundary"]) {
    std::string b = as_text(n["boundary"], "boundary");
    if (b == "dirichlet") s.boundary = BoundaryKind::Dirichlet;
    else if (b == "lagrangian") s.boundary = BoundaryKind::LagrangianMixed;
    else fail(n["boundary"], "boundary must be dirichlet or lagrangian");
  }
  if (n["rho"]) s.rho = as_number(n["rho"], "rho");
}

void parse_solver(const YAML::Node& n, SolveOptions& o) {
  require_map(n, "solver");
  allow_keys(n, {"theta", "omega", "tol_fix", "tol_pde", "tol_ell", "max_iter", "method", "mc_window"}, "solver");
  if (n["theta"]) o.theta = as_number(n["theta"], "theta");
  if (n["omega"]) o.omega = as_number(n["omega"], "omega");
  if (n["tol_fix"]) o.tol_fix = as_number(n["tol_fix"], "tol_fix");
  if (n["tol_pde"]) o.tol_pde = as_number(n["tol_pde"], "tol_pde");
  if (n["tol_ell"]) o.tol_ell = as_number(n["tol_ell"], "tol_ell");
  if (n["max_iter"]) o.max_iter = as_int(n["max_iter"], "max_iter");
  if (n["mc_window"]) o.mc_window = as_number(n["mc_window"], "mc_window");
  if (n["method"]) {
    std::string m = as_text(n["method"], "method");
    if (m == "auto") o.method = LinearMethod::Auto;
    else if (m == "direct") o.method = LinearMethod::Direct;
    else if (m == "sor") o.method = LinearMethod::SOR;
    else fail(n["method"], "method must be auto, direct or sor");
  }
}

CheckConfig parse_check(const YAML::Node& n) {
  CheckConfig c;
  c.line = n.Mark().line + 1;
  if (n.IsScalar()) {
    c.name = n.as<std::string>();
  } else {
    require_map(n, "check");
    if (!n["check"]) fail(n, "check entry needs a 'check' key");
    c.name = as_text(n["check"], "check");
  }
  const CheckInfo* info = find_check(c.name);
  if (!info) fail(n, "unknown check '" + c.name + "'");
  if (!n.IsMap()) return c;
  for (const auto& kv : n) {
    std::string k = kv.first.as<std::string>();
    if (k == "check") continue;
    const ParamSpec* spec = nullptr;
    for (const auto& p : info->params)
      if (p.key == k) spec = &p;
    if (!spec) fail(kv.first, "unknown key '" + k + "' for check '" + c.name + "'");
    const YAML::Node& v = kv.second;
    switch (spec->kind) {
      case PK::Number: c.params[k] = as_number(v, k); break;
      case PK::Integer: c.params[k] = static_cast<double>(as_int(v, k)); break;
      case PK::String: c.params[k] = as_text(v, k); break;
      case PK::Bool: c.params[k] = as_bool(v, k); break;
      case PK::NumberList: c.params[k] = as_numbers(v, k); break;
      case PK::NumberOrName:
        if (is_number(v)) {
          c.params[k] = as_number(v, k);
        } else {
          std::string s = as_text(v, k);
          if (s != "zero" && s != "geometry") fail(v, "key '" + k + "' must be a number, zero or geometry");
          c.params[k] = s;
        }
        break;
    }
  }
  return c;
}

ExperimentConfig parse_node(const YAML::Node& root, const std::string& source) {
  ExperimentConfig cfg;
  cfg.source = source;
  if (!root.IsMap()) throw Error(ErrorKind::ParseError, source + ": top level must be a mapping");
  allow_keys(root, {"manifold", "grid", "surface", "solver", "output", "checks", "deterministic"}, "config");
  if (root["manifold"]) parse_manifold(root["manifold"], cfg.manifold);
  if (root["grid"]) parse_grid(root["grid"], cfg.grid);
  if (root["surface"]) parse_surface(root["surface"], cfg.surface);
  if (root["solver"]) parse_solver(root["solver"], cfg.solver);
  if (root["output"]) cfg.output = as_text(root["output"], "output");
  if (root["deterministic"] && !as_bool(root["deterministic"], "deterministic"))
    fail(root["deterministic"], "runs are always deterministic");
  if (!root["checks"] || !root["checks"].IsSequence()) fail(root, "config needs a 'checks' list");
  for (const auto& c : root["checks"]) cfg.checks.push_back(parse_check(c));
  if (cfg.manifold.family == "sphere" && cfg.surface.kind == "solve")
    fail(root["surface"] ? root["surface"] : root, "the sphere family has no normal directions to solve for");
  for (const auto& c : cfg.checks)
    if (find_check(c.name)->needs_surface && !cfg.grid.present)
      throw Error(ErrorKind::ParseError, "line " + std::to_string(c.line) + ": check '" + c.name + "' needs a grid");
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::ParseError, source + ": line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  try {
    return parse_node(root, source);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParseError) throw;
    std::string msg = e.what();
    // Prefix the source once.
    const std::string tag = "ParseError: ";
    if (msg.rfind(tag, 0) == 0) msg = msg.substr(tag.size());
    throw Error(ErrorKind::ParseError, source + ": " + msg);
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace jcl::app

#pragma once

#include "jcl/grid.hpp"
#include "jcl/solver.hpp"

#include <complex>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace jcl::app {

enum class ParamKind { Number, Integer, String, Bool, NumberList, NumberOrName };

struct ParamSpec {
  std::string key;
  ParamKind kind;
  std::string help;
};

struct CheckInfo {
  std::string name;
  std::string anchor;
  std::string description;
  std::vector<ParamSpec> params;
  bool needs_surface = true;
};

// Every check the runner knows, in listing order.
const std::vector<CheckInfo>& check_registry();
const CheckInfo* find_check(const std::string& name);

using ParamValue = std::variant<double, std::string, bool, std::vector<double>>;

struct CheckConfig {
  std::string name;
  int line = 0;
  std::map<std::string, ParamValue> params;

  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
  bool has(const std::string& key) const { return params.count(key) > 0; }
};

struct ManifoldConfig {
  std::string family = "flat";
  int dim = 4;
  double eps = 0.02;
  double rho = 1.0;
  std::vector<double> gradient;  // conformal: a
  double hessian = 0.0;          // conformal: B = hessian * I
  double half_width = 3.0;
  bool finite_difference = false;
};

struct GridConfig {
  bool present = false;
  Shape shape = Shape::Disc;
  double r = 0.5;
  double h = 1.0 / 64;
};

struct SurfaceConfig {
  // solve | graph | sphere_patch
  std::string kind = "solve";
  // Trace x3 + i x4 = sum coeffs[k] z^k.
  std::vector<std::complex<double>> coeffs{0.0, 0.0, 1.0};
  std::string trace_name = "z2";
  BoundaryKind boundary = BoundaryKind::Dirichlet;
  double rho = 1.0;
};

struct ExperimentConfig {
  std::string source;
  ManifoldConfig manifold;
  GridConfig grid;
  SurfaceConfig surface;
  SolveOptions solver;
  std::string output = "out";
  std::vector<CheckConfig> checks;
};

// Strict parse: unknown keys, wrong types and unknown checks throw
// Error(ParseError) naming the line and key.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<string>");
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace jcl::app

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace jcl {

enum class Relation { LessEqual, GreaterEqual };

// One inequality measured against its bound.
struct Criterion {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  Relation relation = Relation::LessEqual;
  double margin = 0.0;
  bool pass = false;
};

Criterion make_criterion(std::string name, double measured, Relation rel, double bound);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct GridMeta {
  std::string shape;
  double r = 0.0;
  double h = 0.0;
  int dim = 0;
};

struct ExperimentReport {
  std::string name;
  std::string anchor;
  std::string inputs_digest;
  // Worst criterion; pass is the conjunction over all criteria.
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  bool pass = true;
  std::vector<Criterion> criteria;
  std::vector<std::pair<std::string, double>> values;
  std::vector<Series> series;
  std::vector<std::string> notes;
  bool has_grid = false;
  GridMeta grid;

  void add(Criterion c);
  void add(std::string name, double measured, Relation rel, double bound) {
    add(make_criterion(std::move(name), measured, rel, bound));
  }
  void value(std::string key, double v) { values.emplace_back(std::move(key), v); }
  double value_of(const std::string& key) const;
  const Criterion* criterion(const std::string& key) const;
  void set_grid(GridMeta g) {
    grid = std::move(g);
    has_grid = true;
  }
};

// FNV-1a 64 of a canonical input description, as 16 hex digits.
std::string digest(const std::string& text);

// 17 significant digits.
std::string fmt17(double v);
std::string fmt6(double v);

std::string to_json(const ExperimentReport& r);
ExperimentReport from_json(const std::string& text);
std::string csv_header();
// One row per criterion: name, anchor, measured, bound, margin, pass.
std::string to_csv_rows(const ExperimentReport& r);

}  // namespace jcl

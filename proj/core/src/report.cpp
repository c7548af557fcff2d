#include "jcl/report.hpp"

#include "jcl/types.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>

namespace jcl {

using ojson = nlohmann::ordered_json;

Criterion make_criterion(std::string name, double measured, Relation rel, double bound) {
  Criterion c;
  c.name = std::move(name);
  c.measured = measured;
  c.bound = bound;
  c.relation = rel;
  c.margin = rel == Relation::LessEqual ? bound - measured : measured - bound;
  // NaN never passes.
  c.pass = c.margin >= 0.0;
  return c;
}

void ExperimentReport::add(Criterion c) {
  bool first = criteria.empty();
  if (first || c.margin < margin || (!c.pass && pass)) {
    measured = c.measured;
    bound = c.bound;
    margin = c.margin;
  }
  pass = (first ? true : pass) && c.pass;
  criteria.push_back(std::move(c));
}

double ExperimentReport::value_of(const std::string& key) const {
  for (const auto& [k, v] : values)
    if (k == key) return v;
  return std::numeric_limits<double>::quiet_NaN();
}

const Criterion* ExperimentReport::criterion(const std::string& key) const {
  for (const auto& c : criteria)
    if (c.name == key) return &c;
  return nullptr;
}

std::string digest(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace {

ojson num(double v) {
  if (std::isfinite(v)) return v;
  // JSON has no inf/nan; keep them as tagged strings.
  return fmt17(v);
}

double read_num(const ojson& j) {
  if (j.is_number()) return j.get<double>();
  return std::stod(j.get<std::string>());
}

const char* rel_name(Relation r) { return r == Relation::LessEqual ? "<=" : ">="; }

}  // namespace

std::string to_json(const ExperimentReport& r) {
  ojson j;
  j["name"] = r.name;
  j["anchor"] = r.anchor;
  j["inputs_digest"] = r.inputs_digest;
  j["pass"] = r.pass;
  j["measured"] = num(r.measured);
  j["bound"] = num(r.bound);
  j["margin"] = num(r.margin);
  ojson crit = ojson::array();
  for (const auto& c : r.criteria) {
    ojson e;
    e["name"] = c.name;
    e["measured"] = num(c.measured);
    e["relation"] = rel_name(c.relation);
    e["bound"] = num(c.bound);
    e["margin"] = num(c.margin);
    e["pass"] = c.pass;
    crit.push_back(std::move(e));
  }
  j["criteria"] = std::move(crit);
  ojson vals = ojson::object();
  for (const auto& [k, v] : r.values) vals[k] = num(v);
  j["values"] = std::move(vals);
  ojson ser = ojson::array();
  for (const auto& s : r.series) {
    ojson e;
    e["name"] = s.name;
    ojson xs = ojson::array(), ys = ojson::array();
    for (double v : s.x) xs.push_back(num(v));
    for (double v : s.y) ys.push_back(num(v));
    e["x"] = std::move(xs);
    e["y"] = std::move(ys);
    ser.push_back(std::move(e));
  }
  j["series"] = std::move(ser);
  if (r.has_grid) {
    ojson g;
    g["shape"] = r.grid.shape;
    g["r"] = num(r.grid.r);
    g["h"] = num(r.grid.h);
    g["dim"] = r.grid.dim;
    j["grid"] = std::move(g);
  }
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

ExperimentReport from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("report: ") + e.what());
  }
  ExperimentReport r;
  r.name = j.at("name").get<std::string>();
  r.anchor = j.at("anchor").get<std::string>();
  r.inputs_digest = j.at("inputs_digest").get<std::string>();
  for (const auto& e : j.at("criteria")) {
    Relation rel = e.at("relation").get<std::string>() == "<=" ? Relation::LessEqual : Relation::GreaterEqual;
    r.add(make_criterion(e.at("name").get<std::string>(), read_num(e.at("measured")), rel, read_num(e.at("bound"))));
  }
  if (r.criteria.empty()) {
    r.pass = j.at("pass").get<bool>();
    r.measured = read_num(j.at("measured"));
    r.bound = read_num(j.at("bound"));
    r.margin = read_num(j.at("margin"));
  }
  for (const auto& [k, v] : j.at("values").items()) r.values.emplace_back(k, read_num(v));
  for (const auto& e : j.at("series")) {
    Series s;
    s.name = e.at("name").get<std::string>();
    for (const auto& v : e.at("x")) s.x.push_back(read_num(v));
    for (const auto& v : e.at("y")) s.y.push_back(read_num(v));
    r.series.push_back(std::move(s));
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    r.set_grid(GridMeta{g.at("shape").get<std::string>(), read_num(g.at("r")), read_num(g.at("h")), g.at("dim").get<int>()});
  }
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

std::string csv_header() { return "name,anchor,measured,bound,margin,pass\n"; }

std::string to_csv_rows(const ExperimentReport& r) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  };
  std::string out;
  if (r.criteria.empty()) {
    out += quote(r.name) + "," + quote(r.anchor) + "," + fmt17(r.measured) + "," + fmt17(r.bound) + "," +
           fmt17(r.margin) + "," + (r.pass ? "true" : "false") + "\n";
  }
  for (const auto& c : r.criteria)
    out += quote(r.name + "/" + c.name) + "," + quote(r.anchor) + "," + fmt17(c.measured) + "," + fmt17(c.bound) +
           "," + fmt17(c.margin) + "," + (c.pass ? "true" : "false") + "\n";
  return out;
}

}  // namespace jcl

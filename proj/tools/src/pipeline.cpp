#include "pipeline.hpp"

#include "plot.hpp"

#include "jcl/estimates.hpp"
#include "jcl/solver.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace jcl::app {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

namespace {

std::string describe_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const auto& m = cfg.manifold;
  os << "manifold=" << m.family << ",dim=" << m.dim << ",eps=" << fmt17(m.eps) << ",rho=" << fmt17(m.rho)
     << ",hess=" << fmt17(m.hessian) << ",hw=" << fmt17(m.half_width) << ",fd=" << m.finite_difference;
  for (double a : m.gradient) os << ",a=" << fmt17(a);
  if (cfg.grid.present)
    os << "|grid=" << (cfg.grid.shape == Shape::Disc ? "disc" : "half") << "," << fmt17(cfg.grid.r) << ","
       << fmt17(cfg.grid.h);
  os << "|surface=" << cfg.surface.kind << "," << cfg.surface.trace_name << ","
     << (cfg.surface.boundary == BoundaryKind::Dirichlet ? "D" : "L") << "," << fmt17(cfg.surface.rho);
  for (auto c : cfg.surface.coeffs) os << "," << fmt17(c.real()) << ":" << fmt17(c.imag());
  const auto& s = cfg.solver;
  os << "|solver=" << fmt17(s.theta) << "," << fmt17(s.omega) << "," << fmt17(s.tol_fix) << "," << s.max_iter << ","
     << static_cast<int>(s.method) << "," << fmt17(s.mc_window);
  return os.str();
}

std::string describe_check(const CheckConfig& c) {
  std::ostringstream os;
  os << c.name;
  for (const auto& [k, v] : c.params) {
    os << ";" << k << "=";
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, double>) os << fmt17(x);
          else if constexpr (std::is_same_v<T, std::string>) os << x;
          else if constexpr (std::is_same_v<T, bool>) os << (x ? "true" : "false");
          else
            for (double d : x) os << fmt17(d) << ",";
        },
        v);
  }
  return os.str();
}

GridMeta meta_of(const GridGeometry& g, int dim) { return GridMeta{g.shape_name(), g.r(), g.h(), dim}; }

double max_finite_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i)
    if (std::isfinite(a[i]) && std::isfinite(b[i])) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) continue;
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::nan("");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

class Pipeline {
 public:
  explicit Pipeline(const ExperimentConfig& cfg) : cfg_(cfg), base_digest_(describe_config(cfg)) {}

  ExperimentReport run(const CheckConfig& c, const fs::path& out_dir) {
    ExperimentReport r = dispatch(c, out_dir);
    if (r.inputs_digest.empty()) r.inputs_digest = digest(base_digest_ + "|" + describe_check(c));
    if (r.anchor.empty()) r.anchor = find_check(c.name)->anchor;
    return r;
  }

 private:
  const ExperimentConfig& cfg_;
  std::string base_digest_;
  std::optional<ChartManifold> manifold_;
  std::shared_ptr<const GridGeometry> grid_;
  std::optional<SolveOutcome> outcome_;
  std::optional<GridImmersion> surface_;
  std::optional<double> geometry_C_;
  std::map<std::string, std::shared_ptr<SublevelFamily>> families_;

  const ChartManifold& manifold() {
    if (!manifold_) {
      const auto& mc = cfg_.manifold;
      std::shared_ptr<const Family> fam;
      if (mc.family == "flat") {
        fam = make_flat(mc.dim);
      } else if (mc.family == "perturbed_j") {
        fam = make_perturbed_j(mc.dim, mc.eps);
      } else if (mc.family == "conformal") {
        Vec a = Vec::Zero(mc.dim);
        if (!mc.gradient.empty()) {
          if (static_cast<int>(mc.gradient.size()) != mc.dim)
            throw Error(ErrorKind::InvalidInput, "conformal gradient needs dim entries");
          for (int i = 0; i < mc.dim; ++i) a[i] = mc.gradient[i];
        }
        fam = make_conformal(mc.dim, a, mc.hessian * Mat::Identity(mc.dim, mc.dim));
      } else {
        fam = make_sphere(mc.rho);
      }
      manifold_.emplace(fam, Box::cube(fam->dim(), mc.half_width),
                        mc.finite_difference ? DerivMode::FiniteDifference : DerivMode::Analytic);
    }
    return *manifold_;
  }

  std::shared_ptr<const GridGeometry> grid_at(double h) const {
    return std::make_shared<GridGeometry>(cfg_.grid.shape, cfg_.grid.r, h);
  }

  const std::shared_ptr<const GridGeometry>& grid() {
    if (!grid_) grid_ = grid_at(cfg_.grid.h);
    return grid_;
  }

  HeightFunction trace(const std::string& name = "") {
    if (name.empty() || name == cfg_.surface.trace_name)
      return polynomial_trace(cfg_.surface.coeffs, manifold().dim());
    std::vector<std::complex<double>> c;
    if (name == "z2") c = {0.0, 0.0, 1.0};
    else if (name == "z3") c = {0.0, 0.0, 0.0, 1.0};
    else if (name == "plane") c = {0.0};
    else throw Error(ErrorKind::InvalidInput, "unknown trace '" + name + "'");
    return polynomial_trace(c, manifold().dim());
  }

  BoundaryData boundary(const std::string& name = "") {
    std::string label = name.empty() ? cfg_.surface.trace_name : name;
    return cfg_.surface.boundary == BoundaryKind::Dirichlet ? dirichlet(trace(name), label)
                                                             : lagrangian_mixed(trace(name), label);
  }

  const SolveOutcome& outcome() {
    if (cfg_.surface.kind != "solve") throw Error(ErrorKind::InvalidInput, "this check needs surface kind 'solve'");
    if (!outcome_) outcome_.emplace(jcl::solve(manifold(), grid(), boundary(), cfg_.solver));
    return *outcome_;
  }

  const GridImmersion& surface() {
    if (!surface_) {
      const auto& kind = cfg_.surface.kind;
      if (kind == "solve") surface_.emplace(outcome().immersion);
      else if (kind == "graph") surface_.emplace(graph_immersion(grid(), manifold(), trace()));
      else surface_.emplace(sphere_patch(grid(), manifold(), cfg_.surface.rho));
    }
    return *surface_;
  }

  int center() { return center_node(surface().grid()); }

  double constant_C(const CheckConfig& c) {
    std::string mode = manifold().is_flat() ? "zero" : "geometry";
    if (c.has("C")) {
      if (const auto* d = std::get_if<double>(&c.params.at("C"))) return *d;
      mode = c.text("C", mode);
    }
    if (mode == "zero") return 0.0;
    if (!geometry_C_) geometry_C_ = geometry_constant(manifold(), 256).C;
    return *geometry_C_;
  }

  Vec test_field(const std::string& name) {
    const GridImmersion& u = surface();
    const GridGeometry& G = u.grid();
    Vec f(G.size());
    if (name == "one") {
      f.setOnes();
    } else if (name == "one_plus_s") {
      for (int n = 0; n < G.size(); ++n) f[n] = 1.0 + G.s(n);
    } else if (name == "one_plus_beta2") {
      Vec b = beta_field(u, center());
      for (int n = 0; n < G.size(); ++n) f[n] = 1.0 + (std::isfinite(b[n]) ? b[n] * b[n] : 0.0);
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown test function '" + name + "'");
    }
    return f;
  }

  const SublevelFamily& family(const CheckConfig& c) {
    std::string fname = c.text("f", "one");
    SublevelOptions opt;
    opt.n_levels = c.integer("n_levels", opt.n_levels);
    opt.tau_max = c.number("tau_max", 0.0);
    std::string key = fname + "|" + std::to_string(opt.n_levels) + "|" + fmt17(opt.tau_max);
    auto it = families_.find(key);
    if (it == families_.end()) {
      auto fam = std::make_shared<SublevelFamily>(sublevel_family(surface(), center(), test_field(fname), opt));
      it = families_.emplace(key, std::move(fam)).first;
    }
    return *it->second;
  }

  double default_radius(const SublevelFamily& fam, double C) const {
    return C > 0 ? std::min(fam.tau_max, 0.9 / C) : fam.tau_max;
  }

  ExperimentReport dispatch(const CheckConfig& c, const fs::path& out_dir) {
    const std::string& n = c.name;
    if (n == "solve") return check_solve(c);
    if (n == "refinement") return check_refinement(c);
    if (n == "type1_certificates")
      return type1_certificates(outcome(), coordinate_lagrangian(manifold(), cfg_.manifold.half_width));
    if (n == "second_fundamental") return check_second_fundamental(c);
    if (n == "coarea") return coarea_report(family(c));
    if (n == "monotonicity") {
      const auto& fam = family(c);
      double C = constant_C(c);
      return monotonicity_check(fam, c.number("lambda", 0.0), c.number("b", default_radius(fam, C)), C,
                                c.number("eps", 0.1));
    }
    if (n == "mean_value") {
      const auto& fam = family(c);
      double C = constant_C(c);
      return mean_value_check(fam, c.number("lambda", 0.0), c.number("b", default_radius(fam, C)), C);
    }
    if (n == "laplacian_beta") {
      double C = constant_C(c);
      const GridGeometry& G = surface().grid();
      double cap = 0.5 * (C > 0 ? std::min(G.r(), 1.0 / C) : G.r());
      return laplacian_beta_check(surface(), center(), C, c.number("r", cap));
    }
    if (n == "hessian_sandwich") return hessian_sandwich_report(c.number("step", 1e-3));
    if (n == "monotone_product") return check_monotone_product();
    if (n == "curvature_threshold") return check_threshold(c, out_dir);
    if (n == "eps_regularity")
      return eps_regularity_check(surface(), center(), c.number("r", 0.05), c.number("hbar", 1.0),
                                  c.number("c", 1.0 / 3.0));
    if (n == "local_graph") return local_graph_certificates(surface(), center());
    throw Error(ErrorKind::InvalidInput, "no handler for check '" + n + "'");
  }

  // Sup-norm distance of the heights from the trace.
  double trace_error(const GridImmersion& u, const std::string& name = "") {
    HeightFunction tr = trace(name);
    const GridGeometry& G = u.grid();
    double e = 0.0;
    for (int k = 0; k < G.size(); ++k) {
      Vec want = tr(G.s(k), G.t(k));
      for (int i = 0; i < want.size(); ++i) e = std::max(e, std::abs(u.values()(2 + i, k) - want[i]));
    }
    return e;
  }

  void require_exact(const std::string& what) {
    if (!manifold().is_flat())
      throw Error(ErrorKind::InvalidInput, what + " needs a flat ambient (the trace is only exact there)");
  }

  ExperimentReport check_solve(const CheckConfig& c) {
    const SolveOutcome& out = outcome();
    ExperimentReport r;
    r.name = "solve";
    r.set_grid(meta_of(*grid(), manifold().dim()));
    r.add("converged", out.final_update, Relation::LessEqual, cfg_.solver.tol_fix);
    r.value("iterations", out.iterations);
    r.value("final_update", out.final_update);
    r.value("final_pde_residual", out.final_pde_residual);
    r.value("final_mc_residual", out.final_mc_residual);
    if (c.flag("expect_exact", false)) {
      require_exact("expect_exact");
      r.add("sup_error", trace_error(out.immersion), Relation::LessEqual, c.number("tol_error", 5e-5));
    }
    Series s{"update", {}, out.updates};
    for (size_t k = 0; k < out.updates.size(); ++k) s.x.push_back(static_cast<double>(k + 1));
    r.series.push_back(std::move(s));
    return r;
  }

  ExperimentReport check_refinement(const CheckConfig& c) {
    const int levels = c.integer("levels", 2);
    if (levels < 2) throw Error(ErrorKind::InvalidInput, "refinement needs levels >= 2");
    const std::string qty = c.text("quantity", "error");
    if (qty != "error" && qty != "mc_residual")
      throw Error(ErrorKind::InvalidInput, "quantity must be error or mc_residual");
    if (qty == "error") require_exact("quantity error");
    const double lo = c.number("ratio_min", 3.0), hi = c.number("ratio_max", 5.0);
    double h = c.number("h", cfg_.grid.h);
    const std::string tr = c.text("trace", "");
    const bool own_trace = !tr.empty() && tr != cfg_.surface.trace_name;

    ExperimentReport r;
    r.name = "refinement_" + qty;
    if (own_trace) r.notes.push_back("refinement measured on the " + tr + " trace");
    Series s{"residual_vs_h", {}, {}};
    for (int l = 0; l < levels; ++l, h *= 0.5) {
      bool base = l == 0 && h == cfg_.grid.h && !own_trace;
      auto G = base ? grid() : grid_at(h);
      SolveOutcome out = base ? outcome() : jcl::solve(manifold(), G, boundary(tr), cfg_.solver);
      if (!out.converged) r.notes.push_back("solve at h = " + fmt6(h) + " stopped before tol_fix");
      double q = qty == "error" ? trace_error(out.immersion, tr) : out.final_mc_residual;
      s.x.push_back(h);
      s.y.push_back(q);
      r.value(qty + "_h" + std::to_string(l), q);
      if (l == levels - 1) r.set_grid(meta_of(*G, manifold().dim()));
    }
    for (int l = 0; l + 1 < levels; ++l) {
      double ratio = s.y[l] / s.y[l + 1];
      std::string tag = "ratio_" + std::to_string(l) + "_" + std::to_string(l + 1);
      r.add(tag + "_lower", ratio, Relation::GreaterEqual, lo);
      r.add(tag + "_upper", ratio, Relation::LessEqual, hi);
    }
    r.value("slope", loglog_slope(s.x, s.y));
    r.series.push_back(std::move(s));
    return r;
  }

  ExperimentReport check_second_fundamental(const CheckConfig& c) {
    const GridImmersion& u = surface();
    const GridGeometry& G = u.grid();
    const double h = G.h();
    const int p = center();
    SurfaceData d = analyze(u);
    CurvatureField cf = second_fundamental(d, u);
    GradB gb = grad_B_norm(d, u);
    Vec defect = gauss_defect(u);
    Vec K = gauss_curvature(d, u);

    ExperimentReport r;
    r.name = "second_fundamental";
    r.set_grid(meta_of(G, u.dim()));
    const double tol = c.number("tol_factor", 10.0) * h * h;
    r.value("B_center", cf.B_norm[p]);
    r.value("H_center", cf.H[p].size() ? std::sqrt(cf.H[p].dot(d.ambient[p].g * cf.H[p])) : std::nan(""));
    r.value("K_center", K[p]);
    if (c.has("expected_B"))
      r.add("B_center_error", std::abs(cf.B_norm[p] - c.number("expected_B", 0.0)), Relation::LessEqual, tol);
    if (c.has("expected_H"))
      r.add("H_center_error", std::abs(r.value_of("H_center") - c.number("expected_H", 0.0)), Relation::LessEqual,
            tol);
    r.add("A_equals_B", max_finite_abs_diff(cf.A_norm, cf.B_norm), Relation::LessEqual, 1e-8);
    r.add("gradA_equals_gradB", max_finite_abs_diff(gb.direct, gb.dual), Relation::LessEqual, 1e-8);
    double gd = defect[p];
    if (!std::isfinite(gd)) {
      gd = window_max(G, defect, 0.5);
      r.notes.push_back("Gauss closure taken over the central half radius");
    }
    r.add("gauss_closure", gd, Relation::LessEqual, 20.0 * h);
    r.value("B_max", finite_max(cf.B_norm));

    Series heat{"B_norm", {}, {}};
    for (int n = 0; n < G.size(); ++n)
      if (std::isfinite(cf.B_norm[n])) {
        heat.x.push_back(n);
        heat.y.push_back(cf.B_norm[n]);
      }
    r.series.push_back(std::move(heat));
    return r;
  }

  // Three constructed instances with known verdicts.
  ExperimentReport check_monotone_product() {
    ExperimentReport r;
    r.name = "monotone_product";
    const int n = 81;
    std::vector<double> tau(n), one(n, 1.0), rising(n), two_step(n), tuned(n), falling(n);
    for (int k = 0; k < n; ++k) {
      double x = 2.0 + k / 40.0;
      tau[k] = x;
      rising[k] = x;
      two_step[k] = x < 3.0 ? 1.0 : 2.0;
      // Increasing for x >= 2.
      tuned[k] = std::exp(x) / (x * x);
      falling[k] = std::exp(-5.0 * x);
    }
    auto a = monotone_product(tau, one, rising);
    auto b = monotone_product(tau, two_step, tuned);
    auto c = monotone_product(tau, one, falling);
    r.add("constant_f_rising_g", a.monotone && a.regular_hypothesis ? 1.0 : 0.0, Relation::GreaterEqual, 1.0);
    r.add("two_step_f_tuned_g", b.monotone && b.regular_hypothesis ? 1.0 : 0.0, Relation::GreaterEqual, 1.0);
    r.add("falling_g_rejected", c.monotone ? 1.0 : 0.0, Relation::LessEqual, 0.0);
    return r;
  }

  ExperimentReport check_threshold(const CheckConfig& c, const fs::path& out_dir) {
    std::string fname = c.text("family", "node");
    CurveFamily fam = fname == "node"       ? CurveFamily::Node
                      : fname == "critical" ? CurveFamily::Critical
                      : fname == "plane"    ? CurveFamily::Plane
                                            : throw Error(ErrorKind::InvalidInput, "unknown family '" + fname + "'");
    ThresholdOptions opt;
    opt.k_values = c.numbers("k_values", opt.k_values);
    opt.radius_factors = c.numbers("radius_factors", opt.radius_factors);
    opt.cells = c.integer("cells", opt.cells);
    opt.refine = c.flag("refine", opt.refine);
    opt.rescale_c = c.number("rescale_c", opt.rescale_c);
    ExperimentReport r = curvature_threshold_experiment(fam, opt);

    const Series* base = nullptr;
    const Series* fine = nullptr;
    for (const auto& s : r.series) {
      if (s.name == "hbar_per_k") base = &s;
      if (s.name == "hbar_per_k_refined") fine = &s;
    }
    std::string csv = "k,hbar";
    if (fine) csv += ",hbar_refined";
    csv += "\n";
    if (base)
      for (size_t i = 0; i < base->x.size(); ++i) {
        csv += fmt17(base->x[i]) + "," + fmt17(base->y[i]);
        if (fine && i < fine->y.size()) csv += "," + fmt17(fine->y[i]);
        csv += "\n";
      }
    write_atomic(out_dir / "hbar.csv", csv);
    return r;
  }
};

}  // namespace

std::string summary_table(const std::vector<ExperimentReport>& reports) {
  size_t wn = 5, wa = 6;
  for (const auto& r : reports) {
    wn = std::max(wn, r.name.size());
    wa = std::max(wa, r.anchor.size());
  }
  auto pad = [](std::string s, size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = pad("check", wn) + "  " + pad("anchor", wa) + "  " + pad("margin", 13) + "  result\n";
  for (const auto& r : reports)
    out += pad(r.name, wn) + "  " + pad(r.anchor, wa) + "  " + pad(fmt6(r.margin), 13) + "  " +
           (r.pass ? "pass" : "FAIL") + "\n";
  int passed = 0;
  for (const auto& r : reports) passed += r.pass;
  out += std::to_string(passed) + "/" + std::to_string(reports.size()) + " checks pass\n";
  return out;
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  Pipeline pipe(cfg);
  RunResult res;
  // Stale reports from an earlier run would be picked up by plot.
  std::error_code ec;
  fs::remove_all(out_dir / "reports", ec);
  fs::remove_all(out_dir / "plots", ec);
  fs::create_directories(out_dir / "reports");

  std::string criteria = csv_header();
  std::string summary = "check,anchor,margin,pass\n";
  int index = 0;
  for (const auto& c : cfg.checks) {
    ++index;
    ExperimentReport r;
    try {
      r = pipe.run(c, out_dir);
    } catch (const Error& e) {
      throw Error(e.kind(), "check '" + c.name + "' (line " + std::to_string(c.line) + "): " + e.what());
    }
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%02d_", index);
    write_atomic(out_dir / "reports" / (prefix + r.name + ".json"), to_json(r));
    criteria += to_csv_rows(r);
    summary += r.name + ",\"" + r.anchor + "\"," + fmt6(r.margin) + "," + (r.pass ? "true" : "false") + "\n";
    log << (r.pass ? "pass " : "FAIL ") << r.name << "  margin " << fmt6(r.margin) << "\n";
    if (!r.pass) res.exit_code = kExitFail;
    res.reports.push_back(std::move(r));
  }
  write_atomic(out_dir / "criteria.csv", criteria);
  write_atomic(out_dir / "summary.csv", summary);
  std::string table = summary_table(res.reports);
  write_atomic(out_dir / "summary.txt", table);
  plot_reports(out_dir);
  log << table;
  return res;
}

}  // namespace jcl::app

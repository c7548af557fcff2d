#include "jcl/estimates.hpp"

#include "jcl/coords.hpp"
#include "jcl/parallel.hpp"

#include <algorithm>
#include <complex>
#include <cstdint>
#include <deque>
#include <mutex>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace jcl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;
constexpr double kTolPdeSlack = 1e-9;

GridMeta meta_of(const GridImmersion& u) {
  const GridGeometry& g = u.grid();
  return {g.shape_name(), g.r(), g.h(), u.dim()};
}

std::string describe(const GridImmersion& u, int center, const std::string& extra) {
  const GridGeometry& g = u.grid();
  std::ostringstream os;
  os << u.ambient().family_tag() << "|scale2=" << fmt17(u.ambient().scale2()) << "|" << g.shape_name()
     << "|r=" << fmt17(g.r()) << "|h=" << fmt17(g.h()) << "|cx=" << fmt17(g.cx()) << "|cy=" << fmt17(g.cy())
     << "|center=" << center << "|values=";
  // Cheap fingerprint of the node values.
  double acc = 0.0;
  const Mat& X = u.values();
  for (int n = 0; n < X.cols(); ++n) acc += X.col(n).sum() * (1.0 + 1e-3 * (n % 97));
  os << fmt17(acc) << "|" << extra;
  return digest(os.str());
}

struct ClipVertex {
  double s, t, f;
};

// Polygon {q <= level} of one triangle, with f carried along.
int clip_below(const std::array<double, 3>& s, const std::array<double, 3>& t, const std::array<double, 3>& f,
               const std::array<double, 3>& q, double level, std::array<ClipVertex, 4>& out) {
  int m = 0;
  for (int a = 0; a < 3; ++a) {
    int b = (a + 1) % 3;
    bool ina = q[a] <= level, inb = q[b] <= level;
    if (ina) out[m++] = {s[a], t[a], f[a]};
    if (ina != inb) {
      double w = (level - q[a]) / (q[b] - q[a]);
      out[m++] = {s[a] + w * (s[b] - s[a]), t[a] + w * (t[b] - t[a]), f[a] + w * (f[b] - f[a])};
    }
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------- P1 mesh

P1Mesh::P1Mesh(const GridImmersion& u) : grid_(u.grid_ptr()) {
  const GridGeometry& G = *grid_;
  const int N = G.size();
  s_.resize(N);
  t_.resize(N);
  for (int n = 0; n < N; ++n) {
    s_[n] = G.s(n);
    t_[n] = G.t(n);
  }
  std::vector<std::array<int, 3>> idx;
  for (int n = 0; n < N; ++n) {
    int i = G.i_of(n), j = G.j_of(n);
    int a = n, b = G.index(i + 1, j), c = G.index(i, j + 1), d = G.index(i + 1, j + 1);
    int present = (b >= 0) + (c >= 0) + (d >= 0);
    if (present == 3) {
      idx.push_back({a, b, d});
      idx.push_back({a, d, c});
    } else if (present == 2) {
      if (b >= 0 && d >= 0) idx.push_back({a, b, d});
      else if (b >= 0 && c >= 0) idx.push_back({a, b, c});
      else idx.push_back({a, d, c});
    }
  }
  // Cells whose lower-left corner is missing.
  for (int n = 0; n < N; ++n) {
    int i = G.i_of(n), j = G.j_of(n);
    int ll = G.index(i - 1, j - 1), l = G.index(i - 1, j), lo = G.index(i, j - 1);
    if (ll < 0 && l >= 0 && lo >= 0) idx.push_back({lo, n, l});
  }

  const ChartManifold& m = u.ambient();
  const Mat& X = u.values();
  tris_.resize(idx.size());
  parallel_for(static_cast<int>(idx.size()), [&](int k) {
    Triangle& T = tris_[k];
    T.v = idx[k];
    auto [a, b, c] = T.v;
    Eigen::Matrix2d P;
    P << s_[b] - s_[a], s_[c] - s_[a], t_[b] - t_[a], t_[c] - t_[a];
    T.area0 = 0.5 * std::abs(P.determinant());
    Mat E(X.rows(), 2);
    E.col(0) = X.col(b) - X.col(a);
    E.col(1) = X.col(c) - X.col(a);
    Eigen::Matrix2d Pinv = P.inverse();
    Mat Dx = E * Pinv;
    Vec centroid = (X.col(a) + X.col(b) + X.col(c)) / 3.0;
    Mat g = m.metric(centroid);
    Eigen::Matrix2d gam = Dx.transpose() * g * Dx;
    T.sqrt_det = std::sqrt(std::max(0.0, gam.determinant()));
    T.gamma_inv = gam.inverse();
    T.to_grad = Pinv.transpose();
  });
}

double P1Mesh::integrate_below(const Vec& f, const Vec& q, double level) const {
  double total = 0.0;
  std::array<ClipVertex, 4> poly;
  for (const Triangle& T : tris_) {
    auto [a, b, c] = T.v;
    std::array<double, 3> qq{q[a], q[b], q[c]};
    if (qq[0] > level && qq[1] > level && qq[2] > level) continue;
    std::array<double, 3> ff{f[a], f[b], f[c]};
    if (qq[0] <= level && qq[1] <= level && qq[2] <= level) {
      total += T.sqrt_det * T.area0 * (ff[0] + ff[1] + ff[2]) / 3.0;
      continue;
    }
    int m = clip_below({s_[a], s_[b], s_[c]}, {t_[a], t_[b], t_[c]}, ff, qq, level, poly);
    for (int k = 1; k + 1 < m; ++k) {
      const ClipVertex &p0 = poly[0], &p1 = poly[k], &p2 = poly[k + 1];
      double ar = 0.5 * std::abs((p1.s - p0.s) * (p2.t - p0.t) - (p2.s - p0.s) * (p1.t - p0.t));
      total += T.sqrt_det * ar * (p0.f + p1.f + p2.f) / 3.0;
    }
  }
  return total;
}

double P1Mesh::level_integral(const Vec& f, const Vec& q, double level, int power) const {
  double total = 0.0;
  for (const Triangle& T : tris_) {
    auto [a, b, c] = T.v;
    std::array<int, 3> v{a, b, c};
    int below = (q[a] <= level) + (q[b] <= level) + (q[c] <= level);
    if (below == 0 || below == 3) continue;
    double ps[2], pt[2], pf[2];
    int m = 0;
    for (int e = 0; e < 3 && m < 2; ++e) {
      int x = v[e], y = v[(e + 1) % 3];
      if ((q[x] <= level) == (q[y] <= level)) continue;
      double w = (level - q[x]) / (q[y] - q[x]);
      ps[m] = s_[x] + w * (s_[y] - s_[x]);
      pt[m] = t_[x] + w * (t_[y] - t_[x]);
      pf[m] = f[x] + w * (f[y] - f[x]);
      ++m;
    }
    Eigen::Vector2d d(ps[1] - ps[0], pt[1] - pt[0]);
    Eigen::Vector2d dq(q[b] - q[a], q[c] - q[a]);
    Eigen::Vector2d grad = T.to_grad * dq;
    double gnorm = std::sqrt(std::max(0.0, grad.dot(T.gamma_inv * grad)));
    // Tangent length in the induced metric: |d|_gamma = |d^perp|_{gamma^-1} sqrt(det).
    Eigen::Vector2d dperp(-d[1], d[0]);
    double ds = std::sqrt(std::max(0.0, dperp.dot(T.gamma_inv * dperp))) * T.sqrt_det;
    total += ds * 0.5 * (pf[0] + pf[1]) * std::pow(gnorm, power);
  }
  return total;
}

// ---------------------------------------------------------------- sublevel sets

int center_node(const GridGeometry& g) {
  int best = -1;
  double bd = kInf;
  for (int n = 0; n < g.size(); ++n) {
    double ds = g.s(n) - g.cx(), dt = g.t(n) - g.cy();
    double d = ds * ds + dt * dt;
    if (d < bd) {
      bd = d;
      best = n;
    }
  }
  return best;
}

Vec beta_field(const GridImmersion& u, int center) {
  if (center < 0 || center >= u.grid().size()) throw Error(ErrorKind::InvalidInput, "center node out of range");
  const ChartManifold& m = u.ambient();
  if (m.is_flat()) return distances_from(m, u.point(center), u.values(), 1.2 * u.grid().r());
  // Curved distances are expensive and several checks ask for the same
  // field; keep the last few.
  struct Entry {
    std::string key;
    Vec beta;
  };
  static std::mutex mu;
  static std::deque<Entry> cache;
  const Mat& X = u.values();
  std::uint64_t hv = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(X.data());
  for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(X.size()); ++i) hv = (hv ^ bytes[i]) * 1099511628211ull;
  std::ostringstream key;
  key << m.family().get() << "|" << fmt17(m.scale2()) << "|" << fmt17(u.grid().r()) << "|" << center << "|"
      << X.rows() << "x" << X.cols() << "|" << hv;
  {
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& e : cache)
      if (e.key == key.str()) return e.beta;
  }
  Vec beta = distances_from(m, u.point(center), X, 1.2 * u.grid().r());
  std::lock_guard<std::mutex> lock(mu);
  cache.push_back({key.str(), beta});
  if (cache.size() > 4) cache.pop_front();
  return beta;
}

namespace {

bool is_equation_node(const GridGeometry& g, int n) {
  NodeTag t = g.tag(n);
  return t == NodeTag::Interior || t == NodeTag::Segment;
}

// Largest level whose sublevel set only contains equation nodes.
double sublevel_cap(const GridGeometry& g, const Vec& beta) {
  double cap = kInf;
  for (int n = 0; n < g.size(); ++n)
    if (!is_equation_node(g, n)) cap = std::min(cap, beta[n]);
  return cap * (1.0 - 1e-9);
}

// beta values at discrete critical points: ring sign patterns with no
// change (extremum) or at least four changes (saddle).
std::vector<double> critical_values(const GridGeometry& g, const Vec& beta, int center) {
  static const int ring[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
  std::vector<double> out;
  for (int n = 0; n < g.size(); ++n) {
    if (n == center || g.tag(n) != NodeTag::Interior || !std::isfinite(beta[n])) continue;
    int i = g.i_of(n), j = g.j_of(n);
    int sg[8];
    bool ok = true;
    for (int k = 0; k < 8; ++k) {
      int m = g.index(i + ring[k][0], j + ring[k][1]);
      if (m < 0 || !std::isfinite(beta[m])) {
        ok = false;
        break;
      }
      sg[k] = beta[m] >= beta[n] ? 1 : -1;
    }
    if (!ok) continue;
    int changes = 0;
    for (int k = 0; k < 8; ++k) changes += sg[k] != sg[(k + 1) % 8];
    if (changes == 0 || changes >= 4) out.push_back(beta[n]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SublevelFamily sublevel_family(const GridImmersion& u, int center, const Vec& f, const SublevelOptions& opt) {
  const GridGeometry& G = u.grid();
  if (f.size() != G.size()) throw Error(ErrorKind::InvalidInput, "f has the wrong length");
  if (opt.n_levels < 1) throw Error(ErrorKind::InvalidInput, "n_levels must be positive");
  for (int n = 0; n < G.size(); ++n)
    if (!(f[n] >= 0.0)) throw Error(ErrorKind::NegativeF, "f < 0 at node " + std::to_string(n));

  SublevelFamily fam(u);
  fam.center = center;
  fam.p = u.point(center);
  fam.beta = beta_field(u, center);
  fam.f = f;
  fam.half = G.shape() == Shape::HalfDisc;
  NodeTag ct = G.tag(center);
  if (fam.half ? ct != NodeTag::Segment : ct != NodeTag::Interior)
    throw Error(ErrorKind::InvalidInput, fam.half ? "center must lie on the boundary segment"
                                                   : "center must be an interior node");
  fam.mesh = std::make_shared<P1Mesh>(u);
  fam.q = fam.beta.cwiseProduct(fam.beta);
  for (int n = 0; n < G.size(); ++n)
    if (!std::isfinite(fam.q[n])) fam.q[n] = kInf;

  const double h = G.h();
  double cap = sublevel_cap(G, fam.beta);
  fam.tau_max = opt.tau_max > 0 ? opt.tau_max : cap;
  if (fam.tau_max > cap) throw Error(ErrorKind::InvalidInput, "sublevel sets leave the grid below tau_max");
  fam.tau_min = 5.0 * h;
  fam.tol_coarea = opt.tol_coarea;
  fam.critical_values = critical_values(G, fam.beta, center);

  if (fam.tau_max <= fam.tau_min) throw Error(ErrorKind::NoRegularLevels, "tau_max <= 5h");
  const int L = opt.n_levels;
  for (int k = 0; k < L; ++k) {
    double tau = L == 1 ? fam.tau_max : fam.tau_min + (fam.tau_max - fam.tau_min) * k / (L - 1);
    bool regular = std::none_of(fam.critical_values.begin(), fam.critical_values.end(),
                                [&](double c) { return std::abs(c - tau) < h; });
    if (regular) fam.levels.push_back(tau);
  }
  if (fam.levels.empty()) throw Error(ErrorKind::NoRegularLevels, "every candidate level is near a critical value");

  const int m = static_cast<int>(fam.levels.size());
  fam.F.assign(m, 0.0);
  fam.boundary_weights.assign(m, 0.0);
  const P1Mesh& mesh = *fam.mesh;
  parallel_for(m, [&](int k) {
    double tau = fam.levels[k];
    fam.F[k] = mesh.integrate_below(f, fam.q, tau * tau);
    // |grad beta| = |grad beta^2| / (2 tau) on the level line.
    fam.boundary_weights[k] = 2.0 * tau * mesh.level_integral(f, fam.q, tau * tau, -1);
  });
  for (int k = 0; k + 1 < m; ++k)
    if (fam.F[k + 1] < fam.F[k]) throw Error(ErrorKind::InvalidInput, "F decreased for f >= 0");

  // Coarea cross-check between the first and last level, Simpson in tau
  // with spacing at most h/2.
  if (m >= 2) {
    double a = fam.levels.front(), b = fam.levels.back();
    int M = std::max(2, 2 * static_cast<int>(std::ceil((b - a) / h)));
    double dt = (b - a) / M;
    std::vector<double> w(M + 1);
    parallel_for(M + 1, [&](int k) {
      double tau = a + k * dt;
      w[k] = 2.0 * tau * mesh.level_integral(f, fam.q, tau * tau, -1);
    });
    double I = w[0] + w[M];
    for (int k = 1; k < M; ++k) I += (k % 2 ? 4.0 : 2.0) * w[k];
    I *= dt / 3.0;
    fam.coarea_increment = fam.F.back() - fam.F.front();
    fam.coarea_integral = I;
    fam.coarea_defect = std::abs(fam.coarea_increment - I) / std::max(std::abs(fam.coarea_increment), 1e-300);
  }
  return fam;
}

double SublevelFamily::F_at(double tau) const { return mesh->integrate_below(f, q, tau * tau); }

ExperimentReport coarea_report(const SublevelFamily& fam) {
  ExperimentReport r;
  r.name = "coarea";
  r.anchor = "coarea formula";
  r.inputs_digest = describe(fam.u, fam.center, "coarea|levels=" + std::to_string(fam.levels.size()));
  r.set_grid(meta_of(fam.u));
  r.add("coarea_defect", fam.coarea_defect, Relation::LessEqual, fam.tol_coarea);
  r.value("increment", fam.coarea_increment);
  r.value("level_integral", fam.coarea_integral);
  r.value("tau_min", fam.levels.front());
  r.value("tau_max", fam.levels.back());
  r.value("critical_values", static_cast<double>(fam.critical_values.size()));
  r.series.push_back({"F", fam.levels, fam.F});
  r.series.push_back({"level_weight", fam.levels, fam.boundary_weights});
  return r;
}

// ---------------------------------------------------------------- monotonicity

namespace {

struct HypothesisData {
  double delta_margin = 0.0;  // min over S_b of Delta f + lambda b^2 f
  double neumann = 0.0;       // max conormal derivative of f on the segment
  double slack = 0.0;
};

// Delta f >= -lambda b^2 f on S_b, and zero conormal derivative on the
// segment for the half disc; throws HypothesisFailed beyond the slack.
HypothesisData check_hypotheses(const SublevelFamily& fam, double lambda, double b) {
  const GridImmersion& u = fam.u;
  const GridGeometry& G = u.grid();
  const double h = G.h();
  HypothesisData hd;
  double fmax = fam.f.lpNorm<Eigen::Infinity>();
  hd.slack = kTolPdeSlack + 50.0 * h * h * (1.0 + fmax);
  bool constant = fam.f.maxCoeff() == fam.f.minCoeff();
  hd.delta_margin = kInf;
  if (constant) {
    hd.delta_margin = lambda * b * b * fam.f[0];
  } else {
    SurfaceData d = analyze(u);
    Vec lap = laplace_beltrami(d, u, fam.f);
    for (int n = 0; n < G.size(); ++n)
      if (fam.beta[n] <= b && std::isfinite(lap[n]))
        hd.delta_margin = std::min(hd.delta_margin, lap[n] + lambda * b * b * fam.f[n]);
    if (fam.half) {
      for (int n = 0; n < G.size(); ++n) {
        if (G.tag(n) != NodeTag::Segment || fam.beta[n] > b) continue;
        int e = G.neighbor(n, 0, 1), w = G.neighbor(n, 0, -1);
        int n1 = G.neighbor(n, 1, 1), n2 = G.neighbor(n, 1, 2);
        if (e < 0 || w < 0 || n1 < 0 || n2 < 0) continue;
        double fs = (fam.f[e] - fam.f[w]) / (2 * h);
        double ft = (-3 * fam.f[n] + 4 * fam.f[n1] - fam.f[n2]) / (2 * h);
        const Eigen::Matrix2d& gi = d.gamma_inv[n];
        double dn = (gi(1, 0) * fs + gi(1, 1) * ft) / std::sqrt(gi(1, 1));
        hd.neumann = std::max(hd.neumann, std::abs(dn));
      }
    }
  }
  if (hd.delta_margin < -hd.slack)
    throw Error(ErrorKind::HypothesisFailed, "Delta f >= -lambda b^2 f fails by " + fmt6(-hd.delta_margin));
  if (hd.neumann > hd.slack)
    throw Error(ErrorKind::HypothesisFailed, "conormal derivative of f is " + fmt6(hd.neumann) + " on the segment");
  return hd;
}

void check_radius(const SublevelFamily& fam, double b, double C) {
  if (!(b > 0)) throw Error(ErrorKind::HypothesisFailed, "b must be positive");
  if (b > fam.tau_max * (1 + 1e-12)) throw Error(ErrorKind::HypothesisFailed, "b exceeds the sublevel range");
  if (C > 0 && b > 1.0 / C) throw Error(ErrorKind::HypothesisFailed, "b exceeds 1/C");
  if (fam.levels.front() > b) throw Error(ErrorKind::NoRegularLevels, "no regular level below b");
}

}  // namespace

ExperimentReport monotonicity_check(const SublevelFamily& fam, double lambda, double b, double C, double eps_area) {
  check_radius(fam, b, C);
  HypothesisData hd = check_hypotheses(fam, lambda, b);

  auto G = [&](double tau) { return std::exp(lambda * tau / (2 * b) + 2 * C * tau) / (tau * tau); };
  std::vector<double> tau, gf;
  for (size_t k = 0; k < fam.levels.size(); ++k) {
    if (fam.levels[k] > b) break;
    tau.push_back(fam.levels[k]);
    gf.push_back(G(fam.levels[k]) * fam.F[k]);
  }
  double Fb = fam.F_at(b);
  if (tau.back() < b * (1 - 1e-12)) {
    tau.push_back(b);
    gf.push_back(G(b) * Fb);
  }
  const double gfb = gf.back();
  const double tol = kTolMono * gfb;

  double min_inc = kInf;
  for (size_t k = 0; k + 1 < gf.size(); ++k) min_inc = std::min(min_inc, gf[k + 1] - gf[k]);
  double min_pair = kInf;
  for (size_t a = 0; a < gf.size(); ++a)
    for (size_t c = a + 1; c < gf.size(); ++c) min_pair = std::min(min_pair, gf[c] - gf[a]);
  if (gf.size() < 2) min_inc = min_pair = 0.0;

  ExperimentReport r;
  r.name = fam.half ? "monotonicity_type1" : "monotonicity_type0";
  r.anchor = fam.half ? "Monotonicity" : "Monotonicity - Type 0";
  std::ostringstream extra;
  extra << "mono|lambda=" << fmt17(lambda) << "|b=" << fmt17(b) << "|C=" << fmt17(C) << "|eps=" << fmt17(eps_area);
  r.inputs_digest = describe(fam.u, fam.center, extra.str());
  r.set_grid(meta_of(fam.u));
  r.add("min_increment", min_inc, Relation::GreaterEqual, -tol);
  r.add("min_endpoint_pair", min_pair, Relation::GreaterEqual, -tol);

  // a -> 0 limit of GF is pi f(p) (half for the half disc); discretization
  // leaves a 2% allowance at tau = 5h.
  double limit = (fam.half ? 0.5 : 1.0) * kPi * fam.f[fam.center];
  r.add("limit_endpoint", gfb, Relation::GreaterEqual, 0.98 * limit);

  bool unit_f = fam.f.maxCoeff() == 1.0 && fam.f.minCoeff() == 1.0;
  if (unit_f) {
    if (std::exp(2 * C * b) <= 1 + eps_area) {
      double lower = (fam.half ? 0.5 : 1.0) * kPi * b * b / (1 + eps_area);
      r.add("area_lower_bound", Fb, Relation::GreaterEqual, lower);
    } else {
      r.notes.push_back("area corollary not applicable: exp(2Cb) > 1 + eps");
    }
  }
  r.value("lambda", lambda);
  r.value("b", b);
  r.value("C", C);
  r.value("eps_area", eps_area);
  r.value("tol_mono", tol);
  r.value("GF_b", gfb);
  r.value("F_b", Fb);
  r.value("delta_f_margin", hd.delta_margin);
  if (fam.half) r.value("conormal_df", hd.neumann);
  r.series.push_back({"GF", tau, gf});
  return r;
}

ExperimentReport mean_value_check(const SublevelFamily& fam, double lambda, double b, double C) {
  check_radius(fam, b, C);
  HypothesisData hd = check_hypotheses(fam, lambda, b);
  double eps = std::exp(2 * C * b) - 1;
  double factor = fam.half ? 2.0 : 1.0;
  double Fb = fam.F_at(b);
  double bound = factor * (1 + eps) * std::exp(lambda / 2) / (kPi * b * b) * Fb;
  double fp = fam.f[fam.center];

  ExperimentReport r;
  r.name = fam.half ? "mean_value_type1" : "mean_value_type0";
  r.anchor = "Mean Value Inequality";
  std::ostringstream extra;
  extra << "mean|lambda=" << fmt17(lambda) << "|b=" << fmt17(b) << "|C=" << fmt17(C);
  r.inputs_digest = describe(fam.u, fam.center, extra.str());
  r.set_grid(meta_of(fam.u));
  r.add("center_value", fp, Relation::LessEqual, bound);
  r.value("epsilon", eps);
  r.value("integral", Fb);
  r.value("relative_margin", fp > 0 ? bound / fp - 1 : kInf);
  r.value("delta_f_margin", hd.delta_margin);
  return r;
}

// ---------------------------------------------------------------- Laplacian comparison

ExperimentReport laplacian_beta_check(const GridImmersion& u, int center, double C, double r, const Vec& f_nonconst) {
  const GridGeometry& G = u.grid();
  double cap = G.r();
  if (C > 0) cap = std::min(cap, 1.0 / C);
  if (!(r > 0) || r > 0.5 * cap * (1 + 1e-12))
    throw Error(ErrorKind::HypothesisFailed, "r must lie in (0, min(chart radius, 1/C)/2]");
  const double h = G.h();
  const int N = G.size();
  Vec beta = beta_field(u, center);
  Vec q = beta.cwiseProduct(beta);
  SurfaceData d = analyze(u);
  Vec lap = laplace_beltrami(d, u, q);
  CurvatureField cf = second_fundamental(d, u);

  double excess = -kInf, dev = 0.0, bmax = 0.0;
  int count = 0;
  for (int n = 0; n < N; ++n) {
    if (G.tag(n) != NodeTag::Interior || !(beta[n] <= r) || !std::isfinite(lap[n])) continue;
    excess = std::max(excess, std::abs(lap[n] - 4) - 4 * C * beta[n]);
    dev = std::max(dev, std::abs(lap[n] - 4));
    if (std::isfinite(cf.B_norm[n])) bmax = std::max(bmax, cf.B_norm[n]);
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::EmptyRegion, "no interior node within r");

  ExperimentReport rep;
  rep.name = "laplacian_beta";
  rep.anchor = "LaplacianEstimate";
  std::ostringstream extra;
  extra << "lap|C=" << fmt17(C) << "|r=" << fmt17(r);
  rep.inputs_digest = describe(u, center, extra.str());
  rep.set_grid(meta_of(u));
  rep.add("laplacian_excess", excess, Relation::LessEqual, 50 * h * h * (1 + bmax * bmax));
  rep.value("max_abs_deviation", dev);
  rep.value("B_max", bmax);
  rep.value("nodes", count);

  if (G.shape() == Shape::HalfDisc) {
    rep.notes.push_back("integration by parts skipped: the sublevel set meets the boundary segment");
    return rep;
  }
  for (int n = 0; n < N; ++n)
    if (!std::isfinite(q[n])) q[n] = kInf;
  P1Mesh mesh(u);
  const double r2 = r * r;
  // |grad_S beta^2| from nodal second-order differences; the per-triangle
  // gradient is only first order on the level line.
  Vec grad_q = Vec::Constant(N, kNaN);
  {
    Mat qs = grid_first(G, q.transpose(), 0), qt = grid_first(G, q.transpose(), 1);
    for (int n = 0; n < N; ++n) {
      Eigen::Vector2d dq(qs(0, n), qt(0, n));
      grad_q[n] = std::sqrt(std::max(0.0, dq.dot(d.gamma_inv[n] * dq)));
    }
  }
  auto ibp = [&](const std::string& tag, const Vec& f, const Vec& lapf) {
    Vec lhs_f = f.cwiseProduct(lap);
    Vec rhs_f = (q.array() - r2).matrix().cwiseProduct(lapf);
    double lhs = mesh.integrate_below(lhs_f, q, r2);
    double rhs = mesh.integrate_below(rhs_f, q, r2) + mesh.level_integral(f.cwiseProduct(grad_q), q, r2, 0);
    double rel = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    rep.add("ibp_" + tag, rel, Relation::LessEqual, 0.01);
    rep.value("ibp_" + tag + "_lhs", lhs);
    rep.value("ibp_" + tag + "_rhs", rhs);
  };
  ibp("unit", Vec::Ones(N), Vec::Zero(N));
  Vec f2 = f_nonconst.size() == N ? f_nonconst : Vec((1.0 + q.array()).matrix());
  for (int n = 0; n < N; ++n)
    if (!std::isfinite(f2[n])) f2[n] = 0.0;
  ibp("nonconst", f2, laplace_beltrami(d, u, f2));
  return rep;
}

// ---------------------------------------------------------------- Hessian comparison

std::pair<double, double> hessian_spaceform_values(double C, double beta) {
  double x = C * beta;
  if (!(x > 0) || x > 1) throw Error(ErrorKind::RangeError, "C beta must lie in (0, 1]");
  double half = 0.5 * x;
  return {0.5 * C / std::tan(half), 0.5 * C / std::tanh(half)};
}

ExperimentReport hessian_sandwich_report(double step) {
  if (!(step > 0) || step > 1) throw Error(ErrorKind::RangeError, "step must lie in (0, 1]");
  double up = -kInf, lo = kInf;
  const int n = static_cast<int>(std::llround(1.0 / step));
  for (int k = 1; k <= n; ++k) {
    double x = k == n ? 1.0 : k * step;
    auto [lower, upper] = hessian_spaceform_values(1.0, x);
    up = std::max(up, x * upper - 1 - 0.5 * x);
    lo = std::min(lo, x * lower - 1 + 0.5 * x);
  }
  ExperimentReport r;
  r.name = "hessian_sandwich";
  r.anchor = "HessianEstimate";
  r.inputs_digest = digest("hessian|step=" + fmt17(step));
  r.add("upper_excess", up, Relation::LessEqual, 0.0);
  r.add("lower_excess", lo, Relation::GreaterEqual, 0.0);
  auto [l1, u1] = hessian_spaceform_values(1.0, 1.0);
  r.value("lower_at_1", l1);
  r.value("upper_at_1", u1);
  r.value("samples", n);
  return r;
}

// ---------------------------------------------------------------- step-function lemma

MonotoneProduct monotone_product(const std::vector<double>& tau, const std::vector<double>& f,
                                 const std::vector<double>& g) {
  const size_t n = tau.size();
  if (n < 2 || f.size() != n || g.size() != n) throw Error(ErrorKind::InvalidInput, "need matching samples, n >= 2");
  for (size_t k = 0; k < n; ++k) {
    if (!(f[k] >= 0) || !(g[k] >= 0)) throw Error(ErrorKind::HypothesisFailed, "f and g must be non-negative");
    if (k + 1 < n && !(tau[k + 1] > tau[k])) throw Error(ErrorKind::InvalidInput, "tau must increase");
    if (k + 1 < n && f[k + 1] < f[k]) throw Error(ErrorKind::HypothesisFailed, "f must be non-decreasing");
  }
  double scale = 0.0;
  for (size_t k = 0; k < n; ++k) scale = std::max(scale, g[k] * f[k]);
  const double tol = 1e-12 * scale;
  MonotoneProduct out{true, true};
  for (size_t k = 0; k + 1 < n; ++k) {
    double a = g[k] * f[k], b = g[k + 1] * f[k + 1];
    if (b < a - tol) out.monotone = false;
    if (f[k + 1] == f[k] && b < a - tol) out.regular_hypothesis = false;
  }
  return out;
}

bool monotone_product_check(const std::vector<double>& tau, const std::vector<double>& f,
                            const std::vector<double>& g) {
  return monotone_product(tau, f, g).monotone;
}

// ---------------------------------------------------------------- curvature threshold

double family_length_scale(CurveFamily family, double k) {
  switch (family) {
    case CurveFamily::Node: return 1.0 / std::sqrt(k);
    case CurveFamily::Critical: return 1.0 / k;
    case CurveFamily::Plane: return 1.0;
  }
  return 1.0;
}

GridImmersion curve_family_member(CurveFamily family, double k, int cells) {
  if (!(k > 0)) throw Error(ErrorKind::InvalidInput, "k must be positive");
  if (cells < 8) throw Error(ErrorKind::InvalidInput, "need at least 8 cells across the radius");
  ChartManifold flat(make_flat(4), Box::cube(4, 1e4));
  double L = family_length_scale(family, k);
  // Node: graph z2 = 1/(k z1) about the neck point z1 = k^{-1/2}; the
  // pole stays outside the disc.
  double R = 0.9 * L;
  double cx = family == CurveFamily::Node ? L : 0.0;
  auto grid = std::make_shared<GridGeometry>(Shape::Disc, R, R / cells, cx, 0.0);
  HeightFunction hf;
  switch (family) {
    case CurveFamily::Node:
      hf = [k](double s, double t) {
        std::complex<double> w = 1.0 / (k * std::complex<double>(s, t));
        Vec v(2);
        v << w.real(), w.imag();
        return v;
      };
      break;
    case CurveFamily::Critical:
      hf = [k](double s, double t) {
        std::complex<double> z(s, t);
        std::complex<double> w = k * k * z * z;
        Vec v(2);
        v << w.real(), w.imag();
        return v;
      };
      break;
    case CurveFamily::Plane:
      hf = [](double, double) { return Vec(Vec::Zero(2)); };
      break;
  }
  return graph_immersion(grid, flat, hf);
}

std::vector<ThresholdSample> threshold_samples(const GridImmersion& u, double k, const std::vector<double>& radii) {
  const GridGeometry& G = u.grid();
  const int N = G.size();
  CurvatureField cf = second_fundamental(u);
  double bmax = 0.0;
  for (int n = 0; n < N; ++n)
    if (std::isfinite(cf.B_norm[n])) bmax = std::max(bmax, cf.B_norm[n]);
  if (bmax * G.h() > 0.2) throw Error(ErrorKind::UnresolvedCurvature, "h |B| = " + fmt6(bmax * G.h()) + " > 0.2");
  // The maximum can sit on a ridge; among near-maximal nodes take the one
  // closest to the grid centre.
  int star = -1;
  double best = kInf;
  for (int n = 0; n < N; ++n) {
    if (!std::isfinite(cf.B_norm[n]) || cf.B_norm[n] < (1 - 1e-2) * bmax) continue;
    double ds = G.s(n) - G.cx(), dt = G.t(n) - G.cy();
    double d = ds * ds + dt * dt;
    if (d < best) {
      best = d;
      star = n;
    }
  }
  std::vector<ThresholdSample> out;
  if (star < 0) return out;
  Vec beta = beta_field(u, star);
  Vec q = beta.cwiseProduct(beta);
  double cap = sublevel_cap(G, beta);
  Vec b2(N);
  for (int n = 0; n < N; ++n) b2[n] = std::isfinite(cf.B_norm[n]) ? cf.B_norm[n] * cf.B_norm[n] : kNaN;
  std::unique_ptr<P1Mesh> mesh;
  for (double r : radii) {
    ThresholdSample s;
    s.k = k;
    s.r = r;
    s.B_center = cf.B_norm[star];
    s.triggered = s.B_center * r >= 1.0;
    if (s.triggered) {
      if (r > cap) throw Error(ErrorKind::InvalidInput, "S_r leaves the grid at r = " + fmt6(r));
      if (!mesh) mesh = std::make_unique<P1Mesh>(u);
      s.total_curvature = mesh->integrate_below(b2, q, r * r);
      if (!std::isfinite(s.total_curvature))
        throw Error(ErrorKind::UnresolvedCurvature, "|B| not measurable inside S_r");
    }
    out.push_back(s);
  }
  return out;
}

ExperimentReport curvature_threshold_experiment(CurveFamily family, const ThresholdOptions& opt) {
  ExperimentReport r;
  r.name = "curvature_threshold";
  r.anchor = "Curvature Threshold";
  std::ostringstream extra;
  extra << "threshold|family=" << static_cast<int>(family) << "|cells=" << opt.cells << "|refine=" << opt.refine
        << "|c=" << fmt17(opt.rescale_c) << "|k=";
  for (double k : opt.k_values) extra << fmt17(k) << ",";
  extra << "|radii=";
  for (double f : opt.radius_factors) extra << fmt17(f) << ",";
  r.inputs_digest = digest(extra.str());

  auto run = [&](int cells, std::vector<double>* per_k) {
    double hbar = kInf;
    for (double k : opt.k_values) {
      GridImmersion u = curve_family_member(family, k, cells);
      if (!r.has_grid) r.set_grid(meta_of(u));
      double L = family_length_scale(family, k);
      std::vector<double> radii;
      for (double f : opt.radius_factors) radii.push_back(f * L);
      double inf_k = kInf;
      for (const auto& s : threshold_samples(u, k, radii))
        if (s.triggered) inf_k = std::min(inf_k, s.total_curvature);
      if (per_k) per_k->push_back(inf_k);
      hbar = std::min(hbar, inf_k);
    }
    return hbar;
  };

  std::vector<double> per_k;
  double hbar = run(opt.cells, &per_k);
  if (!std::isfinite(hbar)) {
    r.notes.push_back("vacuous: no radius satisfies |B(zeta*)| >= 1/r");
    r.value("hbar", 0.0);
    return r;
  }
  r.add("hbar_positive", hbar, Relation::GreaterEqual, 1e-12);
  r.value("hbar", hbar);
  r.series.push_back({"hbar_per_k", opt.k_values, per_k});
  if (opt.refine) {
    std::vector<double> fine_k;
    double fine = run(2 * opt.cells, &fine_k);
    r.value("hbar_refined", fine);
    r.add("refinement_change", std::abs(fine / hbar - 1), Relation::LessEqual, 0.2);
    r.series.push_back({"hbar_per_k_refined", opt.k_values, fine_k});
  }

  // g -> c^2 g with r -> c r: |B| scales by 1/c and the area form by c^2.
  const double c = opt.rescale_c;
  double k0 = opt.k_values.front();
  GridImmersion u = curve_family_member(family, k0, opt.cells);
  GridImmersion uc = u.with_ambient(rescale(u.ambient(), c));
  double L = family_length_scale(family, k0);
  std::vector<double> radii, radii_c;
  for (double f : opt.radius_factors) {
    radii.push_back(f * L);
    radii_c.push_back(c * f * L);
  }
  auto a = threshold_samples(u, k0, radii);
  auto b = threshold_samples(uc, k0, radii_c);
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].triggered != b[i].triggered) worst = kInf;
    if (a[i].triggered)
      worst = std::max(worst, std::abs(b[i].total_curvature - a[i].total_curvature) / a[i].total_curvature);
  }
  r.add("rescaling_defect", worst, Relation::LessEqual, 1e-10);
  return r;
}

// ---------------------------------------------------------------- epsilon regularity

ExperimentReport eps_regularity_check(const GridImmersion& u, int center, double r, double hbar, double c) {
  const GridGeometry& G = u.grid();
  const int N = G.size();
  Vec beta = beta_field(u, center);
  Vec q = beta.cwiseProduct(beta);
  for (int n = 0; n < N; ++n)
    if (!std::isfinite(q[n])) q[n] = kInf;
  CurvatureField cf = second_fundamental(u);
  Vec b2(N);
  for (int n = 0; n < N; ++n) b2[n] = std::isfinite(cf.B_norm[n]) ? cf.B_norm[n] * cf.B_norm[n] : kNaN;
  P1Mesh mesh(u);
  double total = mesh.integrate_below(b2, q, r * r);

  // max over sigma = jh in [0, r] of sigma^2 sup_{S_{r - sigma}} |B|^2
  const double h = G.h();
  double lhs = 0.0;
  for (int j = 0; j * h <= r; ++j) {
    double sigma = j * h, sup = 0.0;
    for (int n = 0; n < N; ++n)
      if (beta[n] <= r - sigma && std::isfinite(b2[n])) sup = std::max(sup, b2[n]);
    lhs = std::max(lhs, sigma * sigma * sup);
  }
  bool antecedent = total <= hbar;
  bool consequent = lhs <= c * c;

  ExperimentReport rep;
  rep.name = "eps_regularity";
  rep.anchor = "epsilon-regularity";
  std::ostringstream extra;
  extra << "epsreg|r=" << fmt17(r) << "|hbar=" << fmt17(hbar) << "|c=" << fmt17(c);
  rep.inputs_digest = describe(u, center, extra.str());
  rep.set_grid(meta_of(u));
  rep.value("total_curvature", total);
  rep.value("weighted_sup", lhs);
  rep.value("antecedent", antecedent);
  rep.value("consequent", consequent);
  if (antecedent) {
    rep.add("weighted_sup", lhs, Relation::LessEqual, c * c);
  } else {
    rep.notes.push_back("vacuous: total curvature exceeds the candidate");
  }
  rep.notes.push_back("empirical evidence only; the constant is not certified");
  return rep;
}

// ---------------------------------------------------------------- local graphs

ExperimentReport local_graph_certificates(const GridImmersion& u0, int center) {
  const GridGeometry& G = u0.grid();
  const int N = G.size();
  const bool half = G.shape() == Shape::HalfDisc;
  SurfaceData d0 = analyze(u0);
  CurvatureField cf0 = second_fundamental(d0, u0);
  double bmax = 0.0;
  for (int n = 0; n < N; ++n)
    if (std::isfinite(cf0.B_norm[n])) bmax = std::max(bmax, cf0.B_norm[n]);
  const double c = std::max(1.0, bmax);
  GridImmersion u = c == 1.0 ? u0 : u0.with_ambient(rescale(u0.ambient(), c));
  SurfaceData d = analyze(u);
  if (!d.valid[center]) throw Error(ErrorKind::PatchTooSmall, "center node is not measurable");

  // Tangent coordinates rho and heights w from the metric at the centre.
  const Vec p = u.point(center);
  const Mat g = u.ambient().metric(p);
  const int D = u.dim();
  Mat E(D, 2);
  E.col(0) = d.xs.col(center);
  E.col(1) = d.xt.col(center);
  Mat basis = Mat::Identity(D, D);
  basis.leftCols(2) = E;
  // Gram-Schmidt in g, tangent first.
  Mat Q(D, D);
  int cols = 0;
  for (int k = 0; k < D && cols < D; ++k) {
    Vec v = basis.col(k);
    for (int j = 0; j < cols; ++j) v -= Q.col(j).dot(g * v) * Q.col(j);
    double nv = std::sqrt(v.dot(g * v));
    if (nv < 1e-8) continue;
    Q.col(cols++) = v / nv;
  }
  Mat coords = Q.transpose() * g;  // rows: rho1, rho2, w...
  Mat Y(D, N);
  for (int n = 0; n < N; ++n) Y.col(n) = coords * (u.point(n) - p);
  Mat rho = Y.topRows(2), w = Y.bottomRows(D - 2);
  Vec rnorm(N);
  for (int n = 0; n < N; ++n) rnorm[n] = rho.col(n).norm();

  // Patch: |rho| <= R inside the equation nodes with an orientation
  // preserving projection.
  Mat rs = grid_first(G, rho, 0), rt = grid_first(G, rho, 1);
  double R = std::min(1.0, c * G.r());
  for (int n = 0; n < N; ++n) {
    if (n == center) continue;
    bool bad = !is_equation_node(G, n) || !d.valid[n];
    if (!bad) {
      Eigen::Matrix2d P;
      P << rs(0, n), rt(0, n), rs(1, n), rt(1, n);
      bad = !(P.determinant() > 0);
    }
    if (bad) R = std::min(R, 0.9 * rnorm[n]);
  }
  std::vector<int> patch;
  for (int n = 0; n < N; ++n)
    if (rnorm[n] <= R) patch.push_back(n);
  if (patch.size() < 25) throw Error(ErrorKind::PatchTooSmall, "graphical patch has fewer than 25 nodes");

  // Heights as functions of rho: first and second derivatives by the chain rule.
  Mat ws = grid_first(G, w, 0), wt = grid_first(G, w, 1);
  Mat wss = grid_second(G, w, 0), wtt = grid_second(G, w, 1), wst = grid_mixed(G, w, 0, 1);
  Mat rss = grid_second(G, rho, 0), rtt = grid_second(G, rho, 1), rst = grid_mixed(G, rho, 0, 1);
  double grad2 = 0.0, second = 0.0;
  for (int n : patch) {
    Eigen::Matrix2d P;
    P << rs(0, n), rt(0, n), rs(1, n), rt(1, n);
    Eigen::Matrix2d Pinv = P.inverse();
    double sum = 0.0;
    for (int i = 0; i < D - 2; ++i) {
      Eigen::RowVector2d dw(ws(i, n), wt(i, n));
      Eigen::RowVector2d dr = dw * Pinv;
      sum += dr.squaredNorm();
      Eigen::Matrix2d Hst;
      Hst << wss(i, n), wst(i, n), wst(i, n), wtt(i, n);
      for (int k = 0; k < 2; ++k) {
        Eigen::Matrix2d Hr;
        Hr << rss(k, n), rst(k, n), rst(k, n), rtt(k, n);
        Hst -= dr[k] * Hr;
      }
      Eigen::Matrix2d Hrho = Pinv.transpose() * Hst * Pinv;
      second = std::max(second, Hrho.cwiseAbs().maxCoeff());
    }
    grad2 = std::max(grad2, sum);
  }

  // Distances from the centre, in the rescaled metric: chord (extrinsic,
  // a lower bound for intrinsic) and the length of the image of the
  // straight parameter segment (an upper bound).
  Vec chord = distances_from(u.ambient(), p, u.values(), 1.2 * c * G.r());
  auto path_length = [&](int n) {
    const int steps = std::max(4, 4 * (std::abs(G.i_of(n) - G.i_of(center)) + std::abs(G.j_of(n) - G.j_of(center))));
    double s0 = G.s(center), t0 = G.t(center), s1 = G.s(n), t1 = G.t(n);
    auto at = [&](double s, double t) {
      // Bilinear interpolation in the lattice cell.
      double fi = (s - G.cx()) / G.h(), fj = (t - G.cy()) / G.h();
      int i = static_cast<int>(std::floor(fi)), j = static_cast<int>(std::floor(fj));
      double a = fi - i, b = fj - j;
      int n00 = G.index(i, j), n10 = G.index(i + 1, j), n01 = G.index(i, j + 1), n11 = G.index(i + 1, j + 1);
      if (n00 < 0 || n10 < 0 || n01 < 0 || n11 < 0) return Vec(Vec::Constant(D, kNaN));
      return Vec((1 - a) * (1 - b) * u.point(n00) + a * (1 - b) * u.point(n10) + (1 - a) * b * u.point(n01) +
                 a * b * u.point(n11));
    };
    double len = 0.0;
    Vec prev = u.point(center);
    for (int k = 1; k <= steps; ++k) {
      double w = double(k) / steps;
      Vec x = k == steps ? u.point(n) : at(s0 + w * (s1 - s0), t0 + w * (t1 - t0));
      Vec dx = x - prev;
      Mat gm = u.ambient().metric(0.5 * (x + prev));
      len += std::sqrt(dx.dot(gm * dx));
      prev = x;
    }
    return len;
  };

  double p6_lo = kInf, p6_hi = 0.0, p8_lo = kInf, p8_hi = 0.0;
  std::vector<double> path(N, kNaN);
  for (int n : patch) {
    if (n == center) continue;
    double pr = path_length(n);
    path[n] = pr;
    p6_lo = std::min(p6_lo, chord[n] / rnorm[n]);
    p6_hi = std::max(p6_hi, pr / rnorm[n]);
    p8_lo = std::min(p8_lo, chord[n] / rnorm[n]);
    p8_hi = std::max(p8_hi, chord[n] / rnorm[n]);
  }

  // S_{r/2} sits inside the intrinsic r-ball, r = min(1/10, patch radius).
  double rin = std::min(0.1, R);
  double incl = 0.0;
  int incl_nodes = 0;
  for (int n : patch)
    if (n != center && chord[n] <= rin / 2) {
      incl = std::max(incl, path[n] / rin);
      ++incl_nodes;
    }

  const std::string P = half ? "PL" : "P";
  ExperimentReport rep;
  rep.name = half ? "local_graph_type1" : "local_graph_type0";
  rep.anchor = half ? "Uniform Local Graphs with Lagrangian Boundary" : "Uniform Local Graphs";
  rep.inputs_digest = describe(u0, center, "localgraph");
  rep.set_grid(meta_of(u0));
  rep.add(P + (half ? "7" : "5") + "_gradient", grad2, Relation::LessEqual, 1.0);
  rep.add(P + (half ? "8" : "6") + "_intrinsic_lower", p6_lo, Relation::GreaterEqual, 0.5);
  rep.add(P + (half ? "8" : "6") + "_intrinsic_upper", p6_hi, Relation::LessEqual, 2.0);
  rep.add(P + (half ? "9" : "7") + "_second_derivative", second, Relation::LessEqual, 10.0);
  rep.add(P + (half ? "10" : "8") + "_extrinsic_lower", p8_lo, Relation::GreaterEqual, 0.5);
  rep.add(P + (half ? "10" : "8") + "_extrinsic_upper", p8_hi, Relation::LessEqual, 2.0);
  if (incl_nodes > 0) rep.add("half_ball_inclusion", incl, Relation::LessEqual, 1.0);
  else rep.notes.push_back("half-ball inclusion vacuous: no node within r/2 at this resolution");
  rep.value("rescale_factor", c);
  rep.value("patch_radius", R);
  rep.value("patch_nodes", static_cast<double>(patch.size()));
  return rep;
}

}  // namespace jcl

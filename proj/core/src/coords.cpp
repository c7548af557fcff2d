#include "jcl/coords.hpp"

#include "jcl/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace jcl {

namespace {

// State layout: [x, v, w_1, ..., w_k].
struct GeodesicSystem {
  const ChartManifold& m;
  int n;
  int carried;

  void rhs(const Vec& y, Vec& dy) const {
    Vec x = y.head(n);
    if (!m.in_domain(x)) throw Error(ErrorKind::LeftDomain, "geodesic left the chart box");
    Tensor3 G = m.christoffel_unchecked(x);
    Vec v = y.segment(n, n);
    dy.resize(y.size());
    dy.head(n) = v;
    Mat Gv = G.contract_first(v);  // (Gv)^a_c = Gamma^a_{b c} v^b
    dy.segment(n, n) = -Gv * v;
    for (int k = 0; k < carried; ++k) dy.segment((2 + k) * n, n) = -Gv * y.segment((2 + k) * n, n);
  }
};

template <class Sys>
Vec rk4_step(const Sys& sys, const Vec& y, double h) {
  Vec k1, k2, k3, k4;
  sys.rhs(y, k1);
  sys.rhs(y + 0.5 * h * k1, k2);
  sys.rhs(y + 0.5 * h * k2, k3);
  sys.rhs(y + h * k3, k4);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates y' = f(y) on [0, 1]. Step doubling error control in adaptive
// mode; `monitor` is called after each accepted step.
template <class Sys, class Monitor>
Vec integrate(const Sys& sys, Vec y, const OdeOptions& opt, int& steps, Monitor monitor) {
  steps = 0;
  if (opt.fixed_steps > 0) {
    double h = 1.0 / opt.fixed_steps;
    for (int i = 0; i < opt.fixed_steps; ++i) {
      y = rk4_step(sys, y, h);
      ++steps;
      monitor(y);
    }
    return y;
  }
  double t = 0.0;
  double h = 0.1;
  while (t < 1.0) {
    if (steps >= opt.max_steps) throw Error(ErrorKind::StepUnderflow, "max ODE steps exceeded");
    h = std::min(h, 1.0 - t);
    if (h < 1e-13) throw Error(ErrorKind::StepUnderflow, "ODE step underflow");
    Vec full = rk4_step(sys, y, h);
    Vec half = rk4_step(sys, rk4_step(sys, y, 0.5 * h), 0.5 * h);
    double scale = std::max(1.0, half.lpNorm<Eigen::Infinity>());
    double err = (half - full).lpNorm<Eigen::Infinity>() / 15.0;
    double tol = opt.rel_tol * scale;
    if (err <= tol) {
      t += h;
      y = half + (half - full) / 15.0;
      ++steps;
      monitor(y);
      double fac = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 4.0;
      h *= std::clamp(fac, 0.2, 4.0);
    } else {
      double fac = 0.9 * std::pow(tol / err, 0.2);
      h *= std::clamp(fac, 0.1, 0.9);
    }
  }
  return y;
}

}  // namespace

GeodesicResult geodesic(const ChartManifold& m, const Vec& p, const Vec& X, const std::vector<Vec>& carry,
                        const OdeOptions& opt) {
  int n = m.dim();
  GeodesicResult out;
  if (!m.in_domain(p)) throw Error(ErrorKind::LeftDomain, "geodesic start outside the chart box");
  if (m.is_flat() || X.lpNorm<Eigen::Infinity>() == 0.0) {
    out.x = p + X;
    out.v = X;
    out.transported = carry;
    if (!m.in_domain(out.x)) throw Error(ErrorKind::LeftDomain, "geodesic left the chart box");
    return out;
  }
  int k = static_cast<int>(carry.size());
  Vec y(n * (2 + k));
  y.head(n) = p;
  y.segment(n, n) = X;
  for (int i = 0; i < k; ++i) y.segment((2 + i) * n, n) = carry[i];
  GeodesicSystem sys{m, n, k};
  double speed0 = std::sqrt(X.dot(m.metric(p) * X));
  double drift = 0.0;
  int steps = 0;
  y = integrate(sys, y, opt, steps, [&](const Vec& s) {
    if (opt.fixed_steps > 0) return;
    Vec x = s.head(n), v = s.segment(n, n);
    double sp = std::sqrt(v.dot(m.metric(x) * v));
    drift = std::max(drift, std::abs(sp / speed0 - 1.0));
  });
  out.x = y.head(n);
  out.v = y.segment(n, n);
  for (int i = 0; i < k; ++i) out.transported.push_back(y.segment((2 + i) * n, n));
  out.steps = steps;
  out.speed_drift = drift;
  return out;
}

Vec exp_map(const ChartManifold& m, const Vec& p, const Vec& X, const OdeOptions& opt) {
  return geodesic(m, p, X, {}, opt).x;
}

namespace {
struct SegmentTransport {
  const ChartManifold& m;
  Vec a, d;
  void rhs(const Vec& w, Vec& dw) const {
    // w holds [t, vector]; t advances at unit rate.
    int n = m.dim();
    Vec x = a + w[0] * d;
    if (!m.in_domain(x)) throw Error(ErrorKind::LeftDomain, "transport path left the chart box");
    Tensor3 G = m.christoffel_unchecked(x);
    dw.resize(n + 1);
    dw[0] = 1.0;
    dw.tail(n) = -G.contract_first(d) * w.tail(n);
  }
};
}  // namespace

Vec parallel_transport(const ChartManifold& m, const std::vector<Vec>& path, const Vec& v, const OdeOptions& opt) {
  for (const Vec& q : path)
    if (!m.in_domain(q)) throw Error(ErrorKind::LeftDomain, "transport path left the chart box");
  if (m.is_flat()) return v;
  int n = m.dim();
  Vec w = v;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    SegmentTransport sys{m, path[i], path[i + 1] - path[i]};
    Vec y(n + 1);
    y[0] = 0.0;
    y.tail(n) = w;
    int steps = 0;
    y = integrate(sys, y, opt, steps, [](const Vec&) {});
    w = y.tail(n);
  }
  return w;
}

// ---------------------------------------------------------------- charts

NormalChart::NormalChart(ChartManifold m, Vec center, Mat frame, ChartKind kind, int n_tangent)
    : m_(std::move(m)), center_(std::move(center)), frame_(std::move(frame)), kind_(kind), n_tangent_(n_tangent) {}

Vec NormalChart::forward(const Vec& X) const {
  OdeOptions opt;
  opt.fixed_steps = steps_;
  if (kind_ == ChartKind::Plain) return exp_map(m_, center_, frame_ * X, opt);
  int n = m_.dim();
  Vec ell = Vec::Zero(n), nu = Vec::Zero(n);
  for (int k = 0; k < n; k += 2) {
    ell += X[k] * frame_.col(k);
    nu += X[k + 1] * frame_.col(k + 1);
  }
  GeodesicResult along = geodesic(m_, center_, ell, {nu}, opt);
  return exp_map(m_, along.x, along.transported[0], opt);
}

Mat NormalChart::jacobian(const Vec& X, double step) const {
  int n = m_.dim();
  Mat Jm(n, n);
  for (int c = 0; c < n; ++c) {
    Vec e = Vec::Unit(n, c) * step;
    Jm.col(c) = (-forward(X + 2 * e) + 8 * forward(X + e) - 8 * forward(X - e) + forward(X - 2 * e)) / (12 * step);
  }
  return Jm;
}

Mat NormalChart::chart_metric(const Vec& X) const {
  double step = 1e-3 * std::sqrt(m_.metric(center_).diagonal().maxCoeff());
  Mat Jm = jacobian(X, step);
  return Jm.transpose() * m_.metric(forward(X)) * Jm;
}

Tensor3 NormalChart::chart_christoffel(const Vec& X) const {
  int n = m_.dim();
  // Flat ambient: the chart is affine, so the symbols vanish identically.
  if (m_.is_flat()) return Tensor3(n);
  double d = 1e-3 * std::sqrt(m_.metric(center_).diagonal().maxCoeff());
  // Second derivatives of the chart map, 4th-order stencils.
  const std::array<double, 4> off{2.0, 1.0, -1.0, -2.0};
  const std::array<double, 4> wt{-1.0, 8.0, -8.0, 1.0};
  Vec f0 = forward(X);
  Mat Jm = Mat::Zero(n, n);
  std::vector<std::vector<Vec>> H(n, std::vector<Vec>(n, Vec::Zero(n)));
  std::vector<std::array<Vec, 4>> axis(n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 4; ++a) axis[i][a] = forward(X + off[a] * d * Vec::Unit(n, i));
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 4; ++a) Jm.col(i) += wt[a] * axis[i][a];
    Jm.col(i) /= 12 * d;
    H[i][i] = (-axis[i][0] + 16 * axis[i][1] - 30 * f0 + 16 * axis[i][2] - axis[i][3]) / (12 * d * d);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Vec acc = Vec::Zero(n);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          acc += wt[a] * wt[b] * forward(X + off[a] * d * Vec::Unit(n, i) + off[b] * d * Vec::Unit(n, j));
      H[i][j] = H[j][i] = acc / (144 * d * d);
    }
  Tensor3 G = m_.christoffel_unchecked(f0);
  Mat Jinv = Jm.inverse();
  Tensor3 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec v = H[i][j] + G.apply(Jm.col(i), Jm.col(j));
      Vec w = Jinv * v;
      for (int k = 0; k < n; ++k) out(k, i, j) = w[k];
    }
  return out;
}

Vec NormalChart::inverse(const Vec& q, const Vec* guess, Mat* jac) const {
  int n = m_.dim();
  ++stats_.inverse_calls;
  Mat g0 = m_.metric(center_);
  Mat Einv = frame_.transpose() * g0;
  Vec X = guess ? *guess : Vec(Einv * (q - center_));
  auto resid = [&](const Vec& Y, Vec& F) -> bool {
    try {
      F = forward(Y) - q;
      return true;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::LeftDomain) return false;
      throw;
    }
  };
  Vec F;
  if (!resid(X, F)) throw Error(ErrorKind::ShootingDiverged, "initial shooting guess leaves the chart");
  double scale = std::max(1.0, X.norm());
  auto fd_jacobian = [&](const Vec& Y, const Vec& FY) {
    Mat B(n, n);
    double step = 1e-7 * std::max(1.0, Y.norm());
    for (int c = 0; c < n; ++c) {
      Vec Fc;
      Vec Yc = Y + step * Vec::Unit(n, c);
      if (!resid(Yc, Fc)) {
        Yc = Y - step * Vec::Unit(n, c);
        if (!resid(Yc, Fc)) throw Error(ErrorKind::ShootingDiverged, "Jacobian probe leaves the chart");
        B.col(c) = (FY - Fc) / step;
      } else {
        B.col(c) = (Fc - FY) / step;
      }
    }
    return B;
  };
  Mat B = m_.is_flat() ? frame_ : (jac && jac->rows() == n ? *jac : fd_jacobian(X, F));
  bool fresh = !(jac && jac->rows() == n);
  auto done = [&]() {
    if (jac) *jac = B;
    return X;
  };
  for (int it = 0; it < 60; ++it) {
    ++stats_.newton_iterations;
    Vec dX = -B.partialPivLu().solve(F);
    if (dX.norm() <= 0.1 * kTolChart * scale && F.norm() <= kTolChart) return done();
    double lam = 1.0;
    Vec Xn, Fn;
    bool ok = false;
    for (int k = 0; k < 30; ++k) {
      Xn = X + lam * dX;
      if (resid(Xn, Fn) && Fn.norm() < F.norm() * (1.0 - 1e-4 * lam) + 1e-15) {
        ok = true;
        break;
      }
      lam *= 0.5;
    }
    if (!ok) {
      if (F.norm() <= kTolChart * 1e-2) return done();
      if (fresh) throw Error(ErrorKind::ShootingDiverged, "damped Newton made no progress");
      B = fd_jacobian(X, F);
      fresh = true;
      continue;
    }
    Vec s = Xn - X;
    Vec yv = Fn - F;
    // Broyden rank-one update.
    B += ((yv - B * s) * s.transpose()) / s.squaredNorm();
    fresh = false;
    X = Xn;
    F = Fn;
    if (s.norm() <= 0.1 * kTolChart * scale && F.norm() <= kTolChart) return done();
  }
  throw Error(ErrorKind::ShootingDiverged, "shooting did not converge");
}

double estimate_injectivity(const NormalChart& chart, double r_max) {
  int n = chart.manifold().dim();
  std::vector<Vec> dirs;
  for (int k = 0; k < 16; ++k) {
    Vec u(n);
    if (n == 2) {
      double a = 2.0 * M_PI * k / 16.0;
      u << std::cos(a), std::sin(a);
    } else {
      static constexpr std::array<int, 8> primes{2, 3, 5, 7, 11, 13, 17, 19};
      for (int c = 0; c < n; ++c) u[c] = 2.0 * halton(k + 1, primes[c % 8]) - 1.0;
      u.normalize();
    }
    dirs.push_back(u);
  }
  double best = 0.0;
  for (double frac : {0.125, 0.25, 0.5, 0.75, 1.0}) {
    double r = frac * r_max;
    bool ok = true;
    for (const Vec& u : dirs) {
      try {
        Vec X = r * u;
        Vec q = chart.forward(X);
        Vec back = chart.inverse(q);
        if ((back - X).norm() > 1e-6 * std::max(1.0, r)) ok = false;
      } catch (const Error&) {
        ok = false;
      }
      if (!ok) break;
    }
    if (!ok) break;
    best = r;
  }
  return best;
}

namespace {

Mat gram_schmidt(const Mat& g, const Mat& seed) {
  Mat E = seed;
  for (int k = 0; k < E.cols(); ++k) {
    for (int j = 0; j < k; ++j) E.col(k) -= E.col(j).dot(g * E.col(k)) * E.col(j);
    double nn = E.col(k).dot(g * E.col(k));
    if (nn < 1e-24) throw Error(ErrorKind::ChartFailure, "degenerate frame seed");
    E.col(k) /= std::sqrt(nn);
  }
  return E;
}

double metric_margin(const ChartManifold& m, const Vec& p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m.metric(p), Eigen::EigenvaluesOnly);
  return m.domain().margin(p) * std::sqrt(es.eigenvalues().minCoeff());
}

// Fixed RK4 step count chosen so the fixed-step map meets the adaptive
// tolerance along probe geodesics of the given length.
int calibrate_steps(const NormalChart& chart, double length) {
  const ChartManifold& m = chart.manifold();
  if (m.is_flat()) return 1;
  int n = m.dim();
  int worst = 0;
  for (int c = 0; c < n; ++c)
    for (double sgn : {1.0, -1.0}) {
      try {
        GeodesicResult r = geodesic(m, chart.center(), sgn * length * chart.frame().col(c));
        worst = std::max(worst, r.steps);
      } catch (const Error&) {
      }
    }
  return std::clamp(2 * worst, 32, 4096);
}

void finish_chart(NormalChart& chart, const ChartManifold& m, const Vec& p, double probe) {
  double margin = metric_margin(m, p);
  double r_max = probe > 0.0 ? std::min(probe, margin) : margin;
  chart.set_fixed_steps(calibrate_steps(chart, r_max));
  double inj = estimate_injectivity(chart, r_max);
  chart.set_radius(std::min(0.4 * margin, 0.75 * inj), inj);
}

}  // namespace

NormalChart normal_chart(const ChartManifold& m, const Vec& p) {
  m.require_domain(p);
  int n = m.dim();
  Mat E = gram_schmidt(m.metric(p), Mat::Identity(n, n));
  NormalChart chart(m, p, E, ChartKind::Plain, n);
  finish_chart(chart, m, p, 0.0);
  return chart;
}

NormalChart normal_chart(const ChartManifold& m, const Vec& p, double probe) {
  m.require_domain(p);
  int n = m.dim();
  Mat E = gram_schmidt(m.metric(p), Mat::Identity(n, n));
  NormalChart chart(m, p, E, ChartKind::Plain, n);
  finish_chart(chart, m, p, probe);
  return chart;
}

NormalChart l_adapted_chart(const LagrangianModel& L, const Vec& param) {
  const ChartManifold& m = L.ambient;
  Vec p = L.embedding(param);
  m.require_domain(p);
  int dim = m.dim();
  Mat g = m.metric(p);
  Mat J = m.acs(p);
  Mat T = gram_schmidt(g, L.jacobian(param));
  Mat E(dim, dim);
  // Normals: J applied to the tangent frame, made orthogonal to TL.
  Mat N(dim, L.n);
  for (int k = 0; k < L.n; ++k) {
    Vec v = J * T.col(k);
    for (int j = 0; j < L.n; ++j) v -= T.col(j).dot(g * v) * T.col(j);
    N.col(k) = v;
  }
  N = gram_schmidt(g, N);
  for (int k = 0; k < L.n; ++k) {
    E.col(2 * k) = T.col(k);
    E.col(2 * k + 1) = N.col(k);
  }
  NormalChart chart(m, p, E, ChartKind::LAdapted, L.n);
  finish_chart(chart, m, p, 0.0);
  return chart;
}

ExperimentReport chart_estimate_report(const NormalChart& chart, double radius, int samples) {
  ExperimentReport rep;
  rep.name = chart.kind() == ChartKind::Plain ? "chart_estimates" : "l_adapted_chart_estimates";
  rep.anchor = chart.kind() == ChartKind::Plain ? "GammaEst" : "GammaEst; LAdaptedGeoCoords L3-L5";
  int n = chart.manifold().dim();
  rep.inputs_digest = digest(chart.manifold().family_tag() + "|" + fmt17(radius) + "|" + fmt17(chart.manifold().scale2()));
  rep.value("radius", radius);
  rep.value("chart_radius", chart.radius());
  double rg = 0.0, rG = 0.0, rgi = 0.0, req = 0.0;
  int used = 0;
  const Box cube = Box::cube(n, radius);
  for (int i = 1; used < samples && i < 50 * samples; ++i) {
    Vec X(n);
    static constexpr std::array<int, 8> primes{2, 3, 5, 7, 11, 13, 17, 19};
    for (int c = 0; c < n; ++c) X[c] = cube.lo[c] + 2.0 * radius * halton(i, primes[c % 8]);
    double q2 = X.squaredNorm();
    if (q2 > radius * radius || q2 < 0.0025 * radius * radius) continue;
    ++used;
    Mat gN = chart.chart_metric(X);
    Mat I = Mat::Identity(n, n);
    rg = std::max(rg, (gN - I).squaredNorm() / (q2 * q2));
    rgi = std::max(rgi, (gN.inverse() - I).squaredNorm() / (q2 * q2));
    Tensor3 G = chart.chart_christoffel(X);
    double s = 0.0;
    for (double v : G.data()) s += v * v;
    rG = std::max(rG, s / q2);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (gN + gN.transpose()), Eigen::EigenvaluesOnly);
    double dev = std::max(std::abs(es.eigenvalues().maxCoeff() - 1.0), std::abs(es.eigenvalues().minCoeff() - 1.0));
    req = std::max(req, dev / q2);
  }
  rep.value("samples", used);
  rep.add("metric_deviation_over_q4", rg, Relation::LessEqual, 1.0);
  rep.add("christoffel_over_q2", rG, Relation::LessEqual, 1.0);
  rep.add("inverse_metric_deviation_over_q4", rgi, Relation::LessEqual, 1.0);
  rep.add("metric_equivalence_over_q2", req, Relation::LessEqual, 1.0);
  if (chart.kind() == ChartKind::LAdapted) {
    // Along L = {x^even = 0} (zero based: odd slots vanish).
    double l3 = 0.0, l5 = 0.0;
    int nl = n / 2;
    for (int i = 1; i <= 8; ++i) {
      Vec X = Vec::Zero(n);
      for (int k = 0; k < nl; ++k) X[2 * k] = radius * (2.0 * halton(i, k == 0 ? 2 : 3) - 1.0);
      Mat gN = chart.chart_metric(X);
      for (int a = 0; a < n; a += 2)
        for (int b = 0; b < n; b += 2) {
          l3 = std::max({l3, std::abs(gN(a, b + 1)), std::abs(gN(a + 1, b)),
                         std::abs(gN(a + 1, b + 1) - (a == b ? 1.0 : 0.0))});
        }
      Tensor3 G = chart.chart_christoffel(X);
      for (int a = 0; a < n; a += 2)
        for (int b = 0; b < n; b += 2)
          for (int e = 1; e < n; e += 2) l5 = std::max({l5, std::abs(G(e, a, b)), std::abs(G(b, a, e))});
    }
    Vec zero = Vec::Zero(n);
    double l4 = std::max((chart.chart_metric(zero) - Mat::Identity(n, n)).lpNorm<Eigen::Infinity>(),
                         chart.chart_christoffel(zero).max_abs());
    const double fd_tol = 1e-6;
    rep.add("L3_block_structure", l3, Relation::LessEqual, fd_tol);
    rep.add("L4_center_values", l4, Relation::LessEqual, fd_tol);
    rep.add("L5_christoffel_vanishing", l5, Relation::LessEqual, fd_tol);
  }
  return rep;
}

// ---------------------------------------------------------------- distance

DistanceField::DistanceField(NormalChart chart, double radius) : chart_(std::move(chart)), radius_(radius) {}

double DistanceField::operator()(const Vec& q) const {
  const ChartManifold& m = chart_.manifold();
  if (m.is_flat()) {
    Vec d = q - chart_.center();
    return std::sqrt(d.dot(m.metric(q) * d));
  }
  return chart_.inverse(q).norm();
}

std::vector<double> DistanceField::evaluate(const std::vector<Vec>& pts) const {
  const ChartManifold& m = chart_.manifold();
  std::vector<double> out(pts.size(), std::numeric_limits<double>::infinity());
  Mat g0 = m.metric(chart_.center());
  if (m.is_flat()) {
    for (size_t i = 0; i < pts.size(); ++i) {
      Vec d = pts[i] - chart_.center();
      out[i] = std::sqrt(d.dot(g0 * d));
    }
    return out;
  }
  Mat Einv = chart_.frame().transpose() * g0;
  // Fixed chunks keep the warm-start chain (and so the result) independent
  // of the thread count.
  constexpr int kChunk = 32;
  const int n = static_cast<int>(pts.size());
  parallel_for((n + kChunk - 1) / kChunk, [&](int c) {
    bool have_prev = false;
    Vec prevX, prevq;
    Mat jac;
    for (int i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
      Vec lin = Einv * (pts[i] - chart_.center());
      if (lin.norm() > 1.25 * radius_) {
        have_prev = false;
        jac.resize(0, 0);
        continue;
      }
      Vec guess = have_prev ? Vec(prevX + Einv * (pts[i] - prevq)) : lin;
      Vec X = chart_.inverse(pts[i], &guess, &jac);
      out[i] = X.norm();
      prevX = X;
      prevq = pts[i];
      have_prev = true;
    }
  });
  return out;
}

DistanceField distance_field(const ChartManifold& m, const Vec& p, double radius) {
  NormalChart chart = normal_chart(m, p, 1.5 * radius);
  if (radius > chart.radius() * (1.0 + 1e-12))
    throw Error(ErrorKind::ShootingDiverged, "requested radius exceeds the chart radius");
  return DistanceField(std::move(chart), radius);
}

Vec distances_from(const ChartManifold& m, const Vec& p, const Mat& pts, double radius) {
  Vec out(pts.cols());
  if (m.is_flat()) {
    Mat g0 = m.metric(p);
    for (int i = 0; i < pts.cols(); ++i) {
      Vec d = pts.col(i) - p;
      out[i] = std::sqrt(d.dot(g0 * d));
    }
    return out;
  }
  std::vector<Vec> q(pts.cols());
  for (int i = 0; i < pts.cols(); ++i) q[i] = pts.col(i);
  // Batch use: 16 RK4 steps per geodesic; the shooting tolerance, not the
  // integrator, dominates the error at desk-scale radii.
  NormalChart chart = distance_field(m, p, radius).chart();
  chart.set_fixed_steps(16);
  auto v = DistanceField(std::move(chart), radius).evaluate(q);
  for (int i = 0; i < pts.cols(); ++i) out[i] = v[i];
  return out;
}

// ---------------------------------------------------------------- C^k norms

CkNorm tensor_ck_norm(const ChartManifold& m, const MatrixField& T, const Vec& p, int k, int lattice) {
  if (k < 0 || k > 2) throw Error(ErrorKind::RangeError, "k must be 0, 1 or 2");
  NormalChart chart = [&] {
    try {
      return normal_chart(m, p);
    } catch (const Error& e) {
      throw Error(ErrorKind::ChartFailure, e.what());
    }
  }();
  int n = m.dim();
  CkNorm out;
  out.ball_radius = 0.75 * chart.injectivity_estimate();
  if (out.ball_radius <= 0.0) throw Error(ErrorKind::ChartFailure, "no usable injectivity radius");
  // The chart map must stay inside the chart radius for inverse-free sampling;
  // the ball is sampled through forward() only.
  double R = out.ball_radius;
  double sigma = R / lattice;
  auto comp = [&](const Vec& X) -> Mat {
    Mat Jm = chart.jacobian(X, 1e-3 * std::max(1.0, sigma));
    return Jm.transpose() * T(chart.forward(X)) * Jm;
  };
  // Lattice points inside the ball (with a stencil layer inside it).
  std::vector<Vec> pts;
  std::vector<int> idx(n, -lattice);
  while (true) {
    Vec X(n);
    for (int c = 0; c < n; ++c) X[c] = idx[c] * sigma;
    if (X.norm() <= R - (k > 0 ? sigma : 0.0) + 1e-12) pts.push_back(X);
    int c = 0;
    while (c < n && ++idx[c] > lattice) idx[c++] = -lattice;
    if (c == n) break;
  }
  for (const Vec& X : pts) {
    double s = 0.0;
    if (k == 0) {
      s = comp(X).squaredNorm();
    } else if (k == 1) {
      for (int a = 0; a < n; ++a) {
        Vec e = Vec::Unit(n, a) * sigma;
        s += ((comp(X + e) - comp(X - e)) / (2 * sigma)).squaredNorm();
      }
    } else {
      Mat c0 = comp(X);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          Vec ea = Vec::Unit(n, a) * sigma, eb = Vec::Unit(n, b) * sigma;
          Mat d2 = a == b ? Mat((comp(X + ea) - 2 * c0 + comp(X - ea)) / (sigma * sigma))
                          : Mat((comp(X + ea + eb) - comp(X + ea - eb) - comp(X - ea + eb) + comp(X - ea - eb)) /
                                (4 * sigma * sigma));
          s += d2.squaredNorm();
        }
    }
    out.value = std::max(out.value, std::sqrt(s));
    ++out.samples;
  }
  return out;
}

bool admissible(const ChartManifold& m, const Vec& p, int lattice) {
  CkNorm c2 = tensor_ck_norm(m, [&m](const Vec& x) { return m.metric(x); }, p, 2, lattice);
  double inj = c2.ball_radius / 0.75;
  int dim = m.dim();
  return 10.0 * dim * dim * c2.value <= 1.0 && inj >= 2.0;
}

// ---------------------------------------------------------------- short paths

std::vector<ShortPathResult> short_paths_check(int segments) {
  std::vector<ShortPathResult> out;
  // Half ellipses t -> (a (1 - cos t), b sin t), t in [0, pi], in the plane
  // spanned by an L-tangent and an L-normal direction.
  for (double a : {0.02, 0.05, 0.08}) {
    for (double b : {0.01, 0.03, 0.06, 0.1}) {
      std::vector<std::array<double, 2>> pts(segments + 1);
      for (int i = 0; i <= segments; ++i) {
        double t = M_PI * i / segments;
        pts[i] = {a * (1.0 - std::cos(t)), b * std::sin(t)};
      }
      double len = 0.0, kmax = 0.0;
      for (int i = 0; i < segments; ++i)
        len += std::hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]);
      for (int i = 1; i < segments; ++i) {
        double ux = pts[i][0] - pts[i - 1][0], uy = pts[i][1] - pts[i - 1][1];
        double vx = pts[i + 1][0] - pts[i][0], vy = pts[i + 1][1] - pts[i][1];
        double turn = std::atan2(ux * vy - uy * vx, ux * vx + uy * vy);
        double ds = 0.5 * (std::hypot(ux, uy) + std::hypot(vx, vy));
        kmax = std::max(kmax, std::abs(turn) / ds);
      }
      if (len >= 0.5) continue;
      out.push_back({len, kmax, 1.0 / (2.0 * len) - 1.0});
    }
  }
  return out;
}

}  // namespace jcl

#include "jcl/immersion.hpp"

#include "jcl/parallel.hpp"
#include "jcl/report.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace jcl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double gdot(const Mat& g, const Vec& a, const Vec& b) { return a.dot(g * b); }
double gnorm(const Mat& g, const Vec& a) { return std::sqrt(std::max(0.0, a.dot(g * a))); }

bool finite_col(const Mat& m, int n) { return m.col(n).allFinite(); }

Vec frame_vec(const SurfaceData& d, int n, int a) {
  return d.frame[n](a, 0) * d.xs.col(n) + d.frame[n](a, 1) * d.xt.col(n);
}

}  // namespace

GridImmersion::GridImmersion(std::shared_ptr<const GridGeometry> grid, ChartManifold ambient, Mat values,
                             bool graphical)
    : grid_(std::move(grid)), ambient_(std::move(ambient)), values_(std::move(values)), graphical_(graphical) {
  if (values_.rows() != ambient_.dim() || values_.cols() != grid_->size())
    throw Error(ErrorKind::InvalidInput, "immersion: values shape does not match grid and ambient");
  if (graphical_) {
    for (int n = 0; n < grid_->size(); ++n)
      if (values_(0, n) != grid_->s(n) || values_(1, n) != grid_->t(n))
        throw Error(ErrorKind::InvalidInput, "immersion: graphical values must carry the grid coordinates");
  }
}

GridImmersion GridImmersion::with_ambient(ChartManifold m) const {
  return GridImmersion(grid_, std::move(m), values_, graphical_);
}

GridImmersion graph_immersion(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m,
                              const HeightFunction& heights) {
  const int D = m.dim();
  Mat X(D, grid->size());
  for (int n = 0; n < grid->size(); ++n) {
    double s = grid->s(n), t = grid->t(n);
    Vec z = heights(s, t);
    if (z.size() != D - 2) throw Error(ErrorKind::InvalidInput, "graph: height vector has wrong size");
    X(0, n) = s;
    X(1, n) = t;
    X.col(n).tail(D - 2) = z;
  }
  return GridImmersion(std::move(grid), m, std::move(X), true);
}

GridImmersion surface_immersion(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m,
                                const SurfaceFunction& f) {
  Mat X(m.dim(), grid->size());
  for (int n = 0; n < grid->size(); ++n) X.col(n) = f(grid->s(n), grid->t(n));
  return GridImmersion(std::move(grid), m, std::move(X), false);
}

GridImmersion sphere_patch(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m, double rho) {
  if (m.dim() < 3) throw Error(ErrorKind::InvalidInput, "sphere patch needs dim >= 3");
  double reach = std::hypot(std::abs(grid->cx()) + grid->r(), std::abs(grid->cy()) + grid->r());
  if (reach >= rho) throw Error(ErrorKind::InvalidInput, "sphere patch: grid must sit inside the radius");
  const int D = m.dim();
  return surface_immersion(std::move(grid), m, [=](double s, double t) {
    Vec x = Vec::Zero(D);
    x[0] = s;
    x[1] = t;
    x[2] = rho - std::sqrt(rho * rho - s * s - t * t);
    return x;
  });
}

SurfaceData analyze(const GridImmersion& u, double frame_angle) {
  const GridGeometry& G = u.grid();
  const ChartManifold& m = u.ambient();
  const int N = G.size();
  const Mat& X = u.values();
  SurfaceData d;
  d.xs = grid_first(G, X, 0);
  d.xt = grid_first(G, X, 1);
  d.xss = grid_second(G, X, 0);
  d.xtt = grid_second(G, X, 1);
  d.xst = grid_mixed(G, X, 1, 0);
  d.xts = grid_mixed(G, X, 0, 1);
  d.ambient.resize(N);
  parallel_for(N, [&](int n) { d.ambient[n] = local_geometry(m, X.col(n)); });

  d.valid.assign(N, 0);
  d.gamma.assign(N, Eigen::Matrix2d::Constant(kNaN));
  d.gamma_inv.assign(N, Eigen::Matrix2d::Constant(kNaN));
  d.sqrt_det = Vec::Constant(N, kNaN);
  d.frame.assign(N, Eigen::Matrix2d::Constant(kNaN));
  const double c = std::cos(frame_angle), s = std::sin(frame_angle);
  Eigen::Matrix2d rot;
  rot << c, s, -s, c;
  for (int n = 0; n < N; ++n) {
    if (!finite_col(d.xs, n) || !finite_col(d.xt, n)) continue;
    const Mat& g = d.ambient[n].g;
    Vec xs = d.xs.col(n), xt = d.xt.col(n);
    Eigen::Matrix2d gam;
    gam << gdot(g, xs, xs), gdot(g, xs, xt), gdot(g, xs, xt), gdot(g, xt, xt);
    double det = gam.determinant();
    NodeTag tag = G.tag(n);
    if (det < kTolImm) {
      if (tag == NodeTag::Interior || tag == NodeTag::Segment)
        throw Error(ErrorKind::DegenerateMetric,
                    "det gamma = " + fmt6(det) + " at node (" + std::to_string(G.i_of(n)) + "," +
                        std::to_string(G.j_of(n)) + ")");
      continue;
    }
    d.gamma[n] = gam;
    d.gamma_inv[n] = gam.inverse();
    d.sqrt_det[n] = std::sqrt(det);
    // Gram-Schmidt on (x_s, x_t), x_s first.
    double ns = std::sqrt(gam(0, 0));
    double p = gam(0, 1) / ns;
    double n2 = std::sqrt(gam(1, 1) - p * p);
    Eigen::Matrix2d C;
    C << 1.0 / ns, 0.0, -p / (ns * n2), 1.0 / n2;
    d.frame[n] = rot * C;
    d.valid[n] = G.measurable(n) && finite_col(d.xss, n) && finite_col(d.xtt, n) && finite_col(d.xst, n) &&
                 finite_col(d.xts, n);
  }

  d.area_density = d.sqrt_det;
  for (int n = 0; n < N; ++n) {
    if (std::isfinite(d.area_density[n])) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int rad = 1; rad <= 3 && !std::isfinite(best); ++rad)
      for (int dj = -rad; dj <= rad; ++dj)
        for (int di = -rad; di <= rad; ++di) {
          int k = G.index(G.i_of(n) + di, G.j_of(n) + dj);
          if (k < 0 || !std::isfinite(d.sqrt_det[k])) continue;
          double dist = di * di + dj * dj;
          if (dist < best) {
            best = dist;
            d.area_density[n] = d.sqrt_det[k];
          }
        }
    if (!std::isfinite(d.area_density[n])) throw Error(ErrorKind::DegenerateMetric, "no area density near node");
  }
  d.weights = quadrature_weights(G);

  d.coord_b.resize(N);
  parallel_for(N, [&](int n) {
    if (!d.valid[n]) return;
    const Tensor3& Gm = d.ambient[n].gamma;
    Vec xs = d.xs.col(n), xt = d.xt.col(n);
    d.coord_b[n][0][0] = normal_part(d, n, d.xss.col(n) + Gm.apply(xs, xs));
    d.coord_b[n][0][1] = normal_part(d, n, d.xst.col(n) + Gm.apply(xs, xt));
    d.coord_b[n][1][0] = normal_part(d, n, d.xts.col(n) + Gm.apply(xt, xs));
    d.coord_b[n][1][1] = normal_part(d, n, d.xtt.col(n) + Gm.apply(xt, xt));
  });
  return d;
}

Vec normal_part(const SurfaceData& d, int n, const Vec& v) {
  const Mat& g = d.ambient[n].g;
  Vec xs = d.xs.col(n), xt = d.xt.col(n);
  Eigen::Vector2d b(gdot(g, v, xs), gdot(g, v, xt));
  Eigen::Vector2d c = d.gamma[n].ldlt().solve(b);
  return v - c[0] * xs - c[1] * xt;
}

Mat normal_frame(const SurfaceData& d, int n) {
  const Mat& g = d.ambient[n].g;
  const int D = static_cast<int>(g.rows());
  Mat out(D, D - 2);
  int k = 0;
  double scale = std::sqrt(g.diagonal().maxCoeff());
  for (int mu = 0; mu < D && k < D - 2; ++mu) {
    Vec v = normal_part(d, n, Vec::Unit(D, mu));
    for (int j = 0; j < k; ++j) v -= gdot(g, v, out.col(j)) * out.col(j);
    double len = gnorm(g, v);
    if (len < 1e-3 / scale) continue;
    out.col(k++) = v / len;
  }
  if (k < D - 2) throw Error(ErrorKind::DegenerateMetric, "normal frame incomplete");
  return out;
}

MetricField induced_metric(const GridImmersion& u) {
  SurfaceData d = analyze(u);
  return MetricField{d.gamma, d.gamma_inv, d.sqrt_det};
}

Vec dbar_residual(const GridImmersion& u) {
  SurfaceData d = analyze(u);
  const int N = u.grid().size();
  Vec out = Vec::Constant(N, kNaN);
  for (int n = 0; n < N; ++n) {
    if (!std::isfinite(d.sqrt_det[n])) continue;
    const Mat& g = d.ambient[n].g;
    const Mat& J = d.ambient[n].J;
    double acc = 0.0;
    for (int a = 0; a < 2; ++a) {
      Vec w = normal_part(d, n, J * frame_vec(d, n, a));
      acc += gdot(g, w, w);
    }
    out[n] = std::sqrt(acc);
  }
  return out;
}

CurvatureField second_fundamental(const SurfaceData& d, const GridImmersion& u) {
  const int N = u.grid().size();
  CurvatureField cf;
  cf.valid = d.valid;
  cf.B.resize(N);
  cf.H.assign(N, Vec());
  cf.B_norm = Vec::Constant(N, kNaN);
  cf.A_norm = Vec::Constant(N, kNaN);
  cf.symmetry_defect = Vec::Constant(N, kNaN);
  parallel_for(N, [&](int n) {
    if (!d.valid[n]) return;
    const Mat& g = d.ambient[n].g;
    const auto& C = d.frame[n];
    const auto& cb = d.coord_b[n];
    auto Bab = [&](int a, int b) {
      Vec v = Vec::Zero(g.rows());
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) v += C(a, i) * C(b, j) * cb[i][j];
      return v;
    };
    cf.B[n] = {Bab(0, 0), Bab(0, 1), Bab(1, 0), Bab(1, 1)};
    double bb = 0.0;
    for (const Vec& v : cf.B[n]) bb += gdot(g, v, v);
    cf.B_norm[n] = std::sqrt(bb);
    // Shape operators of an orthonormal normal frame, <A^nu e_a, e_b> = <nu, B(e_a, e_b)>.
    Mat nu = normal_frame(d, n);
    double aa = 0.0;
    for (int k = 0; k < nu.cols(); ++k) {
      Eigen::Matrix2d A;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) A(a, b) = gdot(g, nu.col(k), cf.B[n][2 * a + b]);
      aa += A.squaredNorm();
    }
    cf.A_norm[n] = std::sqrt(aa);
    cf.H[n] = cf.B[n][0] + cf.B[n][3];
    Vec asym = cf.B[n][1] - cf.B[n][2];
    cf.symmetry_defect[n] = gnorm(g, asym);
  });
  return cf;
}

CurvatureField second_fundamental(const GridImmersion& u, double frame_angle) {
  return second_fundamental(analyze(u, frame_angle), u);
}

std::vector<Vec> mean_curvature(const GridImmersion& u) { return second_fundamental(u).H; }

Vec mc_residual(const SurfaceData& d, const GridImmersion& u) {
  const int N = u.grid().size();
  CurvatureField cf = second_fundamental(d, u);
  Vec out = Vec::Constant(N, kNaN);
  for (int n = 0; n < N; ++n) {
    if (!d.valid[n]) continue;
    const auto& L = d.ambient[n];
    Vec e1 = frame_vec(d, n, 0), e2 = frame_vec(d, n, 1);
    Vec trq = normal_part(d, n, L.q.apply(e1, e1) + L.q.apply(e2, e2));
    out[n] = gnorm(L.g, cf.H[n] - trq);
  }
  return out;
}

Vec mc_residual(const GridImmersion& u) { return mc_residual(analyze(u), u); }

Vec gauss_curvature(const SurfaceData& d, const GridImmersion& u) {
  const GridGeometry& G = u.grid();
  const int N = G.size();
  Mat efg(3, N);
  for (int n = 0; n < N; ++n) efg.col(n) << d.gamma[n](0, 0), d.gamma[n](0, 1), d.gamma[n](1, 1);
  Mat ds = grid_first(G, efg, 0), dt = grid_first(G, efg, 1);
  Mat dss = grid_second(G, efg, 0), dtt = grid_second(G, efg, 1);
  Mat dst = grid_mixed(G, efg, 0, 1);
  Vec K = Vec::Constant(N, kNaN);
  for (int n = 0; n < N; ++n) {
    if (!d.valid[n]) continue;
    double E = efg(0, n), F = efg(1, n), Gc = efg(2, n);
    double Es = ds(0, n), Fs = ds(1, n), Gs = ds(2, n);
    double Et = dt(0, n), Ft = dt(1, n), Gt = dt(2, n);
    double Ett = dtt(0, n), Gss = dss(2, n), Fst = dst(1, n);
    Eigen::Matrix3d M1, M2;
    M1 << -0.5 * Ett + Fst - 0.5 * Gss, 0.5 * Es, Fs - 0.5 * Et, Ft - 0.5 * Gs, E, F, 0.5 * Gt, F, Gc;
    M2 << 0.0, 0.5 * Et, 0.5 * Gs, 0.5 * Et, E, F, 0.5 * Gs, F, Gc;
    double den = E * Gc - F * F;
    double k = (M1.determinant() - M2.determinant()) / (den * den);
    if (std::isfinite(k)) K[n] = k;
  }
  return K;
}

Vec gauss_curvature(const GridImmersion& u) { return gauss_curvature(analyze(u), u); }

Vec gauss_defect(const GridImmersion& u) {
  SurfaceData d = analyze(u);
  CurvatureField cf = second_fundamental(d, u);
  Vec K = gauss_curvature(d, u);
  const int N = u.grid().size();
  Vec out = Vec::Constant(N, kNaN);
  parallel_for(N, [&](int n) {
    if (!std::isfinite(K[n])) return;
    const Mat& g = d.ambient[n].g;
    double ks = u.ambient().is_flat()
                    ? 0.0
                    : sectional(u.ambient(), u.point(n), frame_vec(d, n, 0), frame_vec(d, n, 1));
    const auto& B = cf.B[n];
    Vec b12 = 0.5 * (B[1] + B[2]);
    out[n] = std::abs(ks - K[n] + gdot(g, B[0], B[3]) - gdot(g, b12, b12));
  });
  return out;
}

double integrate(const SurfaceData& d, const GridImmersion& u, const Vec& f, const std::vector<char>& region) {
  const int N = u.grid().size();
  if (f.size() != N || static_cast<int>(region.size()) != N)
    throw Error(ErrorKind::InvalidInput, "integrate: field size mismatch");
  double acc = 0.0;
  bool any = false;
  for (int n = 0; n < N; ++n) {
    if (!region[n]) continue;
    any = true;
    acc += f[n] * d.area_density[n] * d.weights[n];
  }
  if (!any) throw Error(ErrorKind::EmptyRegion, "integrate: region has no nodes");
  return acc;
}

double integrate(const GridImmersion& u, const Vec& f, const std::vector<char>& region) {
  return integrate(analyze(u), u, f, region);
}

double integrate(const GridImmersion& u, const Vec& f) {
  return integrate(u, f, std::vector<char>(u.grid().size(), 1));
}

namespace {

struct FluxForm {
  const GridGeometry& G;
  Vec a11, a12, a22, fv, fs, ft;
  double h;

  FluxForm(const SurfaceData& d, const GridImmersion& u, const Vec& f) : G(u.grid()), h(u.grid().h()) {
    const int N = G.size();
    a11.resize(N);
    a12.resize(N);
    a22.resize(N);
    for (int n = 0; n < N; ++n) {
      a11[n] = d.sqrt_det[n] * d.gamma_inv[n](0, 0);
      a12[n] = d.sqrt_det[n] * d.gamma_inv[n](0, 1);
      a22[n] = d.sqrt_det[n] * d.gamma_inv[n](1, 1);
    }
    Mat F = f.transpose();
    fv = f;
    fs = grid_first(G, F, 0).row(0).transpose();
    ft = grid_first(G, F, 1).row(0).transpose();
  }
  // Flux through the face between left and right (s direction).
  double flux_s(int l, int r) const {
    return 0.5 * (a11[l] + a11[r]) * (fv[r] - fv[l]) / h + 0.5 * (a12[l] * ft[l] + a12[r] * ft[r]);
  }
  double flux_t(int lo, int hi) const {
    return 0.5 * (a22[lo] + a22[hi]) * (fv[hi] - fv[lo]) / h + 0.5 * (a12[lo] * fs[lo] + a12[hi] * fs[hi]);
  }
  bool interior(int n) const { return G.tag(n) == NodeTag::Interior; }
  double divergence(int n) const {
    int e = G.neighbor(n, 0, 1), w = G.neighbor(n, 0, -1);
    int nn = G.neighbor(n, 1, 1), so = G.neighbor(n, 1, -1);
    return (flux_s(n, e) - flux_s(w, n) + flux_t(n, nn) - flux_t(so, n)) / h;
  }
};

}  // namespace

Vec laplace_beltrami(const SurfaceData& d, const GridImmersion& u, const Vec& f) {
  FluxForm ff(d, u, f);
  const int N = u.grid().size();
  Vec out = Vec::Constant(N, kNaN);
  for (int n = 0; n < N; ++n)
    if (ff.interior(n)) out[n] = ff.divergence(n) / d.sqrt_det[n];
  return out;
}

Vec laplace_beltrami(const GridImmersion& u, const Vec& f) { return laplace_beltrami(analyze(u), u, f); }

DivergenceCheck divergence_check(const GridImmersion& u, const Vec& f) {
  SurfaceData d = analyze(u);
  FluxForm ff(d, u, f);
  const GridGeometry& G = u.grid();
  const double h = G.h();
  DivergenceCheck dc;
  for (int n = 0; n < G.size(); ++n) {
    if (!ff.interior(n)) continue;
    dc.interior += ff.divergence(n) * h * h;
    int e = G.neighbor(n, 0, 1), w = G.neighbor(n, 0, -1);
    int nn = G.neighbor(n, 1, 1), so = G.neighbor(n, 1, -1);
    if (!ff.interior(e)) dc.boundary += ff.flux_s(n, e) * h;
    if (!ff.interior(w)) dc.boundary -= ff.flux_s(w, n) * h;
    if (!ff.interior(nn)) dc.boundary += ff.flux_t(n, nn) * h;
    if (!ff.interior(so)) dc.boundary -= ff.flux_t(so, n) * h;
  }
  return dc;
}

GradB grad_B_norm(const SurfaceData& d, const GridImmersion& u) {
  const GridGeometry& G = u.grid();
  const int N = G.size(), D = u.dim();
  // Coordinate components B_ij as nodal fields; NaN off the valid set so
  // stencils reaching past it invalidate the node.
  std::array<Mat, 3> Bf;
  for (auto& m : Bf) m = Mat::Constant(D, N, kNaN);
  for (int n = 0; n < N; ++n) {
    if (!d.valid[n]) continue;
    Bf[0].col(n) = d.coord_b[n][0][0];
    Bf[1].col(n) = 0.5 * (d.coord_b[n][0][1] + d.coord_b[n][1][0]);
    Bf[2].col(n) = d.coord_b[n][1][1];
  }
  auto slot = [](int i, int j) { return i + j; };
  std::array<std::array<Mat, 2>, 3> DB;
  for (int q = 0; q < 3; ++q)
    for (int k = 0; k < 2; ++k) DB[q][k] = grid_first(G, Bf[q], k);

  GradB out{Vec::Constant(N, kNaN), Vec::Constant(N, kNaN)};
  parallel_for(N, [&](int n) {
    if (!d.valid[n]) return;
    for (int q = 0; q < 3; ++q)
      for (int k = 0; k < 2; ++k)
        if (!finite_col(DB[q][k], n)) return;
    const Mat& g = d.ambient[n].g;
    const Tensor3& Gm = d.ambient[n].gamma;
    std::array<Vec, 2> x{d.xs.col(n), d.xt.col(n)};
    Vec xst = 0.5 * (d.xst.col(n) + d.xts.col(n));
    std::array<std::array<Vec, 2>, 2> xx{{{d.xss.col(n), xst}, {xst, d.xtt.col(n)}}};
    // Surface Christoffel symbols from the tangential part of nabla_k x_i.
    double Gs[2][2][2];  // [l][k][i]
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i) {
        Vec v = xx[k][i] + Gm.apply(x[k], x[i]);
        Eigen::Vector2d b(gdot(g, v, x[0]), gdot(g, v, x[1]));
        Eigen::Vector2d c = d.gamma_inv[n] * b;
        Gs[0][k][i] = c[0];
        Gs[1][k][i] = c[1];
      }
    auto B = [&](int i, int j) -> Vec { return Bf[slot(i, j)].col(n); };
    Vec nb[2][2][2];  // (nabla_k B)_ij
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          Vec bij = B(i, j);
          Vec v = normal_part(d, n, DB[slot(i, j)][k].col(n) + Gm.apply(x[k], bij));
          for (int l = 0; l < 2; ++l) v -= Gs[l][k][i] * B(l, j) + Gs[l][k][j] * B(i, l);
          nb[k][i][j] = v;
        }
    const auto& gi = d.gamma_inv[n];
    double direct = 0.0;
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int k2 = 0; k2 < 2; ++k2)
            for (int i2 = 0; i2 < 2; ++i2)
              for (int j2 = 0; j2 < 2; ++j2)
                direct += gi(k, k2) * gi(i, i2) * gi(j, j2) * gdot(g, nb[k][i][j], nb[k2][i2][j2]);
    out.direct[n] = std::sqrt(std::max(0.0, direct));
    // Through the shape operators of an orthonormal normal frame.
    Mat nu = normal_frame(d, n);
    const auto& C = d.frame[n];
    double dual = 0.0;
    for (int m = 0; m < nu.cols(); ++m)
      for (int c = 0; c < 2; ++c)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            double t = 0.0;
            for (int k = 0; k < 2; ++k)
              for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) t += C(c, k) * C(a, i) * C(b, j) * gdot(g, nu.col(m), nb[k][i][j]);
            dual += t * t;
          }
    out.dual[n] = std::sqrt(dual);
  });
  return out;
}

GradB grad_B_norm(const GridImmersion& u) { return grad_B_norm(analyze(u), u); }

GridImmersion coarse_restriction(const GridImmersion& u) {
  const GridGeometry& G = u.grid();
  auto C = std::make_shared<GridGeometry>(G.shape(), G.r(), 2 * G.h(), G.cx(), G.cy());
  Mat X(u.dim(), C->size());
  for (int n = 0; n < C->size(); ++n) {
    int k = G.index(2 * C->i_of(n), 2 * C->j_of(n));
    if (k < 0) throw Error(ErrorKind::InvalidInput, "coarse node missing from the fine grid");
    X.col(n) = u.values().col(k);
    if (u.graphical()) {
      X(0, n) = C->s(n);
      X(1, n) = C->t(n);
    }
  }
  return GridImmersion(C, u.ambient(), std::move(X), u.graphical());
}

double window_max(const GridGeometry& g, const Vec& f, double fraction) {
  double lim = fraction * g.r(), out = 0.0;
  for (int n = 0; n < f.size(); ++n) {
    double ds = g.s(n) - g.cx(), dt = g.t(n) - g.cy();
    if (std::isfinite(f[n]) && ds * ds + dt * dt <= lim * lim) out = std::max(out, f[n]);
  }
  return out;
}

double finite_max(const Vec& f) {
  double out = 0.0;
  for (int n = 0; n < f.size(); ++n)
    if (std::isfinite(f[n])) out = std::max(out, f[n]);
  return out;
}

namespace {

constexpr char kMagic[8] = {'J', 'C', 'L', 'G', 'R', 'I', 'D', '1'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error(ErrorKind::IoError, "grid file truncated");
  return v;
}

}  // namespace

void write_grid_binary(const std::string& path, const GridImmersion& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path);
  const GridGeometry& G = u.grid();
  os.write(kMagic, 8);
  put<std::uint8_t>(os, G.shape() == Shape::Disc ? 0 : 1);
  put<std::uint8_t>(os, u.graphical() ? 1 : 0);
  put<std::uint16_t>(os, 0);
  put<std::int32_t>(os, u.dim());
  put<double>(os, G.r());
  put<double>(os, G.h());
  put<double>(os, G.cx());
  put<double>(os, G.cy());
  put<std::int64_t>(os, G.size());
  os.write(reinterpret_cast<const char*>(u.values().data()),
           static_cast<std::streamsize>(sizeof(double) * u.values().size()));
  if (!os) throw Error(ErrorKind::IoError, "write failed: " + path);
}

GridImmersion read_grid_binary(const std::string& path, const ChartManifold& m) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::IoError, "cannot read " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw Error(ErrorKind::IoError, "not a grid file: " + path);
  auto shape = get<std::uint8_t>(is);
  bool graphical = get<std::uint8_t>(is) != 0;
  get<std::uint16_t>(is);
  int dim = get<std::int32_t>(is);
  double r = get<double>(is), h = get<double>(is), cx = get<double>(is), cy = get<double>(is);
  auto count = get<std::int64_t>(is);
  if (dim != m.dim()) throw Error(ErrorKind::IoError, "grid file dimension does not match the ambient");
  auto G = std::make_shared<GridGeometry>(shape == 0 ? Shape::Disc : Shape::HalfDisc, r, h, cx, cy);
  if (count != G->size()) throw Error(ErrorKind::IoError, "grid file node count mismatch");
  Mat X(dim, G->size());
  is.read(reinterpret_cast<char*>(X.data()), static_cast<std::streamsize>(sizeof(double) * X.size()));
  if (!is) throw Error(ErrorKind::IoError, "grid file truncated");
  return GridImmersion(G, m, std::move(X), graphical);
}

void write_grid_csv(const std::string& path, const GridImmersion& u) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path);
  const GridGeometry& G = u.grid();
  os << "# shape=" << G.shape_name() << ",r=" << fmt17(G.r()) << ",h=" << fmt17(G.h()) << ",cx=" << fmt17(G.cx())
     << ",cy=" << fmt17(G.cy()) << ",dim=" << u.dim() << ",graphical=" << (u.graphical() ? 1 : 0) << "\n";
  os << "i,j";
  for (int a = 0; a < u.dim(); ++a) os << ",x" << a + 1;
  os << "\n";
  for (int n = 0; n < G.size(); ++n) {
    os << G.i_of(n) << "," << G.j_of(n);
    for (int a = 0; a < u.dim(); ++a) os << "," << fmt17(u.values()(a, n));
    os << "\n";
  }
}

GridImmersion read_grid_csv(const std::string& path, const ChartManifold& m) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::IoError, "cannot read " + path);
  std::string line;
  std::getline(is, line);
  if (line.rfind("# ", 0) != 0) throw Error(ErrorKind::IoError, "grid csv: missing header");
  std::map<std::string, std::string> kv;
  std::stringstream hs(line.substr(2));
  std::string item;
  while (std::getline(hs, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::IoError, "grid csv: bad header item " + item);
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  try {
    Shape shape = kv.at("shape") == "disc" ? Shape::Disc : Shape::HalfDisc;
    int dim = std::stoi(kv.at("dim"));
    if (dim != m.dim()) throw Error(ErrorKind::IoError, "grid csv dimension does not match the ambient");
    auto G = std::make_shared<GridGeometry>(shape, std::stod(kv.at("r")), std::stod(kv.at("h")),
                                            std::stod(kv.at("cx")), std::stod(kv.at("cy")));
    std::getline(is, line);  // column names
    Mat X(dim, G->size());
    int rows = 0;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::stringstream ls(line);
      std::string cell;
      std::getline(ls, cell, ',');
      int i = std::stoi(cell);
      std::getline(ls, cell, ',');
      int j = std::stoi(cell);
      int n = G->index(i, j);
      if (n < 0) throw Error(ErrorKind::IoError, "grid csv: node outside the grid");
      for (int a = 0; a < dim; ++a) {
        std::getline(ls, cell, ',');
        X(a, n) = std::stod(cell);
      }
      ++rows;
    }
    if (rows != G->size()) throw Error(ErrorKind::IoError, "grid csv: node count mismatch");
    return GridImmersion(G, m, std::move(X), kv.at("graphical") == "1");
  } catch (const std::out_of_range&) {
    throw Error(ErrorKind::IoError, "grid csv: incomplete header");
  } catch (const std::invalid_argument&) {
    throw Error(ErrorKind::IoError, "grid csv: malformed number");
  }
}

}  // namespace jcl

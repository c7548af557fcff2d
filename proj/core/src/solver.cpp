#include "jcl/solver.hpp"

#include "jcl/coords.hpp"
#include "jcl/parallel.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace jcl {

HeightFunction polynomial_trace(std::vector<std::complex<double>> coeffs, int dim) {
  // dim 2 has no normal directions: only the zero polynomial, i.e. the chart itself.
  if (dim == 2 && std::all_of(coeffs.begin(), coeffs.end(), [](auto c) { return c == 0.0; }))
    return [](double, double) { return Vec(); };
  if (dim < 4 || dim % 2) throw Error(ErrorKind::InvalidInput, "polynomial trace needs even dim >= 4");
  return [coeffs = std::move(coeffs), dim](double s, double t) {
    std::complex<double> z(s, t), w(0.0, 0.0), zk(1.0, 0.0);
    for (const auto& c : coeffs) {
      w += c * zk;
      zk *= z;
    }
    Vec out = Vec::Zero(dim - 2);
    out[0] = w.real();
    out[1] = w.imag();
    return out;
  };
}

BoundaryData dirichlet(HeightFunction trace, std::string description) {
  return BoundaryData{BoundaryKind::Dirichlet, std::move(trace), std::move(description)};
}

BoundaryData lagrangian_mixed(HeightFunction trace, std::string description) {
  return BoundaryData{BoundaryKind::LagrangianMixed, std::move(trace), std::move(description)};
}

namespace {

// Zero-based odd slots vanish on the segment (odd reflection); the others
// are reflected evenly.
bool vanishing(int comp) { return comp % 2 == 1; }

bool is_unknown(const GridGeometry& G, BoundaryKind kind, int comp, int n) {
  NodeTag t = G.tag(n);
  if (t == NodeTag::Interior) return true;
  return t == NodeTag::Segment && kind == BoundaryKind::LagrangianMixed && !vanishing(comp);
}

bool is_equation_node(const GridGeometry& G, int n) {
  NodeTag t = G.tag(n);
  return t == NodeTag::Interior || t == NodeTag::Segment;
}

// Value of component c at lattice (i, j), reflecting across the segment.
double lattice_value(const GridGeometry& G, const Mat& X, int c, int i, int j) {
  if (j < 0 && G.shape() == Shape::HalfDisc) {
    int k = G.index(i, -j);
    return vanishing(c) ? -X(c, k) : X(c, k);
  }
  return X(c, G.index(i, j));
}

struct StencilTerm {
  int di, dj;
  double w;
};

std::array<StencilTerm, 9> operator_stencil(double a11, double a12, double a22, double h) {
  double h2 = h * h;
  double m = a12 / (2 * h2);
  return {{{0, 0, -2 * (a11 + a22) / h2},
           {1, 0, a11 / h2},
           {-1, 0, a11 / h2},
           {0, 1, a22 / h2},
           {0, -1, a22 / h2},
           {1, 1, m},
           {-1, -1, m},
           {1, -1, -m},
           {-1, 1, -m}}};
}

// Linear system for one component class.
struct ClassSystem {
  std::vector<int> unknowns;  // node ids
  std::vector<int> slot;      // node -> unknown index or -1
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  // Known couplings per row: (node, weight); the node value is read per component.
  std::vector<std::vector<std::pair<int, double>>> known;
  std::vector<char> color;
};

ClassSystem build_system(const GridGeometry& G, BoundaryKind kind, int comp, const FrozenCoefficients& coef) {
  ClassSystem S;
  const int N = G.size();
  S.slot.assign(N, -1);
  for (int n = 0; n < N; ++n)
    if (is_unknown(G, kind, comp, n)) {
      S.slot[n] = static_cast<int>(S.unknowns.size());
      S.unknowns.push_back(n);
    }
  const int M = static_cast<int>(S.unknowns.size());
  S.known.resize(M);
  S.color.resize(M);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(M) * 9);
  const double h = G.h();
  for (int r = 0; r < M; ++r) {
    int n = S.unknowns[r];
    int i = G.i_of(n), j = G.j_of(n);
    S.color[r] = static_cast<char>((i + j) & 1);
    for (const auto& st : operator_stencil(coef.a11[n], coef.a12[n], coef.a22[n], h)) {
      int ii = i + st.di, jj = j + st.dj;
      double sign = 1.0;
      if (jj < 0 && G.shape() == Shape::HalfDisc) {
        jj = -jj;
        sign = vanishing(comp) ? -1.0 : 1.0;
      }
      int k = G.index(ii, jj);
      if (k < 0) throw Error(ErrorKind::InvalidInput, "stencil leaves the grid at an equation node");
      if (S.slot[k] >= 0) trip.emplace_back(r, S.slot[k], sign * st.w);
      else S.known[r].emplace_back(k, sign * st.w);
    }
  }
  S.A.resize(M, M);
  S.A.setFromTriplets(trip.begin(), trip.end());
  S.A.makeCompressed();
  return S;
}

Vec class_rhs(const ClassSystem& S, const Mat& rhs, const Mat& values, int comp) {
  const int M = static_cast<int>(S.unknowns.size());
  Vec b(M);
  for (int r = 0; r < M; ++r) {
    double v = rhs(comp, S.unknowns[r]);
    for (const auto& [k, w] : S.known[r]) v -= w * values(comp, k);
    b[r] = v;
  }
  return b;
}

Vec sor_solve(const ClassSystem& S, const Vec& b, Vec x, const SolveOptions& opt) {
  const auto& A = S.A;
  const int M = static_cast<int>(b.size());
  Vec diag(M);
  for (int r = 0; r < M; ++r) diag[r] = A.coeff(r, r);
  double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  for (int it = 0; it < opt.max_inner; ++it) {
    for (int colr = 0; colr < 2; ++colr)
      for (int r = 0; r < M; ++r) {
        if (S.color[r] != colr) continue;
        double sum = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator e(A, r); e; ++e)
          if (e.col() != r) sum += e.value() * x[e.col()];
        x[r] = (1.0 - opt.omega) * x[r] + opt.omega * (b[r] - sum) / diag[r];
      }
    if (it % 16 == 15 || it + 1 == opt.max_inner) {
      double res = (b - A * x).lpNorm<Eigen::Infinity>();
      if (res <= opt.tol_lin * scale) return x;
    }
  }
  throw Error(ErrorKind::MaxInnerIterations, "SOR did not reach the inner tolerance");
}

bool use_direct(const GridGeometry& G, const SolveOptions& opt) {
  if (opt.method == LinearMethod::Direct) return true;
  if (opt.method == LinearMethod::SOR) return false;
  int side = 2 * G.radius_cells() + 1;
  return side <= 129;
}

}  // namespace

Mat solve_frozen(const GridGeometry& G, BoundaryKind kind, const FrozenCoefficients& coef, const Mat& rhs,
                 const Mat& values, const SolveOptions& opt) {
  const int D = static_cast<int>(values.rows());
  Mat out = values;
  const bool direct = use_direct(G, opt);
  // Components sharing a class share the matrix.
  for (int cls = 0; cls < 2; ++cls) {
    int first = -1;
    for (int c = 2; c < D; ++c)
      if (vanishing(c) == (cls == 1)) {
        first = c;
        break;
      }
    if (first < 0) continue;
    ClassSystem S = build_system(G, kind, first, coef);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    if (direct) {
      Eigen::SparseMatrix<double> Ac(S.A);
      lu.analyzePattern(Ac);
      lu.factorize(Ac);
      if (lu.info() != Eigen::Success) throw Error(ErrorKind::EllipticityLost, "frozen operator is singular");
    }
    for (int c = 2; c < D; ++c) {
      if (vanishing(c) != (cls == 1)) continue;
      Vec b = class_rhs(S, rhs, values, c);
      Vec x;
      if (direct) {
        x = lu.solve(b);
      } else {
        Vec x0(b.size());
        for (size_t r = 0; r < S.unknowns.size(); ++r) x0[r] = values(c, S.unknowns[r]);
        x = sor_solve(S, b, x0, opt);
      }
      for (size_t r = 0; r < S.unknowns.size(); ++r) out(c, S.unknowns[r]) = x[r];
    }
  }
  return out;
}

namespace {

Mat boundary_values(const GridGeometry& G, int D, const BoundaryData& bd) {
  if (!bd.trace) throw Error(ErrorKind::InvalidInput, "boundary data without a trace");
  Mat X = Mat::Zero(D, G.size());
  for (int n = 0; n < G.size(); ++n) {
    X(0, n) = G.s(n);
    X(1, n) = G.t(n);
    NodeTag tag = G.tag(n);
    if (tag == NodeTag::Arc || tag == NodeTag::Corner) {
      Vec z = bd.trace(G.s(n), G.t(n));
      if (z.size() != D - 2) throw Error(ErrorKind::InvalidInput, "trace has the wrong number of heights");
      X.col(n).tail(D - 2) = z;
    }
  }
  return X;
}

void check_corners(const GridGeometry& G, int D, const BoundaryData& bd) {
  if (bd.kind != BoundaryKind::LagrangianMixed) return;
  if (G.shape() != Shape::HalfDisc) throw Error(ErrorKind::InvalidInput, "mixed boundary data needs a half disc");
  for (double sgn : {-1.0, 1.0}) {
    Vec z = bd.trace(G.cx() + sgn * G.r(), G.cy());
    for (int c = 2; c < D; ++c)
      if (vanishing(c) && std::abs(z[c - 2]) > 1e-12)
        throw Error(ErrorKind::IncompatibleCorners,
                    "trace component " + std::to_string(c + 1) + " is " + fmt6(z[c - 2]) + " at a corner");
  }
}

}  // namespace

GridImmersion harmonic_init(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m,
                            const BoundaryData& bd) {
  const int D = m.dim();
  check_corners(*grid, D, bd);
  Mat X = boundary_values(*grid, D, bd);
  const int N = grid->size();
  FrozenCoefficients flat{Vec::Ones(N), Vec::Zero(N), Vec::Ones(N)};
  SolveOptions opt;
  opt.method = LinearMethod::Direct;
  X = solve_frozen(*grid, bd.kind, flat, Mat::Zero(D, N), X, opt);
  return GridImmersion(grid, m, std::move(X), true);
}

NodeDerivatives equation_derivatives(const GridGeometry& G, const Mat& X, int n) {
  const int D = static_cast<int>(X.rows());
  const int i = G.i_of(n), j = G.j_of(n);
  const double h = G.h();
  NodeDerivatives d{Vec(D), Vec(D), Vec(D), Vec(D), Vec(D)};
  for (int c = 0; c < D; ++c) {
    auto v = [&](int di, int dj) { return lattice_value(G, X, c, i + di, j + dj); };
    double x0 = X(c, n);
    d.xs[c] = (v(1, 0) - v(-1, 0)) / (2 * h);
    d.xt[c] = (v(0, 1) - v(0, -1)) / (2 * h);
    d.xss[c] = (v(1, 0) - 2 * x0 + v(-1, 0)) / (h * h);
    d.xtt[c] = (v(0, 1) - 2 * x0 + v(0, -1)) / (h * h);
    d.xst[c] = (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4 * h * h);
  }
  return d;
}

Assembly assemble(const GridImmersion& u, BoundaryKind kind, const SolveOptions& opt) {
  const GridGeometry& G = u.grid();
  const ChartManifold& m = u.ambient();
  const Mat& X = u.values();
  const int N = G.size(), D = u.dim();
  for (int n = 0; n < N; ++n)
    if (!m.in_domain(X.col(n)))
      throw Error(ErrorKind::LeftDomain, "graph leaves the ambient chart at node (" + std::to_string(G.i_of(n)) +
                                             "," + std::to_string(G.j_of(n)) + ")");
  Assembly a;
  a.coef = FrozenCoefficients{Vec::Zero(N), Vec::Zero(N), Vec::Zero(N)};
  a.rhs = Mat::Zero(D, N);
  std::vector<double> res(N, 0.0);
  std::vector<double> min_eig(N, std::numeric_limits<double>::infinity());
  parallel_for(N, [&](int n) {
    if (!is_equation_node(G, n)) return;
    NodeDerivatives d = equation_derivatives(G, X, n);
    LocalGeometry L = local_geometry(m, X.col(n));
    Eigen::Matrix2d gam;
    gam << d.xs.dot(L.g * d.xs), d.xs.dot(L.g * d.xt), d.xs.dot(L.g * d.xt), d.xt.dot(L.g * d.xt);
    Eigen::Matrix2d gi = gam.inverse();
    min_eig[n] = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(gi, Eigen::EigenvaluesOnly).eigenvalues()[0];
    a.coef.a11[n] = gi(0, 0);
    a.coef.a12[n] = gi(0, 1);
    a.coef.a22[n] = gi(1, 1);
    std::array<const Vec*, 2> x{&d.xs, &d.xt};
    Vec W = Vec::Zero(D);
    if (!m.is_flat()) {
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) W += gi(p, q) * (L.gamma.apply(*x[p], *x[q]) - L.q.apply(*x[p], *x[q]));
    }
    Vec F = d.xs * W[0] + d.xt * W[1] - W;
    a.rhs.col(n) = F;
    double worst = 0.0;
    for (int c = 2; c < D; ++c) {
      if (!is_unknown(G, kind, c, n)) continue;
      double lhs = gi(0, 0) * d.xss[c] + 2 * gi(0, 1) * d.xst[c] + gi(1, 1) * d.xtt[c];
      worst = std::max(worst, std::abs(lhs - F[c]));
    }
    res[n] = worst;
  });
  for (int n = 0; n < N; ++n) {
    if (min_eig[n] < opt.tol_ell)
      throw Error(ErrorKind::EllipticityLost, "min eigenvalue of gamma^{ij} is " + fmt6(min_eig[n]) + " at node (" +
                                                  std::to_string(G.i_of(n)) + "," + std::to_string(G.j_of(n)) + ")");
    a.pde_residual = std::max(a.pde_residual, res[n]);
  }
  return a;
}

Mat linearized_solve(const GridImmersion& u, const Mat& rhs, BoundaryKind kind, const SolveOptions& opt) {
  Assembly a = assemble(u, kind, opt);
  return solve_frozen(u.grid(), kind, a.coef, rhs, u.values(), opt);
}

SolveOutcome solve(const ChartManifold& m, std::shared_ptr<const GridGeometry> grid, const BoundaryData& bd,
                   const SolveOptions& opt) {
  GridImmersion u = harmonic_init(grid, m, bd);
  SolveOutcome out{u, 0, 0.0, 0.0, 0.0, false, {}};
  Mat X = u.values();
  for (int it = 1; it <= opt.max_iter; ++it) {
    Assembly a = assemble(GridImmersion(grid, m, X, true), bd.kind, opt);
    Mat Xn = solve_frozen(*grid, bd.kind, a.coef, a.rhs, X, opt);
    double upd = opt.theta * (Xn - X).lpNorm<Eigen::Infinity>();
    X += opt.theta * (Xn - X);
    // x^1, x^2 are untouched by the solve; keep them bit-exact.
    for (int n = 0; n < grid->size(); ++n) {
      X(0, n) = grid->s(n);
      X(1, n) = grid->t(n);
    }
    out.updates.push_back(upd);
    out.iterations = it;
    out.final_update = upd;
    if (!std::isfinite(upd)) throw Error(ErrorKind::Diverged, "non-finite update");
    if (it > 10 && upd > 5.0 * out.updates[it - 11])
      throw Error(ErrorKind::Diverged, "update grew from " + fmt6(out.updates[it - 11]) + " to " + fmt6(upd) +
                                           " over 10 iterations");
    if (upd <= opt.tol_fix && a.pde_residual <= opt.tol_pde) break;
  }
  out.immersion = GridImmersion(grid, m, X, true);
  out.final_pde_residual = assemble(out.immersion, bd.kind, opt).pde_residual;
  out.converged = out.final_update <= opt.tol_fix && out.final_pde_residual <= opt.tol_pde;
  // Measured on the 2h restriction: on the solve grid itself the interior
  // stencils coincide with the discrete equation and only read roundoff.
  GridImmersion coarse = coarse_restriction(out.immersion);
  out.final_mc_residual = window_max(coarse.grid(), mc_residual(coarse), opt.mc_window);
  return out;
}

ExperimentReport type1_certificates(const SolveOutcome& out, const LagrangianModel& L) {
  if (!out.converged) throw Error(ErrorKind::NotConverged, "type 1 certificates need a converged solve");
  const GridImmersion& u = out.immersion;
  const GridGeometry& G = u.grid();
  if (G.shape() != Shape::HalfDisc) throw Error(ErrorKind::InvalidInput, "type 1 certificates need a half disc");
  const ChartManifold& m = u.ambient();
  const double h = G.h();
  ExperimentReport rep;
  rep.name = "type1_certificates";
  rep.anchor = "Lemma OrthoBoundary; GradBetaPerpToOutNormal; geodesic d1-boundary";
  rep.set_grid(GridMeta{G.shape_name(), G.r(), h, u.dim()});
  // Lagrangian membership of the segment image.
  double off = 0.0;
  for (int n = 0; n < G.size(); ++n)
    if (G.j_of(n) == 0)
      for (int c = 1; c < u.dim(); c += 2) off = std::max(off, std::abs(u.values()(c, n)));
  rep.value("segment_offset_from_L", off);
  (void)L;

  SurfaceData d = analyze(u);
  int p_node = G.index(0, 0);
  Vec p = u.point(p_node);
  // Ambient unit gradient of beta = dist(p, .): the end velocity of the
  // geodesic from p, normalised. No differencing of beta across p.
  std::optional<NormalChart> chart;
  if (!m.is_flat()) chart.emplace(normal_chart(m, p, 2.0 * G.r()));
  auto grad_beta = [&](int n) -> Vec {
    Vec q = u.point(n);
    if (!chart) {
      Vec dq = q - p;
      return dq / std::sqrt(dq.dot(m.metric(p) * dq));
    }
    Vec X = chart->inverse(q);
    OdeOptions opt;
    opt.fixed_steps = chart->fixed_steps();
    return geodesic(m, p, chart->frame() * X, {}, opt).v / X.norm();
  };
  // Coordinate components of grad_S beta at node n.
  auto surface_grad = [&](int n, const Vec& gb) {
    const Mat& g = d.ambient[n].g;
    Eigen::Vector2d a(gb.dot(g * d.xs.col(n)), gb.dot(g * d.xt.col(n)));
    return Eigen::Vector2d(d.gamma_inv[n] * a);
  };
  // (b) conormal derivative of beta along the segment; (c) geodesic curvature.
  double worst_b = 0.0, worst_c = 0.0;
  for (int n = 0; n < G.size(); ++n) {
    if (G.tag(n) != NodeTag::Segment || !d.valid[n] || n == p_node) continue;
    const Eigen::Matrix2d& gam = d.gamma[n];
    const Mat& g = d.ambient[n].g;
    // Outward conormal -(d_t - proj d_t onto d_s), unit in u*g.
    Eigen::Vector2d nu(gam(0, 1) / gam(0, 0), -1.0);
    nu /= std::sqrt(nu.dot(gam * nu));
    Vec nu_amb = nu[0] * d.xs.col(n) + nu[1] * d.xt.col(n);
    double dnu = nu_amb.dot(g * grad_beta(n));
    if (std::isfinite(dnu)) worst_b = std::max(worst_b, std::abs(dnu));
    Vec v = d.xss.col(n) + d.ambient[n].gamma.apply(d.xs.col(n), d.xs.col(n));
    Eigen::Vector2d c(v.dot(g * d.xs.col(n)), v.dot(g * d.xt.col(n)));
    Eigen::Vector2d chr = d.gamma_inv[n] * c;
    double kappa = std::abs(chr[1]) * std::sqrt(gam(1, 1) - gam(0, 1) * gam(0, 1) / gam(0, 0)) / gam(0, 0);
    if (std::isfinite(kappa)) worst_c = std::max(worst_c, kappa);
  }

  // (a) angle between the level curve beta = b and the segment where they meet.
  std::vector<int> seg;
  for (int n = 0; n < G.size(); ++n)
    if (G.j_of(n) == 0) seg.push_back(n);
  Mat seg_pts(u.dim(), static_cast<int>(seg.size()));
  for (size_t k = 0; k < seg.size(); ++k) seg_pts.col(static_cast<int>(k)) = u.point(seg[k]);
  Vec seg_dist = distances_from(m, p, seg_pts, 2.0 * G.r());
  Vec seg_beta = Vec::Constant(G.size(), NAN);
  for (size_t k = 0; k < seg.size(); ++k) seg_beta[seg[k]] = seg_dist[static_cast<int>(k)];
  double b_level = 0.5 * G.r();
  double worst_a = 0.0;
  for (int sgn : {-1, 1}) {
    for (int i = 1; i <= G.radius_cells(); ++i) {
      int n0 = G.index(sgn * (i - 1), 0), n1 = G.index(sgn * i, 0);
      if (n0 < 0 || n1 < 0 || !(seg_beta[n0] < b_level && seg_beta[n1] >= b_level)) continue;
      if (!d.valid[n0] || !d.valid[n1]) break;
      double lam = (b_level - seg_beta[n0]) / (seg_beta[n1] - seg_beta[n0]);
      Eigen::Matrix2d gam = (1 - lam) * d.gamma[n0] + lam * d.gamma[n1];
      Eigen::Vector2d up = (1 - lam) * surface_grad(n0, grad_beta(n0)) + lam * surface_grad(n1, grad_beta(n1));
      Eigen::Vector2d ts(1.0, 0.0);
      double cosang = std::abs(up.dot(gam * ts)) / std::sqrt(up.dot(gam * up) * ts.dot(gam * ts));
      // level curve is orthogonal to the gradient; its angle with the segment
      double ang = std::acos(std::clamp(cosang, 0.0, 1.0)) * 180.0 / M_PI;
      worst_a = std::max(worst_a, ang);
      break;
    }
  }
  rep.add("corner_angle_deviation_deg", worst_a, Relation::LessEqual, 2.0);
  rep.add("conormal_beta_derivative", worst_b, Relation::LessEqual, 10.0 * h);
  rep.add("segment_geodesic_curvature", worst_c, Relation::LessEqual, 10.0 * h);
  rep.notes.push_back("beta centred at the image of the segment midpoint; level b = r/2 for the corner angle");
  return rep;
}

}  // namespace jcl

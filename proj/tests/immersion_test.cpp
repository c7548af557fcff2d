#include "support.hpp"

#include "jcl/immersion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace jcl;
using namespace jcl::test;

namespace {

int centre(const GridImmersion& u) { return u.grid().index(0, 0); }

Vec nodal(const GridImmersion& u, const std::function<double(double, double)>& f) {
  const auto& G = u.grid();
  Vec v(G.size());
  for (int n = 0; n < G.size(); ++n) v[n] = f(G.s(n), G.t(n));
  return v;
}

// Every node of the 5x5 block around n is interior.
bool two_stencils_inside(const GridGeometry& G, int n) {
  for (int di = -2; di <= 2; ++di)
    for (int dj = -2; dj <= 2; ++dj) {
      int m = G.index(G.i_of(n) + di, G.j_of(n) + dj);
      if (m < 0 || G.tag(m) != NodeTag::Interior) return false;
    }
  return true;
}

GridImmersion sphere_surface(double rho, double r, double h) { return sphere_patch(disc(r, h), flat(4, 3.0), rho); }

}  // namespace

TEST(InducedMetric, ZSquaredGraphClosedForm) {
  auto u = z2_graph(0.5, 1.0 / 32);
  MetricField M = induced_metric(u);
  const auto& G = u.grid();
  int measured = 0;
  for (int n = 0; n < G.size(); ++n) {
    if (!std::isfinite(M.sqrt_det[n])) continue;
    ++measured;
    double rr = G.s(n) * G.s(n) + G.t(n) * G.t(n);
    // Stencils are exact on quadratics.
    EXPECT_NEAR(M.gamma[n](0, 0), 1 + 4 * rr, 1e-10);
    EXPECT_NEAR(M.gamma[n](1, 1), 1 + 4 * rr, 1e-10);
    EXPECT_NEAR(M.gamma[n](0, 1), 0.0, 1e-10);
    EXPECT_NEAR(M.sqrt_det[n], 1 + 4 * rr, 1e-10);
  }
  EXPECT_GT(measured, G.size() * 9 / 10);
}

TEST(InducedMetric, PlaneIsIdentity) {
  auto u = plane_graph(0.5, 1.0 / 16);
  MetricField M = induced_metric(u);
  for (const auto& g : M.gamma)
    if (g.allFinite()) {
      EXPECT_EQ((g - Eigen::Matrix2d::Identity()).norm(), 0.0);
    }
}

TEST(InducedMetric, SmallGradientGraphInverseBound) {
  auto u = graph_immersion(disc(0.5, 1.0 / 32), flat(), z_power(2, 0.3));
  MetricField M = induced_metric(u);
  for (const auto& gi : M.gamma_inv) {
    if (!gi.allFinite()) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(gi);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.25);
  }
}

TEST(InducedMetric, CollapsedSurfaceIsDegenerate) {
  auto G = disc(0.25, 1.0 / 16);
  auto u = surface_immersion(G, flat(), [](double s, double) {
    Vec v = Vec::Zero(4);
    v[0] = s;
    return v;
  });
  try {
    induced_metric(u);
    FAIL() << "expected DegenerateMetric";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMetric);
  }
}

TEST(Dbar, HolomorphicGraphVanishes) {
  const double h = 1.0 / 32;
  auto u = z2_graph(0.5, h);
  EXPECT_LE(finite_max(dbar_residual(u)), 5 * h * h);
}

TEST(Dbar, TotallyRealPlaneGivesSqrt2) {
  auto u = surface_immersion(disc(0.25, 1.0 / 16), flat(), [](double s, double t) {
    Vec v(4);
    v << s, 0.0, t, 0.0;
    return v;
  });
  Vec r = dbar_residual(u);
  for (int n = 0; n < r.size(); ++n)
    if (std::isfinite(r[n])) {
      EXPECT_NEAR(r[n], std::sqrt(2.0), 1e-12);
    }
}

TEST(Dbar, InvariantUnderAmbientRescale) {
  auto u = graph_immersion(disc(0.5, 1.0 / 32), perturbed(0.05), z_power(2));
  auto v = u.with_ambient(rescale(perturbed(0.05), 3.0));
  Vec a = dbar_residual(u), b = dbar_residual(v);
  for (int n = 0; n < a.size(); ++n)
    if (std::isfinite(a[n])) {
      EXPECT_NEAR(a[n], b[n], 1e-12);
    }
}

TEST(SecondFundamental, ZSquaredAtOrigin) {
  for (double h : {1.0 / 32, 1.0 / 64}) {
    auto u = z2_graph(0.5, h);
    CurvatureField cf = second_fundamental(u);
    int c = centre(u);
    EXPECT_NEAR(cf.B_norm[c], 4.0, 10 * h * h);
    // B(e1,e1) = 2 e3, B(e2,e2) = -2 e3, B(e1,e2) = 2 e4 at the origin.
    Vec e3 = Vec::Unit(4, 2), e4 = Vec::Unit(4, 3);
    EXPECT_LE((cf.B[c][0] - 2 * e3).norm(), 10 * h * h);
    EXPECT_LE((cf.B[c][3] + 2 * e3).norm(), 10 * h * h);
    EXPECT_LE((cf.B[c][1] - 2 * e4).norm(), 10 * h * h);
  }
}

TEST(SecondFundamental, PlaneVanishes) {
  auto u = plane_graph(0.5, 1.0 / 16);
  CurvatureField cf = second_fundamental(u);
  EXPECT_EQ(finite_max(cf.B_norm), 0.0);
}

TEST(SecondFundamental, SphereUmbilicValues) {
  for (double rho : {1.0, 2.0}) {
    const double h = 1.0 / 64;
    auto u = sphere_surface(rho, 0.5, h);
    CurvatureField cf = second_fundamental(u);
    Vec K = gauss_curvature(u);
    Vec Hn(cf.H.size());
    for (size_t n = 0; n < cf.H.size(); ++n) Hn[static_cast<int>(n)] = cf.H[n].norm();
    const auto& G = u.grid();
    for (int n = 0; n < G.size(); ++n) {
      if (!cf.valid[n] || G.tag(n) != NodeTag::Interior) continue;
      EXPECT_NEAR(cf.B_norm[n] * cf.B_norm[n], 2 / (rho * rho), 10 * h * h);
      EXPECT_NEAR(Hn[n], 2 / rho, 10 * h * h);
      // Brioschi differentiates gamma, so interior nodes next to the arc
      // inherit one-sided data; stay two stencils inside.
      if (std::hypot(G.s(n), G.t(n)) <= 0.8 * G.r()) {
        EXPECT_NEAR(K[n], 1 / (rho * rho), 10 * h * h);
      }
    }
  }
}

TEST(SecondFundamental, SymmetryAndDualNorm) {
  for (auto u : {z2_graph(0.5, 1.0 / 32), graph_immersion(disc(0.5, 1.0 / 32), perturbed(0.05), z_power(3)),
                 sphere_surface(1.0, 0.5, 1.0 / 32)}) {
    const double h = u.grid().h();
    CurvatureField cf = second_fundamental(u);
    for (int n = 0; n < u.grid().size(); ++n) {
      if (!cf.valid[n]) continue;
      if (u.grid().tag(n) == NodeTag::Interior) {
        EXPECT_LE(cf.symmetry_defect[n], 10 * h * h);
      }
      EXPECT_NEAR(cf.A_norm[n], cf.B_norm[n], 1e-10 * (1 + cf.B_norm[n]));
    }
  }
}

TEST(SecondFundamental, FrameIndependent) {
  auto u = graph_immersion(disc(0.5, 1.0 / 32), perturbed(0.05), z_power(3));
  CurvatureField a = second_fundamental(u, 0.0);
  CurvatureField b = second_fundamental(u, 0.7);
  for (int n = 0; n < u.grid().size(); ++n) {
    if (!a.valid[n]) continue;
    EXPECT_NEAR(a.B_norm[n], b.B_norm[n], 1e-9);
    EXPECT_LE((a.H[n] - b.H[n]).norm(), 1e-9);
  }
}

TEST(SecondFundamental, RescaleDividesNormByC) {
  auto u = graph_immersion(disc(0.5, 1.0 / 32), perturbed(0.05), z_power(2));
  const double c = 4.0;
  auto v = u.with_ambient(rescale(perturbed(0.05), c));
  CurvatureField a = second_fundamental(u), b = second_fundamental(v);
  for (int n = 0; n < u.grid().size(); ++n)
    if (a.valid[n]) {
      EXPECT_NEAR(b.B_norm[n], a.B_norm[n] / c, 1e-10 * a.B_norm[n] + 1e-14);
    }
}

TEST(MeanCurvature, HolomorphicGraphIsMinimal) {
  const double h = 1.0 / 32;
  auto u = graph_immersion(disc(0.5, h), flat(), z_power(3));
  auto H = mean_curvature(u);
  double worst = 0.0;
  for (const auto& v : H)
    if (v.allFinite()) worst = std::max(worst, v.norm());
  EXPECT_LE(worst, 10 * h * h);
  // The flat ambient has Q = 0, so the residual is |H| itself.
  EXPECT_LE(finite_max(mc_residual(u)), 10 * h * h);
}

TEST(GaussCurvature, ZSquaredAtOrigin) {
  const double h = 1.0 / 64;
  auto u = z2_graph(0.5, h);
  Vec K = gauss_curvature(u);
  // Intrinsic formula: K = -8 / (1 + 4 rho^2)^3.
  EXPECT_NEAR(K[centre(u)], -8.0, 20 * h);
  const auto& G = u.grid();
  for (int n = 0; n < G.size(); ++n) {
    if (!std::isfinite(K[n]) || G.tag(n) != NodeTag::Interior) continue;
    double rr = G.s(n) * G.s(n) + G.t(n) * G.t(n);
    EXPECT_NEAR(K[n], -8.0 / std::pow(1 + 4 * rr, 3), 50 * h * h) << G.s(n) << "," << G.t(n);
  }
}

TEST(GaussCurvature, PlaneIsFlat) {
  Vec K = gauss_curvature(plane_graph(0.5, 1.0 / 16));
  EXPECT_EQ(finite_max(K.cwiseAbs()), 0.0);
}

TEST(GaussCurvature, DefectConvergesAtSecondOrder) {
  auto defect = [](double h) {
    return window_max(GridGeometry(Shape::Disc, 0.5, h),
                      gauss_defect(graph_immersion(disc(0.5, h), perturbed(0.05), z_power(3))), 0.5);
  };
  double d1 = defect(1.0 / 32), d2 = defect(1.0 / 64);
  double ratio = d1 / d2;
  EXPECT_GE(ratio, 3.0) << d1 << " " << d2;
  EXPECT_LE(ratio, 5.0) << d1 << " " << d2;
}

TEST(Integrate, ZSquaredArea) {
  auto u = z2_graph(0.5, 1.0 / 128);
  const double r = 0.5;
  const double exact = M_PI * r * r + 2 * M_PI * std::pow(r, 4);
  EXPECT_NEAR(exact, 1.1780972450961725, 1e-15);
  EXPECT_NEAR(integrate(u, Vec::Ones(u.grid().size())), exact, 2e-3);
}

TEST(Integrate, PlaneDiscArea) {
  for (double h : {1.0 / 16, 1.0 / 64}) {
    auto u = plane_graph(0.5, h);
    EXPECT_NEAR(integrate(u, Vec::Ones(u.grid().size())), M_PI * 0.25, 1e-9);
  }
  auto hd = graph_immersion(half_disc(0.5, 1.0 / 32), flat(), zero_heights());
  EXPECT_NEAR(integrate(hd, Vec::Ones(hd.grid().size())), M_PI * 0.125, 1e-9);
}

TEST(Integrate, SecondOrderConvergence) {
  // cos(s) e^t is harmonic and the area density 1 + 4 rho^2 is radial, so the
  // mean value property gives the area of the graph.
  const double exact = M_PI * 0.25 + 2 * M_PI * 0.0625;
  auto err = [exact](double h) {
    auto u = z2_graph(0.5, h);
    return std::abs(integrate(u, nodal(u, [](double s, double t) { return std::cos(s) * std::exp(t); })) - exact);
  };
  double a = err(1.0 / 32), b = err(1.0 / 64);
  EXPECT_LE(b, 2e-3);
  EXPECT_GE(a / b, 3.0) << a << " " << b;
}

TEST(Integrate, AdditiveOverSplit) {
  auto u = z2_graph(0.5, 1.0 / 32);
  const auto& G = u.grid();
  Vec f = nodal(u, [](double s, double t) { return 1 + s * t; });
  std::vector<char> left(G.size()), right(G.size()), all(G.size(), 1);
  for (int n = 0; n < G.size(); ++n) {
    left[n] = G.s(n) < 0;
    right[n] = !left[n];
  }
  EXPECT_NEAR(integrate(u, f, left) + integrate(u, f, right), integrate(u, f, all), 1e-13);
}

TEST(Integrate, EmptyRegionThrows) {
  auto u = plane_graph(0.25, 1.0 / 8);
  std::vector<char> none(u.grid().size(), 0);
  try {
    integrate(u, Vec::Ones(u.grid().size()), none);
    FAIL() << "expected EmptyRegion";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyRegion);
  }
}

TEST(Laplacian, PlaneQuadraticIsExact) {
  auto u = plane_graph(0.5, 1.0 / 32);
  Vec L = laplace_beltrami(u, nodal(u, [](double s, double t) { return s * s + t * t; }));
  const auto& G = u.grid();
  int counted = 0;
  for (int n = 0; n < G.size(); ++n)
    if (G.tag(n) == NodeTag::Interior) {
      EXPECT_NEAR(L[n], 4.0, 1e-9);
      ++counted;
    }
  EXPECT_GT(counted, 0);
}

TEST(Laplacian, SquaredDistanceOnMinimalGraph) {
  const double h = 1.0 / 64;
  auto u = z2_graph(0.5, h);
  const Vec p = u.point(centre(u));
  Vec f(u.grid().size());
  for (int n = 0; n < f.size(); ++n) f[n] = (u.point(n) - p).squaredNorm();
  Vec L = laplace_beltrami(u, f);
  for (int n = 0; n < f.size(); ++n)
    if (u.grid().tag(n) == NodeTag::Interior) {
      EXPECT_NEAR(L[n], 4.0, 20 * h * h);
    }
}

TEST(Laplacian, DiscreteDivergenceTheorem) {
  const double h = 1.0 / 32;
  auto u = graph_immersion(disc(0.5, h), perturbed(0.05), z_power(3));
  Vec f = nodal(u, [](double s, double t) { return std::sin(2 * s) * std::cos(t) + s * s * s - 0.5 * t; });
  DivergenceCheck dc = divergence_check(u, f);
  EXPECT_LE(std::abs(dc.interior - dc.boundary), 10 * h);
}

TEST(GradB, PlaneVanishes) {
  GradB g = grad_B_norm(plane_graph(0.5, 1.0 / 16));
  EXPECT_EQ(finite_max(g.direct), 0.0);
}

TEST(GradB, SphereIsParallel) {
  const double h = 1.0 / 64;
  auto u = sphere_surface(1.0, 0.5, h);
  GradB g = grad_B_norm(u);
  int counted = 0;
  for (int n = 0; n < u.grid().size(); ++n) {
    if (!two_stencils_inside(u.grid(), n)) continue;
    ++counted;
    EXPECT_LE(g.direct[n], 50 * h);
  }
  EXPECT_GT(counted, u.grid().size() / 2);
}

TEST(GradB, DualRouteAgrees) {
  for (auto u : {z2_graph(0.5, 1.0 / 32), graph_immersion(disc(0.5, 1.0 / 32), perturbed(0.05), z_power(3))}) {
    GradB g = grad_B_norm(u);
    for (int n = 0; n < g.direct.size(); ++n)
      if (std::isfinite(g.direct[n])) {
        EXPECT_NEAR(g.direct[n], g.dual[n], 1e-8 * (1 + g.direct[n]));
      }
  }
}

TEST(GradB, ZSquaredCentreValueSettles) {
  std::vector<double> v;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    auto u = z2_graph(0.5, h);
    v.push_back(grad_B_norm(u).direct[centre(u)]);
  }
  EXPECT_LE(std::abs(v[2] - v[1]), 0.5 * std::abs(v[1] - v[0])) << v[0] << " " << v[1] << " " << v[2];
}

TEST(GridIO, BinaryAndCsvRoundTrip) {
  auto u = graph_immersion(half_disc(0.5, 1.0 / 16), flat(), z_power(3));
  auto dir = std::filesystem::temp_directory_path() / "jcl_grid_io";
  std::filesystem::create_directories(dir);
  write_grid_binary((dir / "u.bin").string(), u);
  write_grid_csv((dir / "u.csv").string(), u);
  GridImmersion a = read_grid_binary((dir / "u.bin").string(), flat());
  GridImmersion b = read_grid_csv((dir / "u.csv").string(), flat());
  for (const auto* w : {&a, &b}) {
    EXPECT_EQ(w->grid().shape(), Shape::HalfDisc);
    EXPECT_EQ(w->grid().size(), u.grid().size());
    EXPECT_EQ(w->values(), u.values());
  }
  std::filesystem::remove_all(dir);
}

TEST(CoarseRestriction, KeepsEveryOtherNode) {
  auto u = z2_graph(0.5, 1.0 / 32);
  auto c = coarse_restriction(u);
  EXPECT_DOUBLE_EQ(c.grid().h(), 1.0 / 16);
  for (int n = 0; n < c.grid().size(); ++n) {
    int m = u.grid().index(2 * c.grid().i_of(n), 2 * c.grid().j_of(n));
    ASSERT_GE(m, 0);
    EXPECT_EQ(c.point(n), u.point(m));
  }
}

// In dimension 2 the only graph is the chart itself: totally geodesic,
// with the ambient Gauss curvature.
TEST(SecondFundamental, SphereChartIsTotallyGeodesic) {
  const double rho = 2.0, h = 1.0 / 32;
  auto u = graph_immersion(disc(0.5, h), sphere(rho), polynomial_trace({0.0}, 2));
  CurvatureField cf = second_fundamental(u);
  EXPECT_LE(finite_max(cf.B_norm), 1e-12);
  Vec K = gauss_curvature(u);
  EXPECT_NEAR(K[centre(u)], 1 / (rho * rho), 10 * h * h);
  EXPECT_THROW(polynomial_trace({0.0, 1.0}, 2), Error);
}

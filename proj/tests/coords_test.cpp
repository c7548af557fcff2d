#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace jcl;
using namespace jcl::test;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Radial distance from the origin in the stereographic sphere chart.
double sphere_radial_distance(double rho, double x) { return 2.0 * rho * std::atan(x / (2.0 * rho)); }

}  // namespace

TEST(ExpMap, FlatIsAffine) {
  auto m = flat(4, 3.0);
  for (const auto& p : sample_points(4, 5, 1.0, 7))
    for (const auto& X : sample_points(4, 5, 0.8, 11)) {
      Vec q = exp_map(m, p, X);
      EXPECT_LE((q - (p + X)).norm(), 1e-12);
    }
}

TEST(ExpMap, ZeroVectorIsIdentityExactly) {
  auto m = perturbed(0.02);
  Vec p = sample_points(4, 1, 0.5, 3)[0];
  Vec q = exp_map(m, p, Vec::Zero(4));
  EXPECT_EQ(q, p);
}

TEST(ExpMap, SphereSpeedConserved) {
  const double rho = 1.0;
  auto m = sphere(rho, 3.0);
  // Unit speed along arclength pi rho / 2 starting away from the chart centre.
  Vec p = v2(0.1, -0.05);
  Mat g = m.metric(p);
  Vec X = v2(1.0, 0.4);
  X *= (M_PI * rho / 2) / std::sqrt(X.dot(g * X));
  GeodesicResult r = geodesic(m, p, X);
  EXPECT_LE(r.speed_drift, 1e-8);
  Vec v = r.v;
  Mat g1 = m.metric(r.x);
  EXPECT_NEAR(std::sqrt(v.dot(g1 * v)), M_PI * rho / 2, 1e-8 * M_PI);
}

TEST(ExpMap, SphereDistanceEqualsParameter) {
  const double rho = 1.0;
  auto m = sphere(rho, 3.0);
  for (double t : {0.1, 0.5, 1.0, 1.5}) {
    Vec q = exp_map(m, v2(0, 0), v2(t, 0));
    // Radial geodesic from the centre; check against the closed-form distance.
    EXPECT_NEAR(sphere_radial_distance(rho, q.norm()), t, 1e-6) << t;
    EXPECT_NEAR(q[1], 0.0, 1e-12);
  }
}

TEST(ExpMap, LeavingTheBoxThrows) {
  auto m = flat(2, 1.0);
  try {
    exp_map(m, v2(0, 0), v2(5, 0));
    FAIL() << "expected LeftDomain";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LeftDomain);
  }
}

TEST(ParallelTransport, FlatUnchanged) {
  auto m = flat(4, 3.0);
  std::vector<Vec> path = sample_points(4, 6, 1.0, 5);
  Vec v = sample_points(4, 1, 1.0, 9)[0];
  EXPECT_LE((parallel_transport(m, path, v) - v).norm(), 1e-12);
}

TEST(ParallelTransport, PreservesInnerProducts) {
  auto m = perturbed(0.05);
  std::vector<Vec> path = {Vec::Zero(4), sample_points(4, 1, 0.6, 21)[0], sample_points(4, 1, 0.6, 22)[0]};
  auto vs = sample_points(4, 10, 1.0, 31);
  auto ws = sample_points(4, 10, 1.0, 32);
  const Mat g0 = m.metric(path.front());
  const Mat g1 = m.metric(path.back());
  for (int k = 0; k < 10; ++k) {
    Vec a = parallel_transport(m, path, vs[k]);
    Vec b = parallel_transport(m, path, ws[k]);
    double before = vs[k].dot(g0 * ws[k]);
    double after = a.dot(g1 * b);
    double scale = std::sqrt(vs[k].dot(g0 * vs[k]) * ws[k].dot(g0 * ws[k]));
    EXPECT_LE(std::abs(after - before), 1e-8 * scale) << k;
  }
}

TEST(ParallelTransport, HolonomyMatchesEnclosedCurvature) {
  auto m = sphere(1.0, 1.5);
  for (double s : {0.1, 0.2}) {
    double a = s / 2;
    std::vector<Vec> loop = {v2(-a, -a), v2(a, -a), v2(a, a), v2(-a, a), v2(-a, -a)};
    Vec v = v2(1, 0);
    v /= std::sqrt(v.dot(m.metric(loop[0]) * v));
    Vec w = parallel_transport(m, loop, v);
    // Angle between v and w in the (conformal) metric at the corner.
    double angle = std::abs(std::atan2(v[0] * w[1] - v[1] * w[0], v.dot(w)));
    EXPECT_NEAR(angle, s * s, 0.1 * s * s) << s;
  }
}

TEST(NormalChart, FlatIsAffineFrameMap) {
  auto m = flat(4, 3.0);
  Vec p = sample_points(4, 1, 0.3, 41)[0];
  NormalChart c = normal_chart(m, p, 1.0);
  for (const auto& X : sample_points(4, 10, 0.5, 43)) {
    EXPECT_LE((c.forward(X) - (p + c.frame() * X)).norm(), 1e-12);
    EXPECT_LE((c.inverse(p + c.frame() * X) - X).norm(), 1e-12);
  }
  EXPECT_LE((c.frame().transpose() * c.frame() - Mat::Identity(4, 4)).norm(), 1e-12);
}

TEST(NormalChart, InverseOfForwardIsIdentity) {
  auto m = sphere(1.0, 1.5);
  NormalChart c = normal_chart(m, v2(0.1, 0.05), 0.6);
  double worst = 0.0;
  for (const auto& X : sample_points(2, 100, 0.3, 51)) worst = std::max(worst, (c.inverse(c.forward(X)) - X).norm());
  EXPECT_LE(worst, 1e-9);

  auto mp = perturbed(0.02);
  NormalChart cp = normal_chart(mp, Vec::Zero(4), 0.4);
  worst = 0.0;
  for (const auto& X : sample_points(4, 100, 0.15, 53)) worst = std::max(worst, (cp.inverse(cp.forward(X)) - X).norm());
  EXPECT_LE(worst, 1e-9);
}

TEST(NormalChart, FrameIsOrthonormalInMetric) {
  auto m = perturbed(0.05);
  Vec p = sample_points(4, 1, 0.4, 61)[0];
  NormalChart c = normal_chart(m, p, 0.3);
  EXPECT_LE((c.frame().transpose() * m.metric(p) * c.frame() - Mat::Identity(4, 4)).norm(), 1e-12);
}

TEST(NormalChart, SphereMetricDeviationWithinQuartic) {
  auto m = sphere(1.0, 1.5);
  NormalChart c = normal_chart(m, v2(0, 0), 0.6);
  for (const auto& X : sample_points(2, 40, 0.3 / std::sqrt(2.0), 71)) {
    double q = X.norm();
    Mat d = c.chart_metric(X) - Mat::Identity(2, 2);
    EXPECT_LE(d.squaredNorm(), std::pow(q, 4)) << q;
  }
}

TEST(NormalChart, SphereChartMetricMatchesPolarForm) {
  // In normal coordinates on the unit sphere, g = dr^2 + sin^2 r dtheta^2.
  auto m = sphere(1.0, 1.5);
  NormalChart c = normal_chart(m, v2(0, 0), 0.6);
  Vec X = v2(0.3, 0.2);
  double r = X.norm();
  Vec e = X / r;
  Vec f = v2(-e[1], e[0]);
  Mat G = c.chart_metric(X);
  EXPECT_NEAR(e.dot(G * e), 1.0, 1e-6);
  EXPECT_NEAR(f.dot(G * f), std::pow(std::sin(r) / r, 2), 1e-6);
  EXPECT_NEAR(e.dot(G * f), 0.0, 1e-6);
}

TEST(NormalChart, OutsideChartThrows) {
  auto m = flat(2, 1.0);
  NormalChart c = normal_chart(m, v2(0, 0), 0.5);
  try {
    c.inverse(v2(5.0, 0.0));
    FAIL() << "expected ShootingDiverged";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShootingDiverged);
  }
}

TEST(LAdaptedChart, FlatMapsLIntoEvenSlotsZero) {
  auto m = flat(4, 3.0);
  LagrangianModel L = coordinate_lagrangian(m, 2.0);
  NormalChart c = l_adapted_chart(L, Vec::Zero(2));
  // Chart coordinates (l1, nu1, l2, nu2): points with nu = 0 land on L.
  for (const auto& l : sample_points(2, 10, 0.5, 81)) {
    Vec X(4);
    X << l[0], 0.0, l[1], 0.0;
    Vec q = c.forward(X);
    EXPECT_NEAR(q[1], 0.0, 1e-12);
    EXPECT_NEAR(q[3], 0.0, 1e-12);
  }
  // Identity-like: frame is the coordinate basis up to signs.
  Mat F = c.frame().cwiseAbs();
  EXPECT_LE((F - Mat::Identity(4, 4)).norm(), 1e-12);
}

TEST(ChartEstimates, FlatAllZero) {
  auto m = flat(4, 3.0);
  NormalChart c = normal_chart(m, Vec::Zero(4), 1.0);
  ExperimentReport r = chart_estimate_report(c, 0.5);
  EXPECT_TRUE(r.pass);
  for (const auto& cr : r.criteria) EXPECT_LE(std::abs(cr.measured), 1e-12) << cr.name;
}

TEST(ChartEstimates, RescaledSpherePassesWithMargin) {
  auto m = rescale(sphere(1.0, 1.5), 10.0);
  NormalChart c = normal_chart(m, v2(0, 0), 1.2);
  ExperimentReport r = chart_estimate_report(c, 1.0);
  EXPECT_TRUE(r.pass);
  for (const auto& cr : r.criteria) {
    EXPECT_TRUE(cr.pass) << cr.name;
    EXPECT_LE(cr.measured, 0.5 * cr.bound) << cr.name;
  }
}

TEST(ChartEstimates, LAdaptedFlatChristoffelVanishesAlongL) {
  auto m = flat(4, 3.0);
  LagrangianModel L = coordinate_lagrangian(m, 2.0);
  NormalChart c = l_adapted_chart(L, Vec::Zero(2));
  ExperimentReport r = chart_estimate_report(c, 0.5);
  EXPECT_TRUE(r.pass);
  bool saw_l5 = false;
  for (const auto& cr : r.criteria)
    if (cr.name == "L5_christoffel_vanishing") {
      saw_l5 = true;
      EXPECT_EQ(cr.measured, 0.0);
    }
  EXPECT_TRUE(saw_l5);
}

TEST(ChartEstimates, LAdaptedTotallyGeodesicConformal) {
  // Conformal factor even in the normal slots keeps L totally geodesic.
  Vec a(4);
  a << 0.2, 0.0, -0.1, 0.0;
  Vec d(4);
  d << 0.3, 0.5, 0.1, 0.4;
  LagrangianModel L = coordinate_lagrangian(conformal(a, Mat(d.asDiagonal())), 1.0);
  NormalChart c = l_adapted_chart(L, Vec::Zero(2));
  ExperimentReport r = chart_estimate_report(c, 0.1, 8);
  int seen = 0;
  for (const auto& cr : r.criteria)
    if (cr.name.rfind("L", 0) == 0) {
      ++seen;
      EXPECT_TRUE(cr.pass) << cr.name << " " << cr.measured;
    }
  EXPECT_EQ(seen, 3);
}

TEST(DistanceField, FlatIsEuclidean) {
  auto m = flat(4, 3.0);
  Vec p = sample_points(4, 1, 0.3, 91)[0];
  DistanceField beta = distance_field(m, p, 1.0);
  EXPECT_EQ(beta(p), 0.0);
  for (const auto& q : sample_points(4, 20, 0.5, 93)) EXPECT_NEAR(beta(q), (q - p).norm(), 1e-12);
}

TEST(DistanceField, SphereMatchesArclength) {
  const double rho = 1.0;
  auto m = sphere(rho, 3.0);
  DistanceField beta = distance_field(m, v2(0, 0), 0.8);
  for (double x : {0.05, 0.2, 0.5, 0.9}) {
    Vec q = v2(x * 0.6, x * 0.8);
    EXPECT_NEAR(beta(q), sphere_radial_distance(rho, x), 1e-6) << x;
  }
}

TEST(DistanceField, ExpOfScaledUnitVectorHasDistanceR) {
  auto m = perturbed(0.02);
  Vec p = Vec::Zero(4);
  DistanceField beta = distance_field(m, p, 0.3);
  const Mat g = m.metric(p);
  for (const auto& X0 : sample_points(4, 8, 1.0, 101)) {
    Vec X = X0 / std::sqrt(X0.dot(g * X0));
    for (double r : {0.05, 0.15, 0.25}) EXPECT_NEAR(beta(exp_map(m, p, r * X)), r, kTolChart) << r;
  }
}

TEST(DistanceField, LipschitzAndSymmetric) {
  auto m = sphere(1.0, 3.0);
  auto pts = sample_points(2, 10, 0.25, 111);
  DistanceField beta = distance_field(m, v2(0, 0), 0.8);
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    DistanceField from_q = distance_field(m, pts[i], 0.8);
    double d = from_q(pts[i + 1]);
    DistanceField from_q2 = distance_field(m, pts[i + 1], 0.8);
    EXPECT_NEAR(d, from_q2(pts[i]), 1e-6);
    EXPECT_LE(std::abs(beta(pts[i]) - beta(pts[i + 1])), d * (1 + kTolChart) + 1e-12);
  }
}

TEST(DistanceField, BatchMatchesPointwise) {
  auto m = perturbed(0.02);
  Vec p = Vec::Zero(4);
  auto pts = sample_points(4, 12, 0.12, 121);
  Mat cols(4, static_cast<int>(pts.size()));
  for (size_t k = 0; k < pts.size(); ++k) cols.col(static_cast<int>(k)) = pts[k];
  Vec batch = distances_from(m, p, cols, 0.4);
  DistanceField beta = distance_field(m, p, 0.4);
  for (size_t k = 0; k < pts.size(); ++k) EXPECT_NEAR(batch[static_cast<int>(k)], beta(pts[k]), 1e-8);
}

TEST(ShortPaths, CurvatureExceedsBound) {
  auto res = short_paths_check();
  ASSERT_FALSE(res.empty());
  for (const auto& r : res) {
    EXPECT_LT(r.length, 0.5);
    EXPECT_GE(r.max_curvature, r.bound) << r.length;
  }
}

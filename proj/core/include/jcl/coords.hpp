#pragma once

#include "jcl/manifold.hpp"
#include "jcl/report.hpp"

#include <optional>

namespace jcl {

inline constexpr double kTolChart = 1e-9;

struct OdeOptions {
  double rel_tol = 1e-10;
  int max_steps = 100000;
  // When > 0 the integrator takes exactly this many RK4 steps, which keeps
  // the endpoint a smooth function of the initial data (needed whenever
  // the result is differentiated numerically).
  int fixed_steps = 0;
};

struct GeodesicResult {
  Vec x;
  Vec v;
  // Vectors transported along the geodesic, if any were supplied.
  std::vector<Vec> transported;
  int steps = 0;
  // max | |v|_g / |v0|_g - 1 | over accepted steps
  double speed_drift = 0.0;
};

// Solves x'' + Gamma(x', x') = 0 on [0, 1] from (p, X), optionally carrying
// vectors by parallel transport.
GeodesicResult geodesic(const ChartManifold& m, const Vec& p, const Vec& X,
                        const std::vector<Vec>& carry = {}, const OdeOptions& opt = {});
Vec exp_map(const ChartManifold& m, const Vec& p, const Vec& X, const OdeOptions& opt = {});

// Transport v along the polyline (straight chart segments).
Vec parallel_transport(const ChartManifold& m, const std::vector<Vec>& path, const Vec& v,
                       const OdeOptions& opt = {});

enum class ChartKind { Plain, LAdapted };

struct ChartStats {
  int newton_iterations = 0;
  int inverse_calls = 0;
};

class NormalChart {
 public:
  NormalChart(ChartManifold m, Vec center, Mat frame, ChartKind kind, int n_tangent);

  const ChartManifold& manifold() const { return m_; }
  const Vec& center() const { return center_; }
  // Columns are the g(p)-orthonormal frame vectors.
  const Mat& frame() const { return frame_; }
  ChartKind kind() const { return kind_; }
  double radius() const { return radius_; }
  double injectivity_estimate() const { return inj_; }
  int fixed_steps() const { return steps_; }

  Vec forward(const Vec& X) const;
  // Damped Newton shooting; guess defaults to the frame-linearized inverse.
  // When jac is given and non-empty it seeds the Broyden matrix, and the
  // final one is written back (warm starts along a sequence of points).
  Vec inverse(const Vec& q, const Vec* guess = nullptr, Mat* jac = nullptr) const;
  // 4th-order central difference Jacobian of forward.
  Mat jacobian(const Vec& X, double step = 1e-3) const;
  // Metric components in chart coordinates.
  Mat chart_metric(const Vec& X) const;
  // Christoffel symbols of the chart metric, via the transformation law.
  Tensor3 chart_christoffel(const Vec& X) const;

  ChartStats stats() const { return stats_; }

  // Set by the constructors below.
  void set_radius(double r, double inj) {
    radius_ = r;
    inj_ = inj;
  }
  void set_fixed_steps(int s) { steps_ = s; }

 private:
  ChartManifold m_;
  Vec center_;
  Mat frame_;
  ChartKind kind_;
  int n_tangent_ = 0;
  double radius_ = 0.0;
  double inj_ = 0.0;
  int steps_ = 64;
  mutable ChartStats stats_;
};

// Lower bound for the injectivity radius from a 16-direction shooting probe.
double estimate_injectivity(const NormalChart& chart, double r_max);

NormalChart normal_chart(const ChartManifold& m, const Vec& p);
// Probes the injectivity radius only up to probe_radius (cheaper).
NormalChart normal_chart(const ChartManifold& m, const Vec& p, double probe_radius);
NormalChart l_adapted_chart(const LagrangianModel& L, const Vec& param);

// GammaEst style estimates of a chart on the ball of the given radius.
ExperimentReport chart_estimate_report(const NormalChart& chart, double radius, int samples = 24);

class DistanceField {
 public:
  explicit DistanceField(NormalChart chart, double radius);
  const NormalChart& chart() const { return chart_; }
  double radius() const { return radius_; }
  double operator()(const Vec& q) const;
  // Values at many points, warm-starting each shooting solve from the
  // previous point's solution. Points farther than the radius (by the
  // frame-linearized estimate, with slack) get +inf.
  std::vector<double> evaluate(const std::vector<Vec>& pts) const;

 private:
  NormalChart chart_;
  double radius_;
};

DistanceField distance_field(const ChartManifold& m, const Vec& p, double radius);
// Distance from p to each column of pts; +inf beyond the radius (curved case).
Vec distances_from(const ChartManifold& m, const Vec& p, const Mat& pts, double radius);

// Sampled C^k seminorm of a covariant 2-tensor field in the normal chart at p,
// over the ball of radius 3/4 of the injectivity estimate.
struct CkNorm {
  double value = 0.0;
  double ball_radius = 0.0;
  int samples = 0;
};
CkNorm tensor_ck_norm(const ChartManifold& m, const MatrixField& T, const Vec& p, int k, int lattice = 8);
// 10 m^2 [g]_{C^2} <= 1 and inj >= 2.
bool admissible(const ChartManifold& m, const Vec& p, int lattice = 8);

struct ShortPathResult {
  double length = 0.0;
  double max_curvature = 0.0;
  double bound = 0.0;
};
// Half-ellipse paths leaving (R x {0})^n orthogonally and returning to it in
// the flat model; each entry compares max geodesic curvature with 1/(2l) - 1.
std::vector<ShortPathResult> short_paths_check(int segments = 2000);

}  // namespace jcl

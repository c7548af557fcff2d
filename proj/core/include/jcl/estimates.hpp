#pragma once

#include "jcl/immersion.hpp"
#include "jcl/report.hpp"

#include <array>
#include <memory>
#include <utility>
#include <vector>

namespace jcl {

inline constexpr double kTolCoarea = 0.01;
inline constexpr double kTolMono = 1e-4;

// P1 triangulation of the node set. Each lattice cell with all four nodes
// present is split along its (i,j)-(i+1,j+1) diagonal; cells with three
// nodes give one triangle.
class P1Mesh {
 public:
  explicit P1Mesh(const GridImmersion& u);

  struct Triangle {
    std::array<int, 3> v;
    double area0;             // parameter-space area
    double sqrt_det;          // induced area density (constant per triangle)
    Eigen::Matrix2d gamma_inv;
    Eigen::Matrix2d to_grad;  // maps (q1-q0, q2-q0) to the parameter gradient
  };
  const std::vector<Triangle>& triangles() const { return tris_; }
  const GridGeometry& grid() const { return *grid_; }

  // Integral of the P1 field f over {q <= level}.
  double integrate_below(const Vec& f, const Vec& q, double level) const;
  // Integral over the level line {q = level} of f * |grad_S q|^power ds.
  double level_integral(const Vec& f, const Vec& q, double level, int power) const;

 private:
  std::shared_ptr<const GridGeometry> grid_;
  std::vector<Triangle> tris_;
  Vec s_, t_;
};

struct SublevelOptions {
  int n_levels = 24;
  // Largest level; 0 picks the largest value whose sublevel set stays
  // inside the equation nodes.
  double tau_max = 0.0;
  double tol_coarea = kTolCoarea;
};

struct SublevelFamily {
  explicit SublevelFamily(GridImmersion surface) : u(std::move(surface)) {}

  GridImmersion u;
  int center = -1;
  Vec p;
  Vec beta;
  Vec f;
  bool half = false;
  std::vector<double> levels;
  std::vector<double> F;
  // Integral of f / |grad_S beta| over each level line.
  std::vector<double> boundary_weights;
  std::vector<double> critical_values;
  double tau_min = 0.0;
  double tau_max = 0.0;
  // F(b) - F(a) against the integral of the level-line weights.
  double coarea_increment = 0.0;
  double coarea_integral = 0.0;
  double coarea_defect = 0.0;
  double tol_coarea = kTolCoarea;
  std::shared_ptr<const P1Mesh> mesh;
  // beta^2, +inf where the distance is not available.
  Vec q;

  // F at an arbitrary level.
  double F_at(double tau) const;
};

// Ambient distance from the image of `center` to every node.
Vec beta_field(const GridImmersion& u, int center);

SublevelFamily sublevel_family(const GridImmersion& u, int center, const Vec& f, const SublevelOptions& opt = {});
ExperimentReport coarea_report(const SublevelFamily& fam);

// Levels up to b are used. eps_area enters the area corollary (f = 1 only).
ExperimentReport monotonicity_check(const SublevelFamily& fam, double lambda, double b, double C,
                                    double eps_area = 0.1);
// epsilon = exp(2Cb) - 1, the smallest admissible one for this b.
ExperimentReport mean_value_check(const SublevelFamily& fam, double lambda, double b, double C);

// r <= min(grid radius, 1/C) / 2. f_nonconst is the second IBP test field
// (1 + beta^2 when empty).
ExperimentReport laplacian_beta_check(const GridImmersion& u, int center, double C, double r,
                                      const Vec& f_nonconst = Vec());

// (lower, upper) = (C/2 cot(C beta/2), C/2 coth(C beta/2)) for 0 < C beta <= 1.
std::pair<double, double> hessian_spaceform_values(double C, double beta);
// Both comparison inequalities over C beta = step, 2 step, ..., 1.
ExperimentReport hessian_sandwich_report(double step = 1e-3);

struct MonotoneProduct {
  bool monotone = false;
  // (gf)' >= 0 on the intervals where f is constant.
  bool regular_hypothesis = false;
};
// f: non-negative non-decreasing step samples; g: non-negative samples of a
// C^1 function; both on the increasing grid tau.
MonotoneProduct monotone_product(const std::vector<double>& tau, const std::vector<double>& f,
                                 const std::vector<double>& g);
bool monotone_product_check(const std::vector<double>& tau, const std::vector<double>& f,
                            const std::vector<double>& g);

enum class CurveFamily { Node, Critical, Plane };

struct ThresholdOptions {
  // Radii in units of the member's length scale (k^{-1/2} for the node,
  // 1/k for the critical family).
  std::vector<double> radius_factors{0.72, 0.75, 0.78};
  std::vector<double> k_values{4, 8, 16};
  int cells = 48;
  bool refine = true;
  double rescale_c = 3.0;
};

// Family member on flat C^2 with its own grid.
GridImmersion curve_family_member(CurveFamily family, double k, int cells);
double family_length_scale(CurveFamily family, double k);

struct ThresholdSample {
  double k = 0.0;
  double r = 0.0;
  double B_center = 0.0;
  bool triggered = false;
  double total_curvature = 0.0;
};
// T(r) = integral of |B|^2 over S_r(zeta*) at the radii r that fire the trigger.
std::vector<ThresholdSample> threshold_samples(const GridImmersion& u, double k,
                                               const std::vector<double>& radii);

ExperimentReport curvature_threshold_experiment(CurveFamily family, const ThresholdOptions& opt = {});

ExperimentReport eps_regularity_check(const GridImmersion& u, int center, double r, double hbar,
                                      double c = 1.0 / 3.0);

ExperimentReport local_graph_certificates(const GridImmersion& u, int center);

// Node of the grid closest to (cx, cy).
int center_node(const GridGeometry& g);

}  // namespace jcl

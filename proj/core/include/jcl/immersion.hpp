#pragma once

#include "jcl/grid.hpp"
#include "jcl/manifold.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>

namespace jcl {

inline constexpr double kTolImm = 1e-6;

// Surface heights x^3..x^{2n} as a function of (s, t).
using HeightFunction = std::function<Vec(double, double)>;
// Full ambient position as a function of (s, t).
using SurfaceFunction = std::function<Vec(double, double)>;

class GridImmersion {
 public:
  // values: dim x nodes, node order as in the grid.
  GridImmersion(std::shared_ptr<const GridGeometry> grid, ChartManifold ambient, Mat values,
                bool graphical = true);

  const GridGeometry& grid() const { return *grid_; }
  const std::shared_ptr<const GridGeometry>& grid_ptr() const { return grid_; }
  const ChartManifold& ambient() const { return ambient_; }
  const Mat& values() const { return values_; }
  Vec point(int n) const { return values_.col(n); }
  int dim() const { return ambient_.dim(); }
  bool graphical() const { return graphical_; }

  // Same surface in the rescaled ambient g -> c^2 g.
  GridImmersion with_ambient(ChartManifold m) const;

 private:
  std::shared_ptr<const GridGeometry> grid_;
  ChartManifold ambient_;
  Mat values_;
  bool graphical_;
};

GridImmersion graph_immersion(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m,
                              const HeightFunction& heights);
GridImmersion surface_immersion(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m,
                                const SurfaceFunction& f);
// Round sphere of radius rho in the (x1, y1, x2) slice, as the graph
// x2 = rho - sqrt(rho^2 - s^2 - t^2); needs grid radius < rho.
GridImmersion sphere_patch(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m, double rho);

// Per-node data shared by all measurements. Derivative stencils follow the
// grid; nodes without second-order stencils have valid = 0 and NaN fields.
struct SurfaceData {
  std::vector<char> valid;
  Mat xs, xt, xss, xtt;
  // d_s(d_t x) and d_t(d_s x)
  Mat xst, xts;
  std::vector<LocalGeometry> ambient;
  std::vector<Eigen::Matrix2d> gamma, gamma_inv;
  Vec sqrt_det;
  // sqrt_det with gaps (nodes lacking a first-derivative stencil) filled
  // from the nearest node, for quadrature only.
  Vec area_density;
  // Cut-cell area weights.
  Vec weights;
  // e_a = frame(a, 0) x_s + frame(a, 1) x_t, g-orthonormal.
  std::vector<Eigen::Matrix2d> frame;
  // Normal parts of x_ij + Gamma(x_i, x_j), indexed [i][j].
  std::vector<std::array<std::array<Vec, 2>, 2>> coord_b;
};

// frame_angle rotates the orthonormal tangent frame (frame-independence checks).
SurfaceData analyze(const GridImmersion& u, double frame_angle = 0.0);

// Normal part of v at node n (solves the 2x2 Gram system).
Vec normal_part(const SurfaceData& d, int n, const Vec& v);
// Orthonormal normal frame at node n (columns).
Mat normal_frame(const SurfaceData& d, int n);

struct MetricField {
  std::vector<Eigen::Matrix2d> gamma, gamma_inv;
  Vec sqrt_det;
};
MetricField induced_metric(const GridImmersion& u);

Vec dbar_residual(const GridImmersion& u);

struct CurvatureField {
  std::vector<char> valid;
  // B(e1,e1), B(e1,e2), B(e2,e1), B(e2,e2)
  std::vector<std::array<Vec, 4>> B;
  Vec B_norm;
  Vec A_norm;
  std::vector<Vec> H;
  // |B(e1,e2) - B(e2,e1)|
  Vec symmetry_defect;
};
CurvatureField second_fundamental(const GridImmersion& u, double frame_angle = 0.0);
CurvatureField second_fundamental(const SurfaceData& d, const GridImmersion& u);

std::vector<Vec> mean_curvature(const GridImmersion& u);
// |H - (tr_S Q)^perp| per node (NaN where not measurable).
Vec mc_residual(const GridImmersion& u);
Vec mc_residual(const SurfaceData& d, const GridImmersion& u);

// Intrinsic curvature of the induced metric (Brioschi formula).
Vec gauss_curvature(const GridImmersion& u);
Vec gauss_curvature(const SurfaceData& d, const GridImmersion& u);
Vec gauss_defect(const GridImmersion& u);

// Sum of f sqrt(det gamma) times the cut-cell area weight over the region.
double integrate(const GridImmersion& u, const Vec& f, const std::vector<char>& region);
double integrate(const GridImmersion& u, const Vec& f);
double integrate(const SurfaceData& d, const GridImmersion& u, const Vec& f, const std::vector<char>& region);

// Flux-form Laplace-Beltrami on interior nodes, NaN elsewhere.
Vec laplace_beltrami(const GridImmersion& u, const Vec& f);
Vec laplace_beltrami(const SurfaceData& d, const GridImmersion& u, const Vec& f);

struct DivergenceCheck {
  double interior = 0.0;  // sum of Delta f sqrt(det) h^2 over interior nodes
  double boundary = 0.0;  // net flux through the faces leaving the interior set
};
DivergenceCheck divergence_check(const GridImmersion& u, const Vec& f);

struct GradB {
  Vec direct;
  Vec dual;
};
GradB grad_B_norm(const GridImmersion& u);
GradB grad_B_norm(const SurfaceData& d, const GridImmersion& u);

// Every other node (spacing 2h) of the same domain.
GridImmersion coarse_restriction(const GridImmersion& u);
// Largest finite value of f over nodes within fraction * r of the grid centre.
double window_max(const GridGeometry& g, const Vec& f, double fraction);
// Largest finite value of f.
double finite_max(const Vec& f);

// Grid data files. Binary layout, little endian:
//   8 bytes  magic "JCLGRID1"
//   u8 shape (0 disc, 1 half disc), u8 graphical, u16 zero
//   i32 dim
//   f64 r, h, cx, cy
//   i64 node count
//   node values, nodes row-major (t outer, s inner), dim f64 each
void write_grid_binary(const std::string& path, const GridImmersion& u);
GridImmersion read_grid_binary(const std::string& path, const ChartManifold& m);
// CSV: "# shape=..,r=..,h=..,cx=..,cy=..,dim=..,graphical=.." then i,j,x1..x_dim.
void write_grid_csv(const std::string& path, const GridImmersion& u);
GridImmersion read_grid_csv(const std::string& path, const ChartManifold& m);

}  // namespace jcl

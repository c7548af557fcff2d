#pragma once

#include "jcl/types.hpp"

#include <array>
#include <memory>
#include <string>

namespace jcl {

enum class Shape { Disc, HalfDisc };

// Interior: full 3x3 neighbourhood present (for the half disc the t = -h row
// may be replaced by ghost reflection). Segment: t = 0 row of the half disc.
// Arc: everything else, i.e. the discrete outer boundary.
enum class NodeTag { Interior, Arc, Segment, Corner };

// One-sided stencils fall back to lower order only where the grid is too
// thin; Missing means no neighbour at all along that axis.
enum class Stencil { Central, Forward2, Backward2, Forward1, Backward1, Missing };

class GridGeometry {
 public:
  // Nodes (cx + i h, cy + j h) with i^2 + j^2 <= (r/h)^2 (and j >= 0 for the
  // half disc); r/h is rounded to the nearest integer.
  GridGeometry(Shape shape, double r, double h, double cx = 0.0, double cy = 0.0);

  Shape shape() const { return shape_; }
  double r() const { return r_; }
  double h() const { return h_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int radius_cells() const { return N_; }
  int size() const { return static_cast<int>(ij_.size()); }

  int index(int i, int j) const;
  int i_of(int n) const { return ij_[n][0]; }
  int j_of(int n) const { return ij_[n][1]; }
  double s(int n) const { return cx_ + ij_[n][0] * h_; }
  double t(int n) const { return cy_ + ij_[n][1] * h_; }
  NodeTag tag(int n) const { return tag_[n]; }
  // Neighbour along axis (0 = s, 1 = t) at offset k, or -1.
  int neighbor(int n, int axis, int k) const;

  Stencil first_stencil(int n, int axis) const { return first_[n][axis]; }
  Stencil second_stencil(int n, int axis) const { return second_[n][axis]; }
  // All derivative stencils available at second order.
  bool measurable(int n) const { return measurable_[n]; }

  std::string shape_name() const { return shape_ == Shape::Disc ? "disc" : "half-disc"; }

 private:
  Shape shape_;
  double r_, h_, cx_, cy_;
  int N_;
  int jmin_;
  std::vector<int> lookup_;
  std::vector<std::array<int, 2>> ij_;
  std::vector<NodeTag> tag_;
  std::vector<std::array<Stencil, 2>> first_, second_;
  std::vector<char> measurable_;
};

// Derivatives of a nodal field (rows = components, columns = nodes) using the
// grid's stencils. second_mixed applies the first-derivative operator along
// axis b to the axis-a derivative field.
Mat grid_first(const GridGeometry& g, const Mat& f, int axis);
Mat grid_second(const GridGeometry& g, const Mat& f, int axis);
Mat grid_mixed(const GridGeometry& g, const Mat& f, int a, int b);

// Area of the axis-aligned rectangle intersected with the disc of radius r
// centred at the origin.
double rect_disc_area(double x0, double x1, double y0, double y1, double r);

// Quadrature weights: area of each node's dual cell inside the domain. Cells
// whose node lies outside the node set hand their area to the nearest node
// inside.
Vec quadrature_weights(const GridGeometry& g);

}  // namespace jcl

#include "jcl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jcl {

GridGeometry::GridGeometry(Shape shape, double r, double h, double cx, double cy)
    : shape_(shape), r_(r), h_(h), cx_(cx), cy_(cy) {
  if (!(r > 0) || !(h > 0) || h > r) throw Error(ErrorKind::InvalidInput, "grid: need 0 < h <= r");
  N_ = static_cast<int>(std::floor(r / h + 1e-9));
  jmin_ = shape == Shape::Disc ? -N_ : 0;
  const int W = 2 * N_ + 1;
  const int H = N_ - jmin_ + 1;
  lookup_.assign(static_cast<std::size_t>(W) * H, -1);
  const double lim = (r / h) * (r / h) * (1 + 1e-12);
  for (int j = jmin_; j <= N_; ++j)
    for (int i = -N_; i <= N_; ++i) {
      if (double(i) * i + double(j) * j > lim) continue;
      lookup_[static_cast<std::size_t>(j - jmin_) * W + (i + N_)] = static_cast<int>(ij_.size());
      ij_.push_back({i, j});
    }

  const int n = size();
  tag_.resize(n);
  first_.resize(n);
  second_.resize(n);
  measurable_.resize(n);
  for (int k = 0; k < n; ++k) {
    auto [i, j] = ij_[k];
    bool full = true;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (shape_ == Shape::HalfDisc && j == 0 && dj == -1) continue;
        if (index(i + di, j + dj) < 0) full = false;
      }
    bool seg = shape_ == Shape::HalfDisc && j == 0;
    tag_[k] = full ? (seg ? NodeTag::Segment : NodeTag::Interior) : (seg ? NodeTag::Corner : NodeTag::Arc);

    bool ok = true;
    for (int ax = 0; ax < 2; ++ax) {
      auto has = [&](int off) { return neighbor(k, ax, off) >= 0; };
      Stencil f = Stencil::Missing, s = Stencil::Missing;
      if (has(1) && has(-1)) {
        f = s = Stencil::Central;
      } else {
        if (has(1) && has(2)) f = Stencil::Forward2;
        else if (has(-1) && has(-2)) f = Stencil::Backward2;
        else if (has(1)) f = Stencil::Forward1;
        else if (has(-1)) f = Stencil::Backward1;
        if (has(1) && has(2) && has(3)) s = Stencil::Forward2;
        else if (has(-1) && has(-2) && has(-3)) s = Stencil::Backward2;
        else if (has(1) && has(2)) s = Stencil::Forward1;
        else if (has(-1) && has(-2)) s = Stencil::Backward1;
      }
      first_[k][ax] = f;
      second_[k][ax] = s;
      auto good = [](Stencil st) {
        return st == Stencil::Central || st == Stencil::Forward2 || st == Stencil::Backward2;
      };
      ok = ok && good(f) && good(s);
    }
    measurable_[k] = ok;
  }
}

int GridGeometry::index(int i, int j) const {
  if (i < -N_ || i > N_ || j < jmin_ || j > N_) return -1;
  return lookup_[static_cast<std::size_t>(j - jmin_) * (2 * N_ + 1) + (i + N_)];
}

int GridGeometry::neighbor(int n, int axis, int k) const {
  auto [i, j] = ij_[n];
  return axis == 0 ? index(i + k, j) : index(i, j + k);
}

Mat grid_first(const GridGeometry& g, const Mat& f, int axis) {
  const double h = g.h();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Mat out(f.rows(), f.cols());
  for (int n = 0; n < g.size(); ++n) {
    auto at = [&](int k) { return f.col(g.neighbor(n, axis, k)); };
    switch (g.first_stencil(n, axis)) {
      case Stencil::Central: out.col(n) = (at(1) - at(-1)) / (2 * h); break;
      case Stencil::Forward2: out.col(n) = (-3 * f.col(n) + 4 * at(1) - at(2)) / (2 * h); break;
      case Stencil::Backward2: out.col(n) = (3 * f.col(n) - 4 * at(-1) + at(-2)) / (2 * h); break;
      case Stencil::Forward1: out.col(n) = (at(1) - f.col(n)) / h; break;
      case Stencil::Backward1: out.col(n) = (f.col(n) - at(-1)) / h; break;
      case Stencil::Missing: out.col(n).setConstant(nan); break;
    }
  }
  return out;
}

Mat grid_second(const GridGeometry& g, const Mat& f, int axis) {
  const double h2 = g.h() * g.h();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Mat out(f.rows(), f.cols());
  for (int n = 0; n < g.size(); ++n) {
    auto at = [&](int k) { return f.col(g.neighbor(n, axis, k)); };
    switch (g.second_stencil(n, axis)) {
      case Stencil::Central: out.col(n) = (at(1) - 2 * f.col(n) + at(-1)) / h2; break;
      case Stencil::Forward2: out.col(n) = (2 * f.col(n) - 5 * at(1) + 4 * at(2) - at(3)) / h2; break;
      case Stencil::Backward2: out.col(n) = (2 * f.col(n) - 5 * at(-1) + 4 * at(-2) - at(-3)) / h2; break;
      case Stencil::Forward1: out.col(n) = (f.col(n) - 2 * at(1) + at(2)) / h2; break;
      case Stencil::Backward1: out.col(n) = (f.col(n) - 2 * at(-1) + at(-2)) / h2; break;
      case Stencil::Missing: out.col(n).setConstant(nan); break;
    }
  }
  return out;
}

Mat grid_mixed(const GridGeometry& g, const Mat& f, int a, int b) {
  return grid_first(g, grid_first(g, f, a), b);
}

namespace {

// Antiderivative of sqrt(r^2 - x^2).
double semi(double x, double r) {
  x = std::clamp(x, -r, r);
  return 0.5 * (x * std::sqrt(std::max(0.0, r * r - x * x)) + r * r * std::asin(x / r));
}

// Area of the disc intersected with {X <= x, Y <= y}.
double quadrant_area(double x, double y, double r) {
  if (x <= -r || y <= -r) return 0.0;
  x = std::min(x, r);
  auto full = [&](double lo, double hi) {  // integral of 2w
    hi = std::min(hi, x);
    return hi > lo ? 2 * (semi(hi, r) - semi(lo, r)) : 0.0;
  };
  auto cut = [&](double lo, double hi) {  // integral of y + w
    hi = std::min(hi, x);
    return hi > lo ? y * (hi - lo) + semi(hi, r) - semi(lo, r) : 0.0;
  };
  if (y >= r) return full(-r, r);
  double a = std::sqrt(r * r - y * y);
  if (y >= 0) return full(-r, -a) + cut(-a, a) + full(a, r);
  return cut(-a, a);
}

}  // namespace

double rect_disc_area(double x0, double x1, double y0, double y1, double r) {
  if (x1 <= x0 || y1 <= y0) return 0.0;
  double v = quadrant_area(x1, y1, r) - quadrant_area(x0, y1, r) - quadrant_area(x1, y0, r) +
             quadrant_area(x0, y0, r);
  return std::max(0.0, v);
}

Vec quadrature_weights(const GridGeometry& g) {
  const double h = g.h(), r = g.r();
  const int N = g.radius_cells() + 1;
  const bool half = g.shape() == Shape::HalfDisc;
  Vec w = Vec::Zero(g.size());
  for (int j = half ? 0 : -N; j <= N; ++j)
    for (int i = -N; i <= N; ++i) {
      double y0 = (j - 0.5) * h, y1 = (j + 0.5) * h;
      if (half) y0 = std::max(y0, 0.0);
      double x0 = (i - 0.5) * h, x1 = (i + 0.5) * h;
      double nx = std::max({x0, -x1, 0.0}), ny = std::max({y0, -y1, 0.0});
      if (nx * nx + ny * ny >= r * r) continue;
      double a = rect_disc_area(x0, x1, y0, y1, r);
      if (a <= 1e-9 * h * h) continue;  // rounding residue
      int n = g.index(i, j);
      if (n < 0) {
        // Nearest node in the set; ties broken by node order.
        double best = std::numeric_limits<double>::infinity();
        for (int dj = -2; dj <= 2; ++dj)
          for (int di = -2; di <= 2; ++di) {
            int m = g.index(i + di, j + dj);
            double d = di * di + dj * dj;
            if (m >= 0 && (d < best || (d == best && m < n))) {
              best = d;
              n = m;
            }
          }
        if (n < 0) throw Error(ErrorKind::InvalidInput, "grid: cut cell without nearby node");
      }
      w[n] += a;
    }
  return w;
}

}  // namespace jcl

#pragma once

#include "jcl/coords.hpp"
#include "jcl/estimates.hpp"
#include "jcl/solver.hpp"

#include <complex>
#include <memory>

namespace jcl::test {

inline ChartManifold flat(int dim = 4, double half_width = 3.0) {
  return ChartManifold(make_flat(dim), Box::cube(dim, half_width));
}

inline ChartManifold sphere(double rho, double half_width = 1.5) {
  return ChartManifold(make_sphere(rho), Box::cube(2, half_width));
}

inline ChartManifold perturbed(double eps, DerivMode mode = DerivMode::Analytic) {
  return ChartManifold(make_perturbed_j(4, eps), Box::cube(4, 3.0), mode);
}

inline ChartManifold conformal(const Vec& a, const Mat& B, DerivMode mode = DerivMode::Analytic) {
  return ChartManifold(make_conformal(static_cast<int>(a.size()), a, B), Box::cube(static_cast<int>(a.size()), 2.0),
                       mode);
}

inline std::shared_ptr<const GridGeometry> disc(double r, double h) {
  return std::make_shared<GridGeometry>(Shape::Disc, r, h);
}

inline std::shared_ptr<const GridGeometry> half_disc(double r, double h) {
  return std::make_shared<GridGeometry>(Shape::HalfDisc, r, h);
}

// Heights of the graph of a polynomial w(z), written out independently of
// polynomial_trace.
inline HeightFunction z_power(int k, double scale = 1.0) {
  return [k, scale](double s, double t) {
    std::complex<double> w = scale * std::pow(std::complex<double>(s, t), k);
    Vec v(2);
    v << w.real(), w.imag();
    return v;
  };
}

inline HeightFunction zero_heights(int dim = 4) {
  return [dim](double, double) { return Vec(Vec::Zero(dim - 2)); };
}

inline GridImmersion z2_graph(double r = 0.5, double h = 1.0 / 64) {
  return graph_immersion(disc(r, h), flat(), z_power(2));
}

inline GridImmersion plane_graph(double r = 0.5, double h = 1.0 / 64) {
  return graph_immersion(disc(r, h), flat(), zero_heights());
}

inline std::vector<std::complex<double>> z_coeffs(int k) {
  std::vector<std::complex<double>> c(k + 1, 0.0);
  c[k] = 1.0;
  return c;
}

inline double sup_abs(const Vec& v) {
  double m = 0.0;
  for (int i = 0; i < v.size(); ++i)
    if (std::isfinite(v[i])) m = std::max(m, std::abs(v[i]));
  return m;
}

// Deterministic pseudo-random points (fixed LCG) in [-a, a]^dim.
inline std::vector<Vec> sample_points(int dim, int count, double a, unsigned seed = 12345) {
  std::vector<Vec> out;
  unsigned long long s = seed;
  auto next = [&s]() {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>((s >> 11) & ((1ULL << 53) - 1)) / static_cast<double>(1ULL << 53);
  };
  for (int k = 0; k < count; ++k) {
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x[i] = a * (2.0 * next() - 1.0);
    out.push_back(x);
  }
  return out;
}

}  // namespace jcl::test

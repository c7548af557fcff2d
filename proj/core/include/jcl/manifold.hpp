#pragma once

#include "jcl/types.hpp"

#include <functional>
#include <memory>
#include <string>

namespace jcl {

inline constexpr double kTolJ = 1e-10;
inline constexpr double kTolL = 1e-8;
inline constexpr double kTolLin = 1e-12;
inline constexpr double kDefaultFdStep = 1e-3;

enum class DerivMode { Analytic, FiniteDifference };

struct Box {
  Vec lo;
  Vec hi;
  static Box cube(int dim, double half_width);
  bool contains(const Vec& x) const;
  // Smallest coordinate distance from x to the box faces (negative outside).
  double margin(const Vec& x) const;
};

using MatrixField = std::function<Mat(const Vec&)>;

// A model (M, J, g) on R^{dim}. Implementations provide closed-form values
// and first derivatives; ChartManifold layers domain checks, rescaling and
// the finite-difference mode on top.
class Family {
 public:
  virtual ~Family() = default;
  virtual int dim() const = 0;
  virtual std::string tag() const = 0;
  virtual Mat metric(const Vec& x) const = 0;
  virtual Mat acs(const Vec& x) const = 0;
  // dg[c] = d_c g, dJ[c] = d_c J.
  virtual void derivatives(const Vec& x, std::vector<Mat>& dg, std::vector<Mat>& dJ) const = 0;
  // True when g and J are constant in the chart.
  virtual bool is_flat() const { return false; }
};

std::shared_ptr<const Family> make_flat(int dim);
// g = exp(2 phi) delta, phi(x) = a.x + x^T B x / 2, J standard.
std::shared_ptr<const Family> make_conformal(int dim, const Vec& a, const Mat& B);
// K = J0 + eps A(x) with A(x) = A0 + sum_c sin(x_c) A_c, corrected by
// normalize_acs, metric hermitized from the identity.
std::shared_ptr<const Family> make_perturbed_j(int dim, double eps);
// Round 2-sphere of radius rho in the stereographic chart normalized so
// that g(0) = delta: g = delta / (1 + |x|^2 / (4 rho^2))^2.
std::shared_ptr<const Family> make_sphere(double rho);
// Perturbation field of make_perturbed_j, exposed for tests.
Mat perturbation_field(int dim, const Vec& x);

class ChartManifold {
 public:
  ChartManifold(std::shared_ptr<const Family> family, Box domain,
                DerivMode mode = DerivMode::Analytic, double fd_step = kDefaultFdStep);

  int dim() const { return family_->dim(); }
  const Box& domain() const { return domain_; }
  DerivMode deriv_mode() const { return mode_; }
  double fd_step() const { return fd_step_; }
  // Metric factor c^2 applied by rescale().
  double scale2() const { return scale2_; }
  std::string family_tag() const { return family_->tag(); }
  bool is_flat() const { return family_->is_flat(); }
  const std::shared_ptr<const Family>& family() const { return family_; }

  bool in_domain(const Vec& x) const { return domain_.contains(x); }
  void require_domain(const Vec& x) const;

  Mat metric(const Vec& x) const;
  Mat acs(const Vec& x) const;
  void derivatives(const Vec& x, std::vector<Mat>& dg, std::vector<Mat>& dJ) const;
  // Same as christoffel() without the domain check; used by integrators and
  // stencils that may straddle the box face.
  Tensor3 christoffel_unchecked(const Vec& x) const;

  ChartManifold with_mode(DerivMode mode) const;
  ChartManifold scaled(double c2) const;

 private:
  std::shared_ptr<const Family> family_;
  Box domain_;
  DerivMode mode_;
  double fd_step_;
  double scale2_ = 1.0;
};

// Pointwise J-averaging of a metric; throws NonSPD.
Mat hermitize(const Mat& g_raw, const Mat& J);
MatrixField hermitize(MatrixField g_raw, MatrixField J);

// J = K (-K^2)^{-1/2}; throws NotCorrectable when |K^2 + I| >= 0.5.
Mat normalize_acs(const Mat& K);
// Also returns directional derivatives dJ[c] given dK[c].
Mat normalize_acs(const Mat& K, const std::vector<Mat>& dK, std::vector<Mat>& dJ);

Tensor3 christoffel(const ChartManifold& m, const Vec& x);
Tensor4 riemann(const ChartManifold& m, const Vec& x);
double sectional(const ChartManifold& m, const Vec& x, const Vec& X, const Vec& Y);
double sectional(const Tensor4& R, const Mat& g, const Vec& X, const Vec& Y);

struct AbsSectional {
  double value = 0.0;
  int planes = 0;
};
AbsSectional abs_sectional_detail(const ChartManifold& m, const Vec& x);
double abs_sectional(const ChartManifold& m, const Vec& x);

// nabla_X J as a matrix acting on column vectors.
Mat nabla_j(const ChartManifold& m, const Vec& x, const Vec& X);
// Q^mu_{ab} with Q(d_a, d_b) = J (nabla_a J) d_b.
Tensor3 q_tensor(const ChartManifold& m, const Vec& x);
// Q(e,e) + Q(Je,Je) for a g-unit e; throws NonUnitVector.
Vec trace_q(const ChartManifold& m, const Vec& x, const Vec& e);

// g, J, Gamma and Q at one point from a single derivative evaluation.
struct LocalGeometry {
  Mat g;
  Mat J;
  Tensor3 gamma;
  Tensor3 q;
};
LocalGeometry local_geometry(const ChartManifold& m, const Vec& x);

struct GeometryConstants {
  double C = 0.0;
  double sampled_abs_K = 0.0;
  double sampled_trQ_norm = 0.0;
  int sample_count = 0;
};
GeometryConstants geometry_constant(const ChartManifold& m, int samples);
// Same, over an explicit point set.
GeometryConstants geometry_constant(const ChartManifold& m, const std::vector<Vec>& points);

// g^c = c^2 g; throws NonPositiveScale.
ChartManifold rescale(const ChartManifold& m, double c);

struct LagrangianModel {
  ChartManifold ambient;
  int n = 1;
  Box params;
  std::function<Vec(const Vec&)> embedding;
  // dim x n Jacobian; second[k] is the dim x n matrix d_k d_j embedding.
  std::function<Mat(const Vec&)> jacobian;
  std::function<std::vector<Mat>(const Vec&)> second;
  bool checked_lagrangian = false;
  bool checked_totally_geodesic = false;
};

// (R x {0})^n through the origin with exact derivatives.
LagrangianModel coordinate_lagrangian(const ChartManifold& m, double half_width);
// Arbitrary embedding; derivatives by 4th-order central differences.
LagrangianModel lagrangian_from_embedding(const ChartManifold& m, Box params,
                                          std::function<Vec(const Vec&)> f);

struct SubmanifoldReport {
  double max_omega = 0.0;
  double max_second_fundamental = 0.0;
  int samples = 0;
  bool lagrangian = false;
  bool totally_geodesic = false;
};
SubmanifoldReport submanifold_check(LagrangianModel& L, double tol_L = kTolL, int samples = 32);

// Deterministic quasi-random points (Halton) in a box.
std::vector<Vec> halton_points(const Box& box, int count, double shrink = 0.0);
double halton(int index, int base);

}  // namespace jcl

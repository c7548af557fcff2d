#include "jcl/manifold.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>

namespace jcl {

const char* error_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonSPD: return "NonSPD";
    case ErrorKind::NotCorrectable: return "NotCorrectable";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::DegeneratePlane: return "DegeneratePlane";
    case ErrorKind::NonUnitVector: return "NonUnitVector";
    case ErrorKind::NonPositiveScale: return "NonPositiveScale";
    case ErrorKind::NotImmersed: return "NotImmersed";
    case ErrorKind::ChartFailure: return "ChartFailure";
    case ErrorKind::LeftDomain: return "LeftDomain";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
    case ErrorKind::ShootingDiverged: return "ShootingDiverged";
    case ErrorKind::DegenerateMetric: return "DegenerateMetric";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::IncompatibleCorners: return "IncompatibleCorners";
    case ErrorKind::EllipticityLost: return "EllipticityLost";
    case ErrorKind::MaxInnerIterations: return "MaxInnerIterations";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::NoRegularLevels: return "NoRegularLevels";
    case ErrorKind::NegativeF: return "NegativeF";
    case ErrorKind::HypothesisFailed: return "HypothesisFailed";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::UnresolvedCurvature: return "UnresolvedCurvature";
    case ErrorKind::PatchTooSmall: return "PatchTooSmall";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingReport: return "MissingReport";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Error";
}

Vec Tensor3::apply(const Vec& X, const Vec& Y) const {
  Vec out = Vec::Zero(n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) {
      if (X[b] == 0.0) continue;
      for (int c = 0; c < n_; ++c) out[a] += (*this)(a, b, c) * X[b] * Y[c];
    }
  return out;
}

Mat Tensor3::contract_first(const Vec& X) const {
  Mat out = Mat::Zero(n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c) out(a, c) += (*this)(a, b, c) * X[b];
  return out;
}

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double v : v_) m = std::max(m, std::abs(v));
  return m;
}

Vec Tensor4::apply(const Vec& X, const Vec& Y, const Vec& Z) const {
  Vec out = Vec::Zero(n_);
  for (int d = 0; d < n_; ++d)
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) {
        double xy = X[a] * Y[b];
        if (xy == 0.0) continue;
        for (int c = 0; c < n_; ++c) out[d] += (*this)(d, a, b, c) * xy * Z[c];
      }
  return out;
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double v : v_) m = std::max(m, std::abs(v));
  return m;
}

Mat standard_j(int dim) {
  Mat J = Mat::Zero(dim, dim);
  for (int k = 0; k + 1 < dim; k += 2) {
    J(k + 1, k) = 1.0;
    J(k, k + 1) = -1.0;
  }
  return J;
}

// ---------------------------------------------------------------- Box

Box Box::cube(int dim, double half_width) {
  return Box{Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width)};
}

bool Box::contains(const Vec& x) const {
  for (int i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
  return true;
}

double Box::margin(const Vec& x) const {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i) m = std::min({m, x[i] - lo[i], hi[i] - x[i]});
  return m;
}

// ---------------------------------------------------------------- families

namespace {

class FlatFamily final : public Family {
 public:
  explicit FlatFamily(int dim) : dim_(dim), J_(standard_j(dim)) {}
  int dim() const override { return dim_; }
  std::string tag() const override { return "flat"; }
  Mat metric(const Vec&) const override { return Mat::Identity(dim_, dim_); }
  Mat acs(const Vec&) const override { return J_; }
  void derivatives(const Vec&, std::vector<Mat>& dg, std::vector<Mat>& dJ) const override {
    dg.assign(dim_, Mat::Zero(dim_, dim_));
    dJ.assign(dim_, Mat::Zero(dim_, dim_));
  }
  bool is_flat() const override { return true; }

 private:
  int dim_;
  Mat J_;
};

class ConformalFamily : public Family {
 public:
  ConformalFamily(int dim, std::string tag) : dim_(dim), tag_(std::move(tag)), J_(standard_j(dim)) {}
  int dim() const override { return dim_; }
  std::string tag() const override { return tag_; }
  Mat metric(const Vec& x) const override {
    return std::exp(2.0 * phi(x)) * Mat::Identity(dim_, dim_);
  }
  Mat acs(const Vec&) const override { return J_; }
  void derivatives(const Vec& x, std::vector<Mat>& dg, std::vector<Mat>& dJ) const override {
    double e2 = std::exp(2.0 * phi(x));
    Vec d = dphi(x);
    dg.resize(dim_);
    dJ.assign(dim_, Mat::Zero(dim_, dim_));
    for (int c = 0; c < dim_; ++c) dg[c] = (2.0 * d[c] * e2) * Mat::Identity(dim_, dim_);
  }
  virtual double phi(const Vec& x) const = 0;
  virtual Vec dphi(const Vec& x) const = 0;

 protected:
  int dim_;
  std::string tag_;
  Mat J_;
};

class QuadraticConformal final : public ConformalFamily {
 public:
  QuadraticConformal(int dim, Vec a, Mat B) : ConformalFamily(dim, "conformal"), a_(std::move(a)), B_(std::move(B)) {}
  double phi(const Vec& x) const override { return a_.dot(x) + 0.5 * x.dot(B_ * x); }
  Vec dphi(const Vec& x) const override { return a_ + B_ * x; }

 private:
  Vec a_;
  Mat B_;
};

class SphereFamily final : public ConformalFamily {
 public:
  explicit SphereFamily(double rho) : ConformalFamily(2, "sphere-n1"), rho_(rho) {}
  double phi(const Vec& x) const override {
    return -std::log1p(x.squaredNorm() / (4.0 * rho_ * rho_));
  }
  Vec dphi(const Vec& x) const override {
    double w = 1.0 + x.squaredNorm() / (4.0 * rho_ * rho_);
    return (-1.0 / (2.0 * rho_ * rho_ * w)) * x;
  }

 private:
  double rho_;
};

class PerturbedJFamily final : public Family {
 public:
  PerturbedJFamily(int dim, double eps) : dim_(dim), eps_(eps), J0_(standard_j(dim)) {}
  int dim() const override { return dim_; }
  std::string tag() const override { return "perturbed-J"; }
  Mat acs(const Vec& x) const override { return normalize_acs(J0_ + eps_ * perturbation_field(dim_, x)); }
  Mat metric(const Vec& x) const override {
    return hermitize(Mat::Identity(dim_, dim_), acs(x));
  }
  void derivatives(const Vec& x, std::vector<Mat>& dg, std::vector<Mat>& dJ) const override {
    Mat K = J0_ + eps_ * perturbation_field(dim_, x);
    std::vector<Mat> dK(dim_);
    for (int c = 0; c < dim_; ++c) dK[c] = eps_ * std::cos(x[c]) * slope(c);
    Mat J = normalize_acs(K, dK, dJ);
    dg.resize(dim_);
    for (int c = 0; c < dim_; ++c) dg[c] = 0.5 * (dJ[c].transpose() * J + J.transpose() * dJ[c]);
  }
  static Mat slope_matrix(int dim, int c) {
    Mat A(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) A(i, j) = 0.5 * std::cos(0.5 + 1.1 * i + 0.3 * j + 2.3 * c);
    return A;
  }

 private:
  Mat slope(int c) const { return slope_matrix(dim_, c); }
  int dim_;
  double eps_;
  Mat J0_;
};

}  // namespace

Mat perturbation_field(int dim, const Vec& x) {
  Mat A(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) A(i, j) = std::sin(1.3 + 0.7 * i + 1.9 * j);
  for (int c = 0; c < dim; ++c) A += std::sin(x[c]) * PerturbedJFamily::slope_matrix(dim, c);
  return A;
}

std::shared_ptr<const Family> make_flat(int dim) { return std::make_shared<FlatFamily>(dim); }

std::shared_ptr<const Family> make_conformal(int dim, const Vec& a, const Mat& B) {
  return std::make_shared<QuadraticConformal>(dim, a, 0.5 * (B + B.transpose()));
}

std::shared_ptr<const Family> make_perturbed_j(int dim, double eps) {
  return std::make_shared<PerturbedJFamily>(dim, eps);
}

std::shared_ptr<const Family> make_sphere(double rho) { return std::make_shared<SphereFamily>(rho); }

// ---------------------------------------------------------------- chart manifold

ChartManifold::ChartManifold(std::shared_ptr<const Family> family, Box domain, DerivMode mode, double fd_step)
    : family_(std::move(family)), domain_(std::move(domain)), mode_(mode), fd_step_(fd_step) {}

void ChartManifold::require_domain(const Vec& x) const {
  if (!domain_.contains(x)) throw Error(ErrorKind::OutOfDomain, "point outside chart box");
}

Mat ChartManifold::metric(const Vec& x) const { return scale2_ * family_->metric(x); }

Mat ChartManifold::acs(const Vec& x) const { return family_->acs(x); }

void ChartManifold::derivatives(const Vec& x, std::vector<Mat>& dg, std::vector<Mat>& dJ) const {
  int n = dim();
  if (mode_ == DerivMode::Analytic || family_->is_flat()) {
    family_->derivatives(x, dg, dJ);
  } else {
    dg.assign(n, Mat::Zero(n, n));
    dJ.assign(n, Mat::Zero(n, n));
    double h = fd_step_;
    const std::array<double, 4> off{2.0, 1.0, -1.0, -2.0};
    const std::array<double, 4> wt{-1.0, 8.0, -8.0, 1.0};
    for (int c = 0; c < n; ++c) {
      for (int k = 0; k < 4; ++k) {
        Vec y = x;
        y[c] += off[k] * h;
        dg[c] += wt[k] * family_->metric(y);
        dJ[c] += wt[k] * family_->acs(y);
      }
      dg[c] /= 12.0 * h;
      dJ[c] /= 12.0 * h;
    }
  }
  if (scale2_ != 1.0)
    for (auto& d : dg) d *= scale2_;
}

Tensor3 ChartManifold::christoffel_unchecked(const Vec& x) const {
  int n = dim();
  Tensor3 G(n);
  if (family_->is_flat()) return G;
  std::vector<Mat> dg, dJ;
  derivatives(x, dg, dJ);
  Mat ginv = metric(x).inverse();
  // Lowered symbols [nu; a b] = (d_b g_{nu a} + d_a g_{b nu} - d_nu g_{ab}) / 2.
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      Vec low(n);
      for (int nu = 0; nu < n; ++nu) low[nu] = 0.5 * (dg[b](nu, a) + dg[a](b, nu) - dg[nu](a, b));
      Vec up = ginv * low;
      for (int mu = 0; mu < n; ++mu) {
        G(mu, a, b) = up[mu];
        G(mu, b, a) = up[mu];
      }
    }
  return G;
}

ChartManifold ChartManifold::with_mode(DerivMode mode) const {
  ChartManifold m = *this;
  m.mode_ = mode;
  return m;
}

ChartManifold ChartManifold::scaled(double c2) const {
  ChartManifold m = *this;
  m.scale2_ *= c2;
  return m;
}

// ---------------------------------------------------------------- pointwise algebra

Mat hermitize(const Mat& g_raw, const Mat& J) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g_raw + g_raw.transpose()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) throw Error(ErrorKind::NonSPD, "raw metric not positive definite");
  Mat g = 0.5 * (g_raw + J.transpose() * g_raw * J);
  return 0.5 * (g + g.transpose());
}

MatrixField hermitize(MatrixField g_raw, MatrixField J) {
  return [g_raw = std::move(g_raw), J = std::move(J)](const Vec& x) { return hermitize(g_raw(x), J(x)); };
}

namespace {

double op_norm(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()[0];
}

// Denman-Beavers iteration: Y -> M^{1/2}, Z -> M^{-1/2}.
void sqrt_and_inverse_sqrt(const Mat& M, Mat& Y, Mat& Z) {
  int n = static_cast<int>(M.rows());
  Y = M;
  Z = Mat::Identity(n, n);
  for (int it = 0; it < 60; ++it) {
    Mat Yi = Y.inverse();
    Mat Zi = Z.inverse();
    Mat Yn = 0.5 * (Y + Zi);
    Mat Zn = 0.5 * (Z + Yi);
    double delta = (Yn - Y).lpNorm<Eigen::Infinity>();
    Y = std::move(Yn);
    Z = std::move(Zn);
    if (delta < 1e-15) break;
  }
}

}  // namespace

Mat normalize_acs(const Mat& K) {
  std::vector<Mat> none, dJ;
  return normalize_acs(K, none, dJ);
}

Mat normalize_acs(const Mat& K, const std::vector<Mat>& dK, std::vector<Mat>& dJ) {
  int n = static_cast<int>(K.rows());
  Mat I = Mat::Identity(n, n);
  Mat K2 = K * K;
  if (op_norm(K2 + I) >= 0.5) throw Error(ErrorKind::NotCorrectable, "|K^2 + I| >= 0.5");
  Mat M = -K2;
  Mat R, S;
  sqrt_and_inverse_sqrt(M, R, S);
  Mat J = K * S;
  dJ.clear();
  if (dK.empty()) return J;
  // R dR + dR R = dM solved through the Kronecker form.
  Mat sylv = Mat::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        // (R X)_{ij} = R_{ik} X_{kj};  (X R)_{ij} = X_{ik} R_{kj}
        sylv(i + j * n, k + j * n) += R(i, k);
        sylv(i + j * n, i + k * n) += R(k, j);
      }
  Eigen::PartialPivLU<Mat> lu(sylv);
  dJ.resize(dK.size());
  for (size_t c = 0; c < dK.size(); ++c) {
    Mat dM = -(dK[c] * K + K * dK[c]);
    Vec rhs = Eigen::Map<const Vec>(dM.data(), n * n);
    Vec sol = lu.solve(rhs);
    Mat dR = Eigen::Map<const Mat>(sol.data(), n, n);
    Mat dS = -S * dR * S;
    dJ[c] = dK[c] * S + K * dS;
  }
  return J;
}

// ---------------------------------------------------------------- connection and curvature

Tensor3 christoffel(const ChartManifold& m, const Vec& x) {
  m.require_domain(x);
  return m.christoffel_unchecked(x);
}

Tensor4 riemann(const ChartManifold& m, const Vec& x) {
  m.require_domain(x);
  int n = m.dim();
  Tensor4 R(n);
  if (m.is_flat()) return R;
  Tensor3 G = m.christoffel_unchecked(x);
  // dG[a] = d_a Gamma by 4th-order central differences.
  std::vector<Tensor3> dG(n, Tensor3(n));
  double h = m.fd_step();
  const std::array<double, 4> off{2.0, 1.0, -1.0, -2.0};
  const std::array<double, 4> wt{-1.0, 8.0, -8.0, 1.0};
  for (int a = 0; a < n; ++a) {
    for (int k = 0; k < 4; ++k) {
      Vec y = x;
      y[a] += off[k] * h;
      Tensor3 Gk = m.christoffel_unchecked(y);
      for (int d = 0; d < n; ++d)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) dG[a](d, b, c) += wt[k] * Gk(d, b, c) / (12.0 * h);
    }
  }
  for (int d = 0; d < n; ++d)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          double v = dG[a](d, b, c) - dG[b](d, a, c);
          for (int e = 0; e < n; ++e) v += G(d, a, e) * G(e, b, c) - G(d, b, e) * G(e, a, c);
          R(d, a, b, c) = v;
        }
  return R;
}

double sectional(const Tensor4& R, const Mat& g, const Vec& X, const Vec& Y) {
  double xx = X.dot(g * X), yy = Y.dot(g * Y), xy = X.dot(g * Y);
  double gram = xx * yy - xy * xy;
  if (!(gram > kTolLin)) throw Error(ErrorKind::DegeneratePlane, "Gram determinant below tol_lin");
  Vec RXYY = R.apply(X, Y, Y);
  return RXYY.dot(g * X) / gram;
}

double sectional(const ChartManifold& m, const Vec& x, const Vec& X, const Vec& Y) {
  return sectional(riemann(m, x), m.metric(x), X, Y);
}

double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

namespace {
constexpr std::array<int, 24> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37,
                                      41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

// Orthonormalize (X, Y) in g; returns false when degenerate.
bool orthonormal_pair(const Mat& g, Vec& X, Vec& Y) {
  double xx = X.dot(g * X);
  if (xx < 1e-20) return false;
  X /= std::sqrt(xx);
  Y -= X.dot(g * Y) * X;
  double yy = Y.dot(g * Y);
  if (yy < 1e-20) return false;
  Y /= std::sqrt(yy);
  return true;
}
}  // namespace

std::vector<Vec> halton_points(const Box& box, int count, double shrink) {
  int n = static_cast<int>(box.lo.size());
  std::vector<Vec> pts;
  pts.reserve(count);
  for (int i = 1; i <= count; ++i) {
    Vec p(n);
    for (int c = 0; c < n; ++c) {
      double lo = box.lo[c] + shrink, hi = box.hi[c] - shrink;
      p[c] = lo + (hi - lo) * halton(i, kPrimes[c % kPrimes.size()]);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

AbsSectional abs_sectional_detail(const ChartManifold& m, const Vec& x) {
  m.require_domain(x);
  int n = m.dim();
  AbsSectional out;
  if (m.is_flat()) return out;
  Tensor4 R = riemann(m, x);
  Mat g = m.metric(x);
  auto eval = [&](Vec X, Vec Y) -> double {
    if (!orthonormal_pair(g, X, Y)) return 0.0;
    ++out.planes;
    return std::abs(R.apply(X, Y, Y).dot(g * X));
  };
  double best = 0.0;
  Vec bestX, bestY;
  auto consider = [&](const Vec& X, const Vec& Y) {
    double v = eval(X, Y);
    if (v > best) {
      best = v;
      bestX = X;
      bestY = Y;
    }
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) consider(Vec::Unit(n, i), Vec::Unit(n, j));
  if (n == 2) {
    out.value = best;
    return out;
  }
  auto net_point = [&](int i, Vec& X, Vec& Y) {
    X.resize(n);
    Y.resize(n);
    for (int c = 0; c < n; ++c) {
      X[c] = 2.0 * halton(i, kPrimes[c]) - 1.0;
      Y[c] = 2.0 * halton(i, kPrimes[n + c]) - 1.0;
    }
  };
  int done = 0;
  int target = 64;
  double previous = best;
  while (true) {
    for (int i = done + 1; i <= target; ++i) {
      Vec X, Y;
      net_point(i, X, Y);
      consider(X, Y);
    }
    done = target;
    double inc = best - previous;
    previous = best;
    if ((target > 64 && inc < 1e-4) || target >= (1 << 14)) break;
    target *= 2;
  }
  // Deterministic coordinate ascent from the best net plane.
  if (bestX.size() == n) {
    for (double step = 0.1; step > 1e-5; step *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (int c = 0; c < 2 * n; ++c)
          for (double sgn : {1.0, -1.0}) {
            Vec X = bestX, Y = bestY;
            if (c < n) X[c] += sgn * step; else Y[c - n] += sgn * step;
            double before = best;
            consider(X, Y);
            if (best > before * (1.0 + 1e-14) + 1e-300) improved = true;
          }
      }
    }
  }
  out.value = best;
  return out;
}

double abs_sectional(const ChartManifold& m, const Vec& x) { return abs_sectional_detail(m, x).value; }

Mat nabla_j(const ChartManifold& m, const Vec& x, const Vec& X) {
  m.require_domain(x);
  int n = m.dim();
  if (m.is_flat()) return Mat::Zero(n, n);
  std::vector<Mat> dg, dJ;
  m.derivatives(x, dg, dJ);
  Tensor3 G = m.christoffel_unchecked(x);
  Mat J = m.acs(x);
  Mat out = Mat::Zero(n, n);
  for (int c = 0; c < n; ++c) {
    if (X[c] == 0.0) continue;
    Mat Gc(n, n);  // (Gamma_c)^a_d = Gamma^a_{c d}
    for (int a = 0; a < n; ++a)
      for (int d = 0; d < n; ++d) Gc(a, d) = G(a, c, d);
    out += X[c] * (dJ[c] + Gc * J - J * Gc);
  }
  return out;
}

Tensor3 q_tensor(const ChartManifold& m, const Vec& x) { return local_geometry(m, x).q; }

LocalGeometry local_geometry(const ChartManifold& m, const Vec& x) {
  m.require_domain(x);
  int n = m.dim();
  LocalGeometry out{m.metric(x), m.acs(x), Tensor3(n), Tensor3(n)};
  if (m.is_flat()) return out;
  std::vector<Mat> dg, dJ;
  m.derivatives(x, dg, dJ);
  Mat ginv = out.g.inverse();
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      Vec low(n);
      for (int nu = 0; nu < n; ++nu) low[nu] = 0.5 * (dg[b](nu, a) + dg[a](b, nu) - dg[nu](a, b));
      Vec up = ginv * low;
      for (int mu = 0; mu < n; ++mu) {
        out.gamma(mu, a, b) = up[mu];
        out.gamma(mu, b, a) = up[mu];
      }
    }
  const Mat& J = out.J;
  for (int a = 0; a < n; ++a) {
    Mat Ga(n, n);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < n; ++d) Ga(i, d) = out.gamma(i, a, d);
    Mat JN = J * (dJ[a] + Ga * J - J * Ga);
    for (int mu = 0; mu < n; ++mu)
      for (int b = 0; b < n; ++b) out.q(mu, a, b) = JN(mu, b);
  }
  return out;
}

Vec trace_q(const ChartManifold& m, const Vec& x, const Vec& e) {
  m.require_domain(x);
  Mat g = m.metric(x);
  double nn = e.dot(g * e);
  if (std::abs(std::sqrt(nn) - 1.0) > 1e-10) throw Error(ErrorKind::NonUnitVector, "trace_q needs a g-unit vector");
  Tensor3 Q = q_tensor(m, x);
  Vec Je = m.acs(x) * e;
  return Q.apply(e, e) + Q.apply(Je, Je);
}

GeometryConstants geometry_constant(const ChartManifold& m, const std::vector<Vec>& points) {
  GeometryConstants gc;
  gc.sample_count = static_cast<int>(points.size());
  if (m.is_flat()) return gc;
  int n = m.dim();
  for (const Vec& p : points) {
    gc.sampled_abs_K = std::max(gc.sampled_abs_K, abs_sectional(m, p));
    Mat g = m.metric(p);
    Tensor3 Q = q_tensor(m, p);
    Mat J = m.acs(p);
    for (int c = 0; c < n; ++c) {
      Vec e = Vec::Unit(n, c);
      e /= std::sqrt(e.dot(g * e));
      Vec Je = J * e;
      Vec t = Q.apply(e, e) + Q.apply(Je, Je);
      gc.sampled_trQ_norm = std::max(gc.sampled_trQ_norm, std::sqrt(t.dot(g * t)));
    }
  }
  gc.C = 1.1 * std::max(2.0 * std::sqrt(gc.sampled_abs_K), 2.0 * gc.sampled_trQ_norm);
  return gc;
}

GeometryConstants geometry_constant(const ChartManifold& m, int samples) {
  const Box& b = m.domain();
  double shrink = 4.0 * m.fd_step();
  return geometry_constant(m, halton_points(b, std::max(samples, 1), shrink));
}

ChartManifold rescale(const ChartManifold& m, double c) {
  if (!(c > 0.0)) throw Error(ErrorKind::NonPositiveScale, "rescale factor must be positive");
  return m.scaled(c * c);
}

// ---------------------------------------------------------------- Lagrangian models

LagrangianModel coordinate_lagrangian(const ChartManifold& m, double half_width) {
  int dim = m.dim();
  int n = dim / 2;
  LagrangianModel L{m, n, Box::cube(n, half_width), {}, {}, {}};
  L.embedding = [dim, n](const Vec& p) {
    Vec x = Vec::Zero(dim);
    for (int k = 0; k < n; ++k) x[2 * k] = p[k];
    return x;
  };
  L.jacobian = [dim, n](const Vec&) {
    Mat T = Mat::Zero(dim, n);
    for (int k = 0; k < n; ++k) T(2 * k, k) = 1.0;
    return T;
  };
  L.second = [dim, n](const Vec&) { return std::vector<Mat>(n, Mat::Zero(dim, n)); };
  return L;
}

LagrangianModel lagrangian_from_embedding(const ChartManifold& m, Box params, std::function<Vec(const Vec&)> f) {
  int n = static_cast<int>(params.lo.size());
  LagrangianModel L{m, n, std::move(params), f, {}, {}};
  const double h = 1e-3;
  L.jacobian = [f, n, h](const Vec& p) {
    Vec f0 = f(p);
    Mat T(f0.size(), n);
    for (int k = 0; k < n; ++k) {
      Vec e = Vec::Unit(n, k) * h;
      T.col(k) = (-f(p + 2 * e) + 8 * f(p + e) - 8 * f(p - e) + f(p - 2 * e)) / (12 * h);
    }
    return T;
  };
  L.second = [f, n, h](const Vec& p) {
    Vec f0 = f(p);
    std::vector<Mat> out(n, Mat(f0.size(), n));
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) {
        Vec ek = Vec::Unit(n, k) * h, ej = Vec::Unit(n, j) * h;
        if (k == j) {
          out[k].col(j) = (-f(p + 2 * ek) + 16 * f(p + ek) - 30 * f0 + 16 * f(p - ek) - f(p - 2 * ek)) / (12 * h * h);
        } else {
          out[k].col(j) = (f(p + ek + ej) - f(p + ek - ej) - f(p - ek + ej) + f(p - ek - ej)) / (4 * h * h);
        }
      }
    return out;
  };
  return L;
}

SubmanifoldReport submanifold_check(LagrangianModel& L, double tol_L, int samples) {
  SubmanifoldReport rep;
  const ChartManifold& m = L.ambient;
  int dim = m.dim();
  for (const Vec& p : halton_points(L.params, samples)) {
    Vec x = L.embedding(p);
    Mat T = L.jacobian(p);
    Eigen::JacobiSVD<Mat> svd(T);
    if (svd.singularValues().minCoeff() < 1e-8) throw Error(ErrorKind::NotImmersed, "embedding Jacobian rank < n");
    Mat g = m.metric(x);
    Mat J = m.acs(x);
    // g-orthonormal tangent frame
    Mat E = T;
    for (int k = 0; k < L.n; ++k) {
      for (int j = 0; j < k; ++j) E.col(k) -= E.col(j).dot(g * E.col(k)) * E.col(j);
      E.col(k) /= std::sqrt(E.col(k).dot(g * E.col(k)));
    }
    for (int a = 0; a < L.n; ++a)
      for (int b = a + 1; b < L.n; ++b)
        rep.max_omega = std::max(rep.max_omega, std::abs((J * E.col(a)).dot(g * E.col(b))));
    Tensor3 G = m.christoffel_unchecked(x);
    std::vector<Mat> S = L.second(p);
    // Coefficients expressing the frame in parameter directions: E = T C.
    Mat C = T.colPivHouseholderQr().solve(E);
    double b2 = 0.0;
    for (int a = 0; a < L.n; ++a)
      for (int b = 0; b < L.n; ++b) {
        Vec v = Vec::Zero(dim);
        for (int k = 0; k < L.n; ++k)
          for (int j = 0; j < L.n; ++j) v += C(k, a) * C(j, b) * S[k].col(j);
        v += G.apply(E.col(a), E.col(b));
        for (int k = 0; k < L.n; ++k) v -= E.col(k).dot(g * v) * E.col(k);
        b2 += v.dot(g * v);
      }
    rep.max_second_fundamental = std::max(rep.max_second_fundamental, std::sqrt(b2));
    ++rep.samples;
  }
  rep.lagrangian = rep.max_omega <= tol_L;
  rep.totally_geodesic = rep.max_second_fundamental <= tol_L;
  L.checked_lagrangian = rep.lagrangian;
  L.checked_totally_geodesic = rep.totally_geodesic;
  return rep;
}

}  // namespace jcl

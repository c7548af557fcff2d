#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace jcl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  NonSPD,
  NotCorrectable,
  OutOfDomain,
  DegeneratePlane,
  NonUnitVector,
  NonPositiveScale,
  NotImmersed,
  ChartFailure,
  LeftDomain,
  StepUnderflow,
  ShootingDiverged,
  DegenerateMetric,
  EmptyRegion,
  IncompatibleCorners,
  EllipticityLost,
  MaxInnerIterations,
  Diverged,
  NotConverged,
  NoRegularLevels,
  NegativeF,
  HypothesisFailed,
  RangeError,
  UnresolvedCurvature,
  PatchTooSmall,
  ParseError,
  MissingReport,
  IoError,
  InvalidInput,
};

const char* error_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Rank-3 array T^a_{bc} stored densely, first index is the upper one.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), v_(static_cast<size_t>(n) * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int a, int b, int c) { return v_[(static_cast<size_t>(a) * n_ + b) * n_ + c]; }
  double operator()(int a, int b, int c) const { return v_[(static_cast<size_t>(a) * n_ + b) * n_ + c]; }
  // Contract the two lower slots with X and Y.
  Vec apply(const Vec& X, const Vec& Y) const;
  // Matrix M^a_c = T^a_{bc} X^b (first lower slot contracted).
  Mat contract_first(const Vec& X) const;
  double max_abs() const;
  const std::vector<double>& data() const { return v_; }

 private:
  int n_ = 0;
  std::vector<double> v_;
};

// R^d_{abc}, with R(X,Y)Z = R^d_{abc} X^a Y^b Z^c e_d.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n), v_(static_cast<size_t>(n) * n * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int d, int a, int b, int c) {
    return v_[((static_cast<size_t>(d) * n_ + a) * n_ + b) * n_ + c];
  }
  double operator()(int d, int a, int b, int c) const {
    return v_[((static_cast<size_t>(d) * n_ + a) * n_ + b) * n_ + c];
  }
  Vec apply(const Vec& X, const Vec& Y, const Vec& Z) const;
  double max_abs() const;

 private:
  int n_ = 0;
  std::vector<double> v_;
};

// Standard complex structure on R^{2n} with coordinates (x1,y1,x2,y2,...):
// e_{2k} -> e_{2k+1}, e_{2k+1} -> -e_{2k} (zero based).
Mat standard_j(int dim);

}  // namespace jcl

#pragma once

#include "jcl/immersion.hpp"
#include "jcl/report.hpp"

#include <complex>
#include <string>
#include <vector>

namespace jcl {

inline constexpr double kTolFix = 1e-10;
inline constexpr double kTolPde = 1e-9;
inline constexpr double kTolEll = 0.05;
inline constexpr double kTolLinSolve = 1e-11;

enum class BoundaryKind { Dirichlet, LagrangianMixed };

// Trace of x^3..x^{2n} along the arc. For the mixed kind the segment t = cy
// carries x^{even} = 0 (zero-based odd slots) and zero Neumann data on the
// remaining heights.
struct BoundaryData {
  BoundaryKind kind = BoundaryKind::Dirichlet;
  HeightFunction trace;
  std::string description;
};

// x^3 + i x^4 = sum_k coeffs[k] z^k with z = s + i t; further heights zero.
HeightFunction polynomial_trace(std::vector<std::complex<double>> coeffs, int dim);
BoundaryData dirichlet(HeightFunction trace, std::string description = "");
BoundaryData lagrangian_mixed(HeightFunction trace, std::string description = "");

enum class LinearMethod { Auto, Direct, SOR };

struct SolveOptions {
  double theta = 0.7;
  double omega = 1.7;
  double tol_fix = kTolFix;
  double tol_pde = kTolPde;
  double tol_ell = kTolEll;
  double tol_lin = kTolLinSolve;
  int max_iter = 500;
  int max_inner = 200000;
  LinearMethod method = LinearMethod::Auto;
  // The mean-curvature certificate is taken over this fraction of the
  // radius; the staircase boundary pollutes a band next to the arc.
  double mc_window = 0.5;
};

// gamma^{ij} frozen at the equation nodes (others unused).
struct FrozenCoefficients {
  Vec a11, a12, a22;
};

// Solves a11 D_ss x + 2 a12 D_st x + a22 D_tt x = rhs for heights 2..dim-1,
// boundary values taken from `values` (Dirichlet / segment data), returning
// the full value matrix.
Mat solve_frozen(const GridGeometry& grid, BoundaryKind kind, const FrozenCoefficients& coef, const Mat& rhs,
                 const Mat& values, const SolveOptions& opt);

GridImmersion harmonic_init(std::shared_ptr<const GridGeometry> grid, const ChartManifold& m,
                            const BoundaryData& bd);

struct Assembly {
  FrozenCoefficients coef;
  Mat rhs;                  // F^mu (rows = all components)
  double pde_residual = 0;  // max |gamma^{ij} D_ij x - F| over equation nodes
};
Assembly assemble(const GridImmersion& u, BoundaryKind kind, const SolveOptions& opt = {});

// One frozen-coefficient solve from the current iterate.
Mat linearized_solve(const GridImmersion& u, const Mat& rhs, BoundaryKind kind, const SolveOptions& opt = {});

struct SolveOutcome {
  GridImmersion immersion;
  int iterations = 0;
  double final_update = 0.0;
  double final_pde_residual = 0.0;
  double final_mc_residual = 0.0;
  bool converged = false;
  std::vector<double> updates;
};

SolveOutcome solve(const ChartManifold& m, std::shared_ptr<const GridGeometry> grid, const BoundaryData& bd,
                   const SolveOptions& opt = {});

ExperimentReport type1_certificates(const SolveOutcome& out, const LagrangianModel& L);

// Central derivatives with ghost reflection across the segment for the half
// disc: x_s, x_t, x_ss, x_st, x_tt at an equation node.
struct NodeDerivatives {
  Vec xs, xt, xss, xst, xtt;
};
NodeDerivatives equation_derivatives(const GridGeometry& grid, const Mat& X, int n);

}  // namespace jcl

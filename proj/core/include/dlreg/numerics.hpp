#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Dense>

#include "dlreg/error.hpp"

namespace dlreg {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

struct NormalEval {
  double density;
  double cumulative;
};

/// Density and CDF of N(mu, sigma2) at x. Throws ModelError if sigma2 <= 0.
NormalEval normal_pdf_cdf(double x, double mu, double sigma2);

double std_normal_pdf(double z);
double std_normal_cdf(double z);
/// Upper tail 1 - Phi(z), accurate in relative terms for large z.
double std_normal_sf(double z);

/// phi(a) / (1 - Phi(a)). Switches to a continued-fraction Mills ratio once
/// the tail mass drops below 1e-10, so it stays finite far into the tail.
double upper_hazard(double a);
/// phi(b) / Phi(b) == upper_hazard(-b).
double lower_hazard(double b);

/// E(X | X <= delta) for X ~ N(mu, sigma2).
double truncated_mean_below(double mu, double sigma2, double delta);
/// E(X | X > delta) for X ~ N(mu, sigma2).
double truncated_mean_above(double mu, double sigma2, double delta);

struct RootSolveOptions {
  double tol = 1e-10;  // max-norm on the residual
  int max_iter = 100;
  int step_halving_max = 30;
};

struct RootSolveResult {
  Vector x;
  int iterations = 0;  // number of Newton steps taken
  double residual_norm = 0.0;
};

using VectorFn = std::function<Vector(const Vector&)>;
using MatrixFn = std::function<DenseMatrix(const Vector&)>;

/// Damped Newton iteration for residual(x) = 0. A step is halved (up to
/// opts.step_halving_max times) while it increases the residual 2-norm.
/// Throws ModelError("singular-system") or NoConvergence.
RootSolveResult newton_solve(const VectorFn& residual, const MatrixFn& jacobian,
                             const Vector& x0, const RootSolveOptions& opts = {});

/// Central-difference Jacobian; rows index outputs, columns index inputs.
DenseMatrix finite_diff_jacobian(const VectorFn& fn, const Vector& x, double h);

DenseMatrix solve_spd(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix invert_spd(const DenseMatrix& a);
/// True when a is symmetric and its smallest eigenvalue is >= -tol * max(1, ||a||).
bool is_psd(const DenseMatrix& a, double tol = 1e-8);
DenseMatrix symmetrize(const DenseMatrix& a);

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_sf(double statistic, double dof);

struct QuadratureRule {
  Vector nodes;    // on [-1, 1]
  Vector weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(std::size_t n);
/// Cached 64-point rule.
const QuadratureRule& gauss_legendre_64();

}  // namespace dlreg

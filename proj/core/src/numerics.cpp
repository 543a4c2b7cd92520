#include "dlreg/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

namespace dlreg {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
// Above this standardized point the normal tail mass is below 1e-10.
constexpr double kMillsSwitch = 6.3613409;

// Phi_c(a) / phi(a) for a >= kMillsSwitch via Laplace's continued fraction.
double mills_ratio_cf(double a) {
  double f = a;
  for (int k = 120; k >= 1; --k) f = a + k / f;
  return 1.0 / f;
}

}  // namespace

double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

NormalEval normal_pdf_cdf(double x, double mu, double sigma2) {
  if (!(sigma2 > 0.0)) throw ModelError("domain", "normal_pdf_cdf: sigma2 must be positive");
  const double sigma = std::sqrt(sigma2);
  const double z = (x - mu) / sigma;
  return {std_normal_pdf(z) / sigma, std_normal_cdf(z)};
}

double upper_hazard(double a) {
  if (a > kMillsSwitch) return 1.0 / mills_ratio_cf(a);
  return std_normal_pdf(a) / std_normal_sf(a);
}

double lower_hazard(double b) { return upper_hazard(-b); }

double truncated_mean_below(double mu, double sigma2, double delta) {
  if (!(sigma2 > 0.0)) throw ModelError("domain", "truncated_mean_below: sigma2 must be positive");
  const double sigma = std::sqrt(sigma2);
  const double b = (delta - mu) / sigma;
  if (std::isinf(b) && b > 0) return mu;
  if (!(std_normal_cdf(b) > 1e-300))
    throw ModelError("truncation-mass-zero", "truncation mass numerically zero");
  return mu - sigma * lower_hazard(b);
}

double truncated_mean_above(double mu, double sigma2, double delta) {
  if (!(sigma2 > 0.0)) throw ModelError("domain", "truncated_mean_above: sigma2 must be positive");
  const double sigma = std::sqrt(sigma2);
  const double a = (delta - mu) / sigma;
  if (std::isinf(a) && a < 0) return mu;
  if (!(std_normal_sf(a) > 1e-300))
    throw ModelError("truncation-mass-zero", "truncation mass numerically zero");
  return mu + sigma * upper_hazard(a);
}

RootSolveResult newton_solve(const VectorFn& residual, const MatrixFn& jacobian,
                             const Vector& x0, const RootSolveOptions& opts) {
  Vector x = x0;
  Vector r = residual(x);
  if (!r.allFinite()) throw ModelError("non-finite", "newton_solve: non-finite residual at start");

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const double rmax = r.lpNorm<Eigen::Infinity>();
    if (rmax <= opts.tol) return {x, iter, rmax};

    const DenseMatrix j = jacobian(x);
    if (j.rows() != r.size() || j.cols() != x.size())
      throw ModelError("dimension", "newton_solve: jacobian shape does not match residual");
    Eigen::FullPivLU<DenseMatrix> lu(j);
    if (!lu.isInvertible()) throw ModelError("singular-system", "singular system");
    const Vector step = lu.solve(-r);

    const double rnorm = r.norm();
    double scale = 1.0;
    Vector x_new = x + step;
    Vector r_new = residual(x_new);
    for (int h = 0; h < opts.step_halving_max && !(r_new.allFinite() && r_new.norm() <= rnorm); ++h) {
      scale *= 0.5;
      x_new = x + scale * step;
      r_new = residual(x_new);
    }
    if (!r_new.allFinite()) throw ModelError("non-finite", "newton_solve: non-finite residual");
    x = std::move(x_new);
    r = std::move(r_new);
  }
  const double rmax = r.lpNorm<Eigen::Infinity>();
  if (rmax <= opts.tol) return {x, opts.max_iter, rmax};
  throw NoConvergence("no convergence", x);
}

DenseMatrix finite_diff_jacobian(const VectorFn& fn, const Vector& x, double h) {
  const Vector f0 = fn(x);
  DenseMatrix jac(f0.size(), x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp(k) = x(k) + h;
    const Vector fp = fn(xp);
    xp(k) = x(k) - h;
    const Vector fm = fn(xp);
    xp(k) = x(k);
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

DenseMatrix symmetrize(const DenseMatrix& a) { return 0.5 * (a + a.transpose()); }

namespace {

void require_symmetric(const DenseMatrix& a, const char* who) {
  if (a.rows() != a.cols()) throw ModelError("dimension", std::string(who) + ": matrix not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ModelError("not-symmetric", std::string(who) + ": matrix not symmetric");
}

}  // namespace

DenseMatrix solve_spd(const DenseMatrix& a, const DenseMatrix& b) {
  require_symmetric(a, "solve_spd");
  Eigen::LLT<DenseMatrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) throw ModelError("not-positive-definite", "matrix not positive definite");
  return llt.solve(b);
}

DenseMatrix invert_spd(const DenseMatrix& a) {
  return solve_spd(a, DenseMatrix::Identity(a.rows(), a.cols()));
}

bool is_psd(const DenseMatrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  if (!a.allFinite()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

double chi_square_sf(double statistic, double dof) {
  if (!(dof > 0)) throw ModelError("domain", "chi_square_sf: dof must be positive");
  if (!(statistic > 0.0)) return 1.0;
  if (std::isinf(statistic)) return 0.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

QuadratureRule gauss_legendre(std::size_t n) {
  QuadratureRule rule{Vector(n), Vector(n)};
  const std::size_t m = (n + 1) / 2;
  for (std::size_t i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z_prev = z;
      z = z_prev - p1 / pp;
      if (std::abs(z - z_prev) < 1e-15) break;
    }
    rule.nodes(i) = -z;
    rule.nodes(n - 1 - i) = z;
    rule.weights(i) = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights(n - 1 - i) = rule.weights(i);
  }
  return rule;
}

const QuadratureRule& gauss_legendre_64() {
  static const QuadratureRule rule = gauss_legendre(64);
  return rule;
}

}  // namespace dlreg

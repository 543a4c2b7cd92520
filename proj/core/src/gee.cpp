#include <algorithm>
#include <cmath>
#include <string>

#include "dlreg/primary.hpp"

namespace dlreg {

namespace {

constexpr double kMinBernoulliVariance = 1e-10;

double working_variance(WorkingVariance wv, double g) {
  if (wv == WorkingVariance::constant) return 1.0;
  return std::max(g * (1.0 - g), kMinBernoulliVariance);
}

std::vector<std::string> coefficient_names(const Dataset& d) {
  std::vector<std::string> names{"intercept", d.x_name};
  for (Eigen::Index j = 0; j < d.p_u(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    names.push_back(k < d.u_names.size() ? d.u_names[k] : "u" + std::to_string(j + 1));
  }
  return names;
}

Vector starting_value(const MeanModel& model, const Dataset& d, Link link) {
  const Eigen::Index p = model.n_beta();
  Vector beta = Vector::Zero(p);
  if (link == Link::logit) {
    const double ybar = std::clamp(d.y.mean(), 0.01, 0.99);
    beta(0) = std::log(ybar / (1.0 - ybar));
    return beta;
  }
  // Least squares with censored x replaced by its conditional mean under the
  // auxiliary fit; exact when the mean model is linear in beta.
  DenseMatrix design(static_cast<Eigen::Index>(d.n()), p);
  Vector unit = Vector::Zero(p);
  unit(1) = 1.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    design.row(row) = model.jacobian_beta(i, unit).transpose();
  }
  Eigen::ColPivHouseholderQR<DenseMatrix> qr(design);
  if (qr.rank() < p) throw ModelError("singular-design", "primary design matrix is rank-deficient");
  return qr.solve(d.y);
}

}  // namespace

SandwichParts sandwich_parts(const MeanModel& model, const Vector& beta, WorkingVariance wv,
                             bool with_cross) {
  const Dataset& d = model.data();
  const Eigen::Index p = model.n_beta();
  SandwichParts parts;
  parts.bread = DenseMatrix::Zero(p, p);
  parts.meat = DenseMatrix::Zero(p, p);
  if (with_cross) parts.cross = DenseMatrix::Zero(p, model.n_eta());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double g = model.mean(i, beta);
    const double v = working_variance(wv, g);
    const double s = d.y(static_cast<Eigen::Index>(i)) - g;
    const Vector dd = model.jacobian_beta(i, beta);
    parts.bread.noalias() += dd * dd.transpose() / v;
    parts.meat.noalias() += dd * dd.transpose() * (s * s / (v * v));
    if (with_cross && !d.x_observed[i])
      parts.cross.noalias() += dd * model.jacobian_eta(i, beta).transpose() / v;
  }
  const double n = static_cast<double>(d.n());
  parts.bread /= n;
  parts.meat /= n;
  if (with_cross) parts.cross /= n;
  return parts;
}

PrimaryFit gee_fit(const Dataset& d, const AuxFit* aux, const FitConfig& config) {
  if (d.n() == 0) throw ModelError("empty", "dataset has no rows");
  if (config.link == Link::logit) {
    for (Eigen::Index i = 0; i < d.y.size(); ++i)
      if (d.y(i) != 0.0 && d.y(i) != 1.0)
        throw ModelError("non-binary-response", "logit link needs y in {0,1}; row " +
                                                    std::to_string(i + 1) + " is not");
  }
  const MeanModel model(d, aux, config.link, config.normalize_htilde);
  const WorkingVariance wv = config.working_variance;
  const double n = static_cast<double>(d.n());
  const Eigen::Index p = model.n_beta();

  auto residual = [&](const Vector& beta) {
    Vector u = Vector::Zero(p);
    for (std::size_t i = 0; i < d.n(); ++i) {
      const double g = model.mean(i, beta);
      if (!std::isfinite(g))
        throw ModelError("non-finite-mean",
                         "non-finite conditional mean at row " + std::to_string(i + 1));
      u += model.jacobian_beta(i, beta) * ((d.y(static_cast<Eigen::Index>(i)) - g) /
                                           working_variance(wv, g));
    }
    return Vector(u / n);
  };
  // Fisher scoring: -(1/n) sum D V^-1 D'.
  auto jacobian = [&](const Vector& beta) {
    return DenseMatrix(-sandwich_parts(model, beta, wv).bread);
  };

  const Vector start = starting_value(model, d, config.link);
  RootSolveResult sol;
  try {
    sol = newton_solve(residual, jacobian, start, config.solver);
  } catch (const NoConvergence& e) {
    throw NoConvergence("GEE did not converge", e.last_iterate());
  }

  PrimaryFit fit;
  fit.beta_hat = sol.x;
  fit.n = d.n();
  fit.n_obs = d.n_observed();
  fit.p_hat2 = static_cast<double>(fit.n_obs) / n;
  fit.iterations = sol.iterations;
  fit.converged = true;
  fit.gee_residual = sol.residual_norm;
  fit.flagged_rows = model.flagged_count();
  fit.coef_names = coefficient_names(d);
  return fit;
}

}  // namespace dlreg

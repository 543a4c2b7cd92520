#include <cmath>
#include <string>

#include "dlreg/primary.hpp"

namespace dlreg {

namespace {

DenseMatrix inverse_bread(const DenseMatrix& bread) {
  try {
    return invert_spd(symmetrize(bread));
  } catch (const ModelError&) {
    throw ModelError("rank-deficient-information", "rank-deficient information");
  }
}

DenseMatrix sandwich(const DenseMatrix& bread_inv, const DenseMatrix& filling) {
  return symmetrize(bread_inv * filling * bread_inv.transpose());
}

void attach_variance(PrimaryFit& fit, const DenseMatrix& sigma, VarianceMethod method) {
  fit.sigma_beta = sigma;
  fit.variance_method = method;
  fit.std_errors = (sigma.diagonal() / static_cast<double>(fit.n)).cwiseMax(0.0).cwiseSqrt();
}

struct FoldVariance {
  DenseMatrix sigma;
  std::vector<Vector> fold_betas;
  std::size_t n_first = 0;
  std::size_t n_second = 0;
};

// Sandwich on `target` with the auxiliary model fitted on `other`.
DenseMatrix cross_fitted_sandwich(const Dataset& target, const Dataset& other, int fold,
                                  const FitConfig& config, const AuxFitter& aux_fitter,
                                  const GeeFitter& gee_fitter, Vector& beta_out) {
  try {
    const AuxFit aux = aux_fitter(other, config);
    const PrimaryFit fit = gee_fitter(target, &aux, config);
    beta_out = fit.beta_hat;
    const MeanModel model(target, &aux, config.link, config.normalize_htilde);
    const SandwichParts parts = sandwich_parts(model, fit.beta_hat, config.working_variance);
    return sandwich(inverse_bread(parts.bread), parts.meat);
  } catch (const Error& e) {
    throw ModelError("sscf-fold-failure",
                     "SSCF fold failure in fold " + std::to_string(fold) + ": " + e.what());
  }
}

FoldVariance sscf_folds(const Dataset& d, const FitConfig& config, const AuxFitter& aux_fitter,
                        const GeeFitter& gee_fitter) {
  const FoldSplit split = split_two_folds(d, config.seed);
  FoldVariance out;
  out.n_first = split.first.n();
  out.n_second = split.second.n();
  Vector b1, b2;
  const DenseMatrix s1 =
      cross_fitted_sandwich(split.first, split.second, 1, config, aux_fitter, gee_fitter, b1);
  const DenseMatrix s2 =
      cross_fitted_sandwich(split.second, split.first, 2, config, aux_fitter, gee_fitter, b2);
  const double n = static_cast<double>(d.n());
  out.sigma = symmetrize((static_cast<double>(out.n_first) * s1 +
                          static_cast<double>(out.n_second) * s2) / n);
  out.fold_betas = {b1, b2};
  return out;
}

}  // namespace

DenseMatrix variance_known_eta(const Dataset& d, const AuxFit* aux, const FitConfig& config,
                               const PrimaryFit& fit) {
  const MeanModel model(d, aux, config.link, config.normalize_htilde);
  const SandwichParts parts = sandwich_parts(model, fit.beta_hat, config.working_variance);
  return sandwich(inverse_bread(parts.bread), parts.meat);
}

DenseMatrix variance_theorem1(const Dataset& d, const ParametricAuxFit& aux,
                              const FitConfig& config, const PrimaryFit& fit) {
  const AuxFit wrapped = aux;
  const MeanModel model(d, &wrapped, config.link, config.normalize_htilde);
  const SandwichParts parts =
      sandwich_parts(model, fit.beta_hat, config.working_variance, /*with_cross=*/true);
  DenseMatrix info_inv;
  try {
    info_inv = invert_spd(symmetrize(aux.fisher_info));
  } catch (const ModelError&) {
    throw ModelError("aux-information-singular", "auxiliary information singular");
  }
  const double p2 = static_cast<double>(d.n_observed()) / static_cast<double>(d.n());
  const DenseMatrix phi = symmetrize(parts.cross * info_inv * parts.cross.transpose() / p2);
  return sandwich(inverse_bread(parts.bread), parts.meat + phi);
}

SscfResult variance_sscf(const Dataset& d, const FitConfig& config, const AuxFitter& aux_fitter,
                         const GeeFitter& gee_fitter) {
  const AuxFit aux = aux_fitter(d, config);
  const PrimaryFit full = gee_fitter(d, &aux, config);
  FoldVariance folds = sscf_folds(d, config, aux_fitter, gee_fitter);
  SscfResult out;
  out.beta_full = full.beta_hat;
  out.sigma = std::move(folds.sigma);
  out.fold_betas = std::move(folds.fold_betas);
  out.n_first = folds.n_first;
  out.n_second = folds.n_second;
  return out;
}

PrimaryFit complete_case_fit(const Dataset& d, const FitConfig& config) {
  const std::vector<std::size_t> rows = d.observed_rows();
  if (rows.size() < static_cast<std::size_t>(2 + d.p_u()))
    throw ModelError("too-few-observed", "complete-case fit needs at least p observed rows");
  const Dataset sub = d.subset(rows);
  PrimaryFit fit = gee_fit(sub, nullptr, config);
  attach_variance(fit, variance_known_eta(sub, nullptr, config, fit), VarianceMethod::known_eta);
  return fit;
}

FitResult fit_two_component(const Dataset& d, const FitConfig& config, VarianceMethod method) {
  require_valid(d);
  FitResult out{PrimaryFit{}, fit_auxiliary(d, config)};
  out.primary = gee_fit(d, &out.aux, config);
  PrimaryFit& fit = out.primary;
  switch (method) {
    case VarianceMethod::known_eta:
      attach_variance(fit, variance_known_eta(d, &out.aux, config, fit), method);
      break;
    case VarianceMethod::theorem1: {
      const auto* pa = std::get_if<ParametricAuxFit>(&out.aux);
      if (pa == nullptr)
        throw ModelError("theorem1-needs-parametric",
                         "theorem1 variance needs the parametric auxiliary model; use sscf");
      attach_variance(fit, variance_theorem1(d, *pa, config, fit), method);
      break;
    }
    case VarianceMethod::sscf: {
      FoldVariance folds = sscf_folds(d, config, fit_auxiliary, gee_fit);
      attach_variance(fit, folds.sigma, method);
      fit.fold_betas = std::move(folds.fold_betas);
      break;
    }
  }
  return out;
}

WaldResult wald_test(const PrimaryFit& fit, const DenseMatrix& c, const Vector& b) {
  const Eigen::Index p = fit.beta_hat.size();
  if (c.cols() != p || c.rows() != b.size() || c.rows() == 0)
    throw ModelError("dimension", "constraint matrix must be s x p with s = length of b");
  if (fit.sigma_beta.rows() != p)
    throw ModelError("no-variance", "fit carries no variance estimate");
  Eigen::FullPivLU<DenseMatrix> lu(c);
  if (lu.rank() < c.rows())
    throw ModelError("rank-deficient-constraint", "constraint matrix rank-deficient");
  const Vector diff = c * fit.beta_hat - b;
  const DenseMatrix middle = symmetrize(c * fit.sigma_beta * c.transpose());
  Eigen::LDLT<DenseMatrix> ldlt(middle);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw ModelError("singular-wald-variance", "C Sigma C' is not invertible");
  WaldResult out;
  out.statistic = std::max(0.0, static_cast<double>(fit.n) * diff.dot(ldlt.solve(diff)));
  out.dof = static_cast<int>(c.rows());
  out.p_value = chi_square_sf(out.statistic, out.dof);
  out.c = c;
  out.b = b;
  return out;
}

Vector coefficient_p_values(const PrimaryFit& fit) {
  Vector p(fit.beta_hat.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double se = fit.std_errors.size() > j ? fit.std_errors(j) : 0.0;
    p(j) = se > 0.0 ? 2.0 * std_normal_sf(std::abs(fit.beta_hat(j)) / se) : 1.0;
  }
  return p;
}

}  // namespace dlreg

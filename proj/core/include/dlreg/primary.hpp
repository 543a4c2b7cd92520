#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dlreg/auxiliary.hpp"
#include "dlreg/data.hpp"
#include "dlreg/numerics.hpp"

namespace dlreg {

double inverse_link(Link link, double eta);
double inverse_link_derivative(Link link, double eta);

/// Conditional mean of y given the observed data, g(w; beta, eta).
///
/// Observed rows use h(beta0 + beta1 x + beta2'u). For censored rows x is
/// integrated out against the auxiliary fit: with the parametric model this is
/// the left-truncated normal (closed form for identity link on the identity
/// scale, 64-point Gauss-Legendre otherwise); with the semiparametric model it
/// is the KM jump sum over the window [nu - mu_i, tau].
///
/// Each censored row is reduced at construction to nodes (x_k, w_k) with
/// g_i = sum_k w_k h(beta0 + beta1 x_k + beta2'u_i), so evaluation for a new
/// beta is cheap. The dataset must outlive the model.
class MeanModel {
 public:
  MeanModel(const Dataset& d, const AuxFit* aux, Link link, bool normalize_htilde = true);

  const Dataset& data() const { return *data_; }
  Link link() const { return link_; }
  Eigen::Index n_beta() const { return 2 + data_->p_u(); }
  /// Length of eta = (gamma, sigma2_x); 0 without a parametric auxiliary fit.
  Eigen::Index n_eta() const;
  bool has_parametric_aux() const { return parametric_.has_value(); }

  double mean(std::size_t i, const Vector& beta) const;
  /// D_i = d g_i / d beta.
  Vector jacobian_beta(std::size_t i, const Vector& beta) const;
  /// M_i = d g_i / d eta, parametric auxiliary only.
  Vector jacobian_eta(std::size_t i, const Vector& beta) const;
  /// Censored rows whose KM window was empty and used the nearest jump.
  bool flagged(std::size_t i) const { return flagged_[i]; }
  std::size_t flagged_count() const;

 private:
  struct Nodes {
    std::vector<double> x;
    std::vector<double> w;
  };

  double linear_predictor(std::size_t i, double x, const Vector& beta) const;

  const Dataset* data_;
  Link link_;
  std::optional<ParametricAuxFit> parametric_;
  std::vector<Nodes> nodes_;  // empty for observed rows
  std::vector<bool> flagged_;
};

double conditional_mean(const MeanModel& model, std::size_t i, const Vector& beta);
Vector mean_jacobian_beta(const MeanModel& model, std::size_t i, const Vector& beta);
Vector mean_jacobian_eta(const MeanModel& model, std::size_t i, const Vector& beta);

struct PrimaryFit {
  Vector beta_hat;
  DenseMatrix sigma_beta;  // asymptotic variance of sqrt(n) (beta_hat - beta)
  Vector std_errors;       // sqrt(diag(sigma_beta) / n)
  VarianceMethod variance_method = VarianceMethod::known_eta;
  std::size_t n = 0;
  std::size_t n_obs = 0;
  double p_hat2 = 1.0;  // n_obs / n
  int iterations = 0;
  bool converged = false;
  double gee_residual = 0.0;
  std::size_t flagged_rows = 0;
  std::vector<std::string> coef_names;
  std::vector<Vector> fold_betas;  // SSCF per-fold estimates
};

/// Solves sum_i D_i V_i^-1 (y_i - g_i) = 0 for beta with the auxiliary fit
/// plugged in. Variance fields are left empty.
PrimaryFit gee_fit(const Dataset& d, const AuxFit* aux, const FitConfig& config);

struct SandwichParts {
  DenseMatrix bread;  // B = (1/n) sum D V^-1 D'
  DenseMatrix meat;   // Sigma_U = (1/n) sum D V^-1 S S V^-1 D'
  DenseMatrix cross;  // C = (1/n) sum D V^-1 M' (parametric aux only)
};

SandwichParts sandwich_parts(const MeanModel& model, const Vector& beta, WorkingVariance wv,
                             bool with_cross = false);

/// B^-1 Sigma_U B^-T, ignoring estimation of the auxiliary parameters.
DenseMatrix variance_known_eta(const Dataset& d, const AuxFit* aux, const FitConfig& config,
                               const PrimaryFit& fit);

/// B^-1 (Sigma_U + Phi) B^-T with Phi = C I^-1 C' / p^2, the covariance of the
/// auxiliary-score term in the influence function (I is the per-observed-row
/// information, p^2 = n_obs / n).
DenseMatrix variance_theorem1(const Dataset& d, const ParametricAuxFit& aux,
                              const FitConfig& config, const PrimaryFit& fit);

using AuxFitter = std::function<AuxFit(const Dataset&, const FitConfig&)>;
using GeeFitter = std::function<PrimaryFit(const Dataset&, const AuxFit*, const FitConfig&)>;

struct SscfResult {
  Vector beta_full;
  DenseMatrix sigma;
  std::vector<Vector> fold_betas;
  std::size_t n_first = 0;
  std::size_t n_second = 0;
};

/// Two-fold sample splitting and cross-fitting: the auxiliary model is fitted
/// on one fold and the GEE on the other, the per-fold sandwich variances are
/// averaged with weights n_k / n. The point estimate is the full-sample fit.
SscfResult variance_sscf(const Dataset& d, const FitConfig& config,
                         const AuxFitter& aux_fitter = fit_auxiliary,
                         const GeeFitter& gee_fitter = gee_fit);

/// GEE on the rows with observed x; known-eta sandwich on that subsample.
PrimaryFit complete_case_fit(const Dataset& d, const FitConfig& config);

struct FitResult {
  PrimaryFit primary;
  AuxFit aux;
};

/// Auxiliary fit, GEE, and the requested variance in one call.
FitResult fit_two_component(const Dataset& d, const FitConfig& config, VarianceMethod method);

struct WaldResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  DenseMatrix c;
  Vector b;
};

/// W = n (C beta - b)' (C Sigma C')^-1 (C beta - b), referred to chi-square(rank C).
WaldResult wald_test(const PrimaryFit& fit, const DenseMatrix& c, const Vector& b);

/// Two-sided p-values for H0: beta_j = 0, one coefficient at a time.
Vector coefficient_p_values(const PrimaryFit& fit);

}  // namespace dlreg

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "dlreg/data.hpp"
#include "dlreg/numerics.hpp"

namespace dlreg {

// ---------------------------------------------------------------------------
// Parametric auxiliary model: x (or log x) given z is N(gamma0 + gamma1'z, sigma2_x).

/// Scale on which the parametric auxiliary model is normal. `log` is the
/// parametric counterpart of the neg_exp transform (x = exp(-t) with t normal).
enum class AuxScale { identity, log };

AuxScale aux_scale_for(Transform t);
double to_aux_scale(double x, AuxScale scale);
double from_aux_scale(double s, AuxScale scale);

struct ParametricAuxFit {
  Vector gamma;              // (gamma0, gamma1...), length p_z + 1
  double sigma2_x = 1.0;
  DenseMatrix fisher_info;   // per observed row, order (gamma..., sigma2_x)
  std::size_t n_obs = 0;
  bool converged = false;
  AuxScale scale = AuxScale::identity;
  int iterations = 0;
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // value after each accepted step
};

/// Left-truncated normal log-likelihood summed over rows with observed x.
double truncated_normal_loglik(const Vector& gamma, double sigma2, const Dataset& d,
                               AuxScale scale = AuxScale::identity);
/// Gradient of truncated_normal_loglik w.r.t. (gamma, sigma2).
Vector truncated_normal_score(const Vector& gamma, double sigma2, const Dataset& d,
                              AuxScale scale = AuxScale::identity);
/// Hessian of truncated_normal_loglik w.r.t. (gamma, sigma2).
DenseMatrix truncated_normal_hessian(const Vector& gamma, double sigma2, const Dataset& d,
                                     AuxScale scale = AuxScale::identity);

/// Maximum-likelihood fit of the truncated normal model on observed rows.
/// Newton ascent on (gamma, log sigma2) with step halving on the
/// log-likelihood, started from OLS. Converged when the per-row score has
/// max-norm <= opts.tol.
ParametricAuxFit fit_truncated_normal(const Dataset& d, const RootSolveOptions& opts = {},
                                      AuxScale scale = AuxScale::identity);

// ---------------------------------------------------------------------------
// Semiparametric auxiliary model: t = T^-1(x) = gamma0 + gamma1'z + eps,
// eps unspecified, t right-censored at nu = T^-1(delta).

/// Nondecreasing right-continuous step function with finitely many jumps.
struct StepCDF {
  std::vector<double> jump_points;  // strictly increasing
  std::vector<double> jump_masses;
  double total_mass = 0.0;

  double operator()(double t) const;   // sum of masses at points <= t
  double left_limit(double t) const;   // sum of masses at points < t
};

/// 1 - Kaplan-Meier survival for right-censored `times`. Events precede
/// censorings at tied values.
StepCDF kaplan_meier_cdf(std::span<const double> times, const std::vector<bool>& events);

double transform_to_x(double t, Transform transform);
double transform_to_t(double x, Transform transform);

struct AftFit {
  Vector gamma;  // (gamma0, gamma1...)
  double loss = 0.0;
  int iterations = 0;
};

/// Gehan loss (1/n^2) sum_{i,j} event_i * max(0, e_j - e_i), with
/// e_i = min(t_i, nu) - gamma0 - gamma1'z_i. Independent of gamma0.
double gehan_loss(const Dataset& d, const Vector& gamma, Transform transform);

/// Rank-based AFT slopes minimizing the Gehan loss. The intercept is not
/// identified by the loss; it is set to the mean of t_i - gamma1'z_i over
/// observed rows.
AftFit fit_aft_gehan(const Dataset& d, Transform transform, const RootSolveOptions& opts = {});

struct SemiparAuxFit {
  Vector gamma;
  StepCDF xi_hat;
  Transform transform = Transform::negate;
  double nu = 0.0;
  double tau = 0.0;
  std::size_t n_obs = 0;
  double gehan_loss = 0.0;
  std::size_t discarded_jumps = 0;  // KM jumps beyond tau
  double discarded_mass = 0.0;
};

/// KM estimate of the residual CDF given gamma. tau defaults to the largest
/// uncensored residual; jumps beyond tau are dropped and counted.
SemiparAuxFit km_residual_cdf(const Dataset& d, const Vector& gamma, Transform transform,
                              std::optional<double> tau_override = std::nullopt);

using AuxFit = std::variant<ParametricAuxFit, SemiparAuxFit>;

/// Fits the auxiliary model selected by config.auxiliary.
AuxFit fit_auxiliary(const Dataset& d, const FitConfig& config);

}  // namespace dlreg

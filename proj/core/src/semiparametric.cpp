#include <algorithm>
#include <cmath>
#include <numeric>

#include "dlreg/auxiliary.hpp"

namespace dlreg {

// ---------------------------------------------------------------------------
// StepCDF / Kaplan-Meier

double StepCDF::operator()(double t) const {
  const auto end = std::upper_bound(jump_points.begin(), jump_points.end(), t);
  return std::accumulate(jump_masses.begin(), jump_masses.begin() + (end - jump_points.begin()), 0.0);
}

double StepCDF::left_limit(double t) const {
  const auto end = std::lower_bound(jump_points.begin(), jump_points.end(), t);
  return std::accumulate(jump_masses.begin(), jump_masses.begin() + (end - jump_points.begin()), 0.0);
}

StepCDF kaplan_meier_cdf(std::span<const double> times, const std::vector<bool>& events) {
  const std::size_t n = times.size();
  if (events.size() != n) throw ModelError("dimension", "kaplan_meier_cdf: size mismatch");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (times[a] != times[b]) return times[a] < times[b];
    return events[a] && !events[b];
  });

  // Redistribution to the right: each subject carries weight w, and a
  // censored subject's weight is shared among those still at risk. Same
  // estimator as the product-limit form; without censoring every mass is 1/n.
  StepCDF cdf;
  double w = 1.0 / static_cast<double>(n);
  double at_risk = static_cast<double>(n);
  for (std::size_t k = 0; k < n;) {
    const double t = times[idx[k]];
    double deaths = 0.0, censored = 0.0;
    for (; k < n && times[idx[k]] == t; ++k) (events[idx[k]] ? deaths : censored) += 1.0;
    if (deaths > 0.0) {
      cdf.jump_points.push_back(t);
      cdf.jump_masses.push_back(deaths * w);
    }
    at_risk -= deaths;
    if (censored > 0.0 && at_risk - censored > 0.0) w *= at_risk / (at_risk - censored);
    at_risk -= censored;
  }
  cdf.total_mass = std::accumulate(cdf.jump_masses.begin(), cdf.jump_masses.end(), 0.0);
  return cdf;
}

// ---------------------------------------------------------------------------
// transforms

double transform_to_x(double t, Transform transform) {
  return transform == Transform::negate ? -t : std::exp(-t);
}

double transform_to_t(double x, Transform transform) {
  if (transform == Transform::negate) return -x;
  if (!(x > 0.0)) throw ModelError("domain", "neg_exp transform needs positive x and delta");
  return -std::log(x);
}

namespace {

struct CensoredResponse {
  Vector t;                 // min(t_i, nu)
  std::vector<bool> event;  // t_i <= nu, i.e. x observed
  double nu;
};

CensoredResponse censored_response(const Dataset& d, Transform transform) {
  CensoredResponse out{Vector(static_cast<Eigen::Index>(d.n())), d.x_observed,
                       transform_to_t(d.delta, transform)};
  for (Eigen::Index i = 0; i < out.t.size(); ++i)
    out.t(i) = d.x_observed[static_cast<std::size_t>(i)] ? transform_to_t(d.x_value(i), transform)
                                                          : out.nu;
  return out;
}

double gehan_loss_exact(const CensoredResponse& resp, const DenseMatrix& z, const Vector& slopes) {
  const Eigen::Index n = resp.t.size();
  std::vector<double> e(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) e[static_cast<std::size_t>(i)] = resp.t(i) - z.row(i).dot(slopes);
  std::vector<double> sorted = e;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> suffix(sorted.size() + 1, 0.0);
  for (std::size_t k = sorted.size(); k-- > 0;) suffix[k] = suffix[k + 1] + sorted[k];
  double loss = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!resp.event[i]) continue;
    const auto k = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), e[i]) -
                                            sorted.begin());
    loss += suffix[k] - static_cast<double>(sorted.size() - k) * e[i];
  }
  return loss / (static_cast<double>(n) * static_cast<double>(n));
}

// Gaussian-smoothed hinge: E max(0, r + s W), W ~ N(0, 1).
struct SmoothedGehan {
  const CensoredResponse& resp;
  const DenseMatrix& z;

  double value(const Vector& b, double s) const {
    const Eigen::Index n = resp.t.size();
    const Vector e = resp.t - z * b;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!resp.event[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double r = e(j) - e(i);
        const double w = r / s;
        if (w <= -8.5) continue;
        total += w >= 8.5 ? r : r * std_normal_cdf(w) + s * std_normal_pdf(w);
      }
    }
    return total / (static_cast<double>(n) * static_cast<double>(n));
  }

  void gradient_hessian(const Vector& b, double s, Vector& grad, DenseMatrix& hess) const {
    const Eigen::Index n = resp.t.size();
    const Eigen::Index p = b.size();
    const Vector e = resp.t - z * b;
    grad.setZero(p);
    hess.setZero(p, p);
    Vector dz(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!resp.event[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = (e(j) - e(i)) / s;
        if (w <= -8.5) continue;
        dz = z.row(j) - z.row(i);
        if (w >= 8.5) {
          grad -= dz;
          continue;
        }
        grad -= std_normal_cdf(w) * dz;
        hess.noalias() += (std_normal_pdf(w) / s) * dz * dz.transpose();
      }
    }
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    grad *= scale;
    hess *= scale;
  }
};

}  // namespace

double gehan_loss(const Dataset& d, const Vector& gamma, Transform transform) {
  if (gamma.size() != d.p_z() + 1)
    throw ModelError("dimension", "gehan_loss: gamma must have length p_z + 1");
  return gehan_loss_exact(censored_response(d, transform), d.z, gamma.tail(d.p_z()));
}

AftFit fit_aft_gehan(const Dataset& d, Transform transform, const RootSolveOptions& opts) {
  const std::size_t n_obs = d.n_observed();
  if (n_obs == 0) throw ModelError("no-observed-x", "no-observed-x: every x is censored");
  const Eigen::Index p = d.p_z();
  if (n_obs < static_cast<std::size_t>(p) + 2)
    throw ModelError("too-few-observed", "AFT fit needs at least p_z + 2 observed rows");

  const CensoredResponse resp = censored_response(d, transform);

  // Observed-row least squares as the starting point.
  const auto rows = d.observed_rows();
  DenseMatrix design(static_cast<Eigen::Index>(rows.size()), p + 1);
  Vector t_obs(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(rows[k]);
    design(static_cast<Eigen::Index>(k), 0) = 1.0;
    design.row(static_cast<Eigen::Index>(k)).tail(p) = d.z.row(i);
    t_obs(static_cast<Eigen::Index>(k)) = resp.t(i);
  }
  Eigen::ColPivHouseholderQR<DenseMatrix> qr(design);
  if (qr.rank() < p + 1) throw ModelError("singular-design", "singular auxiliary design");
  const Vector start = qr.solve(t_obs);

  AftFit fit;
  Vector b = start.tail(p);
  int iterations = 0;
  if (p > 0) {
    const double resid_sd = std::max(
        std::sqrt((t_obs - design * start).squaredNorm() / static_cast<double>(rows.size())), 1e-8);
    const SmoothedGehan smooth{resp, d.z};
    const double bound = 1e6 * (1.0 + start.tail(p).norm());

    // Continuation in the smoothing bandwidth.
    Vector grad;
    DenseMatrix hess;
    for (double s = resid_sd / std::sqrt(static_cast<double>(d.n())); s > 1e-4 * resid_sd / std::sqrt(static_cast<double>(d.n())); s *= 0.1) {
      double f = smooth.value(b, s);
      for (int it = 0; it < 50; ++it, ++iterations) {
        smooth.gradient_hessian(b, s, grad, hess);
        const double ridge = 1e-12 * std::max(hess.trace(), 1e-300);
        Eigen::LDLT<DenseMatrix> ldlt(hess + ridge * DenseMatrix::Identity(p, p));
        Vector step = -ldlt.solve(grad);
        if (!step.allFinite() || ldlt.info() != Eigen::Success) step = -grad;
        bool moved = false;
        double t = 1.0;
        for (int h = 0; h <= opts.step_halving_max; ++h, t *= 0.5) {
          const Vector trial = b + t * step;
          const double f_trial = smooth.value(trial, s);
          if (f_trial < f) {
            b = trial;
            f = f_trial;
            moved = true;
            break;
          }
        }
        if (b.norm() > bound)
          throw ModelError("gehan-unbounded", "Gehan loss unbounded: check censoring pattern");
        if (!moved || (t * step).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + b.norm())) break;
      }
    }

    // Compass polish on the exact piecewise-linear loss.
    std::vector<Vector> dirs;
    for (Eigen::Index k = 0; k < p; ++k) {
      dirs.push_back(Vector::Unit(p, k));
      for (Eigen::Index l = k + 1; l < p; ++l) {
        dirs.push_back((Vector::Unit(p, k) + Vector::Unit(p, l)) / std::sqrt(2.0));
        dirs.push_back((Vector::Unit(p, k) - Vector::Unit(p, l)) / std::sqrt(2.0));
      }
    }
    double f = gehan_loss_exact(resp, d.z, b);
    double h = 1e-2 * (1.0 + b.norm());
    for (int it = 0; it < 5000 && h > 1e-13 * (1.0 + b.norm()); ++it) {
      bool improved = false;
      for (const auto& dir : dirs) {
        for (const double sign : {1.0, -1.0}) {
          const Vector trial = b + sign * h * dir;
          const double f_trial = gehan_loss_exact(resp, d.z, trial);
          if (f_trial < f) {
            b = trial;
            f = f_trial;
            improved = true;
          }
        }
      }
      if (!improved) h *= 0.5;
    }
    if (b.norm() > bound)
      throw ModelError("gehan-unbounded", "Gehan loss unbounded: check censoring pattern");
  }

  fit.gamma.resize(p + 1);
  fit.gamma.tail(p) = b;
  double sum = 0.0;
  for (const auto r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    sum += resp.t(i) - d.z.row(i).dot(b);
  }
  fit.gamma(0) = sum / static_cast<double>(rows.size());
  fit.loss = gehan_loss_exact(resp, d.z, b);
  fit.iterations = iterations;
  return fit;
}

SemiparAuxFit km_residual_cdf(const Dataset& d, const Vector& gamma, Transform transform,
                              std::optional<double> tau_override) {
  if (gamma.size() != d.p_z() + 1 || !gamma.allFinite())
    throw ModelError("dimension", "km_residual_cdf: gamma must be finite with length p_z + 1");
  const CensoredResponse resp = censored_response(d, transform);
  std::vector<double> resid(d.n());
  for (Eigen::Index i = 0; i < resp.t.size(); ++i)
    resid[static_cast<std::size_t>(i)] = resp.t(i) - gamma(0) - d.z.row(i).dot(gamma.tail(d.p_z()));

  SemiparAuxFit fit;
  fit.gamma = gamma;
  fit.transform = transform;
  fit.nu = resp.nu;
  fit.n_obs = d.n_observed();
  fit.xi_hat = kaplan_meier_cdf(resid, resp.event);
  if (fit.xi_hat.jump_points.empty()) throw ModelError("km-undefined", "KM undefined");

  fit.tau = tau_override.value_or(fit.xi_hat.jump_points.back());
  auto& cdf = fit.xi_hat;
  while (!cdf.jump_points.empty() && cdf.jump_points.back() > fit.tau) {
    fit.discarded_mass += cdf.jump_masses.back();
    ++fit.discarded_jumps;
    cdf.jump_points.pop_back();
    cdf.jump_masses.pop_back();
  }
  cdf.total_mass = std::accumulate(cdf.jump_masses.begin(), cdf.jump_masses.end(), 0.0);
  if (cdf.jump_points.empty()) throw ModelError("km-undefined", "KM undefined: no jumps below tau");
  return fit;
}

AuxFit fit_auxiliary(const Dataset& d, const FitConfig& config) {
  if (config.auxiliary == AuxKind::parametric_normal)
    return fit_truncated_normal(d, config.solver, aux_scale_for(config.transform));
  const AftFit aft = fit_aft_gehan(d, config.transform, config.solver);
  SemiparAuxFit fit = km_residual_cdf(d, aft.gamma, config.transform, config.tau_override);
  fit.gehan_loss = aft.loss;
  return fit;
}

}  // namespace dlreg

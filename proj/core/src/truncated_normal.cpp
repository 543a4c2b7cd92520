#include <cmath>
#include <numbers>

#include "dlreg/auxiliary.hpp"

namespace dlreg {

AuxScale aux_scale_for(Transform t) {
  return t == Transform::neg_exp ? AuxScale::log : AuxScale::identity;
}

double to_aux_scale(double x, AuxScale scale) {
  if (scale == AuxScale::identity) return x;
  if (!(x > 0.0)) throw ModelError("domain", "log-scale auxiliary model needs positive x and delta");
  return std::log(x);
}

double from_aux_scale(double s, AuxScale scale) {
  return scale == AuxScale::identity ? s : std::exp(s);
}

namespace {

struct RowTerms {
  double r;       // s_i - mu
  double a;       // (cut - mu) / sigma
  double lambda;  // upper hazard at a
};

double log_upper_tail(double a, double lambda) {
  if (a < 6.0) return std::log(std_normal_sf(a));
  // 1 - Phi(a) = phi(a) / lambda
  return -0.5 * a * a - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(lambda);
}

void require_parameters(const Vector& gamma, double sigma2, const Dataset& d) {
  if (gamma.size() != d.p_z() + 1)
    throw ModelError("dimension", "auxiliary gamma must have length p_z + 1");
  if (!(sigma2 > 0.0)) throw ModelError("domain", "sigma2 must be positive");
}

template <typename F>
void for_each_observed(const Vector& gamma, double sigma2, const Dataset& d, AuxScale scale,
                       F&& f) {
  const double sigma = std::sqrt(sigma2);
  const double cut = to_aux_scale(d.delta, scale);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.n()); ++i) {
    if (!d.x_observed[static_cast<std::size_t>(i)]) continue;
    const double mu = gamma(0) + d.z.row(i).dot(gamma.tail(gamma.size() - 1));
    const double s = to_aux_scale(d.x_value(i), scale);
    const double a = (cut - mu) / sigma;
    f(i, RowTerms{s - mu, a, upper_hazard(a)});
  }
}

Vector design_row(const Dataset& d, Eigen::Index i) {
  Vector v(d.p_z() + 1);
  v(0) = 1.0;
  v.tail(d.p_z()) = d.z.row(i).transpose();
  return v;
}

}  // namespace

double truncated_normal_loglik(const Vector& gamma, double sigma2, const Dataset& d,
                               AuxScale scale) {
  require_parameters(gamma, sigma2, d);
  const double c0 = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
  double ll = 0.0;
  for_each_observed(gamma, sigma2, d, scale, [&](Eigen::Index, const RowTerms& t) {
    ll += c0 - 0.5 * t.r * t.r / sigma2 - log_upper_tail(t.a, t.lambda);
  });
  return ll;
}

Vector truncated_normal_score(const Vector& gamma, double sigma2, const Dataset& d,
                              AuxScale scale) {
  require_parameters(gamma, sigma2, d);
  const double sigma = std::sqrt(sigma2);
  const Eigen::Index q = gamma.size();
  Vector score = Vector::Zero(q + 1);
  for_each_observed(gamma, sigma2, d, scale, [&](Eigen::Index i, const RowTerms& t) {
    const double g_mu = t.r / sigma2 - t.lambda / sigma;
    const double g_s = -0.5 / sigma2 + 0.5 * t.r * t.r / (sigma2 * sigma2) -
                       0.5 * t.lambda * t.a / sigma2;
    score.head(q) += g_mu * design_row(d, i);
    score(q) += g_s;
  });
  return score;
}

DenseMatrix truncated_normal_hessian(const Vector& gamma, double sigma2, const Dataset& d,
                                     AuxScale scale) {
  require_parameters(gamma, sigma2, d);
  const double s = sigma2;
  const double sigma = std::sqrt(s);
  const Eigen::Index q = gamma.size();
  DenseMatrix h = DenseMatrix::Zero(q + 1, q + 1);
  for_each_observed(gamma, sigma2, d, scale, [&](Eigen::Index i, const RowTerms& t) {
    const double dl = t.lambda * (t.lambda - t.a);  // d lambda / d a
    const double h_mm = (dl - 1.0) / s;
    const double h_ms = -t.r / (s * s) + (dl * t.a + t.lambda) / (2.0 * s * sigma);
    const double h_ss = 0.5 / (s * s) - t.r * t.r / (s * s * s) +
                        t.a * (dl * t.a + t.lambda) / (4.0 * s * s) +
                        t.lambda * t.a / (2.0 * s * s);
    const Vector x = design_row(d, i);
    h.topLeftCorner(q, q) += h_mm * x * x.transpose();
    h.col(q).head(q) += h_ms * x;
    h(q, q) += h_ss;
  });
  h.row(q).head(q) = h.col(q).head(q).transpose();
  return h;
}

namespace {

struct Attempt {
  Vector gamma;
  double sigma2;
  int iterations = 0;
  bool converged = false;
  double loglik = 0.0;
  std::vector<double> trace;
};

Attempt newton_ascent(const Dataset& d, AuxScale scale, Vector gamma, double sigma2,
                      const RootSolveOptions& opts) {
  const Eigen::Index q = gamma.size();
  const double n_obs = static_cast<double>(d.n_observed());
  Attempt out{gamma, sigma2, 0, false, 0.0, {}};
  double ll = truncated_normal_loglik(gamma, sigma2, d, scale);
  if (!std::isfinite(ll)) return out;
  out.trace.push_back(ll);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vector score = truncated_normal_score(gamma, sigma2, d, scale);
    if (score.lpNorm<Eigen::Infinity>() / n_obs <= opts.tol) {
      out = {gamma, sigma2, iter, true, ll, std::move(out.trace)};
      return out;
    }
    // Reparameterize sigma2 = exp(omega).
    const DenseMatrix h_nat = truncated_normal_hessian(gamma, sigma2, d, scale);
    Vector g = score;
    g(q) *= sigma2;
    DenseMatrix h = h_nat;
    h.col(q) *= sigma2;
    h.row(q) *= sigma2;
    h(q, q) += score(q) * sigma2;

    DenseMatrix neg_h = -symmetrize(h);
    double ridge = 0.0;
    Eigen::LLT<DenseMatrix> llt(neg_h);
    const double diag_scale = std::max(1.0, neg_h.diagonal().cwiseAbs().maxCoeff());
    while (llt.info() != Eigen::Success) {
      ridge = ridge == 0.0 ? 1e-8 * diag_scale : ridge * 10.0;
      llt.compute(neg_h + ridge * DenseMatrix::Identity(q + 1, q + 1));
      if (ridge > 1e12 * diag_scale) return out;
    }
    const Vector step = llt.solve(g);

    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opts.step_halving_max; ++k, t *= 0.5) {
      const Vector gamma_new = gamma + t * step.head(q);
      const double sigma2_new = sigma2 * std::exp(t * step(q));
      const double ll_new = truncated_normal_loglik(gamma_new, sigma2_new, d, scale);
      // Near the optimum the change in ll is at rounding level.
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-13 * std::abs(ll)) {
        gamma = gamma_new;
        sigma2 = sigma2_new;
        ll = ll_new;
        accepted = true;
        break;
      }
    }
    out.trace.push_back(ll);
    if (!accepted) {
      // At a numerical plateau: accept only if the score is already small.
      const Vector s2 = truncated_normal_score(gamma, sigma2, d, scale);
      out = {gamma, sigma2, iter + 1, s2.lpNorm<Eigen::Infinity>() / n_obs <= 1e3 * opts.tol, ll,
             std::move(out.trace)};
      return out;
    }
  }
  const Vector score = truncated_normal_score(gamma, sigma2, d, scale);
  out = {gamma, sigma2, opts.max_iter, score.lpNorm<Eigen::Infinity>() / n_obs <= opts.tol, ll,
         std::move(out.trace)};
  return out;
}

}  // namespace

ParametricAuxFit fit_truncated_normal(const Dataset& d, const RootSolveOptions& opts,
                                      AuxScale scale) {
  const std::size_t n_obs = d.n_observed();
  if (n_obs == 0) throw ModelError("no-observed-x", "no-observed-x: every x is censored");
  const Eigen::Index q = d.p_z() + 1;
  if (n_obs < static_cast<std::size_t>(q) + 1)
    throw ModelError("too-few-observed", "auxiliary fit needs at least p_z + 2 observed rows");

  DenseMatrix design(static_cast<Eigen::Index>(n_obs), q);
  Vector s(static_cast<Eigen::Index>(n_obs));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.n()); ++i) {
    if (!d.x_observed[static_cast<std::size_t>(i)]) continue;
    design(k, 0) = 1.0;
    design.row(k).tail(q - 1) = d.z.row(i);
    s(k) = to_aux_scale(d.x_value(i), scale);
    ++k;
  }
  Eigen::ColPivHouseholderQR<DenseMatrix> qr(design);
  if (qr.rank() < q) throw ModelError("singular-design", "singular auxiliary design");
  const Vector gamma0 = qr.solve(s);
  const double ssr = (s - design * gamma0).squaredNorm();
  const double sigma2_0 = std::max(ssr / static_cast<double>(n_obs), 1e-12);

  Attempt best;
  bool have = false;
  for (const double mult : {1.0, 4.0, 0.25, 16.0}) {
    Attempt a = newton_ascent(d, scale, gamma0, sigma2_0 * mult, opts);
    if (a.converged) {
      best = std::move(a);
      have = true;
      break;
    }
  }
  if (!have) throw ModelError("aux-no-convergence", "auxiliary MLE did not converge");

  ParametricAuxFit fit;
  fit.gamma = best.gamma;
  fit.sigma2_x = best.sigma2;
  fit.n_obs = n_obs;
  fit.scale = scale;
  fit.iterations = best.iterations;
  fit.loglik = best.loglik;
  fit.loglik_trace = std::move(best.trace);
  fit.fisher_info =
      symmetrize(-truncated_normal_hessian(best.gamma, best.sigma2, d, scale)) /
      static_cast<double>(n_obs);
  fit.converged = true;
  return fit;
}

}  // namespace dlreg

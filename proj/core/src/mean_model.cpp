#include <algorithm>
#include <cmath>

#include "dlreg/primary.hpp"

namespace dlreg {

double inverse_link(Link link, double eta) {
  if (link == Link::identity) return eta;
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double inverse_link_derivative(Link link, double eta) {
  if (link == Link::identity) return 1.0;
  const double p = inverse_link(link, eta);
  return p * (1.0 - p);
}

namespace {

constexpr std::size_t kPanels = 2;

// Standardized integration range for W ~ N(0,1) restricted to W <= b.
std::pair<double, double> truncated_support(double b) {
  if (b > 0.0) return {-10.0, std::min(b, 10.0)};
  const double width = std::min(10.0, std::max(2.0, 40.0 / -b));
  return {b - width, b};
}

}  // namespace

MeanModel::MeanModel(const Dataset& d, const AuxFit* aux, Link link, bool normalize_htilde)
    : data_(&d), link_(link), nodes_(d.n()), flagged_(d.n(), false) {
  if (aux != nullptr) {
    if (const auto* p = std::get_if<ParametricAuxFit>(aux)) parametric_ = *p;
  }
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (d.x_observed[i]) continue;
    if (aux == nullptr)
      throw ModelError("missing-aux", "censored row " + std::to_string(i + 1) +
                                          " needs an auxiliary fit");
    const auto row = static_cast<Eigen::Index>(i);
    Nodes& nodes = nodes_[i];

    if (parametric_) {
      const auto& pa = *parametric_;
      const double mu = pa.gamma(0) + d.z.row(row).dot(pa.gamma.tail(d.p_z()));
      const double sigma = std::sqrt(pa.sigma2_x);
      const double cut = to_aux_scale(d.delta, pa.scale);
      if (pa.scale == AuxScale::identity && link_ == Link::identity) {
        nodes.x = {truncated_mean_below(mu, pa.sigma2_x, cut)};
        nodes.w = {1.0};
        continue;
      }
      const double b = (cut - mu) / sigma;
      if (!(std_normal_cdf(b) > 1e-300))
        throw ModelError("truncation-mass-zero", "truncation mass numerically zero at row " +
                                                      std::to_string(i + 1));
      const auto [lo, hi] = truncated_support(b);
      const auto& rule = gauss_legendre_64();
      const double panel = (hi - lo) / static_cast<double>(kPanels);
      double total = 0.0;
      for (std::size_t p = 0; p < kPanels; ++p) {
        const double a0 = lo + panel * static_cast<double>(p);
        for (Eigen::Index k = 0; k < rule.nodes.size(); ++k) {
          const double w = a0 + 0.5 * panel * (rule.nodes(k) + 1.0);
          const double weight = 0.5 * panel * rule.weights(k) * std_normal_pdf(w);
          nodes.x.push_back(from_aux_scale(mu + sigma * w, pa.scale));
          nodes.w.push_back(weight);
          total += weight;
        }
      }
      for (auto& w : nodes.w) w /= total;
    } else {
      const auto& sa = std::get<SemiparAuxFit>(*aux);
      const double mu = sa.gamma(0) + d.z.row(row).dot(sa.gamma.tail(d.p_z()));
      const double lower = sa.nu - mu;
      const auto& pts = sa.xi_hat.jump_points;
      const auto& mass = sa.xi_hat.jump_masses;
      auto first = std::lower_bound(pts.begin(), pts.end(), lower);
      auto last = std::upper_bound(pts.begin(), pts.end(), sa.tau);
      if (first >= last) {
        // Empty window: nearest jump point to the window.
        const std::size_t k = first == pts.end() ? pts.size() - 1
                                                 : static_cast<std::size_t>(first - pts.begin());
        nodes.x = {transform_to_x(pts[k] + mu, sa.transform)};
        nodes.w = {1.0};
        flagged_[i] = true;
        continue;
      }
      double total = 0.0;
      for (auto it = first; it != last; ++it) {
        const auto k = static_cast<std::size_t>(it - pts.begin());
        nodes.x.push_back(transform_to_x(*it + mu, sa.transform));
        nodes.w.push_back(mass[k]);
        total += mass[k];
      }
      if (normalize_htilde)
        for (auto& w : nodes.w) w /= total;
    }
  }
}

Eigen::Index MeanModel::n_eta() const {
  return parametric_ ? parametric_->gamma.size() + 1 : 0;
}

std::size_t MeanModel::flagged_count() const {
  return static_cast<std::size_t>(std::count(flagged_.begin(), flagged_.end(), true));
}

double MeanModel::linear_predictor(std::size_t i, double x, const Vector& beta) const {
  const auto row = static_cast<Eigen::Index>(i);
  return beta(0) + beta(1) * x + data_->u.row(row).dot(beta.tail(beta.size() - 2));
}

double MeanModel::mean(std::size_t i, const Vector& beta) const {
  if (data_->x_observed[i])
    return inverse_link(link_, linear_predictor(i, data_->x_value(static_cast<Eigen::Index>(i)), beta));
  const Nodes& nodes = nodes_[i];
  double g = 0.0;
  for (std::size_t k = 0; k < nodes.x.size(); ++k)
    g += nodes.w[k] * inverse_link(link_, linear_predictor(i, nodes.x[k], beta));
  return g;
}

Vector MeanModel::jacobian_beta(std::size_t i, const Vector& beta) const {
  const auto row = static_cast<Eigen::Index>(i);
  const Eigen::Index p = beta.size();
  Vector d = Vector::Zero(p);
  auto accumulate = [&](double x, double weight) {
    const double dh = weight * inverse_link_derivative(link_, linear_predictor(i, x, beta));
    d(0) += dh;
    d(1) += dh * x;
    d.tail(p - 2) += dh * data_->u.row(row).transpose();
  };
  if (data_->x_observed[i]) {
    accumulate(data_->x_value(row), 1.0);
  } else {
    const Nodes& nodes = nodes_[i];
    for (std::size_t k = 0; k < nodes.x.size(); ++k) accumulate(nodes.x[k], nodes.w[k]);
  }
  return d;
}

Vector MeanModel::jacobian_eta(std::size_t i, const Vector& beta) const {
  if (!parametric_)
    throw ModelError("no-parametric-aux", "d g / d eta needs a parametric auxiliary fit");
  const auto& pa = *parametric_;
  const Eigen::Index q = pa.gamma.size();
  Vector m = Vector::Zero(q + 1);
  if (data_->x_observed[i]) return m;

  const Dataset& d = *data_;
  const auto row = static_cast<Eigen::Index>(i);
  const double s = pa.sigma2_x;
  const double sigma = std::sqrt(s);
  const double mu = pa.gamma(0) + d.z.row(row).dot(pa.gamma.tail(d.p_z()));
  const double cut = to_aux_scale(d.delta, pa.scale);
  const double b = (cut - mu) / sigma;
  const double r = lower_hazard(b);

  double d_mu = 0.0;
  double d_s = 0.0;
  if (pa.scale == AuxScale::identity && link_ == Link::identity) {
    // m = mu - sigma r(b)
    d_mu = beta(1) * (1.0 - r * (b + r));
    d_s = beta(1) * (-r * (1.0 + b * (b + r)) / (2.0 * sigma));
  } else {
    const Nodes& nodes = nodes_[i];
    double e_dh = 0.0, e_dh_w = 0.0, g = 0.0;
    for (std::size_t k = 0; k < nodes.x.size(); ++k) {
      const double eta = linear_predictor(i, nodes.x[k], beta);
      const double dx_ds = pa.scale == AuxScale::identity ? 1.0 : nodes.x[k];
      const double dh = inverse_link_derivative(link_, eta) * beta(1) * dx_ds;
      const double w_std = (to_aux_scale(nodes.x[k], pa.scale) - mu) / sigma;
      e_dh += nodes.w[k] * dh;
      e_dh_w += nodes.w[k] * dh * w_std;
      g += nodes.w[k] * inverse_link(link_, eta);
    }
    const double boundary = inverse_link(link_, linear_predictor(i, d.delta, beta)) - g;
    d_mu = e_dh - boundary * r / sigma;
    d_s = e_dh_w / (2.0 * sigma) - boundary * r * b / (2.0 * s);
  }
  m(0) = d_mu;
  m.segment(1, q - 1) = d_mu * d.z.row(row).transpose();
  m(q) = d_s;
  return m;
}

double conditional_mean(const MeanModel& model, std::size_t i, const Vector& beta) {
  return model.mean(i, beta);
}

Vector mean_jacobian_beta(const MeanModel& model, std::size_t i, const Vector& beta) {
  return model.jacobian_beta(i, beta);
}

Vector mean_jacobian_eta(const MeanModel& model, std::size_t i, const Vector& beta) {
  return model.jacobian_eta(i, beta);
}

}  // namespace dlreg

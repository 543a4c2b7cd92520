#include "dlreg/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dlreg {

namespace {

Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json matrix_json(const DenseMatrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

DenseMatrix matrix_from(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw IoError("bad-json", "matrix entry count does not match rows * cols");
  DenseMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left ? s + fill : fill + s;
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ModelError("invalid-config", std::string("field '") + key + "': wrong type");
  }
}

}  // namespace

Json to_json(const PrimaryFit& fit) {
  Json j;
  j["coefficients"] = fit.coef_names;
  j["beta"] = vector_json(fit.beta_hat);
  j["std_errors"] = vector_json(fit.std_errors);
  j["p_values"] = vector_json(coefficient_p_values(fit));
  j["variance"] = matrix_json(fit.sigma_beta);
  j["variance_method"] = to_string(fit.variance_method);
  j["n"] = fit.n;
  j["n_obs"] = fit.n_obs;
  j["p_hat2"] = fit.p_hat2;
  j["diagnostics"] = {{"iterations", fit.iterations},
                      {"converged", fit.converged},
                      {"gee_residual", fit.gee_residual},
                      {"flagged_rows", fit.flagged_rows}};
  if (!fit.fold_betas.empty()) {
    Json folds = Json::array();
    for (const auto& b : fit.fold_betas) folds.push_back(vector_json(b));
    j["fold_betas"] = folds;
  }
  return j;
}

PrimaryFit primary_fit_from_json(const Json& j) {
  try {
    PrimaryFit fit;
    fit.coef_names = j.at("coefficients").get<std::vector<std::string>>();
    fit.beta_hat = vector_from(j.at("beta"));
    fit.std_errors = vector_from(j.at("std_errors"));
    fit.sigma_beta = matrix_from(j.at("variance"));
    fit.variance_method = parse_variance_method(j.at("variance_method").get<std::string>());
    fit.n = j.at("n").get<std::size_t>();
    fit.n_obs = j.at("n_obs").get<std::size_t>();
    fit.p_hat2 = j.at("p_hat2").get<double>();
    const Json& diag = j.at("diagnostics");
    fit.iterations = diag.at("iterations").get<int>();
    fit.converged = diag.at("converged").get<bool>();
    fit.gee_residual = diag.at("gee_residual").get<double>();
    fit.flagged_rows = diag.at("flagged_rows").get<std::size_t>();
    if (j.contains("fold_betas"))
      for (const auto& b : j.at("fold_betas")) fit.fold_betas.push_back(vector_from(b));
    return fit;
  } catch (const Json::exception& e) {
    throw IoError("bad-json", std::string("malformed fit JSON: ") + e.what());
  }
}

Json to_json(const ParametricAuxFit& fit) {
  return {{"kind", "parametric"},
          {"scale", fit.scale == AuxScale::identity ? "identity" : "log"},
          {"gamma", vector_json(fit.gamma)},
          {"sigma2_x", fit.sigma2_x},
          {"fisher_info", matrix_json(fit.fisher_info)},
          {"n_obs", fit.n_obs},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"loglik", fit.loglik}};
}

Json to_json(const SemiparAuxFit& fit) {
  Json jumps = Json::array();
  for (std::size_t k = 0; k < fit.xi_hat.jump_points.size(); ++k)
    jumps.push_back({fit.xi_hat.jump_points[k], fit.xi_hat.jump_masses[k]});
  return {{"kind", "semiparametric"},
          {"transform", to_string(fit.transform)},
          {"gamma", vector_json(fit.gamma)},
          {"nu", fit.nu},
          {"tau", fit.tau},
          {"n_obs", fit.n_obs},
          {"jumps", jumps},
          {"total_mass", fit.xi_hat.total_mass},
          {"diagnostics",
           {{"gehan_loss", fit.gehan_loss},
            {"discarded_jumps", fit.discarded_jumps},
            {"discarded_mass", fit.discarded_mass}}}};
}

Json to_json(const AuxFit& fit) {
  return std::visit([](const auto& f) { return to_json(f); }, fit);
}

Json to_json(const std::vector<Violation>& violations) {
  Json out = Json::array();
  for (const auto& v : violations) {
    Json j{{"code", v.code}, {"message", v.message}};
    j["row"] = v.row ? Json(*v.row + 1) : Json(nullptr);
    out.push_back(j);
  }
  return out;
}

Json to_json(const ScenarioConfig& cfg) {
  std::vector<std::string> methods;
  for (auto m : cfg.methods) methods.push_back(to_string(m));
  const auto& c = cfg.covariates;
  return {{"name", cfg.name},
          {"design", to_string(cfg.design)},
          {"n", cfg.n},
          {"target_missing_frac", cfg.target_missing_frac},
          {"error_kind", to_string(cfg.error_kind)},
          {"chisq_dof", cfg.chisq_dof},
          {"beta", vector_json(cfg.beta)},
          {"gamma", vector_json(cfg.gamma)},
          {"sigma2_y", cfg.sigma2_y},
          {"sigma2_x", cfg.sigma2_x},
          {"covariates",
           {{"mu_u", c.mu_u},
            {"sigma2_u", c.sigma2_u},
            {"p_u", c.p_u},
            {"mu_z", c.mu_z},
            {"sigma2_z", c.sigma2_z},
            {"p_z", c.p_z}}},
          {"transform", to_string(cfg.transform)},
          {"mc_reps", cfg.mc_reps},
          {"seed", cfg.seed},
          {"null_value", cfg.null_value},
          {"methods", methods}};
}

ScenarioConfig scenario_from_json(const Json& j, ScenarioConfig cfg) {
  if (!j.is_object()) throw ModelError("invalid-config", "scenario must be a JSON object");
  static const std::vector<std::string> known{
      "name",     "design",   "n",          "target_missing_frac", "error_kind", "chisq_dof",
      "beta",     "gamma",    "sigma2_y",   "sigma2_x",            "covariates", "transform",
      "mc_reps",  "seed",     "null_value", "methods",             "preset"};
  for (const auto& item : j.items())
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw ModelError("invalid-config", "field '" + item.key() + "': unknown field");

  read_if(j, "name", cfg.name);
  std::string s;
  if (j.contains("design")) {
    read_if(j, "design", s);
    cfg.design = parse_design(s);
  }
  read_if(j, "n", cfg.n);
  read_if(j, "target_missing_frac", cfg.target_missing_frac);
  if (j.contains("error_kind")) {
    read_if(j, "error_kind", s);
    cfg.error_kind = parse_error_kind(s);
  }
  read_if(j, "chisq_dof", cfg.chisq_dof);
  std::vector<double> v;
  if (j.contains("beta")) {
    read_if(j, "beta", v);
    cfg.beta = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (j.contains("gamma")) {
    read_if(j, "gamma", v);
    cfg.gamma = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  read_if(j, "sigma2_y", cfg.sigma2_y);
  read_if(j, "sigma2_x", cfg.sigma2_x);
  if (j.contains("covariates")) {
    const Json& c = j.at("covariates");
    read_if(c, "mu_u", cfg.covariates.mu_u);
    read_if(c, "sigma2_u", cfg.covariates.sigma2_u);
    read_if(c, "p_u", cfg.covariates.p_u);
    read_if(c, "mu_z", cfg.covariates.mu_z);
    read_if(c, "sigma2_z", cfg.covariates.sigma2_z);
    read_if(c, "p_z", cfg.covariates.p_z);
  }
  if (j.contains("transform")) {
    read_if(j, "transform", s);
    try {
      cfg.transform = parse_transform(s);
    } catch (const ModelError&) {
      throw ModelError("invalid-config", "field 'transform': unknown transform '" + s + "'");
    }
  }
  read_if(j, "mc_reps", cfg.mc_reps);
  read_if(j, "seed", cfg.seed);
  read_if(j, "null_value", cfg.null_value);
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read_if(j, "methods", names);
    cfg.methods.clear();
    for (const auto& name : names) cfg.methods.push_back(parse_mc_method(name));
  }
  check_scenario(cfg);
  return cfg;
}

Json to_json(const MCReport& report) {
  Json methods = Json::array();
  for (const auto& s : report.methods) {
    methods.push_back({{"method", to_string(s.method)},
                       {"reps_ok", s.reps_ok},
                       {"failures", s.failures},
                       {"failure_codes", s.failure_codes},
                       {"mean_estimate", s.mean_estimate},
                       {"bias", s.bias},
                       {"mean_asymptotic_se", s.mean_asymptotic_se},
                       {"empirical_se", s.empirical_se},
                       {"rejection_rate", s.rejection_rate},
                       {"degraded", s.degraded}});
  }
  return {{"scenario", to_json(report.scenario)},
          {"delta", report.delta},
          {"realized_missing_frac", report.realized_missing_frac},
          {"methods", methods}};
}

std::string format_sig(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string render_table(const PrimaryFit& fit) {
  const Vector p = coefficient_p_values(fit);
  std::size_t name_w = 11;
  for (const auto& n : fit.coef_names) name_w = std::max(name_w, n.size());
  std::ostringstream out;
  out << pad("coefficient", name_w, true) << "  " << pad("estimate", 10) << "  "
      << pad("std.error", 10) << "  " << pad("p.value", 10) << '\n';
  for (Eigen::Index k = 0; k < fit.beta_hat.size(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const std::string name = i < fit.coef_names.size() ? fit.coef_names[i] : "b" + std::to_string(k);
    const double se = k < fit.std_errors.size() ? fit.std_errors(k) : std::nan("");
    out << pad(name, name_w, true) << "  " << pad(format_sig(fit.beta_hat(k)), 10) << "  "
        << pad(format_sig(se), 10) << "  " << pad(format_sig(p(k)), 10) << '\n';
  }
  out << "variance: " << to_string(fit.variance_method) << "  n = " << fit.n
      << "  n_obs = " << fit.n_obs << '\n';
  return out.str();
}

std::string render_table(const MCReport& report) {
  const auto& cfg = report.scenario;
  std::ostringstream out;
  out << "scenario " << cfg.name << ": design " << to_string(cfg.design) << ", n = " << cfg.n
      << ", " << to_string(cfg.error_kind) << " error, missing "
      << format_sig(report.realized_missing_frac) << " (target "
      << format_sig(cfg.target_missing_frac) << "), M = " << cfg.mc_reps << ", H0: beta1 = "
      << format_sig(cfg.null_value) << '\n';
  out << pad("method", 15, true) << pad("estimate", 10) << pad("bias", 11) << pad("asym.se", 10)
      << pad("emp.se", 10) << pad("reject", 9) << pad("failed", 8) << '\n';
  for (const auto& s : report.methods) {
    out << pad(to_string(s.method), 15, true) << pad(format_sig(s.mean_estimate), 10)
        << pad(format_sig(s.bias), 11) << pad(format_sig(s.mean_asymptotic_se), 10)
        << pad(format_sig(s.empirical_se), 10) << pad(format_sig(s.rejection_rate), 9)
        << pad(std::to_string(s.failures), 8) << (s.degraded ? "  degraded" : "") << '\n';
  }
  return out.str();
}

}  // namespace dlreg

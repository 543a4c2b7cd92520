#include "dlreg/simulation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include <boost/math/tools/roots.hpp>

namespace dlreg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ModelError("invalid-config", "field '" + field + "': " + what);
}

// Two-component normal mixture for the linear predictor plus error:
// weight p_bin on mean mean1, 1 - p_bin on mean0, common variance var.
struct Mixture {
  double mean0;
  double mean1;
  double var;
  double p_bin;
};

Mixture linear_part_mixture(const ScenarioConfig& cfg) {
  const Vector& g = cfg.gamma;
  const auto& c = cfg.covariates;
  // Design A: z1 normal, z2 binary. Design B: z1 binary, z2 normal.
  const double g_norm = cfg.design == Design::A ? g(1) : g(2);
  const double g_bin = cfg.design == Design::A ? g(2) : g(1);
  const double m0 = g(0) + g_norm * c.mu_z;
  return {m0, m0 + g_bin, g_norm * g_norm * c.sigma2_z + cfg.sigma2_x, c.p_z};
}

double mixture_cdf(const Mixture& m, double v) {
  const double s = std::sqrt(m.var);
  return (1.0 - m.p_bin) * std_normal_cdf((v - m.mean0) / s) +
         m.p_bin * std_normal_cdf((v - m.mean1) / s);
}

}  // namespace

void check_scenario(const ScenarioConfig& cfg) {
  require(cfg.n >= 4, "n", "must be at least 4");
  require(cfg.target_missing_frac > 0.0 && cfg.target_missing_frac < 1.0, "target_missing_frac",
          "must lie in (0, 1)");
  require(cfg.chisq_dof >= 1, "chisq_dof", "must be at least 1");
  require(cfg.beta.size() == 4, "beta", "needs 4 entries (b0, b1, b2, b3)");
  require(cfg.gamma.size() == 3, "gamma", "needs 3 entries (g0, g1, g2)");
  require(cfg.beta.allFinite() && cfg.gamma.allFinite(), "beta/gamma", "must be finite");
  require(cfg.sigma2_y > 0.0, "sigma2_y", "must be positive");
  require(cfg.sigma2_x > 0.0, "sigma2_x", "must be positive");
  const auto& c = cfg.covariates;
  require(c.sigma2_u > 0.0, "sigma2_u", "must be positive");
  require(c.sigma2_z > 0.0, "sigma2_z", "must be positive");
  require(c.p_u > 0.0 && c.p_u < 1.0, "p_u", "must lie in (0, 1)");
  require(c.p_z > 0.0 && c.p_z < 1.0, "p_z", "must lie in (0, 1)");
  require(cfg.mc_reps >= 1, "mc_reps", "must be at least 1");
  require(!cfg.methods.empty(), "methods", "must name at least one method");
  require(std::isfinite(cfg.null_value), "null_value", "must be finite");
}

double calibrate_delta(const ScenarioConfig& cfg) {
  check_scenario(cfg);
  const Mixture m = linear_part_mixture(cfg);
  const double q = cfg.target_missing_frac;
  const double s = std::sqrt(m.var);
  const double lo = std::min(m.mean0, m.mean1) - 40.0 * s;
  const double hi = std::max(m.mean0, m.mean1) + 40.0 * s;
  // Design A censors x <= delta directly; design B censors t >= nu with
  // delta = T(nu), T decreasing.
  auto f = [&](double v) {
    return cfg.design == Design::A ? mixture_cdf(m, v) - q : (1.0 - mixture_cdf(m, v)) - q;
  };
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  const double root = 0.5 * (a + b);
  return cfg.design == Design::A ? root : transform_to_x(root, cfg.transform);
}

std::mt19937_64 rep_engine(std::uint64_t seed, std::uint64_t rep, std::uint64_t stream) {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ rep) ^ (stream + 1));
  return std::mt19937_64(key);
}

double centered_chisq_draw(std::mt19937_64& rng, int dof, double sigma2) {
  std::chi_squared_distribution<double> chi(static_cast<double>(dof));
  return (chi(rng) - dof) * std::sqrt(sigma2 / (2.0 * dof));
}

SimulatedData generate(const ScenarioConfig& cfg, std::size_t rep_index) {
  return generate(cfg, rep_index, calibrate_delta(cfg));
}

SimulatedData generate(const ScenarioConfig& cfg, std::size_t rep_index, double delta) {
  check_scenario(cfg);
  auto rng = rep_engine(cfg.seed, rep_index, 0);
  const auto& c = cfg.covariates;
  std::normal_distribution<double> norm(0.0, 1.0);
  std::bernoulli_distribution bern_u(c.p_u);
  std::bernoulli_distribution bern_z(c.p_z);

  const auto n = static_cast<Eigen::Index>(cfg.n);
  SimulatedData sim;
  Dataset& d = sim.data;
  d.y.resize(n);
  d.x_value.resize(n);
  d.x_observed.assign(cfg.n, false);
  d.u.resize(n, 2);
  d.z.resize(n, 2);
  d.delta = delta;
  d.u_names = {"u1", "u2"};
  d.z_names = {"z1", "z2"};
  sim.true_x.resize(n);

  const Vector& b = cfg.beta;
  const Vector& g = cfg.gamma;
  const double sd_x = std::sqrt(cfg.sigma2_x);
  const double sd_y = std::sqrt(cfg.sigma2_y);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u1 = c.mu_u + std::sqrt(c.sigma2_u) * norm(rng);
    const double u2 = bern_u(rng) ? 1.0 : 0.0;
    const double z_norm = c.mu_z + std::sqrt(c.sigma2_z) * norm(rng);
    const double z_bin = bern_z(rng) ? 1.0 : 0.0;
    const double e_x = sd_x * norm(rng);
    const double e_y = cfg.error_kind == ErrorKind::normal
                           ? sd_y * norm(rng)
                           : centered_chisq_draw(rng, cfg.chisq_dof, cfg.sigma2_y);
    double x = 0.0;
    if (cfg.design == Design::A) {
      d.z(i, 0) = z_norm;
      d.z(i, 1) = z_bin;
      x = g(0) + g(1) * z_norm + g(2) * z_bin + e_x;
    } else {
      d.z(i, 0) = z_bin;
      d.z(i, 1) = z_norm;
      x = transform_to_x(g(0) + g(1) * z_bin + g(2) * z_norm + e_x, cfg.transform);
    }
    d.u(i, 0) = u1;
    d.u(i, 1) = u2;
    d.y(i) = b(0) + b(1) * x + b(2) * u1 + b(3) * u2 + e_y;
    sim.true_x(i) = x;
    const bool observed = x > delta;
    d.x_observed[static_cast<std::size_t>(i)] = observed;
    d.x_value(i) = observed ? x : delta;
  }
  return sim;
}

PrimaryFit full_data_fit(const SimulatedData& sim, const FitConfig& config) {
  if (sim.true_x.size() != static_cast<Eigen::Index>(sim.data.n()))
    throw ModelError("no-truth", "full-data fit needs the simulated true x");
  Dataset full = sim.data;
  full.x_value = sim.true_x;
  full.x_observed.assign(full.n(), true);
  full.delta = -std::numeric_limits<double>::infinity();
  PrimaryFit fit = gee_fit(full, nullptr, config);
  fit.sigma_beta = variance_known_eta(full, nullptr, config, fit);
  fit.variance_method = VarianceMethod::known_eta;
  fit.std_errors = (fit.sigma_beta.diagonal() / static_cast<double>(fit.n)).cwiseSqrt();
  return fit;
}

FitConfig scenario_fit_config(const ScenarioConfig& cfg, McMethod method, std::size_t rep_index) {
  FitConfig config;
  config.transform = cfg.design == Design::A ? Transform::negate : cfg.transform;
  config.auxiliary =
      method == McMethod::semi_semi ? AuxKind::semiparametric_aft : AuxKind::parametric_normal;
  auto rng = rep_engine(cfg.seed, rep_index, 1);
  config.seed = rng();
  return config;
}

PrimaryFit fit_method(const SimulatedData& sim, const ScenarioConfig& cfg, McMethod method,
                      std::size_t rep_index) {
  const FitConfig config = scenario_fit_config(cfg, method, rep_index);
  switch (method) {
    case McMethod::full_data: return full_data_fit(sim, config);
    case McMethod::complete_case: return complete_case_fit(sim.data, config);
    case McMethod::semi_para:
      return fit_two_component(sim.data, config, VarianceMethod::theorem1).primary;
    case McMethod::semi_para_sscf:
    case McMethod::semi_semi:
      return fit_two_component(sim.data, config, VarianceMethod::sscf).primary;
  }
  throw ModelError("invalid-config", "unknown method");
}

namespace {

struct Outcome {
  bool ok = false;
  double estimate = 0.0;
  double se = 0.0;
  bool reject = false;
  std::string code;
};

struct RepOutcome {
  double missing_frac = 0.0;
  std::vector<Outcome> methods;
};

RepOutcome run_rep(const ScenarioConfig& cfg, double delta, std::size_t rep) {
  RepOutcome out;
  out.methods.resize(cfg.methods.size());
  SimulatedData sim;
  try {
    sim = generate(cfg, rep, delta);
  } catch (const Error& e) {
    for (auto& m : out.methods) m.code = e.code();
    return out;
  }
  out.missing_frac = sim.data.censoring_fraction();
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    Outcome& o = out.methods[k];
    try {
      const PrimaryFit fit = fit_method(sim, cfg, cfg.methods[k], rep);
      DenseMatrix c = DenseMatrix::Zero(1, fit.beta_hat.size());
      c(0, 1) = 1.0;
      const WaldResult w = wald_test(fit, c, Vector::Constant(1, cfg.null_value));
      o.estimate = fit.beta_hat(1);
      o.se = fit.std_errors(1);
      o.reject = w.p_value < 0.05;
      o.ok = std::isfinite(o.estimate) && std::isfinite(o.se);
      if (!o.ok) o.code = "non-finite";
    } catch (const Error& e) {
      o.code = e.code();
    } catch (const std::exception&) {
      o.code = "internal";
    }
  }
  return out;
}

}  // namespace

MCReport run_mc(const ScenarioConfig& cfg, std::size_t jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  check_scenario(cfg);
  const double delta = calibrate_delta(cfg);
  std::vector<RepOutcome> reps(cfg.mc_reps);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.mc_reps; r = next++) reps[r] = run_rep(cfg, delta, r);
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cfg.mc_reps));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MCReport report;
  report.scenario = cfg;
  report.delta = delta;
  double missing = 0.0;
  for (const auto& r : reps) missing += r.missing_frac;
  report.realized_missing_frac = missing / static_cast<double>(cfg.mc_reps);

  const double truth = cfg.beta(1);
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    MethodSummary s;
    s.method = cfg.methods[k];
    double sum = 0.0, sum_se = 0.0;
    std::size_t rejections = 0;
    for (const auto& r : reps) {
      const Outcome& o = r.methods[k];
      if (!o.ok) {
        ++s.failures;
        ++s.failure_codes[o.code];
        continue;
      }
      ++s.reps_ok;
      sum += o.estimate;
      sum_se += o.se;
      rejections += o.reject ? 1 : 0;
    }
    if (s.reps_ok > 0) {
      const double m = static_cast<double>(s.reps_ok);
      s.mean_estimate = sum / m;
      s.bias = s.mean_estimate - truth;
      s.mean_asymptotic_se = sum_se / m;
      s.rejection_rate = static_cast<double>(rejections) / m;
      if (s.reps_ok > 1) {
        double ss = 0.0;
        for (const auto& r : reps)
          if (r.methods[k].ok) ss += std::pow(r.methods[k].estimate - s.mean_estimate, 2);
        s.empirical_se = std::sqrt(ss / (m - 1.0));
      }
    }
    s.degraded = static_cast<double>(s.failures) > 0.02 * static_cast<double>(cfg.mc_reps);
    report.methods.push_back(std::move(s));
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.mc_reps = 1000;
  if (name == "table1") {
    cfg.methods = {McMethod::semi_para};
    cfg.null_value = 1.0;
    return cfg;
  }
  if (name == "table2") {
    cfg.design = Design::B;
    cfg.n = 400;
    cfg.beta = (Vector(4) << -1.0, 2.0, 0.5, -1.0).finished();
    cfg.gamma = (Vector(3) << 0.25, 0.25, -0.5).finished();
    cfg.sigma2_x = 0.01;
    cfg.covariates.mu_z = 1.0;
    cfg.transform = Transform::neg_exp;
    cfg.null_value = 2.0;
    cfg.methods = {McMethod::full_data, McMethod::semi_semi, McMethod::semi_para,
                   McMethod::complete_case};
    return cfg;
  }
  if (name == "table3") {
    cfg.beta(1) = 1.1;
    cfg.sigma2_x = 0.1;
    // Power against H0: beta1 = 1; see the README for why not beta1 = 0.
    cfg.null_value = 1.0;
    cfg.methods = {McMethod::complete_case, McMethod::semi_para};
    return cfg;
  }
  throw ModelError("unknown-preset", "unknown preset '" + name + "' (table1, table2, table3)");
}

std::string to_string(Design v) { return v == Design::A ? "A" : "B"; }
std::string to_string(ErrorKind v) {
  return v == ErrorKind::normal ? "normal" : "centered_chisq";
}
std::string to_string(McMethod v) {
  switch (v) {
    case McMethod::full_data: return "full_data";
    case McMethod::complete_case: return "complete_case";
    case McMethod::semi_para: return "semi_para";
    case McMethod::semi_para_sscf: return "semi_para_sscf";
    case McMethod::semi_semi: return "semi_semi";
  }
  return "unknown";
}
Design parse_design(const std::string& s) {
  if (s == "A" || s == "a") return Design::A;
  if (s == "B" || s == "b") return Design::B;
  throw ModelError("invalid-config", "field 'design': unknown design '" + s + "'");
}
ErrorKind parse_error_kind(const std::string& s) {
  if (s == "normal") return ErrorKind::normal;
  if (s == "centered_chisq" || s == "chisq") return ErrorKind::centered_chisq;
  throw ModelError("invalid-config", "field 'error_kind': unknown error '" + s + "'");
}
McMethod parse_mc_method(const std::string& s) {
  for (McMethod m : {McMethod::full_data, McMethod::complete_case, McMethod::semi_para,
                     McMethod::semi_para_sscf, McMethod::semi_semi})
    if (s == to_string(m)) return m;
  throw ModelError("invalid-config", "field 'methods': unknown method '" + s + "'");
}

}  // namespace dlreg

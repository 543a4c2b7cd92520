#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dlreg/serialize.hpp"
#include "dlreg/simulation.hpp"

using namespace dlreg;

namespace {

// Direct draw of x (design A) or t (design B) from the scenario's marginal.
double draw_marginal(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> norm;
  std::bernoulli_distribution bern(cfg.covariates.p_z);
  const double zn = cfg.covariates.mu_z + std::sqrt(cfg.covariates.sigma2_z) * norm(rng);
  const double zb = bern(rng) ? 1.0 : 0.0;
  const double e = std::sqrt(cfg.sigma2_x) * norm(rng);
  if (cfg.design == Design::A) return cfg.gamma(0) + cfg.gamma(1) * zn + cfg.gamma(2) * zb + e;
  return cfg.gamma(0) + cfg.gamma(1) * zb + cfg.gamma(2) * zn + e;
}

}  // namespace

TEST(CenteredChisq, MeanAndVariance) {
  for (int dof : {1, 4, 10}) {
    std::mt19937_64 rng(100 + dof);
    const int n = 100000;
    double s = 0.0, ss = 0.0;
    std::vector<double> v(n);
    for (auto& x : v) x = centered_chisq_draw(rng, dof, 2.5);
    for (double x : v) s += x;
    const double mean = s / n;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = ss / (n - 1);
    EXPECT_LT(std::abs(mean), 0.01 * std::sqrt(2.5) * 3.0) << dof;
    EXPECT_NEAR(var / 2.5, 1.0, dof == 1 ? 0.03 : 0.01) << dof;
  }
}

TEST(CalibrateDelta, MatchesEmpiricalQuantile) {
  for (const char* name : {"table1", "table2"}) {
    ScenarioConfig cfg = preset(name);
    for (double q : {0.3, 0.6}) {
      cfg.target_missing_frac = q;
      const double delta = calibrate_delta(cfg);
      std::mt19937_64 rng(9);
      std::vector<double> draws(1000000);
      for (auto& d : draws) d = draw_marginal(cfg, rng);
      if (cfg.design == Design::A) {
        const auto k = static_cast<std::size_t>(q * draws.size());
        std::nth_element(draws.begin(), draws.begin() + k, draws.end());
        EXPECT_NEAR(delta, draws[k], 0.01) << name << " " << q;
      } else {
        const double nu = transform_to_t(delta, cfg.transform);
        const double frac = static_cast<double>(std::count_if(draws.begin(), draws.end(),
                                                              [&](double t) { return t >= nu; })) /
                            draws.size();
        EXPECT_NEAR(frac, q, 0.002) << name << " " << q;
      }
    }
  }
}

TEST(Generate, CensoringFractionNearTarget) {
  for (const char* name : {"table1", "table2"}) {
    ScenarioConfig cfg = preset(name);
    cfg.n = 10000;
    for (double q : {0.3, 0.6}) {
      cfg.target_missing_frac = q;
      const SimulatedData sim = generate(cfg, 0);
      EXPECT_NEAR(sim.data.censoring_fraction(), q, 0.02) << name;
      for (std::size_t i = 0; i < sim.data.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        EXPECT_EQ(sim.data.x_observed[i], sim.true_x(r) > sim.data.delta);
        if (!sim.data.x_observed[i]) EXPECT_EQ(sim.data.x_value(r), sim.data.delta);
      }
    }
  }
}

TEST(Generate, DeterministicPerRep) {
  const ScenarioConfig cfg = preset("table2");
  const SimulatedData a = generate(cfg, 3), b = generate(cfg, 3), c = generate(cfg, 4);
  EXPECT_EQ(a.data.y, b.data.y);
  EXPECT_EQ(a.true_x, b.true_x);
  EXPECT_EQ(a.data.z, b.data.z);
  EXPECT_NE(a.data.y, c.data.y);
  auto e1 = rep_engine(1, 2, 0), e2 = rep_engine(1, 2, 1), e3 = rep_engine(1, 2, 0);
  const auto v1 = e1(), v2 = e2(), v3 = e3();
  EXPECT_NE(v1, v2);
  EXPECT_EQ(v1, v3);
}

TEST(CheckScenario, RejectsBadFields) {
  ScenarioConfig cfg;
  cfg.target_missing_frac = 1.2;
  try {
    check_scenario(cfg);
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_EQ(e.code(), "invalid-config");
    EXPECT_NE(std::string(e.what()).find("target_missing_frac"), std::string::npos);
  }
  cfg = {};
  cfg.beta = Vector::Ones(3);
  EXPECT_THROW(check_scenario(cfg), ModelError);
  EXPECT_THROW(preset("table9"), ModelError);
}

TEST(ScenarioJson, RoundTripAndUnknownField) {
  const ScenarioConfig cfg = preset("table2");
  const ScenarioConfig back = scenario_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
  Json j = to_json(cfg);
  j["bogus"] = 1;
  EXPECT_THROW(scenario_from_json(j), Error);
}

TEST(Enums, SimulationNames) {
  for (Design v : {Design::A, Design::B}) EXPECT_EQ(parse_design(to_string(v)), v);
  for (ErrorKind v : {ErrorKind::normal, ErrorKind::centered_chisq}) EXPECT_EQ(parse_error_kind(to_string(v)), v);
  for (McMethod v : {McMethod::full_data, McMethod::complete_case, McMethod::semi_para,
                     McMethod::semi_para_sscf, McMethod::semi_semi})
    EXPECT_EQ(parse_mc_method(to_string(v)), v);
}

TEST(RunMc, SingleRepEqualsSingleFit) {
  ScenarioConfig cfg = preset("table1");
  cfg.mc_reps = 1;
  cfg.seed = 42;
  const MCReport report = run_mc(cfg);
  ASSERT_EQ(report.methods.size(), 1u);
  const PrimaryFit fit = fit_method(generate(cfg, 0), cfg, McMethod::semi_para, 0);
  EXPECT_EQ(report.methods[0].mean_estimate, fit.beta_hat(1));
  EXPECT_EQ(report.methods[0].mean_asymptotic_se, fit.std_errors(1));
  EXPECT_EQ(report.methods[0].empirical_se, 0.0);
}

TEST(RunMc, ByteIdenticalAndJobsInvariant) {
  ScenarioConfig cfg = preset("table1");
  cfg.mc_reps = 12;
  cfg.n = 200;
  cfg.methods = {McMethod::complete_case, McMethod::semi_para, McMethod::semi_para_sscf};
  const std::string a = to_json(run_mc(cfg, 1)).dump();
  const std::string b = to_json(run_mc(cfg, 1)).dump();
  const std::string c = to_json(run_mc(cfg, 3)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(FullData, NoCensoringEqualsCompleteCase) {
  const ScenarioConfig cfg = preset("table1");
  const SimulatedData sim = generate(cfg, 0, -1e9);
  ASSERT_EQ(sim.data.n_observed(), sim.data.n());
  const FitConfig fc = scenario_fit_config(cfg, McMethod::full_data, 0);
  const PrimaryFit full = full_data_fit(sim, fc);
  const PrimaryFit cc = complete_case_fit(sim.data, fc);
  EXPECT_LT((full.beta_hat - cc.beta_hat).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LT((full.sigma_beta - cc.sigma_beta).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(RunMc, SeOrderingAtTable2Settings) {
  ScenarioConfig cfg = preset("table2");
  cfg.mc_reps = 20;
  const MCReport r = run_mc(cfg);
  auto se = [&](McMethod m) {
    for (const auto& s : r.methods)
      if (s.method == m) return s.mean_asymptotic_se;
    return -1.0;
  };
  const double full = se(McMethod::full_data), ss = se(McMethod::semi_semi);
  const double sp = se(McMethod::semi_para), cc = se(McMethod::complete_case);
  EXPECT_LE(full, std::min(ss, sp) * 1.01);
  EXPECT_LT(ss, cc);
  EXPECT_LT(sp, cc);
  for (const auto& s : r.methods) EXPECT_EQ(s.failures, 0u) << to_string(s.method);
}

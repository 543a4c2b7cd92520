#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dlreg/data.hpp"
#include "dlreg/primary.hpp"

namespace dlreg {

/// A: x = g0 + g1 z1 + g2 z2 + e with z1 normal, z2 Bernoulli.
/// B: t = g0 + g1 z1 + g2 z2 + e with z1 Bernoulli, z2 normal, x = T(t).
enum class Design { A, B };
enum class ErrorKind { normal, centered_chisq };
enum class McMethod { full_data, complete_case, semi_para, semi_para_sscf, semi_semi };

struct CovariateParams {
  double mu_u = 0.0;
  double sigma2_u = 1.0;
  double p_u = 0.5;
  double mu_z = 0.0;
  double sigma2_z = 1.0;
  double p_z = 0.5;
};

struct ScenarioConfig {
  std::string name = "custom";
  Design design = Design::A;
  std::size_t n = 500;
  double target_missing_frac = 0.3;
  ErrorKind error_kind = ErrorKind::normal;
  int chisq_dof = 4;
  Vector beta = Vector::Ones(4);   // (b0, b1, b2, b3) on (1, x, u1, u2)
  Vector gamma = Vector::Ones(3);  // (g0, g1, g2) on (1, z1, z2)
  double sigma2_y = 1.0;
  double sigma2_x = 0.2;
  CovariateParams covariates;
  Transform transform = Transform::neg_exp;  // design B only
  std::size_t mc_reps = 500;
  std::uint64_t seed = 20240101;
  double null_value = 1.0;  // H0: beta1 = null_value
  std::vector<McMethod> methods{McMethod::complete_case, McMethod::semi_para};
};

/// Throws ModelError("invalid-config") naming the first offending field.
void check_scenario(const ScenarioConfig& cfg);

/// Detection limit with Pr(x <= delta) = target_missing_frac under the
/// scenario's marginal distribution of x (exact two-component normal mixture).
double calibrate_delta(const ScenarioConfig& cfg);

/// Generator seeded from (seed, rep, stream) alone, so reps can run in any order.
std::mt19937_64 rep_engine(std::uint64_t seed, std::uint64_t rep, std::uint64_t stream);

/// Centered chi-square draw scaled to variance sigma2: (chi2_s - s) sqrt(sigma2 / (2 s)).
double centered_chisq_draw(std::mt19937_64& rng, int dof, double sigma2);

struct SimulatedData {
  Dataset data;
  Vector true_x;
};

SimulatedData generate(const ScenarioConfig& cfg, std::size_t rep_index);
/// Same as above with delta supplied, skipping calibration.
SimulatedData generate(const ScenarioConfig& cfg, std::size_t rep_index, double delta);

/// GEE on the uncensored x for every row, known-eta sandwich variance.
PrimaryFit full_data_fit(const SimulatedData& sim, const FitConfig& config);

/// Fit configuration used for a scenario (link, transform, auxiliary kind).
FitConfig scenario_fit_config(const ScenarioConfig& cfg, McMethod method, std::size_t rep_index);

/// One method on one simulated dataset.
PrimaryFit fit_method(const SimulatedData& sim, const ScenarioConfig& cfg, McMethod method,
                      std::size_t rep_index);

struct MethodSummary {
  McMethod method = McMethod::semi_para;
  std::size_t reps_ok = 0;
  std::size_t failures = 0;
  std::map<std::string, std::size_t> failure_codes;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double mean_asymptotic_se = 0.0;
  double empirical_se = 0.0;
  double rejection_rate = 0.0;
  bool degraded = false;  // more than 2% of reps failed
};

struct MCReport {
  ScenarioConfig scenario;
  double delta = 0.0;
  double realized_missing_frac = 0.0;  // mean over reps
  std::vector<MethodSummary> methods;
  double wall_time_seconds = 0.0;  // not serialized
};

/// Runs cfg.mc_reps replications on `jobs` threads. Results do not depend on jobs.
MCReport run_mc(const ScenarioConfig& cfg, std::size_t jobs = 1);

/// Built-in configurations: "table1" (design A, H0: beta1 = 1), "table2"
/// (design B, four methods), "table3" (design A with beta1 = 1.1).
ScenarioConfig preset(const std::string& name);

std::string to_string(Design v);
std::string to_string(ErrorKind v);
std::string to_string(McMethod v);
Design parse_design(const std::string& s);
ErrorKind parse_error_kind(const std::string& s);
McMethod parse_mc_method(const std::string& s);

}  // namespace dlreg

#include "cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dlreg/serialize.hpp"

namespace dlreg::cli {

namespace {

namespace fs = std::filesystem;

struct ColumnArgs {
  std::string input;
  std::string y;
  std::string x;
  std::string delta;
  std::vector<std::string> u;
  std::vector<std::string> z;
  std::string observed;
};

struct FitArgs {
  ColumnArgs columns;
  std::string link = "identity";
  std::string aux = "parametric";
  std::string transform = "negate";
  std::string variance;
  std::string working_variance;
  std::optional<double> tau;
  bool no_normalize = false;
  bool complete_case = false;
  bool dump_aux = false;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
};

struct SimArgs {
  std::string preset;
  std::string config;
  std::optional<std::size_t> n;
  std::optional<std::size_t> mc_reps;
  std::optional<std::uint64_t> seed;
  std::optional<double> missing;
  std::optional<double> sigma2_x;
  std::optional<double> null_value;
  std::string error;
  std::vector<std::string> methods;
  std::size_t jobs = 1;
  std::string out;
  std::string format = "json";
};

void add_column_options(CLI::App* cmd, ColumnArgs& c) {
  cmd->add_option("--input", c.input, "CSV file with a header row")->required();
  cmd->add_option("--y", c.y, "response column")->required();
  cmd->add_option("--x", c.x, "censored covariate column")->required();
  cmd->add_option("--delta", c.delta, "detection limit: a number or a column name")->required();
  cmd->add_option("--u", c.u, "uncensored covariate columns")->delimiter(',');
  cmd->add_option("--z", c.z, "surrogate columns for the auxiliary model")->delimiter(',');
  cmd->add_option("--observed", c.observed, "0/1 column flagging rows with observed x");
}

ColumnSpec column_spec(const ColumnArgs& c) {
  ColumnSpec spec;
  spec.y = c.y;
  spec.x = c.x;
  spec.u = c.u;
  spec.z = c.z;
  double v = 0.0;
  const char* first = c.delta.data();
  const char* last = first + c.delta.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc() && ptr == last)
    spec.delta = v;
  else
    spec.delta = c.delta;
  if (!c.observed.empty()) spec.observed = c.observed;
  return spec;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("io", "cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("io", "failed writing '" + path + "'");
}

std::string aux_path(const std::string& out) {
  const fs::path p(out);
  return (p.parent_path() / (p.stem().string() + "_aux.json")).string();
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
  if (a.format != "json" && a.format != "table")
    throw ModelError("invalid-config", "--format must be json or table");
  const Dataset d = load_csv(a.columns.input, column_spec(a.columns));

  FitConfig config;
  config.link = parse_link(a.link);
  config.auxiliary = parse_aux_kind(a.aux);
  config.transform = parse_transform(a.transform);
  config.tau_override = a.tau;
  config.normalize_htilde = !a.no_normalize;
  config.seed = a.seed;
  if (a.working_variance.empty())
    config.working_variance =
        config.link == Link::logit ? WorkingVariance::bernoulli : WorkingVariance::constant;
  else if (a.working_variance == "constant")
    config.working_variance = WorkingVariance::constant;
  else if (a.working_variance == "bernoulli")
    config.working_variance = WorkingVariance::bernoulli;
  else
    throw ModelError("invalid-config", "--working-variance must be constant or bernoulli");

  PrimaryFit fit;
  std::optional<AuxFit> aux;
  if (a.complete_case) {
    require_valid(d);
    fit = complete_case_fit(d, config);
  } else {
    VarianceMethod method = config.auxiliary == AuxKind::parametric_normal
                                ? VarianceMethod::theorem1
                                : VarianceMethod::sscf;
    if (!a.variance.empty()) method = parse_variance_method(a.variance);
    FitResult r = fit_two_component(d, config, method);
    fit = std::move(r.primary);
    aux = std::move(r.aux);
  }

  Json j = to_json(fit);
  const std::string table = render_table(fit);
  const bool dump = a.dump_aux && aux.has_value();
  if (a.out.empty()) {
    if (dump) j["auxiliary"] = to_json(*aux);
    if (a.format == "json") {
      out << j.dump(2) << '\n';
    } else {
      out << table;
      if (dump) out << to_json(*aux).dump(2) << '\n';
    }
  } else {
    write_text(a.out, a.format == "json" ? j.dump(2) + "\n" : table);
    if (dump) write_text(aux_path(a.out), to_json(*aux).dump(2) + "\n");
    out << table;
  }
  return kOk;
}

int cmd_validate(const ColumnArgs& c, std::ostream& out) {
  const Dataset d = load_csv(c.input, column_spec(c));
  const auto violations = validate(d);
  out << to_json(violations).dump(2) << '\n';
  return violations.empty() ? kOk : kModelError;
}

ScenarioConfig build_scenario(const SimArgs& a) {
  ScenarioConfig cfg;
  if (!a.preset.empty()) cfg = preset(a.preset);
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw IoError("io", "cannot open '" + a.config + "'");
    Json j;
    try {
      j = Json::parse(f);
    } catch (const Json::parse_error& e) {
      throw ModelError("invalid-config", std::string("scenario file is not valid JSON: ") + e.what());
    }
    if (a.preset.empty() && j.contains("preset")) cfg = preset(j.at("preset").get<std::string>());
    cfg = scenario_from_json(j, cfg);
  }
  if (a.preset.empty() && a.config.empty())
    throw ModelError("invalid-config", "simulate needs --preset or --config");
  if (a.n) cfg.n = *a.n;
  if (a.mc_reps) cfg.mc_reps = *a.mc_reps;
  if (a.seed) cfg.seed = *a.seed;
  if (a.missing) cfg.target_missing_frac = *a.missing;
  if (a.sigma2_x) cfg.sigma2_x = *a.sigma2_x;
  if (a.null_value) cfg.null_value = *a.null_value;
  if (!a.error.empty()) cfg.error_kind = parse_error_kind(a.error);
  if (!a.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : a.methods) cfg.methods.push_back(parse_mc_method(m));
  }
  check_scenario(cfg);
  return cfg;
}

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  if (a.format != "json" && a.format != "table")
    throw ModelError("invalid-config", "--format must be json or table");
  const ScenarioConfig cfg = build_scenario(a);
  const MCReport report = run_mc(cfg, a.jobs);
  const std::string text =
      a.format == "json" ? to_json(report).dump(2) + "\n" : render_table(report);
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
    out << render_table(report);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regression with a covariate left-censored at a detection limit"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit the two-component model to a CSV file");
  add_column_options(fit_cmd, fit.columns);
  fit_cmd->add_option("--link", fit.link, "identity|logit")->capture_default_str();
  fit_cmd->add_option("--aux", fit.aux, "parametric|semiparametric")->capture_default_str();
  fit_cmd->add_option("--transform", fit.transform, "negate|negexp")->capture_default_str();
  fit_cmd->add_option("--variance", fit.variance,
                      "known|theorem1|sscf (default theorem1, sscf for semiparametric)");
  fit_cmd->add_option("--working-variance", fit.working_variance, "constant|bernoulli");
  fit_cmd->add_option("--tau", fit.tau, "truncation constant for the KM residual CDF");
  fit_cmd->add_flag("--no-normalize-htilde", fit.no_normalize,
                    "use the KM jump sum without dividing by the window mass");
  fit_cmd->add_flag("--complete-case", fit.complete_case, "fit on rows with observed x only");
  fit_cmd->add_flag("--dump-aux", fit.dump_aux, "also write the auxiliary fit");
  fit_cmd->add_option("--seed", fit.seed, "seed for the SSCF split")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "output file (default stdout)");
  fit_cmd->add_option("--format", fit.format, "json|table")->capture_default_str();

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo study");
  sim_cmd->add_option("--preset", sim.preset, "table1|table2|table3");
  sim_cmd->add_option("--config", sim.config, "scenario JSON file");
  sim_cmd->add_option("--n", sim.n, "sample size");
  sim_cmd->add_option("--mc-reps", sim.mc_reps, "number of replications");
  sim_cmd->add_option("--seed", sim.seed, "base seed");
  sim_cmd->add_option("--missing", sim.missing, "target censoring fraction");
  sim_cmd->add_option("--sigma2-x", sim.sigma2_x, "auxiliary error variance");
  sim_cmd->add_option("--null", sim.null_value, "null value for beta1");
  sim_cmd->add_option("--error", sim.error, "normal|centered_chisq");
  sim_cmd->add_option("--methods", sim.methods,
                      "full_data,complete_case,semi_para,semi_para_sscf,semi_semi")
      ->delimiter(',');
  sim_cmd->add_option("--jobs", sim.jobs, "worker threads")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "output file (default stdout)");
  sim_cmd->add_option("--format", sim.format, "json|table")->capture_default_str();

  ColumnArgs val;
  auto* val_cmd = app.add_subcommand("validate", "check a CSV file against the data invariants");
  add_column_options(val_cmd, val);

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kModelError;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*sim_cmd) return cmd_simulate(sim, out);
    return cmd_validate(val, out);
  } catch (const IoError& e) {
    err << "error [" << e.code() << "]: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error [" << e.code() << "]: " << e.what() << '\n';
    return kModelError;
  }
}

}  // namespace dlreg::cli

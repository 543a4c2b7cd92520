#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "dlreg/serialize.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "dlreg");
  std::ostringstream out, err;
  const int code = dlreg::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("dlreg_cli_" + name); }

// Writes a random dataset with columns y, x, u, z and an observed flag.
fs::path write_data(const std::string& name, const dlreg::Dataset& d, bool flip_first_flag = false) {
  const fs::path p = temp(name);
  std::ofstream f(p);
  f.precision(17);
  f << "y,x,u,z,obs\n";
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    bool obs = d.x_observed[i];
    if (flip_first_flag && i == 0) obs = !obs;
    f << d.y(r) << ',' << d.x_value(r) << ',' << d.u(r, 0) << ',' << d.z(r, 0) << ',' << (obs ? 1 : 0) << '\n';
  }
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(CliFit, NoCensoringMatchesOls) {
  std::mt19937_64 rng(3);
  const dlreg::Dataset d = oracle::random_dataset(rng, 80, -100.0);
  const fs::path p = write_data("ols.csv", d);
  const CliRun r = run({"fit", "--input", p.string(), "--y", "y", "--x", "x", "--delta", "-100", "--u", "u",
                     "--z", "z", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const dlreg::PrimaryFit fit = dlreg::primary_fit_from_json(dlreg::Json::parse(r.out));
  Eigen::MatrixXd x(80, 3);
  x.col(0).setOnes();
  x.col(1) = d.x_value;
  x.col(2) = d.u.col(0);
  const Eigen::VectorXd b = oracle::ols(x, d.y);
  EXPECT_LT((fit.beta_hat - b).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_EQ(fit.coef_names, (std::vector<std::string>{"intercept", "x", "u"}));
}

TEST(CliFit, FlagMismatchIsModelError) {
  std::mt19937_64 rng(4);
  const dlreg::Dataset d = oracle::random_dataset(rng, 60, 0.8);
  const fs::path p = write_data("flip.csv", d, true);
  const CliRun r = run({"fit", "--input", p.string(), "--y", "y", "--x", "x", "--delta", "0.8", "--u", "u",
                     "--z", "z", "--observed", "obs"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("censor-flag-mismatch"), std::string::npos) << r.err;
}

TEST(CliFit, DumpAuxWritesSidecar) {
  std::mt19937_64 rng(5);
  const dlreg::Dataset d = oracle::random_dataset(rng, 120, 0.8);
  const fs::path p = write_data("dump.csv", d);
  const fs::path out = temp("dump_fit.json");
  const fs::path aux = temp("dump_fit_aux.json");
  fs::remove(aux);
  const CliRun r = run({"fit", "--input", p.string(), "--y", "y", "--x", "x", "--delta", "0.8", "--u", "u",
                     "--z", "z", "--dump-aux", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(aux));
  const dlreg::Json j = dlreg::Json::parse(slurp(aux));
  EXPECT_TRUE(j.contains("gamma"));
  EXPECT_TRUE(j.contains("sigma2_x"));
}

TEST(CliFit, JsonRoundTripReproducesTable) {
  std::mt19937_64 rng(6);
  const dlreg::Dataset d = oracle::random_dataset(rng, 150, 0.8);
  const fs::path p = write_data("rt.csv", d);
  const std::vector<std::string> base{"fit", "--input", p.string(), "--y", "y", "--x", "x", "--delta", "0.8",
                                      "--u", "u", "--z", "z"};
  auto with = [&](std::string fmt) {
    auto a = base;
    a.insert(a.end(), {"--format", fmt});
    return run(a);
  };
  const CliRun js = with("json"), tab = with("table");
  ASSERT_EQ(js.code, 0);
  ASSERT_EQ(tab.code, 0);
  const dlreg::PrimaryFit fit = dlreg::primary_fit_from_json(dlreg::Json::parse(js.out));
  EXPECT_EQ(dlreg::render_table(fit), tab.out);
}

TEST(CliSimulate, SeededRunsAreIdentical) {
  const std::vector<std::string> a{"simulate", "--preset", "table1", "--mc-reps", "1", "--seed", "42"};
  const CliRun r1 = run(a), r2 = run(a);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_FALSE(r1.out.empty());
}

TEST(CliSimulate, UnknownPreset) {
  const CliRun r = run({"simulate", "--preset", "table9", "--mc-reps", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown-preset"), std::string::npos);
}

TEST(CliValidate, ExitCodes) {
  std::mt19937_64 rng(7);
  const dlreg::Dataset clean = oracle::random_dataset(rng, 40, 0.8);
  const fs::path p = write_data("val.csv", clean);
  const std::vector<std::string> args{"validate", "--input", p.string(), "--y", "y", "--x", "x", "--delta",
                                      "0.8", "--u", "u", "--z", "z"};
  CliRun r = run(args);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(dlreg::Json::parse(r.out), dlreg::Json::array());

  auto censored = args;
  censored[8] = "1e9";
  r = run(censored);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("no-observed-x"), std::string::npos);

  auto missing = args;
  missing[6] = "nope";
  r = run(missing);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing-column"), std::string::npos);
}

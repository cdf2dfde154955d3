#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "commands.hpp"
#include "support.hpp"

using namespace ewps;
namespace oc = ewps::oracle;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("ewps_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path scratch(const std::string& name) { return scratch_dir() / name; }

struct CliRun {
  int code;
  std::string err;
};

CliRun run_cli(const std::string& args) {
  const fs::path err = scratch("stderr.txt");
  const std::string cmd = std::string(EWPS_CLI_PATH) + " " + args + " 2>" + err.string() + " >/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// CSV output as rows of numbers, header dropped.
std::vector<std::vector<double>> rows_of(const fs::path& p, std::vector<std::string>* header = nullptr) {
  std::ifstream in(p);
  const io::CsvTable t = io::parse_csv(in, p.string());
  if (header) *header = t.header;
  std::vector<std::vector<double>> rows(t.rows(), std::vector<double>(t.header.size()));
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    for (std::size_t i = 0; i < t.rows(); ++i) rows[i][j] = t.columns[j][i];
  }
  return rows;
}

const std::string kFixture = EWPS_FIXTURE;
const std::string kFitArgs = "-i " + kFixture + " -r strength -c length,log_diameter -f geometric";

// The fixture is fitted once and the report reused.
const fs::path& fixture_report() {
  static const fs::path path = [] {
    const fs::path p = scratch("fixture_fit.json");
    const CliRun r = run_cli("fit " + kFitArgs + " -o " + p.string());
    EXPECT_EQ(r.code, 0) << r.err;
    return p;
  }();
  return path;
}

}  // namespace

TEST(CliFit, FixtureReportHasTableFields) {
  const json j = json::parse(slurp(fixture_report()));
  EXPECT_EQ(j["family"], "geometric");
  EXPECT_TRUE(j["converged"].get<bool>());
  EXPECT_EQ(j["n"], 225);
  ASSERT_EQ(j["estimates"].size(), 5u);
  std::vector<std::string> names;
  for (const auto& e : j["estimates"]) {
    names.push_back(e["name"]);
    EXPECT_TRUE(e["se"].is_number());
  }
  EXPECT_EQ(names, (std::vector<std::string>{io::kInterceptName, "length", "log_diameter", "alpha", "theta"}));
  EXPECT_TRUE(j["loglik"].is_number());
  EXPECT_NEAR(j["aic"].get<double>(), 10.0 - 2.0 * j["loglik"].get<double>(), 1e-9);
  EXPECT_NEAR(j["lr"]["statistic"].get<double>(), 2.0 * (j["loglik"].get<double>() - j["weibull_loglik"].get<double>()),
              1e-9);
  EXPECT_TRUE(j["lr"]["p_value"].is_number());
  EXPECT_FALSE(j["profile"].empty());
  EXPECT_EQ(j["covariance"].size(), 5u);
}

TEST(CliFit, Deterministic) {
  const fs::path again = scratch("fixture_fit_again.json");
  ASSERT_EQ(run_cli("fit " + kFitArgs + " -o " + again.string()).code, 0);
  EXPECT_EQ(slurp(again), slurp(fixture_report()));
}

TEST(CliFit, WeibullReportOmitsThetaAndLr) {
  const fs::path out = scratch("weibull.json");
  ASSERT_EQ(run_cli("fit -i " + kFixture + " -r strength -c length,log_diameter -f weibull -o " + out.string()).code, 0);
  const json j = json::parse(slurp(out));
  EXPECT_FALSE(j.contains("lr"));
  EXPECT_EQ(j["estimates"].size(), 4u);
  for (const auto& e : j["estimates"]) EXPECT_NE(e["name"], "theta");
}

TEST(CliFit, MissingHeaderLeavesNoOutput) {
  const fs::path in = scratch("no_header.csv"), out = scratch("no_header.json");
  write(in, "1.0,2.0\n3.0,4.0\n");
  const CliRun r = run_cli("fit -i " + in.string() + " -r y -c x -o " + out.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing header"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(fs::exists(out.string() + ".tmp"));
}

TEST(CliFit, MissingColumnIsNamed) {
  const CliRun r = run_cli("fit -i " + kFixture + " -r strength -c width -o " + scratch("x.json").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("'width'"), std::string::npos) << r.err;
}

TEST(CliFit, NonNumericCellIsLocated) {
  const fs::path in = scratch("bad_cell.csv");
  write(in, "y,x\n1.0,2.0\n3.0,abc\n");
  const CliRun r = run_cli("fit -i " + in.string() + " -r y -c x -o " + scratch("bad.json").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("column 'x'"), std::string::npos) << r.err;
}

TEST(CliFit, UsageErrors) {
  EXPECT_EQ(run_cli("fit -i " + kFixture + " -r strength -f nosuch -o " + scratch("u.json").string()).code, 1);
  EXPECT_EQ(run_cli("fit -r strength -o " + scratch("u.json").string()).code, 1);
  EXPECT_EQ(run_cli("nosuch").code, 1);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST(CliQuantiles, FromReportMonotoneWithBands) {
  const fs::path out = scratch("quantiles.csv");
  const CliRun r = run_cli("quantiles --report " + fixture_report().string() +
                    " --xi 0.1,0.5,0.9 --at length=20 --sweep log_diameter=-1.8:-1.0:5 -o " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> header;
  const auto rows = rows_of(out, &header);
  EXPECT_EQ(header, (std::vector<std::string>{"xi", "length", "log_diameter", "q_hat", "var_q", "ci_low", "ci_high"}));
  ASSERT_EQ(rows.size(), 15u);
  for (const auto& row : rows) {
    EXPECT_LT(row[5], row[3]);
    EXPECT_GT(row[6], row[3]);
    EXPECT_GE(row[4], 0.0);
  }
  for (std::size_t g = 0; g < 5; ++g) {
    EXPECT_LT(rows[g][3], rows[5 + g][3]);
    EXPECT_LT(rows[5 + g][3], rows[10 + g][3]);
  }
  // Identical to the in-process value from the same report.
  const FitResult fit = io::fit_from_report(json::parse(slurp(fixture_report())));
  EXPECT_EQ(rows[0][3], quantile_fit(fit, 0.1, Eigen::Vector3d(1.0, 20.0, -1.8)).point);
}

TEST(CliQuantiles, WeibullMedianClosedForm) {
  const fs::path rep = scratch("weibull_q.json"), out = scratch("weibull_q.csv");
  ASSERT_EQ(run_cli("fit -i " + kFixture + " -r strength -c length,log_diameter -f weibull -o " + rep.string()).code, 0);
  ASSERT_EQ(run_cli("quantiles --report " + rep.string() + " --xi 0.5 --at length=10 --sweep log_diameter=-1.6:-1.2:3 -o " +
                out.string())
                .code,
            0);
  const json j = json::parse(slurp(rep));
  std::vector<double> est;
  for (const auto& e : j["estimates"]) est.push_back(e["value"]);
  for (const auto& row : rows_of(out)) {
    const double lambda = std::exp(est[0] + est[1] * row[1] + est[2] * row[2]);
    EXPECT_NEAR(row[3], lambda * std::pow(std::numbers::ln2, 1.0 / est[3]), 1e-12 * row[3]);
  }
}

TEST(CliQuantiles, Errors) {
  const std::string rep = " --report " + fixture_report().string();
  const fs::path out = scratch("q_err.csv");
  EXPECT_EQ(run_cli("quantiles" + rep + " --xi 1.5 --at length=20 --at log_diameter=-1 -o " + out.string()).code, 1);
  EXPECT_EQ(run_cli("quantiles" + rep + " --xi 0 --at length=20 --at log_diameter=-1 -o " + out.string()).code, 1);
  EXPECT_EQ(run_cli("quantiles" + rep + " --xi 0.5 --at length=20 -o " + out.string()).code, 1);
  EXPECT_EQ(run_cli("quantiles" + rep + " --xi 0.5 --at width=1 --at length=20 --at log_diameter=-1 -o " + out.string()).code,
            1);
  EXPECT_FALSE(fs::exists(out));
}

TEST(CliResiduals, ReportAndRefitAgree) {
  const fs::path a = scratch("resid_report.json"), b = scratch("resid_refit.json");
  ASSERT_EQ(run_cli("residuals --report " + fixture_report().string() + " -i " + kFixture + " -o " + a.string()).code, 0);
  ASSERT_EQ(run_cli("residuals " + kFitArgs + " -o " + b.string()).code, 0);
  const json ja = json::parse(slurp(a)), jb = json::parse(slurp(b));
  ASSERT_EQ(ja["residuals"].size(), 225u);
  EXPECT_EQ(ja["residuals"], jb["residuals"]);
  EXPECT_TRUE(ja["anderson_darling"]["statistic"].is_number());
  EXPECT_EQ(ja["qq_pairs"].size(), 225u);
}

TEST(CliResiduals, CsvFormat) {
  const fs::path out = scratch("resid.csv");
  ASSERT_EQ(run_cli("residuals --format csv --report " + fixture_report().string() + " -i " + kFixture + " -o " +
                out.string())
                .code,
            0);
  std::vector<std::string> header;
  const auto rows = rows_of(out, &header);
  EXPECT_EQ(header,
            (std::vector<std::string>{"index", "y", "cdf", "residual", "clipped", "qq_theoretical", "qq_observed"}));
  ASSERT_EQ(rows.size(), 225u);
  for (const auto& row : rows) {
    EXPECT_GT(row[2], 0.0);
    EXPECT_LT(row[2], 1.0);
    EXPECT_NEAR(row[3], quantile_residual(row[2]), 1e-12);
  }
}

TEST(CliCurves, ValuesAtLn2) {
  const fs::path out = scratch("curves_ln2.csv");
  ASSERT_EQ(run_cli("curves -f poisson --lambda 1 --alpha 1 --theta 1 --y 0.69314718055994529,1.5 -o " + out.string()).code, 0);
  const auto rows = rows_of(out);
  ASSERT_EQ(rows.size(), 2u);
  const double e = std::numbers::e;
  EXPECT_NEAR(rows[0][1], 0.47976, 5e-6);
  EXPECT_NEAR(rows[0][1], 0.5 * std::exp(0.5) / (e - 1.0), 1e-15);
  // 1 - (e^0.5 - 1)/(e - 1) = 0.6224593...
  EXPECT_NEAR(rows[0][2], 1.0 - (std::exp(0.5) - 1.0) / (e - 1.0), 1e-15);
}

TEST(CliCurves, ColumnsConsistent) {
  const fs::path out = scratch("curves.csv");
  ASSERT_EQ(run_cli("curves -f negative-binomial --m 2 --lambda 1.5 --alpha 2.2 --theta 0.3 --y-from 0.01 --y-to 4 "
                "--y-count 200 -o " + out.string())
                .code,
            0);
  const auto rows = rows_of(out);
  ASSERT_EQ(rows.size(), 200u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_GE(rows[i][1], 0.0);
    if (i > 0) {
      EXPECT_GE(rows[i][2], rows[i - 1][2]);
    }
    EXPECT_NEAR(rows[i][2] + rows[i][3], 1.0, 1e-12);
    if (rows[i][3] > 1e-300) {
      EXPECT_NEAR(rows[i][4], rows[i][1] / rows[i][3], 1e-10 * std::max(1.0, rows[i][4]));
    }
  }
}

TEST(CliCurves, Errors) {
  EXPECT_EQ(run_cli("curves -f poisson --theta 1 --y 1,-1 -o " + scratch("c.csv").string()).code, 1);
  EXPECT_EQ(run_cli("curves -f geometric --theta 1.5 --y 1 -o " + scratch("c.csv").string()).code, 1);
  EXPECT_EQ(run_cli("curves -f poisson --alpha -1 --y 1 -o " + scratch("c.csv").string()).code, 1);
  EXPECT_FALSE(fs::exists(scratch("c.csv")));
}

TEST(CliSimulate, SameSeedSameBytes) {
  const fs::path a = scratch("sim_a.csv"), b = scratch("sim_b.csv"), c = scratch("sim_c.csv");
  const std::string args = "simulate -f logarithmic --theta -0.5 --alpha 1.3 --n 500 ";
  ASSERT_EQ(run_cli(args + "--seed 9 -o " + a.string()).code, 0);
  ASSERT_EQ(run_cli(args + "--seed 9 -o " + b.string()).code, 0);
  ASSERT_EQ(run_cli(args + "--seed 10 -o " + c.string()).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
}

TEST(CliSimulate, CompositionalPoissonPassesKs) {
  const fs::path out = scratch("sim_comp.csv");
  ASSERT_EQ(run_cli("simulate -f poisson --theta -2 --compositional --n 100000 --seed 3 -o " + out.string()).code, 0);
  std::vector<double> ys;
  for (const auto& row : rows_of(out)) ys.push_back(row[0]);
  ASSERT_EQ(ys.size(), 100000u);
  const EwpsParams p{1.0, 1.0, -2.0, PowerSeries(SeriesFamily::poisson())};
  EXPECT_LT(oc::ks_distance(ys, [&](double y) { return cdf(p, y); }), oc::ks_critical_1pct(ys.size()));
}

TEST(CliSimulate, ThetaZeroIsWeibull) {
  const fs::path out = scratch("sim_zero.csv");
  ASSERT_EQ(run_cli("simulate -f geometric --theta 0 --lambda 2 --alpha 0.8 --n 20000 --seed 4 -o " + out.string()).code, 0);
  std::vector<double> ys;
  for (const auto& row : rows_of(out)) ys.push_back(row[0]);
  const WeibullParams w{2.0, 0.8};
  EXPECT_LT(oc::ks_distance(ys, [&](double y) { return weibull_cdf(y, w); }), oc::ks_critical_1pct(ys.size()));
}

TEST(CliSimulate, UnsupportedCompositionalIsInputError) {
  const fs::path out = scratch("sim_bad.csv");
  const CliRun r = run_cli("simulate -f binomial --m 3 --theta -0.5 --compositional --n 10 -o " + out.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("characterization"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli("simulate -f poisson --theta 0 --compositional --n 10 -o " + out.string()).code, 1);
  EXPECT_FALSE(fs::exists(out));
}

TEST(CliSimulate, RegressionDesign) {
  const fs::path design = scratch("design.csv"), out = scratch("design_sim.csv");
  write(design, "x\n0\n1\n2\n3\n");
  ASSERT_EQ(run_cli("simulate -f geometric --theta 0.3 --alpha 2 -i " + design.string() + " --beta 0.1,0.2 -r life -o " +
                out.string())
                .code,
            0);
  std::vector<std::string> header;
  const auto rows = rows_of(out, &header);
  EXPECT_EQ(header, (std::vector<std::string>{"x", "life"}));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3][0], 3.0);
  EXPECT_EQ(run_cli("simulate --theta 0.3 -i " + design.string() + " --beta 0.1 -o " + out.string() + "2").code, 1);
}

// The subcommand functions are callable in-process as well.
TEST(CliInProcess, CurvesAndProfile) {
  cli::RunConfig cfg;
  cfg.subcommand = "curves";
  cfg.family = "geometric";
  cfg.theta = 0.5;
  cfg.y_values = {0.5, 1.0};
  cfg.output_path = scratch("inproc_curves.csv").string();
  EXPECT_EQ(cli::dispatch(cfg), cli::kOk);
  EXPECT_EQ(rows_of(cfg.output_path).size(), 2u);

  cli::RunConfig prof;
  prof.subcommand = "profile";
  prof.input_path = kFixture;
  prof.response_column = "strength";
  prof.covariate_columns = {"length", "log_diameter"};
  prof.family = "geometric";
  prof.theta_from = 0.5;
  prof.theta_to = 0.9;
  prof.theta_step = 0.1;
  prof.format = cli::Format::Csv;
  prof.output_path = scratch("inproc_profile.csv").string();
  ASSERT_EQ(cli::dispatch(prof), cli::kOk);
  const auto rows = rows_of(prof.output_path);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_NEAR(rows[4][0], 0.9, 1e-12);

  prof.family = "weibull";
  EXPECT_EQ(cli::dispatch(prof), cli::kInputError);
}

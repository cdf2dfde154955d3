#include "CLI11.hpp"

#include "commands.hpp"

namespace {

using ewps::cli::RunConfig;

void add_model_options(CLI::App* cmd, RunConfig& cfg, bool data_required) {
  auto* input = cmd->add_option("--input,-i", cfg.input_path, "CSV with a header row");
  auto* response = cmd->add_option("--response,-r", cfg.response_column, "response column");
  if (data_required) {
    input->required();
    response->required();
  }
  cmd->add_option("--covariates,-c", cfg.covariate_columns, "covariate columns")->delimiter(',');
  cmd->add_option("--family,-f", cfg.family,
                  "weibull, poisson, logarithmic, geometric, binomial, negative-binomial, logarithmic-ii")
      ->capture_default_str();
  cmd->add_option("--m", cfg.m, "size parameter for binomial / negative-binomial");
  cmd->add_flag("--extended", cfg.extended, "extend theta below the series domain (geometric, logarithmic)");
  cmd->add_option("--link", cfg.link, "link for the scale parameter")->capture_default_str();
  cmd->add_flag("!--no-intercept", cfg.intercept, "drop the intercept column");
  cmd->add_option("--grid-step", cfg.fit_options.theta_grid_step, "profile grid step for theta")->capture_default_str();
  cmd->add_option("--threads", cfg.fit_options.threads, "worker threads (0: EWPS_THREADS or hardware)");
}

void add_distribution_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--family,-f", cfg.family, "weibull or a power series family")->capture_default_str();
  cmd->add_option("--m", cfg.m, "size parameter for binomial / negative-binomial");
  cmd->add_flag("--extended", cfg.extended, "extended theta domain (geometric, logarithmic)");
  cmd->add_option("--lambda", cfg.lambda, "scale")->capture_default_str();
  cmd->add_option("--alpha", cfg.alpha, "shape")->capture_default_str();
  cmd->add_option("--theta", cfg.theta, "power series parameter")->capture_default_str();
}

void add_format(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--format", cfg.format, "json or csv")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, ewps::cli::Format>{{"json", ewps::cli::Format::Json}, {"csv", ewps::cli::Format::Csv}},
          CLI::ignore_case));
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Extended Weibull power series regression"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "maximum likelihood fit; writes a JSON report");
  add_model_options(fit, cfg, true);
  fit->add_option("--output,-o", cfg.output_path, "report path")->required();

  auto* profile = app.add_subcommand("profile", "profile log-likelihood over a theta grid");
  add_model_options(profile, cfg, true);
  profile->add_option("--from", cfg.theta_from)->capture_default_str();
  profile->add_option("--to", cfg.theta_to)->capture_default_str();
  profile->add_option("--step", cfg.theta_step)->capture_default_str();
  profile->add_option("--output,-o", cfg.output_path)->required();
  add_format(profile, cfg);

  auto* quantiles = app.add_subcommand("quantiles", "fitted quantiles with delta-method intervals (CSV)");
  add_model_options(quantiles, cfg, false);
  quantiles->add_option("--report", cfg.report_path, "reuse a fit report instead of refitting");
  quantiles->add_option("--xi", cfg.xi, "quantile levels")->delimiter(',');
  quantiles->add_option("--at", cfg.at, "fixed covariate value, name=value");
  quantiles->add_option("--sweep", cfg.sweep, "covariate sweep, name=from:to:count");
  quantiles->add_option("--output,-o", cfg.output_path)->required();

  auto* residuals = app.add_subcommand("residuals", "quantile residuals and normality check");
  add_model_options(residuals, cfg, false);
  residuals->add_option("--report", cfg.report_path, "reuse a fit report instead of refitting");
  residuals->add_option("--output,-o", cfg.output_path)->required();
  add_format(residuals, cfg);

  auto* curves = app.add_subcommand("curves", "pdf, cdf, survival and hazard on a grid (CSV)");
  add_distribution_options(curves, cfg);
  curves->add_option("--y-from", cfg.y_from)->capture_default_str();
  curves->add_option("--y-to", cfg.y_to)->capture_default_str();
  curves->add_option("--y-count", cfg.y_count)->capture_default_str();
  curves->add_option("--y", cfg.y_values, "explicit grid points")->delimiter(',');
  curves->add_option("--output,-o", cfg.output_path)->required();

  auto* simulate = app.add_subcommand("simulate", "draw samples (CSV)");
  add_distribution_options(simulate, cfg);
  simulate->add_option("--n", cfg.n)->capture_default_str();
  simulate->add_option("--seed", cfg.seed)->capture_default_str();
  simulate->add_flag("--compositional", cfg.compositional, "draw via the series/parallel system construction");
  simulate->add_option("--input,-i", cfg.input_path, "design CSV for regression draws");
  simulate->add_option("--covariates,-c", cfg.covariate_columns, "design columns")->delimiter(',');
  simulate->add_option("--beta", cfg.beta, "regression coefficients")->delimiter(',');
  simulate->add_option("--response,-r", cfg.response_column, "name of the generated column");
  simulate->add_flag("!--no-intercept", cfg.intercept, "no intercept in the design");
  simulate->add_option("--link", cfg.link)->capture_default_str();
  simulate->add_option("--output,-o", cfg.output_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ewps::cli::kOk : ewps::cli::kInputError;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  return ewps::cli::dispatch(cfg);
}

#pragma once

// Subcommand implementations behind the `ewps` executable. Each returns the
// process exit status: 0 success, 1 input/usage error, 2 non-convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ewps/ewps.hpp"
#include "ewps/io/csv.hpp"
#include "ewps/io/report.hpp"

namespace ewps::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNotConverged = 2 };

enum class Format { Json, Csv };

struct RunConfig {
  std::string subcommand;
  std::string input_path;
  std::string response_column;
  std::vector<std::string> covariate_columns;
  std::string family = "poisson";
  int m = 0;
  bool extended = false;
  std::string link = "log";
  bool intercept = true;
  std::string output_path;
  std::uint64_t seed = 1;
  Format format = Format::Json;

  std::string report_path;  // quantiles / residuals: reuse a prior fit

  // profile
  double theta_from = -0.99, theta_to = 0.99, theta_step = 0.01;

  // quantiles
  std::vector<double> xi{0.1, 0.5, 0.9};
  std::vector<std::string> at;     // col=value
  std::string sweep;               // col=from:to:count

  // curves / simulate
  double lambda = 1.0, alpha = 1.0, theta = 0.0;
  double y_from = 0.05, y_to = 5.0;
  int y_count = 100;
  std::vector<double> y_values;
  std::size_t n = 1000;
  bool compositional = false;
  std::vector<double> beta;  // simulate with a design: lambda_i = h^{-1}(x_i' beta)

  FitOptions fit_options;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Writes to a sibling temporary and renames, so a failed command never leaves
// a partial output file behind.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path) : path_(std::move(path)), tmp_(path_ + ".tmp") {
    if (path_.empty()) throw InputError("an --output path is required");
    out_.open(tmp_, std::ios::trunc);
    if (!out_) throw InputError("cannot write '" + path_ + "'");
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }
  std::ostream& stream() { return out_; }
  void commit() {
    out_.close();
    if (!out_) throw InputError("failed writing '" + path_ + "'");
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

inline io::ModelSpec model_spec(const RunConfig& cfg) {
  io::ModelSpec m;
  m.response = cfg.response_column;
  m.covariates = cfg.covariate_columns;
  m.intercept = cfg.intercept;
  if (cfg.family == "weibull") {
    m.weibull = true;
    return m;
  }
  m.family = SeriesFamily{parse_family(cfg.family), cfg.m};
  m.extended = cfg.extended;
  m.family.validate();
  return m;
}

inline RegressionData load_data(const RunConfig& cfg, const io::ModelSpec& model) {
  if (cfg.input_path.empty()) throw InputError("an --input CSV is required");
  if (model.response.empty()) throw InputError("a --response column is required");
  const io::CsvTable table = io::read_csv(cfg.input_path);
  RegressionData d = io::regression_data(table, model.response, model.covariates, model.intercept, Link::parse(cfg.link));
  d.validate();
  if (!d.full_rank()) throw InputError("covariate matrix does not have full column rank");
  return d;
}

inline FitResult run_model(const RegressionData& d, const io::ModelSpec& model, const FitOptions& opt) {
  if (model.weibull) return fit_weibull(d, PowerSeries(SeriesFamily::poisson()), opt);
  return fit_mle(d, model.power_series(), opt);
}

// Fit from a prior report when given, otherwise refit from the data flags.
inline std::pair<FitResult, io::ModelSpec> obtain_fit(const RunConfig& cfg) {
  if (!cfg.report_path.empty()) {
    const auto j = io::read_json(cfg.report_path);
    return {io::fit_from_report(j), io::model_from_report(j)};
  }
  const io::ModelSpec model = model_spec(cfg);
  const RegressionData d = load_data(cfg, model);
  return {run_model(d, model, cfg.fit_options), model};
}

inline std::pair<std::string, double> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw InputError("expected name=value, got '" + s + "'");
  double v;
  if (!io::detail::parse_number(s.substr(eq + 1), v)) throw InputError("non-numeric value in '" + s + "'");
  return {s.substr(0, eq), v};
}

inline EwpsParams params_from(const RunConfig& cfg) {
  const io::ModelSpec model = model_spec(cfg);
  EwpsParams p{cfg.lambda, cfg.alpha, model.weibull ? 0.0 : cfg.theta,
               model.weibull ? PowerSeries(SeriesFamily::poisson()) : model.power_series()};
  p.validate();
  return p;
}

}  // namespace detail

inline int run_fit(const RunConfig& cfg) {
  const io::ModelSpec model = detail::model_spec(cfg);
  const RegressionData d = detail::load_data(cfg, model);
  const FitResult fit = detail::run_model(d, model, cfg.fit_options);
  detail::AtomicFile out(cfg.output_path);
  out.stream() << io::fit_report(fit, model, d.n()).dump(2) << '\n';
  out.commit();
  return fit.converged ? kOk : kNotConverged;
}

inline int run_profile(const RunConfig& cfg) {
  const io::ModelSpec model = detail::model_spec(cfg);
  if (model.weibull) throw InputError("the profile likelihood needs a power series family");
  if (!(cfg.theta_step > 0.0) || !(cfg.theta_to >= cfg.theta_from)) throw InputError("invalid theta grid");
  const RegressionData d = detail::load_data(cfg, model);
  const PowerSeries spec = model.power_series();
  std::vector<double> grid;
  const long count = static_cast<long>(std::floor((cfg.theta_to - cfg.theta_from) / cfg.theta_step + 1e-9));
  for (long i = 0; i <= count; ++i) {
    const double t = cfg.theta_from + i * cfg.theta_step;
    if (spec.contains(t)) grid.push_back(t);
  }
  if (grid.empty()) throw InputError("theta grid has no points inside the family's domain");
  const auto curve = profile_theta(d, spec, grid, cfg.fit_options);
  detail::AtomicFile out(cfg.output_path);
  if (cfg.format == Format::Csv) {
    out.stream() << "theta,loglik\n";
    for (const auto& p : curve) out.stream() << detail::fmt(p.theta) << ',' << (p.loglik ? detail::fmt(*p.loglik) : "") << '\n';
  } else {
    io::json arr = io::json::array();
    for (const auto& p : curve) arr.push_back({{"theta", p.theta}, {"loglik", p.loglik ? io::json(*p.loglik) : io::json(nullptr)}});
    out.stream() << io::json{{"family", model.family_label()}, {"profile", arr}}.dump(2) << '\n';
  }
  out.commit();
  return kOk;
}

inline int run_quantiles(const RunConfig& cfg) {
  for (double xi : cfg.xi) {
    if (!(xi > 0.0 && xi < 1.0)) throw InputError("quantile levels must lie in (0, 1); got " + detail::fmt(xi));
  }
  const auto [fit, model] = detail::obtain_fit(cfg);
  std::map<std::string, double> fixed;
  for (const auto& a : cfg.at) fixed.insert(detail::parse_assignment(a));
  std::string sweep_col;
  std::vector<double> sweep_values{0.0};
  if (!cfg.sweep.empty()) {
    const auto eq = cfg.sweep.find('=');
    if (eq == std::string::npos) throw InputError("--sweep expects col=from:to:count");
    sweep_col = cfg.sweep.substr(0, eq);
    std::vector<double> parts;
    std::stringstream ss(cfg.sweep.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ':')) {
      double v;
      if (!io::detail::parse_number(tok, v)) throw InputError("--sweep expects col=from:to:count");
      parts.push_back(v);
    }
    if (parts.size() != 3 || parts[2] < 1) throw InputError("--sweep expects col=from:to:count");
    const int count = static_cast<int>(parts[2]);
    sweep_values.clear();
    for (int i = 0; i < count; ++i) {
      sweep_values.push_back(count == 1 ? parts[0] : parts[0] + (parts[1] - parts[0]) * i / (count - 1.0));
    }
  }
  for (const auto& [name, v] : fixed) {
    if (std::find(model.covariates.begin(), model.covariates.end(), name) == model.covariates.end()) {
      throw InputError("--at names unknown covariate '" + name + "'");
    }
  }
  if (!sweep_col.empty() &&
      std::find(model.covariates.begin(), model.covariates.end(), sweep_col) == model.covariates.end()) {
    throw InputError("--sweep names unknown covariate '" + sweep_col + "'");
  }
  for (const auto& c : model.covariates) {
    if (c != sweep_col && !fixed.count(c)) throw InputError("covariate '" + c + "' needs a value via --at or --sweep");
  }

  detail::AtomicFile out(cfg.output_path);
  out.stream() << "xi";
  for (const auto& c : model.covariates) out.stream() << ',' << c;
  out.stream() << ",q_hat,var_q,ci_low,ci_high\n";
  for (double xi : cfg.xi) {
    for (double sv : sweep_values) {
      Eigen::VectorXd x(fit.estimate.beta.size());
      Eigen::Index j = 0;
      if (model.intercept) x[j++] = 1.0;
      std::vector<double> shown;
      for (const auto& c : model.covariates) {
        const double v = c == sweep_col ? sv : fixed.at(c);
        x[j++] = v;
        shown.push_back(v);
      }
      const QuantileEstimate q = quantile_fit(fit, xi, x);
      out.stream() << detail::fmt(xi);
      for (double v : shown) out.stream() << ',' << detail::fmt(v);
      out.stream() << ',' << detail::fmt(q.point) << ',' << detail::fmt(q.variance) << ',' << detail::fmt(q.ci_low)
                   << ',' << detail::fmt(q.ci_high) << '\n';
    }
  }
  out.commit();
  return kOk;
}

inline int run_residuals(const RunConfig& cfg) {
  auto [fit, model] = detail::obtain_fit(cfg);
  io::ModelSpec data_model = model;
  if (!cfg.response_column.empty()) data_model.response = cfg.response_column;
  const RegressionData d = detail::load_data(cfg, data_model);
  const ResidualSet rs = quantile_residuals(fit, d);
  detail::AtomicFile out(cfg.output_path);
  if (cfg.format == Format::Csv) {
    out.stream() << "index,y,cdf,residual,clipped,qq_theoretical,qq_observed\n";
    for (std::size_t i = 0; i < rs.residuals.size(); ++i) {
      out.stream() << (i + 1) << ',' << detail::fmt(d.y[static_cast<Eigen::Index>(i)]) << ','
                   << detail::fmt(rs.cdf_values[i]) << ',' << detail::fmt(rs.residuals[i]) << ','
                   << (rs.clipped[i] ? 1 : 0) << ',' << detail::fmt(rs.qq_pairs[i].theoretical) << ','
                   << detail::fmt(rs.qq_pairs[i].observed) << '\n';
    }
  } else {
    io::json qq = io::json::array();
    for (const auto& p : rs.qq_pairs) qq.push_back({p.theoretical, p.observed});
    io::json j{{"family", model.family_label()},
               {"residuals", rs.residuals},
               {"cdf", rs.cdf_values},
               {"clipped", rs.clipped},
               {"qq_pairs", qq},
               {"anderson_darling",
                {{"statistic", std::isfinite(rs.ad_statistic) ? io::json(rs.ad_statistic) : io::json(nullptr)},
                 {"p_value", std::isfinite(rs.ad_p_value) ? io::json(rs.ad_p_value) : io::json(nullptr)}}}};
    out.stream() << j.dump(2) << '\n';
  }
  out.commit();
  std::cerr << "Anderson-Darling A2 = " << detail::fmt(rs.ad_statistic) << ", p = " << detail::fmt(rs.ad_p_value) << '\n';
  return kOk;
}

inline int run_curves(const RunConfig& cfg) {
  const EwpsParams p = detail::params_from(cfg);
  std::vector<double> ys = cfg.y_values;
  if (ys.empty()) {
    if (cfg.y_count < 1) throw InputError("--y-count must be at least 1");
    for (int i = 0; i < cfg.y_count; ++i) {
      ys.push_back(cfg.y_count == 1 ? cfg.y_from : cfg.y_from + (cfg.y_to - cfg.y_from) * i / (cfg.y_count - 1.0));
    }
  }
  for (double y : ys) {
    if (!(y > 0.0)) throw InputError("curve grid points must be positive; got " + detail::fmt(y));
  }
  detail::AtomicFile out(cfg.output_path);
  out.stream() << "y,pdf,cdf,survival,hazard\n";
  for (double y : ys) {
    const double s = survival(p, y);
    double h;
    try {
      h = hazard(p, y);
    } catch (const NumericError&) {
      h = std::numeric_limits<double>::infinity();
    }
    out.stream() << detail::fmt(y) << ',' << detail::fmt(density(p, y)) << ',' << detail::fmt(cdf(p, y)) << ','
                 << detail::fmt(s) << ',' << detail::fmt(h) << '\n';
  }
  out.commit();
  return kOk;
}

inline int run_simulate(const RunConfig& cfg) {
  const EwpsParams base = detail::params_from(cfg);
  if (cfg.compositional) {
    if (is_weibull_theta(base.theta)) throw InputError("--compositional requires theta != 0");
    if (base.theta < 0.0 && !base.spec.supports_parallel()) {
      throw InputError("no parallel-system characterization for the " + family_name(base.spec.tag()) + " family");
    }
  }
  auto draw = [&](const EwpsParams& p, std::size_t count, std::uint64_t seed) {
    return cfg.compositional ? sample_compositional(p, count, seed) : sample(p, count, seed);
  };

  detail::AtomicFile out(cfg.output_path);
  if (cfg.beta.empty()) {
    if (cfg.n < 1) throw InputError("--n must be at least 1");
    const auto ys = draw(base, cfg.n, cfg.seed);
    out.stream() << "y\n";
    for (double y : ys) out.stream() << detail::fmt(y) << '\n';
  } else {
    // Regression design: one draw per design row, lambda_i = exp(x_i' beta).
    if (cfg.input_path.empty()) throw InputError("--beta needs a design CSV via --input");
    const io::CsvTable design = io::read_csv(cfg.input_path);
    std::vector<std::string> cols = cfg.covariate_columns.empty() ? design.header : cfg.covariate_columns;
    const std::size_t k = cols.size() + (cfg.intercept ? 1 : 0);
    if (cfg.beta.size() != k) {
      throw InputError("--beta has " + std::to_string(cfg.beta.size()) + " values, design needs " + std::to_string(k));
    }
    const Link link = Link::parse(cfg.link);
    Engine seeder = make_engine(cfg.seed);
    for (const auto& c : cols) out.stream() << c << ',';
    out.stream() << (cfg.response_column.empty() ? "y" : cfg.response_column) << '\n';
    for (std::size_t i = 0; i < design.rows(); ++i) {
      double eta = cfg.intercept ? cfg.beta[0] : 0.0;
      for (std::size_t j = 0; j < cols.size(); ++j) eta += cfg.beta[j + (cfg.intercept ? 1 : 0)] * design.column(cols[j])[i];
      EwpsParams p = base;
      p.lambda = link.derivatives(eta).lambda;
      const double y = draw(p, 1, seeder())[0];
      for (const auto& c : cols) out.stream() << detail::fmt(design.column(c)[i]) << ',';
      out.stream() << detail::fmt(y) << '\n';
    }
  }
  out.commit();
  return kOk;
}

inline int dispatch(const RunConfig& cfg) {
  try {
    if (cfg.subcommand == "fit") return run_fit(cfg);
    if (cfg.subcommand == "profile") return run_profile(cfg);
    if (cfg.subcommand == "quantiles") return run_quantiles(cfg);
    if (cfg.subcommand == "residuals") return run_residuals(cfg);
    if (cfg.subcommand == "curves") return run_curves(cfg);
    if (cfg.subcommand == "simulate") return run_simulate(cfg);
    std::cerr << "error: unknown subcommand '" << cfg.subcommand << "'\n";
    return kInputError;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const UnsupportedCharacterization& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const io::json::exception& e) {
    std::cerr << "error: malformed report: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNotConverged;
  }
}

}  // namespace ewps::cli

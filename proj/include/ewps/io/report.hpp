#pragma once

// JSON fit report: written by `ewps fit` and read back by `ewps quantiles` and
// `ewps residuals` so that they reuse the estimates without refitting.

#include "json.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "ewps/errors.hpp"
#include "ewps/fit.hpp"
#include "ewps/io/csv.hpp"

namespace ewps::io {

using json = nlohmann::json;

struct ModelSpec {
  bool weibull = false;  // theta fixed at zero
  SeriesFamily family = SeriesFamily::poisson();
  bool extended = false;
  std::string response;
  std::vector<std::string> covariates;  // without the intercept
  bool intercept = true;

  PowerSeries power_series() const { return PowerSeries(family, extended); }
  std::string family_label() const { return weibull ? "weibull" : family_name(family.tag); }
};

inline json fit_report(const FitResult& fit, const ModelSpec& model, Eigen::Index n) {
  json j;
  j["family"] = model.family_label();
  if (!model.weibull && model.family.needs_m()) j["m"] = model.family.m;
  if (!model.weibull) j["extended"] = model.extended;
  j["link"] = fit.link.name();
  j["n"] = n;
  j["k"] = fit.estimate.beta.size();
  j["response"] = model.response;
  j["intercept"] = model.intercept;
  j["covariates"] = model.covariates;

  const Eigen::VectorXd est = fit.packed();
  json estimates = json::array();
  for (Eigen::Index i = 0; i < est.size(); ++i) {
    json e;
    e["name"] = fit.names.at(i);
    e["value"] = est[i];
    const double se = fit.standard_errors.size() > i ? fit.standard_errors[i] : std::nan("");
    e["se"] = std::isfinite(se) ? json(se) : json(nullptr);
    estimates.push_back(e);
  }
  j["estimates"] = estimates;
  j["loglik"] = fit.loglik;
  j["aic"] = fit.aic;
  if (!fit.theta_fixed) {
    const LrTest lr = lr_test(fit.loglik, std::min(fit.weibull_loglik, fit.loglik), 1);
    j["lr"] = {{"statistic", lr.statistic}, {"p_value", lr.p_value}};
    j["weibull_loglik"] = fit.weibull_loglik;
  }
  j["converged"] = fit.converged;
  j["boundary_flag"] = fit.boundary;
  json profile = json::array();
  for (const ProfilePoint& p : fit.profile) {
    profile.push_back({{"theta", p.theta}, {"loglik", p.loglik ? json(*p.loglik) : json(nullptr)}});
  }
  j["profile"] = profile;
  json cov = json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  return j;
}

inline ModelSpec model_from_report(const json& j) {
  ModelSpec m;
  const std::string fam = j.at("family").get<std::string>();
  m.weibull = fam == "weibull";
  if (!m.weibull) {
    const Family tag = parse_family(fam);
    m.family = SeriesFamily{tag, j.contains("m") ? j.at("m").get<int>() : 0};
    m.extended = j.value("extended", false);
  }
  m.response = j.value("response", std::string{});
  m.intercept = j.value("intercept", true);
  m.covariates = j.value("covariates", std::vector<std::string>{});
  return m;
}

inline FitResult fit_from_report(const json& j) {
  const ModelSpec model = model_from_report(j);
  FitResult fit;
  fit.theta_fixed = model.weibull;
  fit.link = Link::parse(j.value("link", std::string("log")));
  const auto& est = j.at("estimates");
  const Eigen::Index k = j.at("k").get<Eigen::Index>();
  const Eigen::Index np = k + (model.weibull ? 1 : 2);
  if (static_cast<Eigen::Index>(est.size()) != np) throw InputError("report: estimate count does not match k");
  fit.estimate.beta.resize(k);
  fit.standard_errors.resize(np);
  for (Eigen::Index i = 0; i < np; ++i) {
    const auto& e = est.at(i);
    fit.names.push_back(e.at("name").get<std::string>());
    const double v = e.at("value").get<double>();
    if (i < k) {
      fit.estimate.beta[i] = v;
    } else if (i == k) {
      fit.estimate.alpha = v;
    } else {
      fit.estimate.theta = v;
    }
    fit.standard_errors[i] = e.at("se").is_null() ? std::nan("") : e.at("se").get<double>();
  }
  if (model.weibull) fit.estimate.theta = 0.0;
  fit.estimate.spec = model.power_series();
  fit.loglik = j.at("loglik").get<double>();
  fit.aic = j.at("aic").get<double>();
  fit.converged = j.at("converged").get<bool>();
  fit.boundary = j.value("boundary_flag", false);
  fit.weibull_loglik = model.weibull ? fit.loglik : j.value("weibull_loglik", std::nan(""));
  for (const auto& p : j.value("profile", json::array())) {
    fit.profile.push_back({p.at("theta").get<double>(),
                           p.at("loglik").is_null() ? std::nullopt : std::optional<double>(p.at("loglik").get<double>())});
  }
  const auto& cov = j.value("covariance", json::array());
  if (!cov.empty()) {
    fit.covariance.resize(np, np);
    for (Eigen::Index r = 0; r < np; ++r) {
      for (Eigen::Index c = 0; c < np; ++c) fit.covariance(r, c) = cov.at(r).at(c).get<double>();
    }
  }
  return fit;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open report '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("report '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace ewps::io

#pragma once

// Maximum likelihood for the EWPS regression model.
//
// fit_mle follows a profile strategy: fit the Weibull model (theta = 0), walk
// a theta grid outwards in both directions warm-starting each fixed-theta fit
// from its neighbour, refine around the best grid point, then polish with a
// full Newton step on all parameters.

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ewps/distribution.hpp"
#include "ewps/errors.hpp"
#include "ewps/likelihood.hpp"
#include "ewps/power_series.hpp"

namespace ewps {

struct FitOptions {
  double theta_grid_step = 0.01;
  double theta_refine_step = 0.001;
  int max_inner_iterations = 200;
  double gradient_tolerance = 1e-8;
  double endpoint_margin = 1e-4;  // fraction of the theta range kept clear of finite endpoints
  double theta_limit = 100.0;     // stands in for an infinite endpoint
  double profile_drop = 25.0;     // stop walking once the profile is this far below its best
  unsigned threads = 0;           // profile_theta workers; 0 = EWPS_THREADS or hardware

  void validate() const {
    if (!(theta_grid_step > 0.0 && theta_refine_step > 0.0 && max_inner_iterations > 0 && gradient_tolerance > 0.0 &&
          endpoint_margin > 0.0 && theta_limit > 0.0 && profile_drop > 0.0)) {
      throw DomainError("fit options must all be positive");
    }
    if (!(theta_refine_step < theta_grid_step)) throw DomainError("refine step must be smaller than the grid step");
  }
};

struct ProfilePoint {
  double theta;
  std::optional<double> loglik;  // empty when the fixed-theta fit failed
};

struct FitResult {
  RegressionParams estimate;
  bool theta_fixed = false;  // Weibull fit: theta held at zero, k+1 parameters
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd covariance;  // inverse observed information; empty if not positive definite
  Eigen::VectorXd standard_errors;
  double aic = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  bool boundary = false;
  int iterations = 0;
  double weibull_loglik = std::numeric_limits<double>::quiet_NaN();
  std::vector<ProfilePoint> profile;
  std::vector<std::string> names;
  Link link;

  Eigen::Index num_params() const { return estimate.beta.size() + (theta_fixed ? 1 : 2); }
  bool has_covariance() const { return covariance.size() > 0; }

  Eigen::VectorXd packed() const {
    Eigen::VectorXd v = estimate.packed();
    return theta_fixed ? Eigen::VectorXd(v.head(v.size() - 1)) : v;
  }
};

struct QuantileEstimate {
  double xi;
  double point;
  double variance;
  double ci_low;
  double ci_high;
};

struct WaldInterval {
  std::string name;
  double estimate;
  double se;
  double low;
  double high;
};

struct LrTest {
  double statistic;
  double p_value;
};

namespace detail {

struct InnerFit {
  Eigen::VectorXd beta;
  double alpha = 1.0;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

inline double safe_loglik(const RegressionParams& p, const RegressionData& d) {
  try {
    return loglik(p, d);
  } catch (const std::exception&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Near the optimum a Newton step changes the log-likelihood by less than its
// rounding error, so steps are compared with a relative slack.
inline bool no_worse(double trial, double current) {
  return trial >= current - 1e-12 * std::max(1.0, std::fabs(current));
}

// Newton ascent on (beta, alpha) with theta held fixed. The direction solves
// the observed-information system; when that block is not positive definite
// the step falls back to the gradient. Steps are halved until the
// log-likelihood does not decrease.
inline InnerFit maximize_fixed_theta(const RegressionData& d, const PowerSeries& spec, double theta,
                                     const Eigen::VectorXd& beta0, double alpha0, const FitOptions& opt) {
  const Eigen::Index k = d.k();
  RegressionParams p{beta0, alpha0, theta, spec};
  InnerFit out;
  Evaluation ev = evaluate(p, d, EvalLevel::Info);
  for (int it = 0; it < opt.max_inner_iterations; ++it) {
    const Eigen::VectorXd grad = ev.score.head(k + 1);
    out.iterations = it;
    if (grad.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd info = ev.info.topLeftCorner(k + 1, k + 1);
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    Eigen::VectorXd dir;
    bool newton = llt.info() == Eigen::Success;
    if (newton) {
      dir = llt.solve(grad);
      if (!dir.allFinite() || dir.dot(grad) <= 0.0) newton = false;
    }
    if (!newton) dir = grad / std::max(1.0, grad.lpNorm<Eigen::Infinity>());

    double step = 1.0;
    bool accepted = false;
    RegressionParams trial = p;
    for (int h = 0; h < 60; ++h, step *= 0.5) {
      trial.beta = p.beta + step * dir.head(k);
      trial.alpha = p.alpha + step * dir[k];
      if (!(trial.alpha > 0.0)) continue;
      const double ll = safe_loglik(trial, d);
      if (no_worse(ll, ev.loglik)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const bool stalled = (trial.beta - p.beta).lpNorm<Eigen::Infinity>() == 0.0 && trial.alpha == p.alpha;
    p = trial;
    ev = evaluate(p, d, EvalLevel::Info);
    if (stalled) {
      out.converged = ev.score.head(k + 1).lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance;
      break;
    }
  }
  if (!out.converged && ev.score.head(k + 1).lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance) out.converged = true;
  out.beta = p.beta;
  out.alpha = p.alpha;
  out.loglik = ev.loglik;
  return out;
}

inline Eigen::VectorXd least_squares_start(const RegressionData& d) {
  const Eigen::VectorXd logy = d.y.array().log().matrix();
  return d.X.colPivHouseholderQr().solve(logy);
}

inline std::vector<std::string> parameter_names(const RegressionData& d, bool theta_fixed) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < d.k(); ++j) {
    names.push_back(d.covariate_names.empty() ? "beta" + std::to_string(j) : d.covariate_names[j]);
  }
  names.push_back("alpha");
  if (!theta_fixed) names.push_back("theta");
  return names;
}

// Admissible theta search range [lo, hi].
inline Interval search_range(const PowerSeries& spec, const FitOptions& opt) {
  const double lo_raw = std::max(spec.s_star(), -opt.theta_limit);
  const double hi_raw = std::min(spec.s(), opt.theta_limit);
  const double width = hi_raw - lo_raw;
  const double lo = std::isfinite(spec.s_star()) && spec.s_star() > -opt.theta_limit
                        ? lo_raw + opt.endpoint_margin * width
                        : lo_raw;
  const double hi = std::isfinite(spec.s()) && spec.s() < opt.theta_limit ? hi_raw - opt.endpoint_margin * width
                                                                           : hi_raw;
  return {lo, hi};
}

inline void attach_covariance(FitResult& fit, const RegressionData& d) {
  const Eigen::Index np = fit.num_params();
  const Eigen::MatrixXd info = observed_info(fit.estimate, d).topLeftCorner(np, np);
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    fit.covariance.resize(0, 0);
    fit.standard_errors = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::quiet_NaN());
    return;
  }
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(np, np));
  cov = (0.5 * (cov + cov.transpose())).eval();
  fit.covariance = cov;
  fit.standard_errors = cov.diagonal().cwiseSqrt();
}

inline unsigned worker_count(const FitOptions& opt) {
  if (opt.threads > 0) return opt.threads;
  if (const char* env = std::getenv("EWPS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace detail

inline double aic(const FitResult& fit) { return 2.0 * static_cast<double>(fit.num_params()) - 2.0 * fit.loglik; }

// Weibull regression (theta fixed at zero) by Newton from least-squares
// starting values for beta and alpha = 1.
inline FitResult fit_weibull(const RegressionData& d, const PowerSeries& spec, const FitOptions& opt = {}) {
  d.validate();
  opt.validate();
  if (!d.full_rank()) throw DomainError("covariate matrix does not have full column rank");
  const detail::InnerFit inner = detail::maximize_fixed_theta(d, spec, 0.0, detail::least_squares_start(d), 1.0, opt);
  FitResult fit;
  fit.estimate = RegressionParams{inner.beta, inner.alpha, 0.0, spec};
  fit.theta_fixed = true;
  fit.loglik = inner.loglik;
  fit.weibull_loglik = inner.loglik;
  fit.converged = inner.converged;
  fit.iterations = inner.iterations;
  fit.names = detail::parameter_names(d, true);
  fit.link = d.link;
  detail::attach_covariance(fit, d);
  if (!fit.has_covariance()) fit.converged = false;
  fit.aic = aic(fit);
  fit.profile.push_back({0.0, inner.loglik});
  return fit;
}

// Profile log-likelihood max_{beta, alpha} l(beta, alpha, theta) at each grid
// value. Points are processed in fixed chunks of consecutive grid values; each
// chunk warm-starts its points sequentially from the Weibull fit, so the
// curve does not depend on the number of worker threads.
inline std::vector<ProfilePoint> profile_theta(const RegressionData& d, const PowerSeries& spec,
                                               const std::vector<double>& grid, const FitOptions& opt = {}) {
  d.validate();
  opt.validate();
  for (double t : grid) spec.require_interior(t);
  const FitResult start = fit_weibull(d, spec, opt);
  std::vector<ProfilePoint> out(grid.size());
  constexpr std::size_t kChunk = 16;
  const std::size_t chunks = (grid.size() + kChunk - 1) / kChunk;

  auto run_chunk = [&](std::size_t c) {
    Eigen::VectorXd beta = start.estimate.beta;
    double alpha = start.estimate.alpha;
    for (std::size_t i = c * kChunk; i < std::min(grid.size(), (c + 1) * kChunk); ++i) {
      out[i].theta = grid[i];
      try {
        const detail::InnerFit f = detail::maximize_fixed_theta(d, spec, grid[i], beta, alpha, opt);
        if (std::isfinite(f.loglik)) {
          out[i].loglik = f.loglik;
          beta = f.beta;
          alpha = f.alpha;
        }
      } catch (const std::exception&) {
        out[i].loglik.reset();
      }
    }
  };

  const unsigned workers = std::min<unsigned>(detail::worker_count(opt), static_cast<unsigned>(std::max<std::size_t>(chunks, 1)));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

inline FitResult fit_mle(const RegressionData& d, const PowerSeries& spec, const FitOptions& opt = {}) {
  const FitResult weibull = fit_weibull(d, spec, opt);
  const Interval range = detail::search_range(spec, opt);

  struct Point {
    double theta;
    detail::InnerFit fit;
  };
  std::vector<Point> points;
  points.push_back({0.0, {weibull.estimate.beta, weibull.estimate.alpha, weibull.loglik, weibull.converged, 0}});

  // Grid walk in each direction from theta = 0. The stopping rule uses the
  // best value seen in the current direction only: the profile can be
  // bimodal, and a good mode on one side must not cut off the other.
  for (int dir : {+1, -1}) {
    Eigen::VectorXd beta = weibull.estimate.beta;
    double alpha = weibull.estimate.alpha;
    double best_ll = weibull.loglik;
    for (long j = 1;; ++j) {
      const double theta = dir * j * opt.theta_grid_step;
      if (theta < range.lower || theta > range.upper) break;
      detail::InnerFit f;
      try {
        f = detail::maximize_fixed_theta(d, spec, theta, beta, alpha, opt);
      } catch (const std::exception&) {
        continue;
      }
      if (!std::isfinite(f.loglik)) continue;
      points.push_back({theta, f});
      beta = f.beta;
      alpha = f.alpha;
      best_ll = std::max(best_ll, f.loglik);
      if (f.loglik < best_ll - opt.profile_drop) break;
    }
  }

  auto argmax = [&]() {
    std::size_t b = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (points[i].fit.loglik > points[b].fit.loglik) b = i;
    }
    return b;
  };

  // Finer grid on either side of the best grid point.
  const Point grid_best = points[argmax()];
  const int refine_count = static_cast<int>(std::floor(opt.theta_grid_step / opt.theta_refine_step + 1e-9));
  for (int dir : {+1, -1}) {
    Eigen::VectorXd beta = grid_best.fit.beta;
    double alpha = grid_best.fit.alpha;
    for (int j = 1; j < refine_count; ++j) {
      const double theta = grid_best.theta + dir * j * opt.theta_refine_step;
      if (theta < range.lower || theta > range.upper) break;
      try {
        const detail::InnerFit f = detail::maximize_fixed_theta(d, spec, theta, beta, alpha, opt);
        if (!std::isfinite(f.loglik)) continue;
        points.push_back({theta, f});
        beta = f.beta;
        alpha = f.alpha;
      } catch (const std::exception&) {
      }
    }
  }
  const Point refined = points[argmax()];

  // Full Newton polish on (beta, alpha, theta).
  RegressionParams p{refined.fit.beta, refined.fit.alpha, refined.theta, spec};
  Evaluation ev = evaluate(p, d, EvalLevel::Info);
  bool converged = false;
  bool hit_bound = false;
  int iterations = 0;
  for (; iterations < opt.max_inner_iterations; ++iterations) {
    if (ev.score.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance) {
      converged = true;
      break;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(ev.info);
    Eigen::VectorXd dir;
    bool newton = llt.info() == Eigen::Success;
    if (newton) {
      dir = llt.solve(ev.score);
      if (!dir.allFinite() || dir.dot(ev.score) <= 0.0) newton = false;
    }
    if (!newton) dir = ev.score / std::max(1.0, ev.score.lpNorm<Eigen::Infinity>());
    double step = 1.0;
    bool accepted = false;
    RegressionParams trial = p;
    for (int h = 0; h < 60; ++h, step *= 0.5) {
      const Eigen::VectorXd v = p.packed() + step * dir;
      trial = RegressionParams::unpack(v, spec);
      if (!(trial.alpha > 0.0)) continue;
      if (trial.theta < range.lower || trial.theta > range.upper) {
        hit_bound = true;
        continue;
      }
      const double ll = detail::safe_loglik(trial, d);
      if (detail::no_worse(ll, ev.loglik)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const bool stalled = (trial.packed() - p.packed()).lpNorm<Eigen::Infinity>() == 0.0;
    p = trial;
    ev = evaluate(p, d, EvalLevel::Info);
    if (stalled) break;
  }
  if (!converged && ev.score.lpNorm<Eigen::Infinity>() <= opt.gradient_tolerance) converged = true;

  FitResult fit;
  fit.estimate = p;
  fit.theta_fixed = false;
  fit.loglik = ev.loglik;
  fit.iterations = iterations;
  fit.weibull_loglik = weibull.loglik;
  fit.names = detail::parameter_names(d, false);
  fit.link = d.link;
  const double edge_tol = opt.theta_refine_step;
  fit.boundary = p.theta - range.lower <= edge_tol || range.upper - p.theta <= edge_tol ||
                 (hit_bound && !converged);
  fit.converged = converged && !fit.boundary;

  for (const Point& pt : points) fit.profile.push_back({pt.theta, pt.fit.loglik});
  fit.profile.push_back({p.theta, ev.loglik});
  std::sort(fit.profile.begin(), fit.profile.end(),
            [](const ProfilePoint& a, const ProfilePoint& b) { return a.theta < b.theta; });

  detail::attach_covariance(fit, d);
  if (!fit.has_covariance()) fit.converged = false;
  fit.aic = aic(fit);
  return fit;
}

inline LrTest lr_test(double full_loglik, double null_loglik, int df) {
  if (df < 1) throw DomainError("likelihood-ratio degrees of freedom must be positive");
  double stat = 2.0 * (full_loglik - null_loglik);
  if (stat < -2e-8) throw NestingError("full model log-likelihood is below the null model's");
  stat = std::max(stat, 0.0);
  const boost::math::chi_squared chi2(df);
  const double p = stat == 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(chi2, stat));
  return {stat, p};
}

inline LrTest lr_test(const FitResult& full, double null_loglik, int df) { return lr_test(full.loglik, null_loglik, df); }

inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

inline WaldInterval wald_interval(double estimate, double se, double level, std::string name = {}) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  return {std::move(name), estimate, se, estimate - z * se, estimate + z * se};
}

inline std::vector<WaldInterval> wald_intervals(const FitResult& fit, double level) {
  if (!fit.has_covariance()) throw NumericError("covariance is unavailable: observed information is not positive definite");
  Eigen::LLT<Eigen::MatrixXd> llt(fit.covariance);
  if (llt.info() != Eigen::Success) throw NumericError("covariance matrix is not positive definite");
  const Eigen::VectorXd est = fit.packed();
  std::vector<WaldInterval> out;
  for (Eigen::Index j = 0; j < est.size(); ++j) {
    out.push_back(wald_interval(est[j], std::sqrt(fit.covariance(j, j)), level,
                                j < static_cast<Eigen::Index>(fit.names.size()) ? fit.names[j] : std::string{}));
  }
  return out;
}

// Plug-in xi-quantile lambda(x'beta) B_xi(theta)^(1/alpha) with delta-method
// variance E' Sigma E.
inline QuantileEstimate quantile_fit(const FitResult& fit, double xi, const Eigen::VectorXd& x_new, double level = 0.95) {
  if (!(xi > 0.0 && xi < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  if (x_new.size() != fit.estimate.beta.size()) throw DomainError("covariate row has the wrong length");
  if (!fit.has_covariance()) throw NumericError("quantile variance needs a positive definite covariance");
  const RegressionParams& p = fit.estimate;
  const PowerSeries& spec = p.spec;
  const double theta = p.theta;
  const double b = quantile_factor(spec, theta, xi);

  double b_prime = 0.0;
  if (!fit.theta_fixed) {
    if (is_weibull_theta(theta)) {
      const double h = 1e-6;
      b_prime = spec.contains(h) ? (quantile_factor(spec, h, xi) - b) / h : (b - quantile_factor(spec, -h, xi)) / h;
    } else {
      const double h = 1e-6 * std::max(std::fabs(theta), 1.0);
      const bool up = spec.contains(theta + h) && !is_weibull_theta(theta + h);
      const bool down = spec.contains(theta - h) && !is_weibull_theta(theta - h);
      if (up && down) {
        b_prime = (quantile_factor(spec, theta + h, xi) - quantile_factor(spec, theta - h, xi)) / (2.0 * h);
      } else if (up) {
        b_prime = (quantile_factor(spec, theta + h, xi) - b) / h;
      } else {
        b_prime = (b - quantile_factor(spec, theta - h, xi)) / h;
      }
    }
  }

  const LinkValues lv = fit.link.derivatives(x_new.dot(p.beta));
  const double b_pow = std::pow(b, 1.0 / p.alpha);
  const double point = lv.lambda * b_pow;
  const Eigen::Index np = fit.num_params();
  const Eigen::Index k = p.beta.size();
  Eigen::VectorXd e(np);
  e.head(k) = lv.dlambda * b_pow * x_new;
  e[k] = -lv.lambda * b_pow * std::log(b) / (p.alpha * p.alpha);
  if (!fit.theta_fixed) e[k + 1] = lv.lambda * b_prime * std::pow(b, 1.0 / p.alpha - 1.0) / p.alpha;
  const double var = std::max(0.0, e.dot(fit.covariance * e));
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double half = z * std::sqrt(var);
  return {xi, point, var, point - half, point + half};
}

}  // namespace ewps

#pragma once

// The EWPS(lambda, alpha, theta; C) lifetime law. For theta != 0 the survival
// function is C(theta S(y)) / C(theta) with S the Weibull(lambda, alpha)
// survival; theta = 0 is the Weibull law itself.

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ewps/errors.hpp"
#include "ewps/power_series.hpp"
#include "ewps/random.hpp"

namespace ewps {

// |theta| below this is evaluated through the Weibull branch.
inline constexpr double kThetaZeroThreshold = 1e-8;

inline bool is_weibull_theta(double theta) { return std::fabs(theta) < kThetaZeroThreshold; }

struct WeibullParams {
  double lambda = 1.0;
  double alpha = 1.0;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("Weibull scale must be positive and finite");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("Weibull shape must be positive and finite");
  }
};

struct EwpsParams {
  double lambda = 1.0;
  double alpha = 1.0;
  double theta = 0.0;
  PowerSeries spec{SeriesFamily::poisson()};

  void validate() const {
    WeibullParams{lambda, alpha}.validate();
    spec.require_interior(theta);
  }

  WeibullParams weibull() const { return {lambda, alpha}; }
};

namespace detail {

// (y / lambda)^alpha, evaluated on the log scale.
inline double weibull_w(double y, double lambda, double alpha) {
  return std::exp(alpha * (std::log(y) - std::log(lambda)));
}

inline void require_positive(double y, const char* op) {
  if (!(y > 0.0) || std::isnan(y)) throw DomainError(std::string(op) + " requires y > 0");
}

}  // namespace detail

inline double weibull_pdf(double y, const WeibullParams& w) {
  const double wy = detail::weibull_w(y, w.lambda, w.alpha);
  return std::exp(std::log(w.alpha) - std::log(y) + std::log(wy) - wy);
}

inline double weibull_cdf(double y, const WeibullParams& w) {
  if (y <= 0.0) return 0.0;
  return -std::expm1(-detail::weibull_w(y, w.lambda, w.alpha));
}

inline double weibull_hazard(double y, const WeibullParams& w) {
  return w.alpha * detail::weibull_w(y, w.lambda, w.alpha) / y;
}

inline double density(const EwpsParams& p, double y, bool log_scale = false) {
  p.validate();
  detail::require_positive(y, "density");
  const double w = detail::weibull_w(y, p.lambda, p.alpha);
  if (std::isinf(w)) return log_scale ? -std::numeric_limits<double>::infinity() : 0.0;
  double log_f = std::log(p.alpha) - std::log(y) + std::log(w) - w;
  if (!is_weibull_theta(p.theta)) {
    const double x = p.theta * std::exp(-w);
    log_f += p.spec.log_c_prime(x) - p.spec.log_c_over_theta(p.theta).value;
  }
  return log_scale ? log_f : std::exp(log_f);
}

// C(theta S) / C(theta), computed directly to keep the upper tail accurate.
inline double survival(const EwpsParams& p, double y) {
  p.validate();
  if (y < 0.0 || std::isnan(y)) throw DomainError("survival requires y >= 0");
  if (y == 0.0) return 1.0;
  const double w = detail::weibull_w(y, p.lambda, p.alpha);
  if (is_weibull_theta(p.theta)) return std::exp(-w);
  const double s = std::exp(-w);
  return p.spec.c(p.theta * s) / p.spec.c(p.theta);
}

inline double cdf(const EwpsParams& p, double y) {
  p.validate();
  if (y < 0.0 || std::isnan(y)) throw DomainError("cdf requires y >= 0");
  if (y == 0.0) return 0.0;
  if (is_weibull_theta(p.theta)) return -std::expm1(-detail::weibull_w(y, p.lambda, p.alpha));
  return 1.0 - survival(p, y);
}

// r(y) = r0(y) * x C'(x) / C(x) with x = theta exp(-(y/lambda)^alpha), which
// equals density / survival without forming either.
inline double hazard(const EwpsParams& p, double y) {
  p.validate();
  detail::require_positive(y, "hazard");
  const double w = detail::weibull_w(y, p.lambda, p.alpha);
  const double r0 = p.alpha * w / y;
  double r = r0;
  if (!is_weibull_theta(p.theta)) r *= p.spec.x_c1_over_c(p.theta * std::exp(-w));
  if (!std::isfinite(r)) throw NumericError("hazard overflowed: survival is numerically zero at y = " + std::to_string(y));
  return r;
}

// B_xi(theta) such that the xi-quantile is lambda * B^(1/alpha).
inline double quantile_factor(const PowerSeries& spec, double theta, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  if (is_weibull_theta(theta)) return -std::log1p(-xi);
  spec.require_interior(theta);
  const double t = spec.inverse((1.0 - xi) * spec.c(theta));
  return -std::log(t / theta);
}

inline double quantile(const EwpsParams& p, double xi) {
  p.validate();
  const double b = quantile_factor(p.spec, p.theta, xi);
  return p.lambda * std::pow(b, 1.0 / p.alpha);
}

namespace detail {

// sum_{n>=1} a_n theta^n n^(-power), stopped once a geometric bound on the
// remaining tail drops below 1e-15 of the running sum.
inline double weighted_series(const PowerSeries& spec, double theta, double power) {
  const double abs_theta = std::fabs(theta);
  const double log_abs_theta = std::log(abs_theta);
  const double limit_ratio = std::isfinite(spec.s()) ? abs_theta / spec.s() : 0.0;
  double sum = 0.0;
  double prev_mag = 0.0;
  long prev_n = 0;
  const long max_terms = spec.tag() == Family::Binomial ? spec.m() : 10000000L;
  for (long n = 1; n <= max_terms; ++n) {
    const double la = spec.log_coefficient(n);
    if (std::isinf(la)) continue;
    const double log_mag = la + n * log_abs_theta - power * std::log(static_cast<double>(n));
    const double mag = std::exp(log_mag);
    const double sign = (theta < 0.0 && (n % 2 == 1)) ? -1.0 : 1.0;
    sum += sign * mag;
    if (prev_n > 0 && prev_mag > 0.0) {
      const double ratio = mag / prev_mag;
      const double bound_ratio = std::max(ratio, std::pow(limit_ratio, static_cast<double>(n - prev_n)));
      if (bound_ratio < 1.0 && mag * bound_ratio / (1.0 - bound_ratio) <= 1e-15 * std::fabs(sum)) break;
    }
    if (mag == 0.0 && n > 1) break;
    prev_mag = mag;
    prev_n = n;
  }
  return sum;
}

}  // namespace detail

// E(Y^r). Inside the radius of convergence this is the Weibull-mixture moment
// series; beyond it (extended geometric/logarithmic domain) the series
// diverges and E(Y^r) = lambda^r E(W^(r/alpha)) is integrated numerically
// over the law of W = (Y/lambda)^alpha.
inline double moment(const EwpsParams& p, double r) {
  p.validate();
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("moment order must be positive");
  const double power = r / p.alpha;
  const double scale = std::pow(p.lambda, r);
  if (is_weibull_theta(p.theta)) return scale * std::tgamma(power + 1.0);
  if (std::fabs(p.theta) < p.spec.s()) {
    const double series = detail::weighted_series(p.spec, p.theta, power);
    return std::tgamma(power + 1.0) * scale * series / p.spec.c(p.theta);
  }
  const double log_norm = p.spec.log_c_over_theta(p.theta).value;
  auto integrand = [&](double w) {
    if (w <= 0.0) return 0.0;
    const double x = p.theta * std::exp(-w);
    return std::exp(power * std::log(w) - w + p.spec.log_c_prime(x) - log_norm);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return scale * integrator.integrate(integrand, 1e-13);
}

inline std::vector<double> sample(const EwpsParams& p, std::size_t n, std::uint64_t seed) {
  p.validate();
  if (n < 1) throw DomainError("sample size must be at least 1");
  Engine rng = make_engine(seed);
  const double c_theta = is_weibull_theta(p.theta) ? 0.0 : p.spec.c(p.theta);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = uniform_open(rng);
    double b;
    if (is_weibull_theta(p.theta)) {
      b = -std::log1p(-xi);
    } else {
      b = -std::log(p.spec.inverse((1.0 - xi) * c_theta) / p.theta);
    }
    out.push_back(p.lambda * std::pow(b, 1.0 / p.alpha));
  }
  return out;
}

inline double weibull_draw(const WeibullParams& w, Engine& rng) {
  return w.lambda * std::pow(-std::log(uniform_open(rng)), 1.0 / w.alpha);
}

// Physical construction: theta > 0 is the minimum of N ~ PS(theta; C)
// Weibull lifetimes (series system); theta < 0 is the maximum of
// N ~ PS(t(theta); C) lifetimes (parallel system).
inline std::vector<double> sample_compositional(const EwpsParams& p, std::size_t n, std::uint64_t seed) {
  p.validate();
  if (is_weibull_theta(p.theta)) throw DomainError("compositional sampling requires theta != 0");
  if (n < 1) throw DomainError("sample size must be at least 1");
  const bool parallel = p.theta < 0.0;
  const double count_param = parallel ? p.spec.parallel_map(p.theta) : p.theta;
  Engine rng = make_engine(seed);
  std::vector<double> out;
  out.reserve(n);
  const WeibullParams w = p.weibull();
  for (std::size_t i = 0; i < n; ++i) {
    const long components = p.spec.sample(count_param, rng);
    double lifetime = weibull_draw(w, rng);
    for (long j = 1; j < components; ++j) {
      const double z = weibull_draw(w, rng);
      lifetime = parallel ? std::max(lifetime, z) : std::min(lifetime, z);
    }
    out.push_back(lifetime);
  }
  return out;
}

// Truncated Weibull-mixture expansion sum_{n<=K} a_n theta^n / C(theta) *
// g(y; lambda n^(-1/alpha), alpha). Only convergent inside the radius of
// convergence of C.
inline double mixture_density(const EwpsParams& p, double y, int terms) {
  p.validate();
  detail::require_positive(y, "mixture_density");
  if (terms < 1) throw DomainError("mixture truncation order must be at least 1");
  if (is_weibull_theta(p.theta)) throw DomainError("the mixture expansion requires theta != 0");
  if (!(std::fabs(p.theta) < p.spec.s())) {
    throw DomainError("the mixture expansion diverges for |theta| beyond the radius of convergence");
  }
  const double log_c = std::log(std::fabs(p.spec.c(p.theta)));
  const double c_sign = p.spec.c(p.theta) < 0.0 ? -1.0 : 1.0;
  double sum = 0.0;
  for (int n = 1; n <= terms; ++n) {
    const double la = p.spec.log_coefficient(n);
    if (std::isinf(la)) continue;
    const double sign = (p.theta < 0.0 && (n % 2 == 1)) ? -1.0 : 1.0;
    const double weight = sign * c_sign * std::exp(la + n * std::log(std::fabs(p.theta)) - log_c);
    const WeibullParams component{p.lambda * std::pow(static_cast<double>(n), -1.0 / p.alpha), p.alpha};
    sum += weight * weibull_pdf(y, component);
  }
  return sum;
}

}  // namespace ewps

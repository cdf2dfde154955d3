#pragma once

// Independent oracles shared by the unit tests and the acceptance runner:
// quadrature, finite differences, a KS distance and synthetic regression data.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ewps/ewps.hpp"

namespace ewps::oracle {

// Integral of f over (0, inf), split at `split` so that tanh-sinh handles an
// integrable singularity at zero and exp-sinh handles the tail.
inline double integrate_positive(const std::function<double(double)>& f, double split) {
  boost::math::quadrature::tanh_sinh<double> head;
  boost::math::quadrature::exp_sinh<double> tail;
  const double a = head.integrate(f, 0.0, split, 1e-13);
  const double b = tail.integrate(f, split, std::numeric_limits<double>::infinity(), 1e-13);
  return a + b;
}

inline double integrate(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(f, a, b, 1e-13);
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double rel_step = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::fabs(x[j]));
    Eigen::VectorXd up = x, dn = x;
    up[j] += h;
    dn[j] -= h;
    g[j] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_step = 1e-6) {
  const Eigen::Index m = f(x).size();
  Eigen::MatrixXd jac(m, x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::fabs(x[j]));
    Eigen::VectorXd up = x, dn = x;
    up[j] += h;
    dn[j] -= h;
    jac.col(j) = (f(up) - f(dn)) / (2.0 * h);
  }
  return jac;
}

// Largest |a - b| relative to max(1, |b|), entrywise.
inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a.data()[i] - b.data()[i]) / std::max(1.0, std::fabs(b.data()[i]));
    worst = std::max(worst, d);
  }
  return worst;
}

// One-sample Kolmogorov-Smirnov distance.
inline double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf_fn) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf_fn(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

inline double ks_critical_1pct(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

// Families swept by the property tests; m = 3 for the two families that need it.
inline std::vector<PowerSeries> all_families() {
  return {PowerSeries(SeriesFamily::poisson()),       PowerSeries(SeriesFamily::logarithmic()),
          PowerSeries(SeriesFamily::geometric()),     PowerSeries(SeriesFamily::binomial(3)),
          PowerSeries(SeriesFamily::negative_binomial(3)), PowerSeries(SeriesFamily::logarithmic_ii())};
}

// theta at the given fraction of each domain endpoint; an infinite endpoint is
// replaced by +-infinite_stand_in.
inline std::vector<double> endpoint_thetas(const PowerSeries& spec, double fraction, double infinite_stand_in) {
  const Interval dom = spec.theta_domain();
  const double lo = std::isfinite(dom.lower) ? fraction * dom.lower : -infinite_stand_in;
  const double hi = std::isfinite(dom.upper) ? fraction * dom.upper : infinite_stand_in;
  return {lo, hi};
}

inline std::string label(const PowerSeries& spec) {
  std::string s = family_name(spec.tag());
  if (spec.family().needs_m()) s += "(m=" + std::to_string(spec.m()) + ")";
  if (spec.extended()) s += "+ext";
  return s;
}

// Design matrix [1, length, log diameter] resembling a fiber-strength study.
inline Eigen::MatrixXd fiber_design(Eigen::Index n, std::uint64_t seed) {
  Engine rng = make_engine(seed);
  const double lengths[] = {5.0, 10.0, 15.0, 20.0, 25.0, 35.0};
  std::uniform_int_distribution<int> pick(0, 5);
  std::normal_distribution<double> z(std::log(0.25), 0.2);
  Eigen::MatrixXd X(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = lengths[pick(rng)];
    X(i, 2) = z(rng);
  }
  return X;
}

// Design matrix [1, x] with x standard normal.
inline Eigen::MatrixXd normal_design(Eigen::Index n, std::uint64_t seed) {
  Engine rng = make_engine(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd X(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(rng);
  }
  return X;
}

// Responses drawn row by row from the regression model (log link).
inline RegressionData simulate_regression(const RegressionParams& p, const Eigen::MatrixXd& X, std::uint64_t seed) {
  RegressionData d;
  d.X = X;
  d.y.resize(X.rows());
  Engine rng = make_engine(seed);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double lambda = std::exp(X.row(i).dot(p.beta));
    const EwpsParams ep{lambda, p.alpha, p.theta, p.spec};
    d.y[i] = quantile(ep, uniform_open(rng));
  }
  return d;
}

}  // namespace ewps::oracle

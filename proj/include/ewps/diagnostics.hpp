#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ewps/distribution.hpp"
#include "ewps/errors.hpp"
#include "ewps/fit.hpp"
#include "ewps/likelihood.hpp"

namespace ewps {

inline constexpr double kResidualClip = 1e-12;

struct QQPair {
  double theoretical;
  double observed;
};

struct AdResult {
  double statistic;  // A^2
  double p_value;
};

struct ResidualSet {
  std::vector<double> residuals;
  std::vector<double> cdf_values;
  std::vector<bool> clipped;
  std::vector<QQPair> qq_pairs;
  double ad_statistic = std::numeric_limits<double>::quiet_NaN();
  double ad_p_value = std::numeric_limits<double>::quiet_NaN();
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Upper-tail p-value for the Anderson-Darling normality test with estimated
// mean and variance (D'Agostino & Stephens piecewise approximation applied to
// the small-sample adjusted statistic).
inline double ad_p_value(double a2, std::size_t n) {
  const double nd = static_cast<double>(n);
  const double a = a2 * (1.0 + 0.75 / nd + 2.25 / (nd * nd));
  if (a < 0.2) return 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
  if (a < 0.34) return 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
  if (a < 0.6) return std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
  return std::min(1.0, std::exp(1.2937 - 5.709 * a + 0.0186 * a * a));
}

inline AdResult ad_normality(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 8) throw DomainError("the Anderson-Darling test needs at least 8 observations");
  const double nd = static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (nd - 1.0));
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DomainError("the Anderson-Darling test needs non-degenerate input");
  std::sort(x.begin(), x.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = (x[i] - mean) / sd;
    const double zr = (x[n - 1 - i] - mean) / sd;
    // log Phi(z_i) + log(1 - Phi(z_{n+1-i}))
    acc += (2.0 * i + 1.0) * (std::log(normal_cdf(zi)) + std::log(normal_cdf(-zr)));
  }
  const double a2 = -nd - acc / nd;
  return {a2, ad_p_value(a2, n)};
}

inline double quantile_residual(double u, bool* clipped = nullptr) {
  const double c = std::clamp(u, kResidualClip, 1.0 - kResidualClip);
  if (clipped) *clipped = c != u;
  return boost::math::quantile(boost::math::normal(), c);
}

// Q_i = Phi^{-1}(F(y_i; lambda_i, alpha, theta)) under the fitted model.
inline ResidualSet quantile_residuals(const FitResult& fit, const RegressionData& d) {
  d.validate();
  if (fit.estimate.beta.size() != d.k()) throw DomainError("fit and data disagree on the number of covariates");
  const Eigen::Index n = d.n();
  ResidualSet out;
  out.residuals.resize(n);
  out.cdf_values.resize(n);
  out.clipped.resize(n);
  const Eigen::VectorXd eta = d.X * fit.estimate.beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const EwpsParams p{fit.link.derivatives(eta[i]).lambda, fit.estimate.alpha, fit.estimate.theta, fit.estimate.spec};
    const double u = cdf(p, d.y[i]);
    bool clipped = false;
    out.cdf_values[i] = u;
    out.residuals[i] = quantile_residual(u, &clipped);
    out.clipped[i] = clipped;
  }
  std::vector<double> sorted = out.residuals;
  std::sort(sorted.begin(), sorted.end());
  out.qq_pairs.resize(n);
  const boost::math::normal std_normal;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.qq_pairs[i] = {boost::math::quantile(std_normal, (i + 0.5) / static_cast<double>(n)), sorted[i]};
  }
  if (n >= 8) {
    try {
      const AdResult ad = ad_normality(out.residuals);
      out.ad_statistic = ad.statistic;
      out.ad_p_value = ad.p_value;
    } catch (const DomainError&) {
    }
  }
  return out;
}

}  // namespace ewps

#pragma once

// Power series functions C(theta) = sum_{n>=1} a_n theta^n for the six
// supported component-count families, together with the zero-truncated
// discrete law they induce and the map used by the parallel-system
// construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "ewps/errors.hpp"
#include "ewps/random.hpp"

namespace ewps {

enum class Family { Poisson, Logarithmic, Geometric, Binomial, NegativeBinomial, LogarithmicII };

struct SeriesFamily {
  Family tag = Family::Poisson;
  int m = 0;  // replicate / failure count; only for Binomial and NegativeBinomial

  static SeriesFamily poisson() { return {Family::Poisson, 0}; }
  static SeriesFamily logarithmic() { return {Family::Logarithmic, 0}; }
  static SeriesFamily geometric() { return {Family::Geometric, 0}; }
  static SeriesFamily binomial(int m) { return {Family::Binomial, m}; }
  static SeriesFamily negative_binomial(int m) { return {Family::NegativeBinomial, m}; }
  static SeriesFamily logarithmic_ii() { return {Family::LogarithmicII, 0}; }

  bool needs_m() const { return tag == Family::Binomial || tag == Family::NegativeBinomial; }

  void validate() const {
    if (needs_m()) {
      if (m < 2) throw DomainError("binomial and negative binomial families require integer m >= 2");
    } else if (m != 0) {
      throw DomainError("m is only meaningful for binomial and negative binomial families");
    }
  }

  friend bool operator==(const SeriesFamily&, const SeriesFamily&) = default;
};

inline std::string family_name(Family f) {
  switch (f) {
    case Family::Poisson: return "poisson";
    case Family::Logarithmic: return "logarithmic";
    case Family::Geometric: return "geometric";
    case Family::Binomial: return "binomial";
    case Family::NegativeBinomial: return "negative-binomial";
    case Family::LogarithmicII: return "logarithmic-ii";
  }
  return "unknown";
}

inline Family parse_family(std::string_view name) {
  for (Family f : {Family::Poisson, Family::Logarithmic, Family::Geometric, Family::Binomial,
                   Family::NegativeBinomial, Family::LogarithmicII}) {
    if (family_name(f) == name) return f;
  }
  throw DomainError("unknown power series family '" + std::string(name) + "'");
}

struct Interval {
  double lower;
  double upper;
};

// First and second derivative of log(C(theta)/theta), plus its value.
struct LogRatioDerivs {
  double value;
  double d1;
  double d2;
};

class PowerSeries {
 public:
  // Distance from a finite endpoint inside which theta is rejected.
  static constexpr double kEndpointGuard = 1e-8;

  explicit PowerSeries(SeriesFamily family, bool extended = false)
      : family_(family), extended_(extended) {
    family_.validate();
    if (extended_ && family_.tag != Family::Geometric && family_.tag != Family::Logarithmic) {
      throw DomainError("the extended theta domain is only available for the geometric and logarithmic families");
    }
  }

  const SeriesFamily& family() const { return family_; }
  Family tag() const { return family_.tag; }
  int m() const { return family_.m; }
  bool extended() const { return extended_; }

  // Radius of convergence.
  double s() const {
    switch (family_.tag) {
      case Family::Poisson:
      case Family::Binomial: return kInf;
      default: return 1.0;
    }
  }

  // Lower endpoint of the admissible theta range; -inf when extended.
  double s_star() const {
    if (extended_) return -kInf;
    switch (family_.tag) {
      case Family::Poisson: return -kInf;
      case Family::NegativeBinomial: return 1.0 / (1.0 - family_.m);
      default: return -1.0;
    }
  }

  Interval theta_domain() const { return {s_star(), s()}; }

  bool contains(double theta) const {
    if (!std::isfinite(theta)) return false;
    const double lo = s_star();
    const double hi = s();
    if (std::isfinite(lo) && !(theta > lo + kEndpointGuard)) return false;
    if (std::isfinite(hi) && !(theta < hi - kEndpointGuard)) return false;
    return true;
  }

  void require_interior(double theta, std::string_view what = "theta") const {
    if (!contains(theta)) {
      throw DomainError(std::string(what) + " = " + std::to_string(theta) + " is outside the open domain of the " +
                        family_name(family_.tag) + " family");
    }
  }

  double coefficient(long n) const {
    if (n < 1) throw DomainError("power series coefficients are indexed from n = 1");
    const double lc = log_coefficient(n);
    return std::isinf(lc) ? 0.0 : std::exp(lc);
  }

  // log a_n; -inf where a_n = 0.
  double log_coefficient(long n) const {
    if (n < 1) throw DomainError("power series coefficients are indexed from n = 1");
    const double dn = static_cast<double>(n);
    const double m = family_.m;
    switch (family_.tag) {
      case Family::Poisson: return -std::lgamma(dn + 1.0);
      case Family::Logarithmic: return -std::log(dn);
      case Family::Geometric: return 0.0;
      case Family::Binomial:
        if (n > family_.m) return -kInf;
        return std::lgamma(m + 1.0) - std::lgamma(dn + 1.0) - std::lgamma(m - dn + 1.0);
      case Family::NegativeBinomial:
        return std::lgamma(m + dn - 1.0) - std::lgamma(dn) - std::lgamma(m);
      case Family::LogarithmicII: return (n % 2 == 1) ? std::log(2.0 / dn) : -kInf;
    }
    return -kInf;
  }

  // d^order C / d theta^order, order in [0, 4].
  double value(double theta, int order) const {
    if (order < 0 || order > 4) throw DomainError("series_value supports derivative orders 0 through 4");
    require_interior(theta);
    return c_deriv(theta, order);
  }

  // Unchecked evaluation; callers guarantee theta lies in the domain.
  double c(double x) const { return c_deriv(x, 0); }

  double c_deriv(double x, int order) const {
    const double m = family_.m;
    switch (family_.tag) {
      case Family::Poisson: return order == 0 ? std::expm1(x) : std::exp(x);
      case Family::Logarithmic:
        if (order == 0) return -std::log1p(-x);
        return factorial(order - 1) * std::pow(1.0 - x, -order);
      case Family::Geometric:
        if (order == 0) return x / (1.0 - x);
        return factorial(order) * std::pow(1.0 - x, -(order + 1));
      case Family::Binomial: {
        if (order == 0) return std::expm1(m * std::log1p(x));
        if (order > family_.m) return 0.0;
        double falling = 1.0;
        for (int j = 0; j < order; ++j) falling *= (m - j);
        return falling * std::pow(1.0 + x, m - order);
      }
      case Family::NegativeBinomial: {
        if (order == 0) return x * std::pow(1.0 - x, -m);
        // C^(k) = m (m+1) ... (m+k-2) * (k + (m-1) x) * (1-x)^(-m-k)
        double rising = 1.0;
        for (int j = 0; j < order - 1; ++j) rising *= (m + j);
        return rising * (order + (m - 1.0) * x) * std::pow(1.0 - x, -m - order);
      }
      case Family::LogarithmicII: {
        if (order == 0) return std::log1p(x) - std::log1p(-x);
        const double sign = (order % 2 == 1) ? 1.0 : -1.0;
        return factorial(order - 1) * (sign * std::pow(1.0 + x, -order) + std::pow(1.0 - x, -order));
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  // log C'(x).
  double log_c_prime(double x) const {
    const double m = family_.m;
    switch (family_.tag) {
      case Family::Poisson: return x;
      case Family::Logarithmic: return -std::log1p(-x);
      case Family::Geometric: return -2.0 * std::log1p(-x);
      case Family::Binomial: return std::log(m) + (m - 1.0) * std::log1p(x);
      case Family::NegativeBinomial: return std::log1p((m - 1.0) * x) - (m + 1.0) * std::log1p(-x);
      case Family::LogarithmicII: return std::log(2.0) - std::log1p(-x * x);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  // C''(x) / C'(x), i.e. the first derivative of log C'.
  double c2_over_c1(double x) const {
    const double m = family_.m;
    switch (family_.tag) {
      case Family::Poisson: return 1.0;
      case Family::Logarithmic: return 1.0 / (1.0 - x);
      case Family::Geometric: return 2.0 / (1.0 - x);
      case Family::Binomial: return (m - 1.0) / (1.0 + x);
      case Family::NegativeBinomial: return (m - 1.0) / (1.0 + (m - 1.0) * x) + (m + 1.0) / (1.0 - x);
      case Family::LogarithmicII: return 2.0 * x / (1.0 - x * x);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  // d/dx of C''(x)/C'(x) = C'''/C' - (C''/C')^2.
  double c2_over_c1_deriv(double x) const {
    const double m = family_.m;
    switch (family_.tag) {
      case Family::Poisson: return 0.0;
      case Family::Logarithmic: return 1.0 / ((1.0 - x) * (1.0 - x));
      case Family::Geometric: return 2.0 / ((1.0 - x) * (1.0 - x));
      case Family::Binomial: return -(m - 1.0) / ((1.0 + x) * (1.0 + x));
      case Family::NegativeBinomial: {
        const double a = 1.0 + (m - 1.0) * x;
        return -(m - 1.0) * (m - 1.0) / (a * a) + (m + 1.0) / ((1.0 - x) * (1.0 - x));
      }
      case Family::LogarithmicII: {
        const double d = 1.0 - x * x;
        return 2.0 * (1.0 + x * x) / (d * d);
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  // log(C(theta)/theta) and its first two derivatives. At theta = 0 these are
  // log a_1, a_2/a_1 and 2 a_3/a_1 - (a_2/a_1)^2. Near zero a truncated
  // Taylor series of C(theta)/theta avoids the 1/theta cancellation.
  LogRatioDerivs log_c_over_theta(double theta) const {
    if (std::fabs(theta) < kSeriesSwitch) {
      const double p = ratio_taylor(theta, 0);
      const double dp = ratio_taylor(theta, 1);
      const double d2p = ratio_taylor(theta, 2);
      const double d1 = dp / p;
      return {std::log(p), d1, d2p / p - d1 * d1};
    }
    const double cv = c(theta);
    const double c1 = c_deriv(theta, 1);
    const double c2 = c_deriv(theta, 2);
    const double r = c1 / cv;
    return {std::log(cv / theta), r - 1.0 / theta, c2 / cv - r * r + 1.0 / (theta * theta)};
  }

  // x C'(x) / C(x); equals 1 at x = 0.
  double x_c1_over_c(double x) const {
    if (x == 0.0) return 1.0;
    return 1.0 + x * log_c_over_theta(x).d1;
  }

  // Inverse of C on the admissible domain.
  double inverse(double u) const {
    if (!std::isfinite(u)) throw DomainError("series_inverse requires a finite argument");
    if (u == 0.0) return 0.0;
    const double m = family_.m;
    double theta = std::numeric_limits<double>::quiet_NaN();
    switch (family_.tag) {
      case Family::Poisson: theta = std::log1p(u); break;
      case Family::Geometric: theta = u / (1.0 + u); break;
      case Family::Logarithmic: theta = -std::expm1(-u); break;
      case Family::Binomial: theta = std::expm1(std::log1p(u) / m); break;
      case Family::LogarithmicII: theta = std::tanh(0.5 * u); break;
      case Family::NegativeBinomial: theta = negative_binomial_inverse(u); break;
    }
    if (std::isnan(theta) || !in_open_domain(theta) ||
        (family_.tag == Family::Geometric && u <= -1.0) ||
        (family_.tag == Family::Binomial && u <= -1.0)) {
      throw DomainError("series_inverse: u = " + std::to_string(u) + " is outside the image of C");
    }
    return theta;
  }

  // Zero-truncated power series probability a_n theta^n / C(theta).
  double pf(double theta, long n) const {
    if (!(theta > 0.0)) throw DomainError("the power series pf is defined for theta > 0 only");
    require_interior(theta);
    if (n < 1) throw DomainError("the zero-truncated pf has support n >= 1");
    return pf_unchecked(theta, n);
  }

  // Mean t C'(t) / C(t) of PS(t; C).
  double mean_count(double t) const { return t * c_deriv(t, 1) / c(t); }

  // Inverse-transform draw from PS(theta; C).
  template <class Rng>
  long sample(double theta, Rng& rng) const {
    if (!(theta > 0.0)) throw DomainError("power series sampling requires theta > 0");
    require_interior(theta);
    const double u = uniform_open(rng);
    double cumulative = 0.0;
    for (long n = 1; n <= kMaxSupport; ++n) {
      const double p = pf_unchecked(theta, n);
      cumulative += p;
      if (cumulative >= u || cumulative >= 1.0 - kSampleCap) return n;
      if (family_.tag == Family::Binomial && n >= family_.m) return n;
      if (p == 0.0 && log_coefficient(n) != -kInf && n > 1) {
        throw DomainError("power series sampler: probabilities vanished before the cumulative cap");
      }
    }
    throw DomainError("power series sampler exceeded its support search limit");
  }

  long sample(double theta, std::uint64_t seed) const {
    Engine rng = make_engine(seed);
    return sample(theta, rng);
  }

  // t(theta) carrying a negative theta to the parameter of the component-count
  // law of the equivalent parallel system.
  double parallel_map(double theta) const {
    if (!supports_parallel()) {
      throw UnsupportedCharacterization("no parallel-system characterization is available for the " +
                                        family_name(family_.tag) + " family");
    }
    if (!(theta < 0.0)) throw DomainError("parallel_map requires theta < 0");
    require_interior(theta);
    if (family_.tag == Family::Poisson) return -theta;
    return theta / (theta - 1.0);
  }

  bool supports_parallel() const {
    return family_.tag == Family::Poisson || family_.tag == Family::Geometric || family_.tag == Family::Logarithmic;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr double kSeriesSwitch = 1e-3;
  static constexpr int kTaylorTerms = 12;
  static constexpr double kSampleCap = 1e-14;
  static constexpr long kMaxSupport = 100000000;

  static double factorial(int k) {
    double f = 1.0;
    for (int j = 2; j <= k; ++j) f *= j;
    return f;
  }

  // d^k/dtheta^k of C(theta)/theta = sum_{j>=0} a_{j+1} theta^j, truncated.
  double ratio_taylor(double theta, int k) const {
    double acc = 0.0;
    for (int j = kTaylorTerms; j >= k; --j) {
      double falling = 1.0;
      for (int i = 0; i < k; ++i) falling *= (j - i);
      acc = acc * theta + falling * coefficient(j + 1);
    }
    return acc;
  }

  bool in_open_domain(double theta) const { return theta > s_star() && theta < s(); }

  double pf_unchecked(double theta, long n) const {
    const double la = log_coefficient(n);
    if (std::isinf(la)) return 0.0;
    return std::exp(la + static_cast<double>(n) * std::log(theta) - std::log(c(theta)));
  }

  double negative_binomial_inverse(double u) const {
    double lo = 0.0, hi = 0.0;
    if (u > 0.0) {
      double gap = 0.5;
      hi = 1.0 - gap;
      while (c(hi) < u) {
        gap *= 0.5;
        if (gap < 1e-300) throw DomainError("series_inverse: bracket search failed");
        hi = 1.0 - gap;
      }
      lo = 0.0;
    } else {
      const double lower = s_star();
      if (!(u > c(lower))) throw DomainError("series_inverse: u is below the image of C");
      double frac = 0.5;
      lo = lower * (1.0 - frac);
      while (c(lo) > u) {
        frac *= 0.5;
        if (frac < 1e-300) throw DomainError("series_inverse: bracket search failed");
        lo = lower * (1.0 - frac);
      }
      hi = 0.0;
    }
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (c(mid) < u) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double flo = std::fabs(c(lo) - u);
    const double fhi = std::fabs(c(hi) - u);
    return flo <= fhi ? lo : hi;
  }

  SeriesFamily family_;
  bool extended_;
};

}  // namespace ewps

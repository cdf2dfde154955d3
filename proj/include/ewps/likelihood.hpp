#pragma once

// Log-likelihood, score vector and observed information of the EWPS
// regression model y_i ~ EWPS(lambda_i, alpha, theta; C), h(lambda_i) = x_i'beta.
// Parameters are ordered (beta_1..beta_k, alpha, theta).
//
// Per observation, with W = (y/lambda)^alpha and x = theta exp(-W):
//   L1 = log(theta C'(x) / C(theta))
//   L2 = x C''(x)/C'(x)
//   L3 = x^2 [C'''(x)/C'(x) - (C''(x)/C'(x))^2]
//   Y* = W (1 + L2) - 1
// At theta = 0 all of L1, L2, L3 vanish and the theta derivatives take their
// analytic limits, written in terms of a_1, a_2, a_3.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ewps/distribution.hpp"
#include "ewps/errors.hpp"
#include "ewps/power_series.hpp"

namespace ewps {

struct LinkValues {
  double lambda;
  double dlambda;   // d lambda / d eta
  double d2lambda;  // d^2 lambda / d eta^2
};

enum class LinkKind { Log };

// Inverse link h^{-1} and its first two derivatives. Only the log link is
// built in; new links add a LinkKind and a branch here.
struct Link {
  LinkKind kind = LinkKind::Log;

  LinkValues derivatives(double eta) const {
    switch (kind) {
      case LinkKind::Log: {
        const double l = std::exp(eta);
        return {l, l, l};
      }
    }
    throw DomainError("unknown link");
  }

  std::string name() const { return "log"; }

  static Link parse(const std::string& name) {
    if (name == "log") return Link{LinkKind::Log};
    throw DomainError("unsupported link function '" + name + "' (only 'log' is available)");
  }
};

inline LinkValues link_derivatives(const Link& link, double eta) { return link.derivatives(eta); }

struct RegressionData {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  Link link;
  std::vector<std::string> covariate_names;  // one per column of X; optional

  Eigen::Index n() const { return y.size(); }
  Eigen::Index k() const { return X.cols(); }

  void validate() const {
    if (X.rows() != y.size()) throw DomainError("covariate matrix rows must match the number of responses");
    if (y.size() <= X.cols()) throw DomainError("need more observations than regression coefficients");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
        throw DomainError("response " + std::to_string(i) + " is not a positive finite number");
      }
    }
    if (!X.allFinite()) throw DomainError("covariate matrix contains non-finite values");
    if (!covariate_names.empty() && static_cast<Eigen::Index>(covariate_names.size()) != X.cols()) {
      throw DomainError("covariate_names must name every column of X");
    }
  }

  bool full_rank() const {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    return qr.rank() == X.cols();
  }
};

struct RegressionParams {
  Eigen::VectorXd beta;
  double alpha = 1.0;
  double theta = 0.0;
  PowerSeries spec{SeriesFamily::poisson()};

  Eigen::Index size() const { return beta.size() + 2; }

  Eigen::VectorXd packed() const {
    Eigen::VectorXd v(size());
    v.head(beta.size()) = beta;
    v[beta.size()] = alpha;
    v[beta.size() + 1] = theta;
    return v;
  }

  static RegressionParams unpack(const Eigen::VectorXd& v, const PowerSeries& spec) {
    RegressionParams p;
    p.beta = v.head(v.size() - 2);
    p.alpha = v[v.size() - 2];
    p.theta = v[v.size() - 1];
    p.spec = spec;
    return p;
  }

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be positive and finite");
    if (!beta.allFinite()) throw DomainError("beta must be finite");
    spec.require_interior(theta);
  }
};

// Per-observation quantities shared by the log-likelihood, score and
// information.
struct ObsWorkspace {
  Eigen::VectorXd w;        // W_i = (y_i/lambda_i)^alpha
  Eigen::VectorXd log_w;    // log W_i
  Eigen::VectorXd exp_mw;   // exp(-W_i)
  Eigen::VectorXd l1;       // log C'(x_i) - log(C(theta)/theta), x_i = theta e^{-W_i}
  Eigen::VectorXd l2;       // x_i C''(x_i)/C'(x_i)
  Eigen::VectorXd l3;       // x_i^2 (C''/C')'(x_i)
  Eigen::VectorXd y_star;   // W_i (1 + L2_i) - 1
  Eigen::VectorXd rho1;     // lambda'/lambda
  Eigen::VectorXd rho2;     // lambda''/lambda
  Eigen::VectorXd l2_over_theta;   // L2_i / theta = e^{-W} C''(x)/C'(x)
  Eigen::VectorXd l23_over_theta;  // (L2_i + L3_i) / theta
  Eigen::VectorXd l3_over_theta2;  // L3_i / theta^2
  bool theta_zero = false;
};

inline ObsWorkspace build_workspace(const RegressionParams& p, const RegressionData& d) {
  const Eigen::Index n = d.n();
  ObsWorkspace ws;
  ws.theta_zero = is_weibull_theta(p.theta);
  ws.w.resize(n);
  ws.log_w.resize(n);
  ws.exp_mw.resize(n);
  ws.l1.resize(n);
  ws.l2.resize(n);
  ws.l3.resize(n);
  ws.y_star.resize(n);
  ws.rho1.resize(n);
  ws.rho2.resize(n);
  ws.l2_over_theta.resize(n);
  ws.l23_over_theta.resize(n);
  ws.l3_over_theta2.resize(n);

  const PowerSeries& spec = p.spec;
  double log_ratio = 0.0;
  double r1_zero = 0.0, r1d_zero = 0.0;
  if (ws.theta_zero) {
    const double a1 = spec.coefficient(1), a2 = spec.coefficient(2), a3 = spec.coefficient(3);
    r1_zero = 2.0 * a2 / a1;                           // C''(0)/C'(0)
    r1d_zero = 6.0 * a3 / a1 - 4.0 * a2 * a2 / (a1 * a1);  // (C''/C')'(0)
  } else {
    log_ratio = spec.log_c_over_theta(p.theta).value;
  }

  const Eigen::VectorXd eta = d.X * p.beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const LinkValues lv = d.link.derivatives(eta[i]);
    if (!(lv.lambda > 0.0) || !std::isfinite(lv.lambda)) {
      throw NumericError("scale parameter is not positive finite for observation " + std::to_string(i));
    }
    ws.rho1[i] = lv.dlambda / lv.lambda;
    ws.rho2[i] = lv.d2lambda / lv.lambda;
    const double log_w = p.alpha * (std::log(d.y[i]) - std::log(lv.lambda));
    const double w = std::exp(log_w);
    const double e = std::exp(-w);
    ws.w[i] = w;
    ws.log_w[i] = log_w;
    ws.exp_mw[i] = e;
    if (ws.theta_zero) {
      ws.l1[i] = 0.0;
      ws.l2[i] = 0.0;
      ws.l3[i] = 0.0;
      ws.l2_over_theta[i] = e * r1_zero;
      ws.l23_over_theta[i] = e * r1_zero;
      ws.l3_over_theta2[i] = e * e * r1d_zero;
    } else {
      const double x = p.theta * e;
      const double r1 = spec.c2_over_c1(x);
      const double r1d = spec.c2_over_c1_deriv(x);
      ws.l1[i] = spec.log_c_prime(x) - log_ratio;
      ws.l2[i] = x * r1;
      ws.l3[i] = x * x * r1d;
      ws.l2_over_theta[i] = e * r1;
      ws.l23_over_theta[i] = e * (r1 + x * r1d);
      ws.l3_over_theta2[i] = e * e * r1d;
    }
    ws.y_star[i] = w * (1.0 + ws.l2[i]) - 1.0;
  }
  return ws;
}

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd info;  // observed information, -d^2 l / dTheta dTheta'
};

enum class EvalLevel { Value, Score, Info };

inline Evaluation evaluate(const RegressionParams& p, const RegressionData& d, EvalLevel level = EvalLevel::Info) {
  p.validate();
  if (p.beta.size() != d.k()) throw DomainError("beta length must equal the number of covariate columns");
  const ObsWorkspace ws = build_workspace(p, d);
  const Eigen::Index n = d.n();
  const Eigen::Index k = d.k();
  const double nd = static_cast<double>(n);
  const double alpha = p.alpha;

  Evaluation ev;
  // l = n log(alpha) + sum log W - sum W + sum L1 - sum log y
  double ll = nd * std::log(alpha);
  for (Eigen::Index i = 0; i < n; ++i) ll += ws.log_w[i] - ws.w[i] + ws.l1[i] - std::log(d.y[i]);
  if (!std::isfinite(ll)) throw NumericError("log-likelihood is not finite");
  ev.loglik = ll;
  if (level == EvalLevel::Value) return ev;

  double h1 = 0.0, h2 = 0.0;
  const PowerSeries& spec = p.spec;
  if (ws.theta_zero) {
    const double a1 = spec.coefficient(1), a2 = spec.coefficient(2), a3 = spec.coefficient(3);
    h1 = a2 / a1;
    h2 = 2.0 * a3 / a1 - (a2 / a1) * (a2 / a1);
  } else {
    const LogRatioDerivs lr = spec.log_c_over_theta(p.theta);
    h1 = lr.d1;  // C'/C - 1/theta
    h2 = lr.d2;  // (C''C - C'^2)/C^2 + 1/theta^2
  }

  ev.score.resize(k + 2);
  // d l / d beta = alpha X' diag(rho1) Y*
  ev.score.head(k) = alpha * d.X.transpose() * ws.rho1.cwiseProduct(ws.y_star);
  // d l / d alpha = n/alpha - (1/alpha) log(W)' Y*
  ev.score[k] = nd / alpha - ws.log_w.dot(ws.y_star) / alpha;
  // d l / d theta = n/theta - n C'/C + sum(L2)/theta; at zero (a2/a1) sum(2 e^{-W} - 1)
  if (ws.theta_zero) {
    ev.score[k + 1] = h1 * (2.0 * ws.exp_mw.sum() - nd);
  } else {
    ev.score[k + 1] = -nd * h1 + ws.l2_over_theta.sum();
  }
  if (level == EvalLevel::Score) return ev;

  // Second derivatives (Hessian H); the information is -H.
  const Eigen::ArrayXd w = ws.w.array();
  const Eigen::ArrayXd ys = ws.y_star.array();
  const Eigen::ArrayXd lw = ws.log_w.array();
  const Eigen::ArrayXd r1 = ws.rho1.array();
  const Eigen::ArrayXd r2 = ws.rho2.array();
  const Eigen::ArrayXd w2l23 = w.square() * (ws.l2.array() + ws.l3.array());

  const Eigen::ArrayXd d_eta_eta = alpha * (r2 * ys - r1.square() * ((alpha + 1.0) * ys + alpha - alpha * w2l23));
  const Eigen::ArrayXd d_alpha_eta = r1 * (ys + lw * (1.0 + ys - w2l23));
  const double d_alpha_alpha = -((1.0 + lw.square() * (1.0 + ys - w2l23)).sum()) / (alpha * alpha);
  const Eigen::ArrayXd d_theta_eta = alpha * r1 * w * ws.l23_over_theta.array();
  const double d_theta_alpha = -(lw * w * ws.l23_over_theta.array()).sum() / alpha;
  const double d_theta_theta = -nd * h2 + ws.l3_over_theta2.sum();

  Eigen::MatrixXd hess(k + 2, k + 2);
  hess.topLeftCorner(k, k) = d.X.transpose() * d_eta_eta.matrix().asDiagonal() * d.X;
  hess.block(0, k, k, 1) = d.X.transpose() * d_alpha_eta.matrix();
  hess.block(0, k + 1, k, 1) = d.X.transpose() * d_theta_eta.matrix();
  hess(k, k) = d_alpha_alpha;
  hess(k, k + 1) = d_theta_alpha;
  hess(k + 1, k + 1) = d_theta_theta;
  hess.block(k, 0, 1, k) = hess.block(0, k, k, 1).transpose();
  hess.block(k + 1, 0, 1, k) = hess.block(0, k + 1, k, 1).transpose();
  hess(k + 1, k) = hess(k, k + 1);
  ev.info = -hess;
  return ev;
}

inline double loglik(const RegressionParams& p, const RegressionData& d) {
  return evaluate(p, d, EvalLevel::Value).loglik;
}

inline Eigen::VectorXd score(const RegressionParams& p, const RegressionData& d) {
  return evaluate(p, d, EvalLevel::Score).score;
}

inline Eigen::MatrixXd observed_info(const RegressionParams& p, const RegressionData& d) {
  return evaluate(p, d, EvalLevel::Info).info;
}

namespace detail {

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Nodes and weights by Newton iteration on the Legendre recurrence.
inline GaussLegendre gauss_legendre(int points) {
  GaussLegendre rule;
  rule.nodes.resize(points);
  rule.weights.resize(points);
  for (int i = 0; i < (points + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= points; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = points * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-15) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[points - 1 - i] = z;
    const double wgt = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.weights[i] = wgt;
    rule.weights[points - 1 - i] = wgt;
  }
  return rule;
}

}  // namespace detail

// Residuals of the zero-mean score identities for a single observation,
// evaluated by quadrature over U = exp(-W), whose density on (0, 1) is
// theta C'(theta u) / C(theta) (uniform at theta = 0):
//   [0] |E(Y*)|
//   [1] |E(log W * Y*) - 1|            (alpha-score identity)
//   [2] |E(C''(x) e^{-W} / C'(x)) - (C'(theta)/C(theta) - 1/theta)|
// The law of W does not depend on beta or alpha.
inline Eigen::Vector3d expectation_identities(const RegressionParams& p, int quad_points) {
  if (quad_points < 64) throw DomainError("expectation_identities needs at least 64 quadrature points");
  p.validate();
  const PowerSeries& spec = p.spec;
  const bool zero = is_weibull_theta(p.theta);
  double log_norm = 0.0, h1 = 0.0, r1_zero = 0.0;
  if (zero) {
    h1 = spec.coefficient(2) / spec.coefficient(1);
    r1_zero = 2.0 * h1;
  } else {
    const LogRatioDerivs lr = spec.log_c_over_theta(p.theta);
    log_norm = lr.value;
    h1 = lr.d1;
  }
  const detail::GaussLegendre rule = detail::gauss_legendre(quad_points);

  double e_ystar = 0.0, e_logw_ystar = 0.0, e_ratio = 0.0;
  auto accumulate = [&](double a, double b) {
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int j = 0; j < quad_points; ++j) {
      const double u = mid + half * rule.nodes[j];
      const double wq = half * rule.weights[j];
      const double w = -std::log(u);
      if (!(w > 0.0)) continue;
      const double x = p.theta * u;
      const double dens = zero ? 1.0 : std::exp(spec.log_c_prime(x) - log_norm);
      const double r1 = zero ? r1_zero : spec.c2_over_c1(x);
      const double ystar = w * (1.0 + x * r1) - 1.0;
      e_ystar += wq * dens * ystar;
      e_logw_ystar += wq * dens * std::log(w) * ystar;
      e_ratio += wq * dens * u * r1;
    }
  };
  // Geometric panels towards both ends: log W is singular at u = 1 and W is
  // unbounded at u = 0.
  constexpr int kPanels = 60;
  for (int j = 0; j < kPanels; ++j) {
    const double hi = std::ldexp(0.5, -j), lo = std::ldexp(0.5, -j - 1);
    accumulate(lo, hi);
    accumulate(1.0 - hi, 1.0 - lo);
  }
  return {std::fabs(e_ystar), std::fabs(e_logw_ystar - 1.0), std::fabs(e_ratio - h1)};
}

}  // namespace ewps

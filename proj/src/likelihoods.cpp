#include "robustgp/likelihoods.hpp"

#include <cmath>

namespace robustgp {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;  // log(sqrt(2 pi))
}

double huber_rho(double r_s, double b) {
  if (!(b > 0.0)) throw ConfigError("huber_rho: b must be positive");
  const double a = std::abs(r_s);
  return a <= b ? 0.5 * r_s * r_s : b * (a - 0.5 * b);
}

PseudoHuberValue pseudo_huber(double r_s, double b) {
  if (!(b > 0.0)) throw ConfigError("pseudo_huber: b must be positive");
  const double t = r_s / b;
  const double root = std::hypot(1.0, t);
  // b^2 (root - 1) written as r^2 / (1 + root) to avoid cancellation near 0.
  const double value = r_s * r_s / (1.0 + root);
  const double d1 = r_s / root;
  const double d2 = 1.0 / (root * root * root);
  return {value, d1, d2};
}

static void check_likelihood_args(const VectorXd& y, const VectorXd& f,
                                  const HuberConfig& cfg, const VectorXd& w, double s) {
  cfg.validate();
  if (y.size() != f.size() || y.size() != w.size())
    throw ConfigError("huber likelihood: length mismatch");
  if (!(s > 0.0)) throw ConfigError("huber likelihood: scale must be positive");
  for (Index i = 0; i < w.size(); ++i)
    if (!(w(i) > 0.0 && w(i) <= 1.0))
      throw ConfigError("huber likelihood: weights must lie in (0, 1]");
}

double huber_log_likelihood(const VectorXd& y, const VectorXd& f, const HuberConfig& cfg,
                            const VectorXd& w, double s, bool pseudo) {
  check_likelihood_args(y, f, cfg, w, s);
  // Schweppe-type weighting: the loss of the w-standardized residual is
  // scaled by w^2, so the quadratic branch is an ordinary N(y|f,(sigma s)^2)
  // term for every point while outlying residuals are clipped earlier and
  // their bounded pull is shrunk by w. Dividing the density scale by w
  // instead (reading the weight as a per-point standard deviation) would
  // hand leverage points extra precision and extra clipped pull - the
  // opposite of downweighting.
  const double log_c1 = std::log1p(-cfg.epsilon);
  const double scale = cfg.sigma * s;
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double r = (y(i) - f(i)) / (w(i) * scale);
    const double rho = pseudo ? pseudo_huber(r, cfg.b).value : huber_rho(r, cfg.b);
    ll += log_c1 - kLogSqrt2Pi - std::log(scale) - w(i) * w(i) * rho;
  }
  return ll;
}

ResidualSplit split_residuals(const VectorXd& y, const VectorXd& f, const HuberConfig& cfg,
                              const VectorXd& w, double s) {
  check_likelihood_args(y, f, cfg, w, s);
  ResidualSplit split;
  split.r_s.resize(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    split.r_s(i) = (y(i) - f(i)) / (w(i) * cfg.sigma * s);
    if (std::abs(split.r_s(i)) <= cfg.b)
      split.inliers.push_back(i);
    else
      split.outliers.push_back(i);
  }
  return split;
}

MixtureConstants mixture_constants(const HuberConfig& cfg) {
  cfg.validate();
  const double c1 = 1.0 - cfg.epsilon;
  const double c2 = std::sqrt(1.5707963267948966192313216916398) * std::exp(0.5 * cfg.b * cfg.b);
  return {c1, c2};
}

LogMixtureConstants log_mixture_constants(const HuberConfig& cfg) {
  cfg.validate();
  return {std::log1p(-cfg.epsilon),
          0.5 * std::log(1.5707963267948966192313216916398) + 0.5 * cfg.b * cfg.b};
}

}  // namespace robustgp

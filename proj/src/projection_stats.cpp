#include "robustgp/projection_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace robustgp {

namespace {
constexpr double kMadConsistency = 1.4826;
constexpr double kScaleFloor = 1e-8;
}  // namespace

double median(VectorXd v) {
  const Index n = v.size();
  if (n == 0) throw ConfigError("median: empty vector");
  double* begin = v.data();
  double* end = v.data() + n;
  double* mid = begin + n / 2;
  std::nth_element(begin, mid, end);
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(begin, mid);
  return 0.5 * (lo + hi);
}

double mad(const VectorXd& v) {
  const double m = median(v);
  return median((v.array() - m).abs().matrix());
}

VectorXd coordinatewise_median(const MatrixXd& X) {
  if (X.rows() < 1) throw ConfigError("coordinatewise_median: need at least one row");
  VectorXd m(X.cols());
  for (Index k = 0; k < X.cols(); ++k) m(k) = median(X.col(k));
  return m;
}

VectorXd projection_statistics(const MatrixXd& X) {
  const Index n = X.rows();
  if (n < 2) throw ConfigError("projection_statistics: need at least two rows");

  const VectorXd M = coordinatewise_median(X);
  VectorXd ps = VectorXd::Zero(n);
  bool any_direction = false;

  for (Index j = 0; j < n; ++j) {
    VectorXd v = X.row(j).transpose() - M;
    const double norm = v.norm();
    if (norm == 0.0) continue;
    v /= norm;

    const VectorXd proj = X * v;
    const double med_p = median(proj);
    const VectorXd dev = (proj.array() - med_p).abs().matrix();
    const double dir_mad = median(dev);
    // A direction whose projections collapse onto the median carries no
    // outlyingness information; require the MAD to be meaningfully nonzero
    // relative to the spread along the direction.
    if (dir_mad <= 1e-12 * std::max(1.0, dev.maxCoeff())) continue;

    any_direction = true;
    ps = ps.cwiseMax(dev / (kMadConsistency * dir_mad));
  }

  if (!any_direction) {
    bool all_identical = true;
    for (Index i = 1; i < n && all_identical; ++i)
      all_identical = (X.row(i).array() == X.row(0).array()).all();
    if (all_identical)
      throw NumericalError("projection_statistics: all candidate directions degenerate");
    // No usable direction: no evidence of outlyingness is obtainable.
    return VectorXd::Zero(n);
  }
  return ps;
}

MatrixXd augment_intercept(const VectorXd& x) {
  if (x.size() < 2) throw ConfigError("augment_intercept: need at least two rows");
  MatrixXd H(x.size(), 2);
  H.col(0).setOnes();
  H.col(1) = x;
  return H;
}

RobustWeighting ps_weights(const VectorXd& ps, const MatrixXd& X) {
  const Index n = X.rows();
  const Index d = X.cols();
  if (ps.size() != n) throw ConfigError("ps_weights: statistic/input row count mismatch");

  RobustWeighting rw;
  rw.ps = ps;
  rw.squared_regime = n > 5 * d;
  rw.weights.resize(n);
  rw.thresholds.resize(n);
  rw.dof.resize(n);

  for (Index i = 0; i < n; ++i) {
    int nu = 0;
    for (Index k = 0; k < d; ++k)
      if (X(i, k) != 0.0) ++nu;
    nu = std::max(nu, 1);
    rw.dof(i) = nu;
    const double c = chi_square_quantile(nu, 0.975);
    rw.thresholds(i) = c;
    const double stat = rw.squared_regime ? ps(i) * ps(i) : ps(i);
    rw.weights(i) = stat <= c ? 1.0 : c / (ps(i) * ps(i));
  }
  return rw;
}

RobustWeighting default_weighting(const MatrixXd& X) {
  if (X.cols() == 1) {
    const MatrixXd H = augment_intercept(X.col(0));
    return ps_weights(projection_statistics(H), H);
  }
  return ps_weights(projection_statistics(X), X);
}

RobustScale robust_scale(const VectorXd& residuals, Index d) {
  const Index n = residuals.size();
  if (n <= d) throw ConfigError("robust_scale: need more residuals than dimensions");
  const double b_d = 1.0 + 5.0 / static_cast<double>(n - d);
  const double m = median(residuals.cwiseAbs());
  const double s = kMadConsistency * b_d * m;
  return {std::max(s, kScaleFloor), b_d};
}

namespace {

// Series and continued-fraction evaluations of P(a, x), Numerical Recipes
// style, accurate to ~1e-14.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0) throw ConfigError("regularized_gamma_p: a must be positive");
  if (x < 0.0) throw ConfigError("regularized_gamma_p: x must be nonnegative");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_contfrac(a, x);
}

double chi_square_quantile(double dof, double p) {
  if (dof <= 0.0) throw ConfigError("chi_square_quantile: dof must be positive");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("chi_square_quantile: p must lie in (0, 1)");

  const double a = 0.5 * dof;
  auto cdf = [a](double x) { return regularized_gamma_p(a, 0.5 * x); };

  double hi = std::max(dof, 1.0);
  while (cdf(hi) < p) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
    if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace robustgp

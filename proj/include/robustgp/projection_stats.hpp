#pragma once

#include "robustgp/errors.hpp"
#include "robustgp/types.hpp"

namespace robustgp {

/// Per-point outlyingness diagnostics derived from projection statistics.
/// weights(i) == 1 exactly when the thresholded statistic is within its
/// chi-square bound; otherwise weights(i) = thresholds(i) / ps(i)^2.
struct RobustWeighting {
  VectorXd ps;          // projection statistics, >= 0
  VectorXd weights;     // in (0, 1]
  VectorXd thresholds;  // chi-square 97.5% quantiles, one per point
  VectorXi dof;         // nonzero-entry counts of the regressor rows
  bool squared_regime;  // true: PS^2 thresholded (n > 5d); false: PS thresholded
};

/// MAD-based residual scale with the dimensionality correction
/// b_d = 1 + 5/(n - d);  s = 1.4826 * b_d * median|r|, floored at 1e-8.
struct RobustScale {
  double s;
  double correction;
};

/// Median with the even-n convention (mean of the two central order stats).
double median(VectorXd v);

/// Median absolute deviation from the median (unscaled).
double mad(const VectorXd& v);

VectorXd coordinatewise_median(const MatrixXd& X);

/// PS(x_i): maximum over the n data-anchored directions u_j of the
/// MAD-standardized projected deviation from the coordinatewise median.
/// Directions with zero norm, and directions whose projections have zero
/// MAD, are skipped. Throws when all rows coincide.
VectorXd projection_statistics(const MatrixXd& X);

/// H = [1, x] for one-dimensional regressors (the PS inputs need d >= 2).
MatrixXd augment_intercept(const VectorXd& x);

/// Chi-square thresholds and weights for the given statistics. The squared
/// statistic is thresholded when n > 5d, the raw statistic otherwise.
RobustWeighting ps_weights(const VectorXd& ps, const MatrixXd& X);

/// Convenience pipeline: PS weights of the training inputs, augmenting
/// one-dimensional inputs with an intercept column first.
RobustWeighting default_weighting(const MatrixXd& X);

RobustScale robust_scale(const VectorXd& residuals, Index d);

/// Quantile of the chi-square distribution with `dof` degrees of freedom,
/// computed by bisection on the regularized incomplete gamma function.
double chi_square_quantile(double dof, double p);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

}  // namespace robustgp

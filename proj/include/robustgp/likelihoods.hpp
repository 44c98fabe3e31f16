#pragma once

#include <vector>

#include "robustgp/errors.hpp"
#include "robustgp/types.hpp"

namespace robustgp {

/// Huber likelihood configuration: loss threshold b on standardized
/// residuals, contamination fraction epsilon, and noise scale sigma.
struct HuberConfig {
  double b = 1.5;
  double epsilon = 0.45;
  double sigma = 1.0;

  void validate() const {
    if (!(b > 0.0)) throw ConfigError("HuberConfig: b must be positive");
    if (!(epsilon >= 0.0 && epsilon < 1.0))
      throw ConfigError("HuberConfig: epsilon must lie in [0, 1)");
    if (!(sigma > 0.0)) throw ConfigError("HuberConfig: sigma must be positive");
  }

  HuberConfig with_sigma(double s) const {
    HuberConfig c = *this;
    c.sigma = s;
    return c;
  }
};

/// Partition of the observations by standardized residual magnitude.
/// |r_S| <= b goes to the inlier (quadratic) branch, ties included.
struct ResidualSplit {
  std::vector<Index> inliers;
  std::vector<Index> outliers;
  VectorXd r_s;
};

/// Huber loss: r^2/2 inside the threshold, b(|r| - b/2) outside.
double huber_rho(double r_s, double b);

struct PseudoHuberValue {
  double value;
  double d1;
  double d2;
};

/// Pseudo-Huber loss b^2 (sqrt(1 + (r/b)^2) - 1) with first and second
/// derivatives; the second derivative is strictly positive everywhere.
PseudoHuberValue pseudo_huber(double r_s, double b);

/// Log of the Huber density of the observation vector,
///   sum_i [ log((1-eps) / (sqrt(2 pi) w_i sigma s)) - rho(r_Si) ],
/// with r_Si = (y_i - f_i) / (w_i sigma s). The pseudo flag switches rho to
/// the pseudo-Huber loss.
double huber_log_likelihood(const VectorXd& y, const VectorXd& f, const HuberConfig& cfg,
                            const VectorXd& w, double s, bool pseudo);

ResidualSplit split_residuals(const VectorXd& y, const VectorXd& f, const HuberConfig& cfg,
                              const VectorXd& w, double s);

/// Mixture representation constants: C1 = 1 - eps, C2 = sqrt(pi/2) exp(b^2/2).
struct MixtureConstants {
  double c1;
  double c2;
};

MixtureConstants mixture_constants(const HuberConfig& cfg);

/// log C1 and log C2; stays finite for thresholds where C2 overflows.
struct LogMixtureConstants {
  double log_c1;
  double log_c2;
};

LogMixtureConstants log_mixture_constants(const HuberConfig& cfg);

}  // namespace robustgp

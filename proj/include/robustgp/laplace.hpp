#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "robustgp/kernel.hpp"
#include "robustgp/likelihoods.hpp"
#include "robustgp/optim.hpp"
#include "robustgp/projection_stats.hpp"
#include "robustgp/types.hpp"

namespace robustgp {

/// Gaussian approximation of the latent posterior around its mode under the
/// pseudo-Huber likelihood: N(mode, A) with A = (K^{-1} + W)^{-1}.
struct LaplacePosterior {
  VectorXd mode;     // f_hat
  VectorXd w_diag;   // W: negative log-likelihood Hessian diagonal, > 0
  VectorXd alpha;    // K^{-1} f_hat via the Newton representation f_hat = K alpha
  MatrixXd b_chol;   // lower Cholesky factor of B = I + W^1/2 K W^1/2
  double log_evidence = 0.0;
  double loglik = 0.0;  // pseudo-Huber log-likelihood at the mode
  double scale = 1.0;   // converged robust residual scale s
  bool converged = false;
  int outer_iterations = 0;
};

struct FindModeOptions {
  std::optional<double> fixed_scale;  // freeze s instead of the robust refresh
  double scale_min = 0.0;             // clamp band for the refreshed scale
  double scale_max = std::numeric_limits<double>::infinity();
  int max_outer = 100;
  int max_inner = 50;
  double grad_tol = 1e-8;
  double step_tol = 1e-10;
  const LaplacePosterior* warm_start = nullptr;
  std::vector<double>* objective_trace = nullptr;  // log posterior after each accepted step
};

/// Newton mode finding for the pseudo-Huber GP posterior. The robust scale
/// s is frozen within each outer iteration and refreshed from the current
/// residuals between them; convergence requires both the mode and the scale
/// to be stable.
LaplacePosterior find_mode(const Dataset& D, const HuberConfig& cfg,
                           const KernelParams& params, const VectorXd& w,
                           const FindModeOptions& opt = {});

/// ln q(D | sigma, theta) = ln p_H(y | f_hat, sigma) - 1/2 f_hat^T K^{-1} f_hat
///                          - 1/2 ln |I + K W|,
/// computed from the stored factorizations (no explicit inverses).
double laplace_log_evidence(const LaplacePosterior& post, const Dataset& D,
                            const HuberConfig& cfg, const VectorXd& w);

/// Fitted GP-Huber model (Laplace path). Weights come from projection
/// statistics on the training inputs and never change during inference.
struct HuberGpModel {
  KernelParams params;
  HuberConfig cfg;
  RobustWeighting weighting;
  LaplacePosterior posterior;
  Dataset data;  // original responses
  double center = 0.0;
  bool opt_converged = true;
};

/// ML-II over [log sigma, log tau, log s_1 .. log s_d], maximizing the
/// Laplace evidence; gradients by central finite differences. Responses are
/// centered by their median.
HuberGpModel optimize_hyperparams(const Dataset& D, const HuberConfig& cfg,
                                  const RobustWeighting& weighting,
                                  const OptimizerSettings& opt = {});

/// Latent-Gaussian prediction around the Laplace posterior:
///   mean = C*^T K^{-1} f_hat,  latent var = k** - c*^T (K + W^{-1})^{-1} c*.
/// include_noise adds (sigma_hat * s_hat)^2; unseen points carry weight 1.
PredictiveDistribution predict_laplace(const HuberGpModel& m, const MatrixXd& Xstar,
                                       bool include_noise = true);

/// Convenience: model built from explicit components (no hyperparameter
/// search); used by tests and the quadratic-regime oracles.
HuberGpModel make_huber_model(const Dataset& D, const HuberConfig& cfg,
                              const KernelParams& params, const RobustWeighting& weighting,
                              double center = 0.0,
                              const FindModeOptions& opt = {});

}  // namespace robustgp

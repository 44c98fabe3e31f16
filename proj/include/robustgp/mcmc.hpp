#pragma once

#include <optional>
#include <string>
#include <vector>

#include "robustgp/kernel.hpp"
#include "robustgp/likelihoods.hpp"
#include "robustgp/projection_stats.hpp"
#include "robustgp/rng.hpp"
#include "robustgp/types.hpp"

namespace robustgp {

/// Scale-mixture sampler state: inliers share the variance sigma_g^2,
/// outlying points carry individual variances with an Exponential(beta_l)
/// prior, and theta holds the kernel hyperparameters.
struct MixtureState {
  std::vector<Index> inliers;
  std::vector<Index> outliers;
  double sigma_g2 = 1.0;
  VectorXd sigma_l2;  // aligned with `outliers`
  double beta_l = 1.0;
  KernelParams params;
  int iteration = 0;

  /// Diagonal of Sigma in observation order.
  VectorXd noise_diagonal(Index n) const;
};

struct ChainSettings {
  int total = 10000;
  int burn_in = 2000;
  int thin = 4;
  int chains = 2;
  std::uint64_t seed = 0;
  std::optional<KernelParams> fixed_kernel;  // sample only the noise side
  double prior_lo = 1e-4;  // log-uniform prior box for positive hyperparameters
  double prior_hi = 1e4;
};

struct LatentConditional {
  VectorXd mean;        // K (K + Sigma)^{-1} y
  MatrixXd cov_factor;  // lower Cholesky factor of K - K (K + Sigma)^{-1} K
  VectorXd var;         // diagonal of the conditional covariance
};

struct ChainOutput {
  /// Pooled retained samples, chain-major; columns follow coord_names:
  /// sigma_g2, beta_l, tau, s_1 .. s_d.
  MatrixXd samples;
  std::vector<std::string> coord_names;
  MatrixXd noise_diag;   // per retained sample: Sigma diagonal
  MatrixXd latent_mean;  // per retained sample: latent conditional mean
  MatrixXd latent_var;   // per retained sample: latent conditional variance
  VectorXd acceptance;   // per proposal class, post burn-in
  std::vector<std::string> acceptance_names;
  VectorXd ess;          // per coordinate, summed over chains
  VectorXd split_rhat;   // per coordinate
  int chains = 0;
  int per_chain = 0;  // retained per chain = (total - burn_in) / thin
  Dataset data;       // original responses
  double center = 0.0;
  HuberConfig cfg;
  VectorXd weights;
};

/// Deterministic initial state: the split comes from standardized residuals
/// at f = 0 with the robust scale of y; sigma_g^2 is the squared robust
/// scale, each outlier variance the squared residual, beta_l the reciprocal
/// mean outlier variance. The seed only jitters the kernel-parameter start
/// so parallel chains are overdispersed.
MixtureState init_chain(const Dataset& D, const HuberConfig& cfg, const VectorXd& w,
                        std::uint64_t seed);

/// Collapsed log target over the log coordinates:
///   log N(y | 0, K + Sigma) + n_g log C1 + n_l log C2
///   + sum_l [ log beta_l - beta_l sigma_l2_j + log sigma_l2_j ]
/// Log-uniform priors contribute only their box constraint (their density is
/// flat in log space); the log sigma_l2_j term is the Jacobian of sampling
/// the exponential-prior variances in log space. Returns -inf outside the
/// prior box and on factorization failure.
double mcmc_log_target(const MixtureState& st, const Dataset& D, const HuberConfig& cfg,
                       const ChainSettings& settings);

/// Per-class random-walk step sizes with dual-averaging adaptation.
/// Classes: sigma_g2, sigma_l2 (shared), beta_l, tau, s_1 .. s_d.
struct StepAdaptation {
  explicit StepAdaptation(Index n_classes, double init_step = 0.5);
  std::vector<double> mu, hbar, logbar, step;
  std::vector<int> t;
  std::vector<long> accepts, proposals;  // post burn-in tallies
  void update(Index cls, double accept_prob);
  void freeze();
};

/// One component-blocked Metropolis sweep in log space. Detailed balance
/// holds for each move; the residual split is untouched here.
void sample_hyperparams(MixtureState& st, const Dataset& D, const HuberConfig& cfg,
                        const ChainSettings& settings, RandomStream& rng,
                        StepAdaptation& adapt, bool adapting);

/// Exact Gaussian conditional of the latent function given Sigma and theta.
LatentConditional latent_conditional(const MixtureState& st, const Dataset& D);

/// Runs `settings.chains` chains with stream-split seeds and pools retained
/// samples. The inlier/outlier split is refreshed once per sweep from the
/// latent conditional mean. Bit-reproducible for fixed settings.
ChainOutput run_chain(const Dataset& D, const HuberConfig& cfg,
                      const RobustWeighting& weighting, const ChainSettings& settings);

/// Monte Carlo predictive average over all retained samples: mixture mean is
/// the average per-sample mean, mixture variance the average per-sample
/// variance plus the variance of per-sample means.
PredictiveDistribution predictive_average(const ChainOutput& chain, const MatrixXd& Xstar,
                                          bool include_noise = true,
                                          MatrixXd* per_sample_means = nullptr);

/// Effective sample size of one chain (initial positive sequence estimator).
double ess_single_chain(const VectorXd& x);

/// Split-Rhat over per-chain series (each chain halved).
double split_rhat_stat(const std::vector<VectorXd>& chains);

}  // namespace robustgp

#pragma once

#include <memory>

#include "robustgp/kernel.hpp"
#include "robustgp/optim.hpp"
#include "robustgp/types.hpp"

namespace robustgp {

/// Exact GP regression model with Gaussian likelihood. Immutable once built;
/// safe to share across threads for prediction.
struct ConjugateModel {
  KernelParams params;
  double noise_var = 1.0;
  double center = 0.0;  // subtracted from y before fitting, restored at prediction
  Dataset data;
  VectorXd alpha;  // R^{-1} (y - center), R = K + noise_var I
  std::shared_ptr<const SpdFactor> factor;
  double log_evidence = 0.0;
  bool converged = true;
};

struct EvidenceValue {
  double value;
  VectorXd grad;  // over [log sigma^2, log tau, log s_1 .. log s_d]
};

/// log N(y | 0, K + sigma^2 I) with its analytic gradient in log space.
EvidenceValue gaussian_log_evidence(const Dataset& D, double noise_var,
                                    const KernelParams& params);

/// Builds the cached factorization for the given hyperparameters.
ConjugateModel make_conjugate_model(const Dataset& D, const KernelParams& params,
                                    double noise_var, double center = 0.0);

/// ML-II fit: multistart gradient ascent of the evidence over
/// [log sigma^2, log tau, log s_1 .. log s_d]. Responses are centered by
/// their median; the center is restored at prediction.
ConjugateModel fit_ml2(const Dataset& D, const OptimizerSettings& opt = {});

PredictiveDistribution predict(const ConjugateModel& m, const MatrixXd& Xstar,
                               bool include_noise = true, bool full_cov = false);

}  // namespace robustgp

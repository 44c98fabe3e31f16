#pragma once

#include <Eigen/Dense>
#include <optional>

namespace robustgp {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;
using Index = Eigen::Index;

/// Training pair (y, X): n observations of a d-dimensional input.
struct Dataset {
  MatrixXd X;  // n x d, one row per observation
  VectorXd y;  // n responses

  Index n() const { return X.rows(); }
  Index dim() const { return X.cols(); }
};

/// Predictive mean and per-point variance at test inputs. The variance is
/// noise-inclusive when requested at prediction time; the full covariance is
/// materialized only on demand.
struct PredictiveDistribution {
  VectorXd mean;
  VectorXd var;
  std::optional<MatrixXd> cov;
};

}  // namespace robustgp

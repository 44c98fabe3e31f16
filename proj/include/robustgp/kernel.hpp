#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

#include "robustgp/errors.hpp"
#include "robustgp/types.hpp"

namespace robustgp {

/// Hyperparameters of the anisotropic squared-exponential kernel:
/// amplitude tau (output units) and one length scale per input dimension.
struct KernelParams {
  double amplitude = 1.0;
  VectorXd length_scales;

  Index dim() const { return length_scales.size(); }
  void validate() const;

  static KernelParams isotropic(double amplitude, double length_scale, Index d) {
    return {amplitude, VectorXd::Constant(d, length_scale)};
  }
};

/// k(a, b) = tau^2 exp(-sum_k (a_k - b_k)^2 / s_k^2)
template <typename DerivedA, typename DerivedB>
double kernel_eval(const Eigen::MatrixBase<DerivedA>& a,
                   const Eigen::MatrixBase<DerivedB>& b,
                   const KernelParams& params) {
  if (a.size() != b.size() || a.size() != params.dim())
    throw ConfigError("kernel_eval: dimension mismatch");
  double q = 0.0;
  for (Index k = 0; k < a.size(); ++k) {
    const double diff = (a(k) - b(k)) / params.length_scales(k);
    q += diff * diff;
  }
  return params.amplitude * params.amplitude * std::exp(-q);
}

/// Dense kernel matrix of the training inputs with a nonnegative diagonal
/// jitter. Symmetric by construction; diagonal is exactly tau^2 + jitter.
struct GramMatrix {
  MatrixXd K;
  double jitter = 0.0;
};

GramMatrix build_gram(const MatrixXd& X, const KernelParams& params, double jitter = 0.0);

/// k(X, Xstar), n x nstar.
MatrixXd cross_gram(const MatrixXd& X, const MatrixXd& Xstar, const KernelParams& params);

/// Cholesky factorization of a symmetric positive-definite matrix with
/// diagonal-jitter escalation: the plain factorization is attempted first,
/// then jitter starting at 1e-10 * scale_hint, multiplied by 10 per failure,
/// capped at 1e-4 * scale_hint. Beyond the cap a NumericalError is thrown.
class SpdFactor {
 public:
  explicit SpdFactor(const MatrixXd& M, double scale_hint = -1.0);

  template <typename Derived>
  typename Eigen::MatrixBase<Derived>::PlainObject solve(
      const Eigen::MatrixBase<Derived>& b) const {
    return llt_.solve(b);
  }

  /// log |M + applied_jitter * I| from the factor diagonal.
  double log_det() const;

  double applied_jitter() const { return applied_jitter_; }
  const Eigen::LLT<MatrixXd>& llt() const { return llt_; }
  Index size() const { return llt_.matrixLLT().rows(); }

 private:
  Eigen::LLT<MatrixXd> llt_;
  double applied_jitter_ = 0.0;
};

/// Solves M Z = B for SPD M (after jitter escalation). The log-determinant
/// of M is exposed through the optional output.
MatrixXd spd_solve(const MatrixXd& M, const MatrixXd& B, double* log_det = nullptr);

}  // namespace robustgp

#include "robustgp/kernel.hpp"

namespace robustgp {

void KernelParams::validate() const {
  if (!(amplitude > 0.0) || !std::isfinite(amplitude))
    throw ConfigError("KernelParams: amplitude must be strictly positive");
  if (length_scales.size() == 0)
    throw ConfigError("KernelParams: length_scales must be non-empty");
  for (Index k = 0; k < length_scales.size(); ++k) {
    if (!(length_scales(k) > 0.0) || !std::isfinite(length_scales(k)))
      throw ConfigError("KernelParams: length scales must be strictly positive");
  }
}

GramMatrix build_gram(const MatrixXd& X, const KernelParams& params, double jitter) {
  params.validate();
  if (X.cols() != params.dim())
    throw ConfigError("build_gram: input dimension does not match kernel parameters");
  if (X.rows() < 1) throw ConfigError("build_gram: need at least one row");
  if (jitter < 0.0) throw ConfigError("build_gram: jitter must be nonnegative");

  const Index n = X.rows();
  const MatrixXd Xs = X * params.length_scales.cwiseInverse().asDiagonal();
  const VectorXd sq = Xs.rowwise().squaredNorm();
  MatrixXd Q = sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * (Xs * Xs.transpose());
  const double tau2 = params.amplitude * params.amplitude;
  MatrixXd K = (-Q.cwiseMax(0.0)).array().exp().matrix() * tau2;
  K = ((K + K.transpose()) * 0.5).eval();
  K.diagonal().setConstant(tau2 + jitter);
  return {std::move(K), jitter};
}

MatrixXd cross_gram(const MatrixXd& X, const MatrixXd& Xstar, const KernelParams& params) {
  params.validate();
  if (X.cols() != params.dim() || Xstar.cols() != params.dim())
    throw ConfigError("cross_gram: input dimension does not match kernel parameters");
  const auto inv = params.length_scales.cwiseInverse().asDiagonal();
  const MatrixXd A = X * inv;
  const MatrixXd B = Xstar * inv;
  MatrixXd Q = A.rowwise().squaredNorm().replicate(1, B.rows()) +
               B.rowwise().squaredNorm().transpose().replicate(A.rows(), 1) -
               2.0 * (A * B.transpose());
  const double tau2 = params.amplitude * params.amplitude;
  return (-Q.cwiseMax(0.0)).array().exp().matrix() * tau2;
}

SpdFactor::SpdFactor(const MatrixXd& M, double scale_hint) {
  if (M.rows() != M.cols()) throw ConfigError("SpdFactor: matrix must be square");
  if (!M.allFinite()) throw NumericalError("SpdFactor: matrix has non-finite entries");
  double hint = scale_hint;
  if (!(hint > 0.0)) {
    hint = M.diagonal().cwiseAbs().mean();
    if (!(hint > 0.0)) hint = 1.0;
  }

  llt_.compute(M);
  if (llt_.info() == Eigen::Success) return;

  const double cap = 1e-4 * hint;
  for (double j = 1e-10 * hint; j <= cap * (1.0 + 1e-12); j *= 10.0) {
    MatrixXd Mj = M;
    Mj.diagonal().array() += j;
    llt_.compute(Mj);
    if (llt_.info() == Eigen::Success) {
      applied_jitter_ = j;
      return;
    }
  }
  throw NumericalError("SpdFactor: factorization failed beyond the jitter cap");
}

double SpdFactor::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

MatrixXd spd_solve(const MatrixXd& M, const MatrixXd& B, double* log_det) {
  if (M.rows() != B.rows()) throw ConfigError("spd_solve: dimension mismatch");
  const SpdFactor factor(M);
  if (log_det) *log_det = factor.log_det();
  return factor.solve(B);
}

}  // namespace robustgp

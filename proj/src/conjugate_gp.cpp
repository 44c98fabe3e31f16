#include "robustgp/conjugate_gp.hpp"

#include <cmath>

namespace robustgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

EvidenceValue gaussian_log_evidence(const Dataset& D, double noise_var,
                                    const KernelParams& params) {
  params.validate();
  if (!(noise_var > 0.0)) throw ConfigError("gaussian_log_evidence: noise variance must be positive");
  if (D.y.size() != D.n()) throw ConfigError("gaussian_log_evidence: y/X row mismatch");

  const Index n = D.n();
  const Index d = D.dim();
  const double tau2 = params.amplitude * params.amplitude;

  const GramMatrix gram = build_gram(D.X, params, 0.0);
  MatrixXd R = gram.K;
  R.diagonal().array() += noise_var;
  const SpdFactor factor(R, tau2 + noise_var);

  const VectorXd alpha = factor.solve(D.y);
  EvidenceValue ev;
  ev.value = -0.5 * D.y.dot(alpha) - 0.5 * factor.log_det() -
             0.5 * static_cast<double>(n) * kLog2Pi;

  // d/dtheta log evidence = 1/2 tr((alpha alpha^T - R^{-1}) dR/dtheta)
  const MatrixXd Rinv = factor.solve(MatrixXd::Identity(n, n));
  const MatrixXd A = alpha * alpha.transpose() - Rinv;

  ev.grad.resize(d + 2);
  ev.grad(0) = 0.5 * noise_var * A.trace();                        // log sigma^2
  ev.grad(1) = A.cwiseProduct(gram.K).sum();                       // log tau: dK = 2K
  for (Index k = 0; k < d; ++k) {
    const VectorXd xk = D.X.col(k);
    const double s2 = params.length_scales(k) * params.length_scales(k);
    MatrixXd Dk = xk.replicate(1, n) - xk.transpose().replicate(n, 1);
    Dk = Dk.cwiseProduct(Dk) * (2.0 / s2);
    ev.grad(2 + k) = 0.5 * A.cwiseProduct(gram.K.cwiseProduct(Dk)).sum();
  }
  return ev;
}

ConjugateModel make_conjugate_model(const Dataset& D, const KernelParams& params,
                                    double noise_var, double center) {
  params.validate();
  if (!(noise_var > 0.0)) throw ConfigError("make_conjugate_model: noise variance must be positive");

  ConjugateModel m;
  m.params = params;
  m.noise_var = noise_var;
  m.center = center;
  m.data = D;

  const double tau2 = params.amplitude * params.amplitude;
  MatrixXd R = build_gram(D.X, params, 0.0).K;
  R.diagonal().array() += noise_var;
  m.factor = std::make_shared<SpdFactor>(R, tau2 + noise_var);
  const VectorXd yc = (D.y.array() - center).matrix();
  m.alpha = m.factor->solve(yc);
  m.log_evidence = -0.5 * yc.dot(m.alpha) - 0.5 * m.factor->log_det() -
                   0.5 * static_cast<double>(D.n()) * kLog2Pi;
  return m;
}

ConjugateModel fit_ml2(const Dataset& D, const OptimizerSettings& opt) {
  if (D.n() < 2) throw ConfigError("fit_ml2: need at least two observations");
  const Index d = D.dim();

  // Conventional Gaussian pipeline: mean-center and normalize by the sample
  // standard deviation. This is the non-robust baseline, so its moments are
  // the ordinary (outlier-sensitive) ones.
  const double center = D.y.mean();
  const VectorXd yc = (D.y.array() - center).matrix();
  double unit = std::sqrt(yc.squaredNorm() / std::max<double>(1.0, D.n() - 1.0));
  if (!(unit > 0.0)) unit = 1.0;
  const Dataset Dc{D.X, yc / unit};

  auto unpack = [d](const VectorXd& x) {
    const double noise_var = std::exp(x(0));
    KernelParams p;
    p.amplitude = std::exp(x(1));
    p.length_scales = x.segment(2, d).array().exp().matrix();
    return std::make_pair(noise_var, p);
  };

  auto make_objective = [&]() -> std::pair<ObjectiveFn, GradientFn> {
    ObjectiveFn f = [&Dc, unpack](const VectorXd& x) {
      auto [nv, p] = unpack(x);
      return gaussian_log_evidence(Dc, nv, p).value;
    };
    GradientFn g = [&Dc, unpack](const VectorXd& x) {
      auto [nv, p] = unpack(x);
      return gaussian_log_evidence(Dc, nv, p).grad;
    };
    return {std::move(f), std::move(g)};
  };

  const OptimResult res = maximize_restarts(d + 2, make_objective, opt);
  auto [noise_var, params] = unpack(res.x);
  params.amplitude *= unit;
  noise_var *= unit * unit;
  ConjugateModel m = make_conjugate_model(D, params, noise_var, center);
  // density transform back to response units: ln E(y) = ln E(y/u) - n ln u
  m.log_evidence = res.value - static_cast<double>(D.n()) * std::log(unit);
  m.converged = res.converged;
  return m;
}

PredictiveDistribution predict(const ConjugateModel& m, const MatrixXd& Xstar,
                               bool include_noise, bool full_cov) {
  if (Xstar.cols() != m.data.dim()) throw ConfigError("predict: test input dimension mismatch");

  const MatrixXd C = cross_gram(m.data.X, Xstar, m.params);
  const double tau2 = m.params.amplitude * m.params.amplitude;

  PredictiveDistribution out;
  out.mean = C.transpose() * m.alpha;
  out.mean.array() += m.center;

  const MatrixXd RinvC = m.factor->solve(C);
  out.var.resize(Xstar.rows());
  for (Index j = 0; j < Xstar.rows(); ++j) {
    const double latent = tau2 - C.col(j).dot(RinvC.col(j));
    out.var(j) = std::max(latent, 1e-12 * tau2);
  }
  if (include_noise) out.var.array() += m.noise_var;

  if (full_cov) {
    MatrixXd V = cross_gram(Xstar, Xstar, m.params) - C.transpose() * RinvC;
    if (include_noise) V.diagonal().array() += m.noise_var;
    out.cov = std::move(V);
  }
  return out;
}

}  // namespace robustgp

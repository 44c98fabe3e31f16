#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <robustgp/kernel.hpp>
#include <robustgp/rng.hpp>

#include "oracles.hpp"

using namespace robustgp;

namespace {
KernelParams params_1d(double tau, double s) {
  return KernelParams::isotropic(tau, s, 1);
}
}  // namespace

TEST_CASE("kernel_eval at zero distance returns tau^2") {
  RandomStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.below(4));
    KernelParams p;
    p.amplitude = std::exp(rng.uniform(-1.0, 1.0));
    p.length_scales = VectorXd::NullaryExpr(d, [&](Index) { return std::exp(rng.uniform(-1.0, 1.0)); });
    VectorXd x = VectorXd::NullaryExpr(d, [&](Index) { return rng.normal(); });
    CHECK(kernel_eval(x, x, p) == doctest::Approx(p.amplitude * p.amplitude).epsilon(1e-15));
  }
}

TEST_CASE("kernel_eval unit example") {
  VectorXd a = VectorXd::Zero(1);
  VectorXd b = VectorXd::Ones(1);
  CHECK(kernel_eval(a, b, params_1d(1.0, 1.0)) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-14));
}

TEST_CASE("kernel_eval is symmetric") {
  RandomStream rng(11);
  KernelParams p;
  p.amplitude = 1.3;
  p.length_scales = VectorXd::Constant(3, 0.7);
  p.length_scales(2) = 2.0;
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd a = VectorXd::NullaryExpr(3, [&](Index) { return rng.normal(); });
    VectorXd b = VectorXd::NullaryExpr(3, [&](Index) { return rng.normal(); });
    CHECK(kernel_eval(a, b, p) == doctest::Approx(kernel_eval(b, a, p)).epsilon(1e-15));
  }
}

TEST_CASE("kernel_eval decreases in each coordinate distance") {
  KernelParams p;
  p.amplitude = 1.1;
  p.length_scales.resize(2);
  p.length_scales << 0.8, 1.7;
  VectorXd a(2), b(2);
  a << 0.3, -0.4;
  for (int k = 0; k < 2; ++k) {
    double prev = std::numeric_limits<double>::infinity();
    for (double delta = 0.0; delta < 3.0; delta += 0.17) {
      b = a;
      b(k) += delta;
      const double v = kernel_eval(a, b, p);
      CHECK(v < prev + 1e-15);
      prev = v;
    }
  }
}

TEST_CASE("kernel_eval rejects dimension mismatch") {
  VectorXd a = VectorXd::Zero(2);
  VectorXd b = VectorXd::Zero(3);
  CHECK_THROWS_AS(kernel_eval(a, b, params_1d(1.0, 1.0)), ConfigError);
}

TEST_CASE("build_gram n=1") {
  MatrixXd X(1, 1);
  X << 0.4;
  const auto g = build_gram(X, params_1d(2.0, 1.0), 0.5);
  CHECK(g.K.rows() == 1);
  CHECK(g.K(0, 0) == doctest::Approx(4.5).epsilon(1e-15));
}

TEST_CASE("build_gram with duplicated rows needs jitter escalation") {
  MatrixXd X(2, 1);
  X << 1.0, 1.0;
  const auto g = build_gram(X, params_1d(1.0, 1.0), 0.0);
  CHECK(g.K(0, 1) == doctest::Approx(1.0));
  CHECK(g.K(0, 0) == doctest::Approx(1.0));
  // Exactly singular: plain Cholesky must fail, escalation must save it.
  SpdFactor f(g.K, 1.0);
  CHECK(f.applied_jitter() > 0.0);
  CHECK(f.applied_jitter() <= 1e-4);
}

TEST_CASE("gram matrices are positive semidefinite before jitter") {
  RandomStream rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd X(5, 2);
    for (Index i = 0; i < X.size(); ++i) X(i / 2, i % 2) = rng.normal();
    KernelParams p;
    p.amplitude = 1.2;
    p.length_scales = VectorXd::Constant(2, 0.9);
    const auto g = build_gram(X, p, 0.0);
    CHECK(((g.K - g.K.transpose()).cwiseAbs().maxCoeff()) == doctest::Approx(0.0));
    CHECK(oracle::min_eigenvalue_power(g.K) >= -1e-9);
  }
}

TEST_CASE("gram factorizable with the spec jitter") {
  RandomStream rng(33);
  MatrixXd X(8, 1);
  for (Index i = 0; i < 8; ++i) X(i, 0) = rng.uniform(-2.0, 2.0);
  X(5, 0) = X(4, 0);  // duplicate row
  const auto p = params_1d(1.5, 1.0);
  const double tau2 = p.amplitude * p.amplitude;
  const auto g = build_gram(X, p, 1e-10 * tau2);
  CHECK_NOTHROW(SpdFactor(g.K, tau2));
}

TEST_CASE("spd_solve identity and diagonal examples") {
  MatrixXd I = MatrixXd::Identity(3, 3);
  MatrixXd B(3, 2);
  B << 1, 2, 3, 4, 5, 6;
  CHECK((spd_solve(I, B) - B).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  MatrixXd M(2, 2);
  M << 2, 0, 0, 4;
  MatrixXd b(2, 1);
  b << 2, 4;
  double logdet = 0.0;
  const MatrixXd z = spd_solve(M, b, &logdet);
  CHECK(z(0, 0) == doctest::Approx(1.0));
  CHECK(z(1, 0) == doctest::Approx(1.0));
  CHECK(logdet == doctest::Approx(std::log(8.0)).epsilon(1e-14));
}

TEST_CASE("spd_solve against elimination oracle") {
  RandomStream rng(5);
  MatrixXd A(6, 6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j) A(i, j) = rng.normal();
  MatrixXd M = A * A.transpose() + 0.5 * MatrixXd::Identity(6, 6);
  MatrixXd B(6, 3);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 3; ++j) B(i, j) = rng.normal();

  double logdet = 0.0;
  const MatrixXd Z = spd_solve(M, B, &logdet);
  const MatrixXd Z_oracle = oracle::gauss_jordan_inverse(M) * B;
  CHECK((Z - Z_oracle).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(logdet == doctest::Approx(oracle::logdet_by_elimination(M)).epsilon(1e-10));

  // residual contract
  CHECK((M * Z - B).cwiseAbs().maxCoeff() / B.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("log_det matches the factor diagonal") {
  RandomStream rng(9);
  MatrixXd A(5, 5);
  for (Index i = 0; i < 25; ++i) A(i / 5, i % 5) = rng.normal();
  MatrixXd M = A * A.transpose() + MatrixXd::Identity(5, 5);
  SpdFactor f(M);
  const double from_diag = 2.0 * f.llt().matrixLLT().diagonal().array().log().sum();
  CHECK(f.log_det() == doctest::Approx(from_diag).epsilon(1e-10));
}

TEST_CASE("SpdFactor throws beyond the jitter cap") {
  MatrixXd M(2, 2);
  M << 1.0, 2.0, 2.0, 1.0;  // indefinite; no small jitter can fix it
  CHECK_THROWS_AS(SpdFactor(M, 1.0), NumericalError);
}

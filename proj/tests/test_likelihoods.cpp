#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <robustgp/likelihoods.hpp>
#include <robustgp/rng.hpp>

#include "oracles.hpp"

using namespace robustgp;

TEST_CASE("huber_rho branches and continuity") {
  CHECK(huber_rho(0.0, 1.5) == 0.0);
  CHECK(huber_rho(1.5, 1.5) == doctest::Approx(1.125));   // both branches meet
  CHECK(huber_rho(3.0, 1.5) == doctest::Approx(3.375));
  CHECK(huber_rho(-3.0, 1.5) == doctest::Approx(3.375));
  // continuity of the first derivative at +-b via central differences
  const double d_in = oracle::central_diff([](double r) { return huber_rho(r, 1.5); }, 1.5 - 1e-6, 1e-7);
  const double d_out = oracle::central_diff([](double r) { return huber_rho(r, 1.5); }, 1.5 + 1e-6, 1e-7);
  CHECK(d_in == doctest::Approx(d_out).epsilon(1e-4));
}

TEST_CASE("pseudo_huber values and Taylor behavior at zero") {
  const auto at0 = pseudo_huber(0.0, 1.5);
  CHECK(at0.value == 0.0);
  CHECK(at0.d1 == 0.0);
  CHECK(at0.d2 == doctest::Approx(1.0));

  const auto at_b = pseudo_huber(1.5, 1.5);
  CHECK(at_b.value == doctest::Approx(2.25 * (std::sqrt(2.0) - 1.0)).epsilon(1e-12));
  CHECK(at_b.value == doctest::Approx(0.931980).epsilon(1e-6));
}

TEST_CASE("pseudo_huber derivatives match finite differences on a grid") {
  for (double b : {0.5, 1.5, 10.0}) {
    for (double r = -10.0; r <= 10.0; r += 0.37) {
      const auto ph = pseudo_huber(r, b);
      const double fd1 =
          oracle::central_diff([b](double t) { return pseudo_huber(t, b).value; }, r, 1e-5);
      const double fd2 =
          oracle::central_diff([b](double t) { return pseudo_huber(t, b).d1; }, r, 1e-5);
      CHECK(ph.d1 == doctest::Approx(fd1).epsilon(1e-6));
      CHECK(ph.d2 == doctest::Approx(fd2).epsilon(1e-6));
      CHECK(ph.d2 > 0.0);
    }
  }
}

TEST_CASE("loss orderings and evenness") {
  RandomStream rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = rng.uniform(-20.0, 20.0);
    const double b = std::exp(rng.uniform(-1.0, 2.0));
    CHECK(huber_rho(r, b) == doctest::Approx(huber_rho(-r, b)).epsilon(1e-15));
    const auto ph = pseudo_huber(r, b);
    CHECK(ph.value == doctest::Approx(pseudo_huber(-r, b).value).epsilon(1e-15));
    CHECK(ph.value <= huber_rho(r, b) + 1e-12);
    CHECK(huber_rho(r, b) <= 0.5 * r * r + 1e-12);
  }
}

TEST_CASE("pseudo_huber linear asymptote") {
  for (double b : {0.5, 1.5}) {
    const double r = 1e4 * b;
    const double gap = pseudo_huber(r, b).value - b * r;
    CHECK(gap == doctest::Approx(-b * b).epsilon(1e-3));
  }
}

TEST_CASE("huber_log_likelihood at the mode is the pure normalization") {
  HuberConfig cfg;
  cfg.sigma = 0.7;
  const Index n = 5;
  VectorXd y(n), w(n);
  y << 1, 2, 3, 4, 5;
  w << 1.0, 0.9, 0.8, 1.0, 0.5;
  const double s = 1.3;
  // All loss terms vanish at the mode; the density scale is sigma*s for
  // every point (weights act through the loss, not the normalization).
  const double ll = huber_log_likelihood(y, y, cfg, w, s, false);
  const double expected =
      n * std::log((1.0 - cfg.epsilon) /
                   (std::sqrt(2.0 * 3.14159265358979323846) * cfg.sigma * s));
  CHECK(ll == doctest::Approx(expected).epsilon(1e-12));
  CHECK(huber_log_likelihood(y, y, cfg, w, s, true) == doctest::Approx(ll).epsilon(1e-12));
}

TEST_CASE("quadratic branch equals weighted normal log density plus log(1-eps)") {
  HuberConfig cfg;
  cfg.sigma = 0.5;
  VectorXd y(1), f(1), w(1);
  y << 1.2;
  f << 1.0;
  w << 1.0;
  const double s = 1.0;
  const double r = (y(0) - f(0)) / (w(0) * cfg.sigma * s);
  REQUIRE(std::abs(r) < cfg.b);
  const double ll = huber_log_likelihood(y, f, cfg, w, s, false);
  const double sd = cfg.sigma * s;
  const double normal_logpdf = -0.5 * std::log(2.0 * 3.14159265358979323846 * sd * sd) -
                               0.5 * (y(0) - f(0)) * (y(0) - f(0)) / (sd * sd);
  CHECK(ll == doctest::Approx(std::log(1.0 - cfg.epsilon) + normal_logpdf).epsilon(1e-12));
}

TEST_CASE("log-likelihood is non-increasing in |y - f|") {
  HuberConfig cfg;
  VectorXd y(1), w(1);
  y << 0.0;
  w << 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (double shift = 0.0; shift < 8.0; shift += 0.25) {
    VectorXd f(1);
    f << shift;
    for (bool pseudo : {false, true}) {
      const double ll = huber_log_likelihood(y, f, cfg, w, 1.0, pseudo);
      if (!pseudo) {
        CHECK(ll <= prev + 1e-12);
        prev = ll;
      }
    }
  }
}

TEST_CASE("Gaussian-regime equivalence up to n log(1-eps)") {
  RandomStream rng(9);
  HuberConfig cfg;
  cfg.b = 1e6;
  cfg.sigma = 0.8;
  const Index n = 12;
  VectorXd y(n), f(n), w = VectorXd::Ones(n);
  for (Index i = 0; i < n; ++i) {
    y(i) = rng.normal();
    f(i) = y(i) + 0.3 * rng.normal();
  }
  const double s = 1.1;
  const double ll = huber_log_likelihood(y, f, cfg, w, s, false);
  double normal_sum = 0.0;
  const double sd = cfg.sigma * s;
  for (Index i = 0; i < n; ++i)
    normal_sum += -0.5 * std::log(2.0 * 3.14159265358979323846 * sd * sd) -
                  0.5 * (y(i) - f(i)) * (y(i) - f(i)) / (sd * sd);
  CHECK(ll - normal_sum ==
        doctest::Approx(n * std::log(1.0 - cfg.epsilon)).epsilon(1e-10));
}

TEST_CASE("pseudo log-likelihood is concave along random lines") {
  RandomStream rng(31);
  HuberConfig cfg;
  const Index n = 6;
  VectorXd y(n), w(n);
  for (Index i = 0; i < n; ++i) {
    y(i) = rng.normal(0.0, 2.0);
    w(i) = rng.uniform(0.3, 1.0);
  }
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd f0(n), dir(n);
    for (Index i = 0; i < n; ++i) {
      f0(i) = rng.normal(0.0, 3.0);
      dir(i) = rng.normal();
    }
    auto phi = [&](double t) {
      return huber_log_likelihood(y, f0 + t * dir, cfg, w, 1.0, true);
    };
    const double h = 0.05;
    for (double t = -2.0; t <= 2.0; t += 0.5) {
      const double second = phi(t + h) - 2.0 * phi(t) + phi(t - h);
      CHECK(second <= 1e-9);
    }
  }
}

TEST_CASE("split_residuals partition and tie rule") {
  HuberConfig cfg;  // b = 1.5
  VectorXd w = VectorXd::Ones(3);

  SUBCASE("all zero residuals") {
    VectorXd y = VectorXd::Ones(3);
    const auto split = split_residuals(y, y, cfg, w, 1.0);
    CHECK(split.inliers.size() == 3);
    CHECK(split.outliers.empty());
  }

  SUBCASE("exact threshold is an inlier") {
    VectorXd y(1), f(1), w1(1);
    y << 1.5;
    f << 0.0;
    w1 << 1.0;
    const auto split = split_residuals(y, f, cfg, w1, 1.0);
    CHECK(split.inliers.size() == 1);
  }

  SUBCASE("mixed vector") {
    VectorXd y(3), f = VectorXd::Zero(3);
    y << -3.0, 0.0, 0.75;  // r_S = (-2b, 0, b/2)
    const auto split = split_residuals(y, f, cfg, w, 1.0);
    REQUIRE(split.outliers.size() == 1);
    CHECK(split.outliers[0] == 0);
    REQUIRE(split.inliers.size() == 2);
    CHECK(split.inliers[0] == 1);
    CHECK(split.inliers[1] == 2);
  }
}

TEST_CASE("mixture_constants") {
  HuberConfig cfg;  // eps = 0.45, b = 1.5
  const auto mc = mixture_constants(cfg);
  CHECK(mc.c1 == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(mc.c2 == doctest::Approx(std::sqrt(3.14159265358979323846 / 2.0) *
                                 std::exp(1.125)).epsilon(1e-14));
  CHECK(mc.c2 == doctest::Approx(3.8601).epsilon(1e-3));

  HuberConfig tiny = cfg;
  tiny.b = 1e-9;
  CHECK(mixture_constants(tiny).c2 == doctest::Approx(1.2533).epsilon(1e-4));
}

TEST_CASE("argument validation") {
  HuberConfig cfg;
  VectorXd y(2), f(2), w(2);
  y.setZero();
  f.setZero();
  w.setOnes();
  CHECK_THROWS_AS(huber_log_likelihood(y, f, cfg, w, 0.0, false), ConfigError);
  CHECK_THROWS_AS(huber_log_likelihood(y, f, cfg, w, -1.0, false), ConfigError);
  HuberConfig bad = cfg;
  bad.sigma = -2.0;
  CHECK_THROWS_AS(huber_log_likelihood(y, f, bad, w, 1.0, false), ConfigError);
  VectorXd w_bad(2);
  w_bad << 1.0, 1.5;
  CHECK_THROWS_AS(huber_log_likelihood(y, f, cfg, w_bad, 1.0, false), ConfigError);
}

TEST_CASE("downweighted points have proportionally smaller clipped pull") {
  // The likelihood gradient in f saturates at w * b / (sigma * s): smaller
  // weights mean earlier clipping and a smaller bounded influence.
  HuberConfig cfg;
  const double s = 1.0;
  for (double w_val : {1.0, 0.5, 0.2}) {
    VectorXd y(1), f(1), w(1);
    y << 1e6;
    f << 0.0;
    w << w_val;
    const double pull = oracle::central_diff(
        [&](double t) {
          VectorXd ft(1);
          ft << t;
          return huber_log_likelihood(y, ft, cfg, w, s, true);
        },
        0.0, 1e-3);
    CHECK(pull == doctest::Approx(w_val * cfg.b / (cfg.sigma * s)).epsilon(1e-6));
  }
}

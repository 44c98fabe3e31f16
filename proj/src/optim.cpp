#include "robustgp/optim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <thread>
#include <vector>

#include "robustgp/errors.hpp"
#include "robustgp/rng.hpp"

namespace robustgp {

namespace {

constexpr double kLogLo = -18.420680743952367;  // log 1e-8
constexpr double kLogHi = 18.420680743952367;   // log 1e8

double safe_eval(const ObjectiveFn& f, const VectorXd& x) {
  double v;
  try {
    v = f(x);
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

VectorXd clamp_box(VectorXd x, const OptimizerSettings& s) {
  x = x.cwiseMax(kLogLo).cwiseMin(kLogHi);
  if (s.box_lo) x = x.cwiseMax(s.box_lo->array().log().matrix());
  if (s.box_hi) x = x.cwiseMin(s.box_hi->array().log().matrix());
  return x;
}

}  // namespace

OptimResult ascend(const ObjectiveFn& f, const GradientFn& grad, const VectorXd& x0,
                   const OptimizerSettings& s) {
  OptimResult res;
  res.x = clamp_box(x0, s);
  res.value = safe_eval(f, res.x);
  if (!std::isfinite(res.value))
    throw NumericalError("ascend: objective is non-finite at the initial point");

  double step_init = 0.1;
  // Polak-Ribiere conjugate directions with a backtracking line search;
  // falls back to steepest ascent whenever the conjugate direction fails.
  VectorXd g_prev, d_prev;
  // Ridge walking can spend many iterations gaining nothing; a trailing
  // window stall check cuts it off once the objective is flat at numerical
  // resolution.
  constexpr int kStallWindow = 40;
  constexpr double kStallTol = 1e-5;
  double window_best = res.value;
  int window_start = 0;

  auto line_search = [&](const VectorXd& dir) {
    const double norm = dir.cwiseAbs().maxCoeff();
    if (!(norm > 0.0)) return false;
    int trials = 0;
    for (double t = step_init; t >= 1e-12 && trials < 40; t *= 0.5, ++trials) {
      const VectorXd x_try = clamp_box(res.x + (t / norm) * dir, s);
      const double v_try = safe_eval(f, x_try);
      if (v_try > res.value) {
        res.x = x_try;
        res.value = v_try;
        step_init = std::min(2.0 * t, 1.0);
        return true;
      }
    }
    return false;
  };

  for (res.iterations = 0; res.iterations < s.max_iters; ++res.iterations) {
    VectorXd g = grad(res.x);
    if (!g.allFinite()) break;
    if (g.cwiseAbs().maxCoeff() < s.grad_tol) {
      res.converged = true;
      break;
    }

    VectorXd dir = g;
    bool conjugate = false;
    if (d_prev.size() == g.size()) {
      const double denom = g_prev.squaredNorm();
      const double beta =
          denom > 0.0 ? std::max(0.0, g.dot(g - g_prev) / denom) : 0.0;
      if (beta > 0.0) {
        dir = g + beta * d_prev;
        conjugate = dir.dot(g) > 0.0;  // keep it an ascent direction
        if (!conjugate) dir = g;
      }
    }

    bool improved = line_search(dir);
    if (!improved && conjugate) {
      dir = g;
      improved = line_search(dir);
    }
    if (!improved) break;  // stalled: no ascent at line-search resolution

    g_prev = std::move(g);
    d_prev = std::move(dir);

    if (res.iterations - window_start >= kStallWindow) {
      if (res.value - window_best <= kStallTol) break;
      window_best = res.value;
      window_start = res.iterations;
    }
  }
  return res;
}

GradientFn fd_gradient(const ObjectiveFn& f, double step) {
  return [f, step](const VectorXd& x) {
    VectorXd g(x.size());
    VectorXd xp = x;
    for (Index k = 0; k < x.size(); ++k) {
      const double orig = x(k);
      xp(k) = orig + step;
      const double up = safe_eval(f, xp);
      xp(k) = orig - step;
      const double dn = safe_eval(f, xp);
      xp(k) = orig;
      g(k) = (std::isfinite(up) && std::isfinite(dn)) ? (up - dn) / (2.0 * step) : 0.0;
    }
    return g;
  };
}

int effective_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ROBUSTGP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

OptimResult maximize_restarts(
    Index dim,
    const std::function<std::pair<ObjectiveFn, GradientFn>()>& make_objective,
    const OptimizerSettings& s) {
  if (s.restarts < 1) throw ConfigError("maximize_restarts: need at least one restart");

  if (s.anchor && s.anchor->size() != dim)
    throw ConfigError("maximize_restarts: anchor has wrong size");
  if ((s.box_lo && s.box_lo->size() != dim) || (s.box_hi && s.box_hi->size() != dim))
    throw ConfigError("maximize_restarts: trust box has wrong size");

  std::vector<VectorXd> starts;
  starts.reserve(s.restarts);
  for (int r = 0; r < s.restarts; ++r) {
    if (r == 0 && s.init) {
      if (s.init->size() != dim) throw ConfigError("maximize_restarts: init has wrong size");
      starts.push_back(s.init->array().log().matrix());
      continue;
    }
    if (r == 0 && s.anchor) {
      starts.push_back(s.anchor->array().log().matrix());
      continue;
    }
    RandomStream rng(stream_seed(s.seed, 0x5e5 + r));
    VectorXd x0(dim);
    for (Index k = 0; k < dim; ++k) {
      const double lo = s.box_lo ? std::log((*s.box_lo)(k)) : std::log(s.init_lo);
      const double hi = s.box_hi ? std::log((*s.box_hi)(k)) : std::log(s.init_hi);
      x0(k) = rng.uniform(lo, hi);
    }
    starts.push_back(std::move(x0));
  }

  auto run_one = [&](int r) -> OptimResult {
    auto [f, g] = make_objective();
    try {
      return ascend(f, g, starts[r], s);
    } catch (const NumericalError&) {
      OptimResult bad;
      bad.x = starts[r];
      bad.value = -std::numeric_limits<double>::infinity();
      return bad;
    }
  };

  std::vector<OptimResult> results(s.restarts);
  const int pool = std::min<int>(effective_threads(s.threads), s.restarts);
  if (pool <= 1) {
    for (int r = 0; r < s.restarts; ++r) results[r] = run_one(r);
  } else {
    std::vector<std::future<void>> futs;
    std::atomic<int> next{0};
    for (int t = 0; t < pool; ++t) {
      futs.push_back(std::async(std::launch::async, [&]() {
        for (int r = next.fetch_add(1); r < s.restarts; r = next.fetch_add(1))
          results[r] = run_one(r);
      }));
    }
    for (auto& f : futs) f.get();
  }

  int best = -1;
  for (int r = 0; r < s.restarts; ++r) {
    if (!std::isfinite(results[r].value)) continue;
    if (best < 0 || results[r].value > results[best].value) best = r;
  }
  if (best < 0)
    throw NumericalError("maximize_restarts: objective non-finite at every restart");
  return results[best];
}

}  // namespace robustgp

#pragma once

#include <functional>
#include <optional>

#include "robustgp/types.hpp"

namespace robustgp {

/// Log-space gradient-ascent settings shared by the evidence maximizers.
/// Restarts are drawn log-uniform over [init_lo, init_hi] per coordinate;
/// an explicit init replaces the first restart.
struct OptimizerSettings {
  int max_iters = 500;
  int restarts = 5;
  double grad_tol = 1e-5;
  double init_lo = 1e-2;
  double init_hi = 1e2;
  std::uint64_t seed = 0;
  std::optional<VectorXd> init;  // natural-scale parameters
  int threads = 0;               // 0: hardware concurrency

  /// Trust-box mode: iterates and restart draws are confined to
  /// [box_lo, box_hi] (natural scale, per coordinate); restart 0 starts at
  /// `anchor`. Used when the objective is only trusted locally.
  std::optional<VectorXd> anchor;
  std::optional<VectorXd> box_lo;
  std::optional<VectorXd> box_hi;
};

struct OptimResult {
  VectorXd x;  // log-space argmax
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

using ObjectiveFn = std::function<double(const VectorXd&)>;
using GradientFn = std::function<VectorXd(const VectorXd&)>;

/// Single-start ascent with backtracking line search. Non-finite objective
/// values are treated as -inf; coordinates are kept inside a wide log box.
OptimResult ascend(const ObjectiveFn& f, const GradientFn& grad, const VectorXd& x0,
                   const OptimizerSettings& s);

/// Multi-restart driver. make_objective is invoked once per restart so each
/// restart can hold private state (warm starts); ties break toward the lower
/// restart index, so the result is independent of the thread count.
OptimResult maximize_restarts(
    Index dim,
    const std::function<std::pair<ObjectiveFn, GradientFn>()>& make_objective,
    const OptimizerSettings& s);

/// Central finite-difference gradient in log space.
GradientFn fd_gradient(const ObjectiveFn& f, double step = 1e-4);

/// Worker pool size: ROBUSTGP_THREADS if set, else hardware concurrency.
int effective_threads(int requested);

}  // namespace robustgp

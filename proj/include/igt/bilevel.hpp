#pragma once

// Bilevel problem contract shared by every environment and optimizer, plus
// decision-regret and optimality-gap bookkeeping.

#include "igt/core.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace igt {

/// Per-round side information visible to the learner before it decides
/// (features, state, map index, start/goal cells, ...).
struct Context {
  Vector values;
  std::vector<int> indices;
};

/// Environment outcome z_t revealed after the round's delay.
struct Outcome {
  Vector values;
};

/// Snapshot of one dispatched round. Immutable once created.
struct OutcomeRecord {
  int round = 0;
  Context context;
  Outcome outcome;
  ParamVector dispatch_params;
  DecisionVector dispatch_decision;
};

using OutcomeRecordPtr = std::shared_ptr<const OutcomeRecord>;

struct InnerSolverConfig {
  int steps = 10;
  double step_size = 0.01;
  bool warm_start = true;

  void validate() const {
    if (steps < 1) throw Error(ErrorKind::kConfig, "inner steps K must be >= 1");
    if (!(step_size > 0.0)) throw Error(ErrorKind::kConfig, "inner step size must be > 0");
  }
};

struct InnerSolveReport {
  DecisionVector solution;
  int iterations_used = 0;
  double residual_norm = 0.0;     // ||grad_w L_model|| at exit
  double epsilon_estimate = 0.0;  // ||w - w*(theta)|| when exact_inner exists
  int floored_entries = 0;        // entries raised to a positivity floor
};

class SurrogateGradient;

/// The contract every environment implements. All Hessian information is
/// exposed as matrix-free products.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual std::string_view name() const = 0;
  virtual Index param_dim() const = 0;
  virtual Index decision_dim() const = 0;

  virtual double model_loss(const DecisionVector& w, const ParamVector& theta,
                            const Context& ctx) const = 0;
  virtual double true_loss(const DecisionVector& w, const ParamVector& theta, const Context& ctx,
                           const Outcome& z) const = 0;
  virtual DecisionVector grad_w_model(const DecisionVector& w, const ParamVector& theta,
                                      const Context& ctx) const = 0;
  virtual DecisionVector grad_w_true(const DecisionVector& w, const ParamVector& theta,
                                     const Context& ctx, const Outcome& z) const = 0;
  virtual ParamVector grad_theta_true_fixed_w(const DecisionVector& w, const ParamVector& theta,
                                              const Context& ctx, const Outcome& z) const = 0;
  virtual DecisionVector hess_ww_model_vp(const DecisionVector& w, const ParamVector& theta,
                                          const Context& ctx, const DecisionVector& v) const = 0;
  virtual ParamVector cross_partial_transpose_vp(const DecisionVector& w,
                                                 const ParamVector& theta, const Context& ctx,
                                                 const DecisionVector& v) const = 0;

  /// w*(theta) when a closed form (or a converged reference solve) exists.
  virtual std::optional<DecisionVector> exact_inner(const ParamVector& theta,
                                                    const Context& ctx) const = 0;

  /// The approximate inner solve used each round.
  virtual InnerSolveReport solve_inner(const ParamVector& theta, const Context& ctx,
                                       const DecisionVector& warm) const = 0;

  /// Projection onto the tangent space of the feasible set of w. Identity
  /// for unconstrained decisions.
  virtual DecisionVector project_tangent(const DecisionVector& /*w*/,
                                         const DecisionVector& v) const {
    return v;
  }

  /// Exact solution of H_w v = rhs (rhs already in the tangent space) for
  /// problems whose Hessian has exploitable structure; nullopt selects CG.
  virtual std::optional<DecisionVector> direct_adjoint(const DecisionVector& /*w*/,
                                                       const ParamVector& /*theta*/,
                                                       const Context& /*ctx*/,
                                                       const DecisionVector& /*rhs*/) const {
    return std::nullopt;
  }

  // Two-stage (prediction-error) interface. Environments without a
  // prediction target return nullopt from prediction_target().
  virtual std::optional<Vector> prediction_target(const Context& /*ctx*/,
                                                  const OutcomeRecord& /*rec*/) const {
    return std::nullopt;
  }
  virtual Vector prediction(const ParamVector& /*theta*/, const OutcomeRecord& /*rec*/) const {
    throw Error(ErrorKind::kUnavailable, std::string(name()) + " has no prediction model");
  }
  /// J_pred(theta)^T r for the prediction above.
  virtual ParamVector prediction_jacobian_transpose_vp(const ParamVector& /*theta*/,
                                                       const OutcomeRecord& /*rec*/,
                                                       const Vector& /*r*/) const {
    throw Error(ErrorKind::kUnavailable, std::string(name()) + " has no prediction model");
  }

  /// Non-null for environments whose outer gradient is not an adjoint
  /// hypergradient (combinatorial inner solvers).
  virtual const SurrogateGradient* surrogate() const { return nullptr; }
};

/// One step of a learner trajectory as seen by the regret accounting.
struct TrajectoryStep {
  ParamVector theta;
  DecisionVector w;
  Context context;
  Outcome outcome;
};

struct RegretResult {
  double regret = 0.0;
  double cumulative_loss = 0.0;
  double comparator_loss = 0.0;
  bool comparator_available = true;
};

/// Sum_t L_true(w_t; theta_t, z_t) - Sum_t L_true(w*(c); c, z_t). When the
/// comparator's inner solution is unavailable the comparator term is dropped
/// and the result is flagged.
inline RegretResult decision_regret(std::span<const TrajectoryStep> trajectory,
                                    const BilevelProblem& problem, const ParamVector& comparator) {
  RegretResult r;
  for (const auto& step : trajectory) {
    r.cumulative_loss += problem.true_loss(step.w, step.theta, step.context, step.outcome);
    if (r.comparator_available) {
      auto w_star = problem.exact_inner(comparator, step.context);
      if (!w_star) {
        r.comparator_available = false;
        r.comparator_loss = 0.0;
        continue;
      }
      r.comparator_loss += problem.true_loss(*w_star, comparator, step.context, step.outcome);
    }
  }
  r.regret = r.comparator_available ? r.cumulative_loss - r.comparator_loss : r.cumulative_loss;
  return r;
}

/// Excess path cost over the oracle, clamped at zero.
inline double optimality_gap(double path_cost, double oracle_cost) {
  constexpr double kTol = 1e-9;
  if (oracle_cost > path_cost + kTol) {
    throw Error(ErrorKind::kOracleNotOptimal,
                "oracle cost " + std::to_string(oracle_cost) + " exceeds path cost " +
                    std::to_string(path_cost));
  }
  return std::max(0.0, path_cost - oracle_cost);
}

}  // namespace igt

#pragma once

#include "igt/bilevel.hpp"

namespace igt {

/// Exactly K gradient steps on L_model(.; theta) from w_init.
inline InnerSolveReport inner_gd(const BilevelProblem& problem, const ParamVector& theta,
                                 const Context& ctx, const DecisionVector& w_init,
                                 const InnerSolverConfig& cfg, double mu_hint = 1.0) {
  cfg.validate();
  DecisionVector w =
      cfg.warm_start ? w_init : DecisionVector::Zero(problem.decision_dim());
  if (!w.allFinite()) throw Error(ErrorKind::kInvalidArgument, "inner_gd: w_init not finite");

  for (int k = 0; k < cfg.steps; ++k) {
    const DecisionVector g = problem.grad_w_model(w, theta, ctx);
    if (!g.allFinite()) {
      throw Error(ErrorKind::kInnerDivergence, "non-finite gradient at inner step " +
                                                   std::to_string(k));
    }
    w.noalias() -= cfg.step_size * g;
  }
  if (!w.allFinite()) {
    throw Error(ErrorKind::kInnerDivergence,
                "non-finite iterate after " + std::to_string(cfg.steps) + " steps");
  }

  InnerSolveReport report;
  report.iterations_used = cfg.steps;
  report.residual_norm = problem.grad_w_model(w, theta, ctx).norm();
  if (auto exact = problem.exact_inner(theta, ctx)) {
    report.epsilon_estimate = (w - *exact).norm();
  } else {
    report.epsilon_estimate = report.residual_norm / mu_hint;
  }
  report.solution = std::move(w);
  return report;
}

}  // namespace igt

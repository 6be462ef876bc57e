#pragma once

// Scalar instance L_model = mu_w/2 (w - b theta)^2, L_true = 1/2 (w - a theta)^2.
// w*(theta) = b theta and F(theta) = C_0^2 theta^2 / 2 with C_0 = |a - b|.

#include "igt/env/environment.hpp"
#include "igt/solvers/inner_gd.hpp"

#include <cmath>

namespace igt {

struct HardQuadraticConfig {
  double a = 1.0;
  double b = 2.0;
  double mu_w = 1.0;
  double epsilon_inner = 0.0;  // constant bias added to the exact inner solution
  double bound = 1.0;          // Theta = [-B_0, B_0], theta_1 = B_0
  bool exact_inner = true;     // false runs inner GD with `inner`
  bool loss_at_exact_inner = true;  // charge F(theta_t) rather than L_true(w_t)
  InnerSolverConfig inner;

  double c0() const { return std::abs(a - b); }

  void validate() const {
    if (a == b) throw Error(ErrorKind::kConfig, "a == b gives C_0 = 0 and degenerates the instance");
    if (!(mu_w > 0.0)) throw Error(ErrorKind::kConfig, "mu_w must be > 0");
    if (!(bound > 0.0)) throw Error(ErrorKind::kConfig, "bound must be > 0");
    if (!exact_inner) inner.validate();
  }
};

class HardQuadraticProblem final : public BilevelProblem {
 public:
  explicit HardQuadraticProblem(HardQuadraticConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const HardQuadraticConfig& config() const { return cfg_; }

  std::string_view name() const override { return "hard-quadratic"; }
  Index param_dim() const override { return 1; }
  Index decision_dim() const override { return 1; }

  double model_loss(const DecisionVector& w, const ParamVector& th, const Context&) const override {
    const double r = w(0) - cfg_.b * th(0);
    return 0.5 * cfg_.mu_w * r * r;
  }
  double true_loss(const DecisionVector& w, const ParamVector& th, const Context&,
                   const Outcome&) const override {
    const double r = w(0) - cfg_.a * th(0);
    return 0.5 * r * r;
  }
  DecisionVector grad_w_model(const DecisionVector& w, const ParamVector& th,
                              const Context&) const override {
    return DecisionVector::Constant(1, cfg_.mu_w * (w(0) - cfg_.b * th(0)));
  }
  DecisionVector grad_w_true(const DecisionVector& w, const ParamVector& th, const Context&,
                             const Outcome&) const override {
    return DecisionVector::Constant(1, w(0) - cfg_.a * th(0));
  }
  ParamVector grad_theta_true_fixed_w(const DecisionVector& w, const ParamVector& th,
                                      const Context&, const Outcome&) const override {
    return ParamVector::Constant(1, -cfg_.a * (w(0) - cfg_.a * th(0)));
  }
  DecisionVector hess_ww_model_vp(const DecisionVector&, const ParamVector&, const Context&,
                                  const DecisionVector& v) const override {
    return cfg_.mu_w * v;
  }
  ParamVector cross_partial_transpose_vp(const DecisionVector&, const ParamVector&,
                                         const Context&, const DecisionVector& v) const override {
    return ParamVector::Constant(1, -cfg_.mu_w * cfg_.b * v(0));
  }
  std::optional<DecisionVector> exact_inner(const ParamVector& th, const Context&) const override {
    return DecisionVector::Constant(1, cfg_.b * th(0));
  }
  InnerSolveReport solve_inner(const ParamVector& th, const Context& ctx,
                               const DecisionVector& warm) const override {
    if (!cfg_.exact_inner) return inner_gd(*this, th, ctx, warm, cfg_.inner, cfg_.mu_w);
    InnerSolveReport r;
    r.solution = DecisionVector::Constant(1, cfg_.b * th(0) + cfg_.epsilon_inner);
    r.residual_norm = std::abs(cfg_.mu_w * cfg_.epsilon_inner);
    r.epsilon_estimate = std::abs(cfg_.epsilon_inner);
    return r;
  }

  /// F(theta) = L_true(w*(theta); theta).
  double outer_objective(double theta) const {
    const double c = cfg_.c0();
    return 0.5 * c * c * theta * theta;
  }

  /// Closed-form adjoint at the exact inner solution, (b - a) theta / mu_w.
  double exact_adjoint(double theta) const { return (cfg_.b - cfg_.a) * theta / cfg_.mu_w; }

 private:
  HardQuadraticConfig cfg_;
};

class HardQuadraticEnvironment final : public Environment {
 public:
  explicit HardQuadraticEnvironment(HardQuadraticConfig cfg) : problem_(cfg) {}

  const BilevelProblem& problem() const override { return problem_; }
  RoundData next_round(int) override { return {}; }
  ParamVector initial_params() const override {
    return ParamVector::Constant(1, problem_.config().bound);
  }
  double realized_loss(const DecisionVector& w, const ParamVector& theta,
                       const RoundData& round) const override {
    if (problem_.config().loss_at_exact_inner) return problem_.outer_objective(theta(0));
    return problem_.true_loss(w, theta, round.context, round.outcome);
  }
  double comparator_loss(const RoundData&) const override { return 0.0; }
  std::optional<double> domain_radius() const override { return problem_.config().bound; }
  std::string metadata() const override {
    return problem_.config().loss_at_exact_inner
               ? "comparator theta*=0; loss charged as F(theta_t)"
               : "comparator theta*=0; loss charged as L_true(w_t; theta_t)";
  }

 private:
  HardQuadraticProblem problem_;
};

}  // namespace igt

#pragma once

// IGT-OMD and the delayed baselines, composed from a gradient source
// (stale arrivals, transported arrivals, or a prediction-error gradient)
// and a base update rule (gradient step, Adam, lazy FTRL).

#include "igt/transport.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace igt {

enum class ScheduleMode { kQueueAdaptive, kConstant };

struct StepSchedule {
  double eta0 = 0.01;
  double beta = 1.0;
  ScheduleMode mode = ScheduleMode::kQueueAdaptive;

  void validate() const {
    if (!(eta0 > 0.0)) throw Error(ErrorKind::kConfig, "eta0 must be > 0");
    if (!(beta >= 0.0)) throw Error(ErrorKind::kConfig, "beta must be >= 0");
  }
};

/// eta_t = eta0 / sqrt(1 + beta * envelope), or eta0 in constant mode.
inline double adaptive_step(const StepSchedule& s, double envelope) {
  if (s.mode == ScheduleMode::kConstant) return s.eta0;
  return s.eta0 / std::sqrt(1.0 + s.beta * envelope);
}

enum class BaseRuleKind { kPlainGd, kAdam, kFtrl };

struct BaseUpdateRule {
  BaseRuleKind kind = BaseRuleKind::kPlainGd;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> clip_norm;

  void validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw Error(ErrorKind::kConfig, "Adam betas must lie in [0, 1)");
    }
    if (clip_norm && !(*clip_norm > 0.0)) throw Error(ErrorKind::kConfig, "clip must be > 0");
  }
};

inline ParamVector clip_to_norm(const ParamVector& g, std::optional<double> c) {
  if (!c) return g;
  const double n = g.norm();
  return n > *c ? ParamVector(g * (*c / n)) : g;
}

/// Applies the base rule to a gradient. Holds Adam moments or the FTRL
/// anchor and cumulative gradient.
class BaseUpdater {
 public:
  BaseUpdater(BaseUpdateRule rule, const ParamVector& theta1)
      : rule_(rule), anchor_(theta1), m_(ParamVector::Zero(theta1.size())),
        v_(ParamVector::Zero(theta1.size())), cumulative_(ParamVector::Zero(theta1.size())) {}

  ParamVector step(const ParamVector& theta, const ParamVector& grad, double eta) {
    const ParamVector g = clip_to_norm(grad, rule_.clip_norm);
    switch (rule_.kind) {
      case BaseRuleKind::kPlainGd: return theta - eta * g;
      case BaseRuleKind::kAdam: {
        ++steps_;
        m_ = rule_.beta1 * m_ + (1.0 - rule_.beta1) * g;
        v_ = rule_.beta2 * v_ + (1.0 - rule_.beta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(rule_.beta1, steps_);
        const double c2 = 1.0 - std::pow(rule_.beta2, steps_);
        return theta - eta * ((m_ / c1).array() / ((v_ / c2).array().sqrt() + rule_.epsilon))
                                 .matrix();
      }
      case BaseRuleKind::kFtrl:
        cumulative_ += g;
        return anchor_ - eta * cumulative_;
    }
    return theta;
  }

  const BaseUpdateRule& rule() const { return rule_; }

 private:
  BaseUpdateRule rule_;
  ParamVector anchor_;
  ParamVector m_, v_, cumulative_;
  int steps_ = 0;
};

enum class GradientSource { kStale, kTransport, kTwoStage };

struct AlgorithmConfig {
  std::string name = "igt-omd";
  GradientSource source = GradientSource::kTransport;
  BaseUpdateRule rule;
  StepSchedule schedule;
  bool event_driven = false;
  bool adjoint_at_dispatch = false;
  bool two_stage_at_current = false;  // evaluate the MSE gradient at theta_t instead of theta_s
  CGConfig cg;
  double divergence_bound = 1e6;
  double domain_radius = 1e3;    // L2 ball; infinity disables projection
  int buffer_capacity = -1;      // -1 derives sigma_max from the delay schedule
  int adjoint_refresh_every = 0; // diagnostic re-solve period, 0 = off

  void validate() const {
    rule.validate();
    schedule.validate();
    cg.validate();
    if (!(divergence_bound > 0.0)) throw Error(ErrorKind::kConfig, "divergence bound must be > 0");
    if (!(domain_radius > 0.0)) throw Error(ErrorKind::kConfig, "domain radius must be > 0");
    if (adjoint_refresh_every < 0) throw Error(ErrorKind::kConfig, "adjoint refresh must be >= 0");
  }
};

/// Named constructions. Robust OMD = stale gradients + queue-adaptive step +
/// clipping at g_hint; D-FTRL = lazy FTRL over arrived gradients.
inline AlgorithmConfig igt_omd(double eta0, double beta = 1.0) {
  AlgorithmConfig c;
  c.name = "igt-omd";
  c.source = GradientSource::kTransport;
  c.schedule = {eta0, beta, ScheduleMode::kQueueAdaptive};
  return c;
}

// Stale OMD and 2-Stage are the delay-unaware baselines and default to a
// constant step; Robust OMD and D-FTRL damp by the queue envelope.
inline AlgorithmConfig stale_omd(double eta0, double beta = 1.0) {
  AlgorithmConfig c = igt_omd(eta0, beta);
  c.name = "stale-omd";
  c.source = GradientSource::kStale;
  c.schedule.mode = ScheduleMode::kConstant;
  return c;
}

inline AlgorithmConfig robust_omd(double eta0, double g_hint, double beta = 1.0) {
  AlgorithmConfig c = stale_omd(eta0, beta);
  c.name = "robust-omd";
  c.rule.clip_norm = g_hint;
  c.schedule.mode = ScheduleMode::kQueueAdaptive;
  return c;
}

inline AlgorithmConfig dftrl(double eta0, double beta = 1.0) {
  AlgorithmConfig c = stale_omd(eta0, beta);
  c.name = "dftrl";
  c.rule.kind = BaseRuleKind::kFtrl;
  c.schedule.mode = ScheduleMode::kQueueAdaptive;
  return c;
}

inline AlgorithmConfig two_stage(double eta0, double beta = 1.0) {
  AlgorithmConfig c = stale_omd(eta0, beta);
  c.name = "two-stage";
  c.source = GradientSource::kTwoStage;
  return c;
}

inline AlgorithmConfig stale_adam(double eta0 = 1e-3, double clip = 1.0, double beta = 0.0) {
  AlgorithmConfig c = stale_omd(eta0, beta);
  c.name = "stale-adam";
  c.rule.kind = BaseRuleKind::kAdam;
  c.rule.clip_norm = clip;
  return c;
}

/// Replaces the stale arrival sum of a base optimizer with the transported
/// gradient; everything else is unchanged.
inline AlgorithmConfig attach_transport(AlgorithmConfig base) {
  base.source = GradientSource::kTransport;
  if (base.name == "stale-adam") base.name = "adam-igt";
  else if (base.name == "dftrl") base.name = "dftrl-igt";
  else if (base.name == "stale-omd") base.name = "igt-omd";
  else base.name += "+igt";
  return base;
}

struct RoundUpdate {
  ParamVector gradient;
  double eta = 0.0;
  double step_norm_sq = 0.0;
  bool updated = false;
  int skipped = 0;
  int adjoint_iterations = 0;
  double adjoint_residual = 0.0;
  double frozen_adjoint_drift = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

/// Outer-parameter state of one run: consumes the round's arrivals and
/// produces theta_{t+1}.
class OnlineOptimizer {
 public:
  OnlineOptimizer(AlgorithmConfig cfg, const BilevelProblem& problem, ParamVector theta1,
                  std::size_t buffer_capacity)
      : cfg_(std::move(cfg)), problem_(&problem), theta_(std::move(theta1)),
        previous_(theta_), updater_(cfg_.rule, theta_), buffer_(buffer_capacity) {
    cfg_.validate();
    if (theta_.size() != problem.param_dim()) {
      throw Error(ErrorKind::kDimensionMismatch, "initial theta does not match param_dim");
    }
  }

  const AlgorithmConfig& config() const { return cfg_; }
  const ParamVector& theta() const { return theta_; }
  const ParamVector& previous_theta() const { return previous_; }
  const TransportBuffer& buffer() const { return buffer_; }

  RoundUpdate round(int t, std::span<const OutcomeRecordPtr> arrivals, int sigma, int envelope) {
    RoundUpdate out;
    out.gradient = ParamVector::Zero(theta_.size());

    if (cfg_.event_driven && arrivals.empty()) {
      out.eta = 0.0;
      previous_ = theta_;
      return out;
    }

    switch (cfg_.source) {
      case GradientSource::kStale: stale_gradient(arrivals, out); break;
      case GradientSource::kTwoStage: two_stage_gradient(arrivals, out); break;
      case GradientSource::kTransport: {
        TransportOptions opt{cfg_.adjoint_at_dispatch, cfg_.cg};
        auto res = transport_step(buffer_, arrivals, *problem_, theta_, t, opt, last_adjoint_);
        out.gradient = std::move(res.gradient.values);
        out.skipped = res.skipped;
        out.adjoint_iterations = res.adjoint_iterations;
        out.adjoint_residual = res.max_adjoint_residual;
        out.warnings = std::move(res.warnings);
        if (cfg_.adjoint_refresh_every > 0 && t % cfg_.adjoint_refresh_every == 0) {
          out.frozen_adjoint_drift = frozen_adjoint_drift();
        }
        break;
      }
    }

    double damping = envelope;
    if (cfg_.event_driven) {
      damping = cfg_.source == GradientSource::kTransport ? static_cast<double>(buffer_.size())
                                                          : static_cast<double>(sigma);
    }
    out.eta = adaptive_step(cfg_.schedule, damping);

    ParamVector next = updater_.step(theta_, out.gradient, out.eta);
    project(next);
    out.step_norm_sq = (next - theta_).squaredNorm();
    out.updated = true;
    previous_ = theta_;
    theta_ = std::move(next);
    return out;
  }

  bool diverged() const {
    return !theta_.allFinite() || theta_.norm() > cfg_.divergence_bound;
  }

 private:
  void project(ParamVector& x) const {
    if (!std::isfinite(cfg_.domain_radius)) return;
    const double n = x.norm();
    if (n > cfg_.domain_radius) x *= cfg_.domain_radius / n;
  }

  void stale_gradient(std::span<const OutcomeRecordPtr> arrivals, RoundUpdate& out) {
    for (const auto& rec : arrivals) {
      try {
        AdjointVector adj = freeze_round(*problem_, *rec, rec->dispatch_params, cfg_.cg,
                                         last_adjoint_ && cfg_.cg.warm_start ? &*last_adjoint_
                                                                              : nullptr);
        out.adjoint_iterations += adj.solve_iterations;
        out.adjoint_residual = std::max(out.adjoint_residual, adj.solve_residual);
        out.gradient += evaluate_round(*problem_, *rec, adj, rec->dispatch_params);
        if (problem_->surrogate() == nullptr) last_adjoint_ = std::move(adj);
      } catch (const Error& e) {
        ++out.skipped;
        out.warnings.push_back("skipped arrival " + std::to_string(rec->round) + ": " +
                               e.what());
      }
    }
  }

  void two_stage_gradient(std::span<const OutcomeRecordPtr> arrivals, RoundUpdate& out) const {
    for (const auto& rec : arrivals) {
      auto target = problem_->prediction_target(rec->context, *rec);
      if (!target) {
        throw Error(ErrorKind::kConfig,
                    std::string(problem_->name()) + " has no prediction target for two-stage");
      }
      const ParamVector& at = cfg_.two_stage_at_current ? theta_ : rec->dispatch_params;
      const Vector r = problem_->prediction(at, *rec) - *target;
      out.gradient += problem_->prediction_jacobian_transpose_vp(at, *rec, r);
    }
  }

  // Relative change of the transported gradient when every buffered adjoint
  // is re-solved at the current parameters.
  double frozen_adjoint_drift() const {
    if (problem_->surrogate() != nullptr || buffer_.size() == 0) return 0.0;
    double num = 0.0, den = 0.0;
    for (const auto& e : buffer_.entries()) {
      const auto& rec = *e.record;
      try {
        AdjointVector fresh = solve_adjoint(*problem_, rec.dispatch_decision, theta_, rec.context,
                                            rec.outcome, cfg_.cg, &e.adjoint, rec.round);
        const ParamVector g = evaluate_round(*problem_, rec, fresh, theta_);
        num += (g - e.cached.values).squaredNorm();
        den += g.squaredNorm();
      } catch (const Error&) {
      }
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
  }

  AlgorithmConfig cfg_;
  const BilevelProblem* problem_;
  ParamVector theta_;
  ParamVector previous_;
  BaseUpdater updater_;
  TransportBuffer buffer_;
  std::optional<AdjointVector> last_adjoint_;
};

}  // namespace igt

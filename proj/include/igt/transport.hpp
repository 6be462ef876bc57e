#pragma once

// Adjoint hypergradients, their re-evaluation at shifted parameters, and
// the FIFO transport buffer that accumulates one-step increments.

#include "igt/bilevel.hpp"
#include "igt/delay.hpp"
#include "igt/solvers/cg.hpp"

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace igt {

struct AdjointVector {
  DecisionVector values;
  double solve_residual = 0.0;
  int solve_iterations = 0;
};

struct Hypergradient {
  ParamVector values;
  int source_round = 0;
  int evaluated_at_round = 0;
};

/// Outer gradient for environments whose inner solver is not smooth. The
/// frozen state plays the role of the adjoint: it is computed once when the
/// round arrives and held fixed while theta moves.
class SurrogateGradient {
 public:
  virtual ~SurrogateGradient() = default;
  virtual AdjointVector freeze(const OutcomeRecord& rec, const ParamVector& theta) const = 0;
  virtual ParamVector evaluate(const OutcomeRecord& rec, const AdjointVector& frozen,
                               const ParamVector& theta) const = 0;
};

/// Solves H_w(w_s, theta) v = P grad_w L_true(w_s; theta, z_s) by CG.
inline AdjointVector solve_adjoint(const BilevelProblem& problem, const DecisionVector& w_s,
                                   const ParamVector& theta, const Context& ctx,
                                   const Outcome& z, const CGConfig& cg,
                                   const AdjointVector* warm = nullptr, int round = 0) {
  const DecisionVector rhs =
      problem.project_tangent(w_s, problem.grad_w_true(w_s, theta, ctx, z));
  if (auto direct = problem.direct_adjoint(w_s, theta, ctx, rhs)) {
    const double residual =
        (problem.hess_ww_model_vp(w_s, theta, ctx, *direct) - rhs).norm();
    if (!direct->allFinite()) {
      throw Error(ErrorKind::kNotSpd,
                  "direct adjoint solve for round " + std::to_string(round) + " is not finite");
    }
    return {std::move(*direct), residual, 0};
  }
  const DecisionVector x0 =
      (warm != nullptr && warm->values.size() == rhs.size()) ? warm->values
                                                              : DecisionVector::Zero(rhs.size());
  CGResult res;
  try {
    res = conjugate_gradient(
        [&](const Vector& v) { return problem.hess_ww_model_vp(w_s, theta, ctx, v); }, rhs, x0,
        cg);
  } catch (const Error& e) {
    throw Error(e.kind(), "adjoint solve for round " + std::to_string(round) + ": " + e.what());
  }
  if (!res.converged) {
    throw Error(ErrorKind::kNotSpd, "adjoint solve for round " + std::to_string(round) +
                                        " hit the iteration cap (residual " +
                                        std::to_string(res.residual) + ")");
  }
  return {std::move(res.x), res.residual, res.iterations};
}

/// g_s(theta) = grad_theta L_true(w_s; theta)|_w - [grad_theta grad_w L_model(w_s; theta)]^T v_s.
inline Hypergradient hypergradient_at(const BilevelProblem& problem, const DecisionVector& w_s,
                                      const AdjointVector& v_s, const ParamVector& theta,
                                      const Context& ctx, const Outcome& z, int source_round = 0,
                                      int evaluated_at_round = 0) {
  require_same_size(w_s, v_s.values, "hypergradient_at(w, v)");
  if (theta.size() != problem.param_dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "hypergradient_at: theta has size " +
                                                   std::to_string(theta.size()));
  }
  ParamVector g = problem.grad_theta_true_fixed_w(w_s, theta, ctx, z) -
                  problem.cross_partial_transpose_vp(w_s, theta, ctx, v_s.values);
  return {std::move(g), source_round, evaluated_at_round};
}

/// Frozen per-round state for a record, either an adjoint or a surrogate.
inline AdjointVector freeze_round(const BilevelProblem& problem, const OutcomeRecord& rec,
                                  const ParamVector& theta, const CGConfig& cg,
                                  const AdjointVector* warm) {
  if (const auto* s = problem.surrogate()) return s->freeze(rec, theta);
  return solve_adjoint(problem, rec.dispatch_decision, theta, rec.context, rec.outcome, cg, warm,
                       rec.round);
}

inline ParamVector evaluate_round(const BilevelProblem& problem, const OutcomeRecord& rec,
                                  const AdjointVector& frozen, const ParamVector& theta) {
  if (const auto* s = problem.surrogate()) return s->evaluate(rec, frozen, theta);
  return hypergradient_at(problem, rec.dispatch_decision, frozen, theta, rec.context,
                          rec.outcome)
      .values;
}

struct TransportBufferEntry {
  int round = 0;
  OutcomeRecordPtr record;
  AdjointVector adjoint;
  Hypergradient cached;  // g_s at the last parameter point it was evaluated
};

class TransportBuffer {
 public:
  explicit TransportBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void insert(TransportBufferEntry entry) { entries_.push_back(std::move(entry)); }

  /// Drops oldest entries until the size is within capacity; returns the
  /// number removed.
  std::size_t evict() {
    std::size_t removed = 0;
    while (entries_.size() > capacity_) {
      entries_.pop_front();
      ++removed;
    }
    return removed;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  void set_capacity(std::size_t c) { capacity_ = c; }
  std::deque<TransportBufferEntry>& entries() { return entries_; }
  const std::deque<TransportBufferEntry>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<TransportBufferEntry> entries_;
};

struct TransportOptions {
  bool adjoint_at_dispatch = false;
  CGConfig cg;
};

struct TransportStepResult {
  Hypergradient gradient;
  int skipped = 0;
  int adjoint_iterations = 0;
  double max_adjoint_residual = 0.0;
  std::vector<std::string> warnings;
};

/// One round of the transport engine:
///   g = sum_{s in arrivals} g_s(theta_t) + sum_{s in B_old} [g_s(theta_t) - cache_s].
/// Arrivals are inserted with their cache set at theta_t before the loop
/// runs, so their increment is zero this round. The adjoint warm start is
/// carried in `last_adjoint`.
inline TransportStepResult transport_step(TransportBuffer& buffer,
                                          std::span<const OutcomeRecordPtr> arrivals,
                                          const BilevelProblem& problem, const ParamVector& theta,
                                          int t, const TransportOptions& opt,
                                          std::optional<AdjointVector>& last_adjoint) {
  TransportStepResult out;
  out.gradient.values = ParamVector::Zero(problem.param_dim());
  out.gradient.evaluated_at_round = t;

  const std::size_t pre_existing = buffer.size();
  for (const auto& rec : arrivals) {
    const ParamVector& theta_adj = opt.adjoint_at_dispatch ? rec->dispatch_params : theta;
    AdjointVector adj;
    try {
      adj = freeze_round(problem, *rec, theta_adj, opt.cg,
                         last_adjoint && opt.cg.warm_start ? &*last_adjoint : nullptr);
    } catch (const Error& e) {
      ++out.skipped;
      out.warnings.push_back("round " + std::to_string(t) + ": skipped arrival " +
                             std::to_string(rec->round) + ": " + e.what());
      continue;
    }
    out.adjoint_iterations += adj.solve_iterations;
    out.max_adjoint_residual = std::max(out.max_adjoint_residual, adj.solve_residual);
    if (problem.surrogate() == nullptr) last_adjoint = adj;
    ParamVector g = evaluate_round(problem, *rec, adj, theta);
    out.gradient.values += g;
    buffer.insert({rec->round, rec, std::move(adj), {std::move(g), rec->round, t}});
  }

  auto& entries = buffer.entries();
  for (std::size_t i = 0; i < pre_existing; ++i) {
    auto& e = entries[i];
    ParamVector g = evaluate_round(problem, *e.record, e.adjoint, theta);
    out.gradient.values += g - e.cached.values;
    e.cached.values = std::move(g);
    e.cached.evaluated_at_round = t;
  }

  buffer.evict();
  return out;
}

/// Parameter history sufficient for the transport-error surrogates: a ring
/// of recent iterates plus every squared step norm.
class ParamHistory {
 public:
  explicit ParamHistory(int window) : window_(std::max(window, 0) + 2) {}

  /// Records theta_t (t = 1, 2, ... in order).
  void push(const ParamVector& theta) {
    if (!recent_.empty()) step_sq_.push_back((theta - recent_.back()).squaredNorm());
    recent_.push_back(theta);
    if (static_cast<int>(recent_.size()) > window_) recent_.pop_front();
    ++count_;
  }

  int count() const { return count_; }

  /// theta_t, valid for the last `window` iterates.
  const ParamVector& at(int t) const {
    const int offset = count_ - t;
    if (t < 1 || offset < 0 || offset >= static_cast<int>(recent_.size())) {
      throw Error(ErrorKind::kInvalidArgument, "theta_" + std::to_string(t) + " not retained");
    }
    return recent_[recent_.size() - 1 - static_cast<std::size_t>(offset)];
  }

  /// ||theta_{s+1} - theta_s||^2.
  double step_sq(int s) const {
    if (s < 1 || s > static_cast<int>(step_sq_.size())) return 0.0;
    return step_sq_[static_cast<std::size_t>(s - 1)];
  }

 private:
  int window_;
  int count_ = 0;
  std::deque<ParamVector> recent_;
  std::vector<double> step_sq_;
};

struct SurrogateIncrements {
  double r_sq = 0.0;
  double r3 = 0.0;
};

/// This round's contributions to R_sq = sum_t ||theta_t - theta_{t-d}||^2 and
/// R_3 = sum_t sum_{s in Q_t} ||theta_{s+1} - theta_s||^2. Call after
/// theta_{t+1} has been pushed.
inline SurrogateIncrements transport_error_surrogates(const ParamHistory& history,
                                                      const std::set<int>& outstanding, int d,
                                                      int t) {
  SurrogateIncrements inc;
  if (d >= 1 && t > d) inc.r_sq = (history.at(t) - history.at(t - d)).squaredNorm();
  for (int s : outstanding) inc.r3 += history.step_sq(s);
  return inc;
}

}  // namespace igt

#pragma once

// The per-round loop: inner solve, loss accounting, dispatch into the delay
// queue, optimizer update, and the per-round log.

#include "igt/delay.hpp"
#include "igt/env/environment.hpp"
#include "igt/optimizers.hpp"
#include "igt/stats.hpp"
#include "igt/transport.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace igt {

struct RunOptions {
  int rounds = 1000;
  std::uint64_t seed = 0;
  DelaySchedule delay;
  AlgorithmConfig algo;
  std::optional<double> domain_radius;  // overrides the environment's domain
  int summary_window = 200;
  bool keep_rows = true;
};

struct RunRow {
  int t = 0;
  int delay = 0;
  int sigma = 0;
  int envelope = 0;
  int arrivals = 0;
  double eta = 0.0;
  double true_loss = 0.0;
  double comparator_loss = 0.0;
  double regret_increment = 0.0;
  double cumulative_regret = 0.0;
  double step_norm_sq = 0.0;
  double r_sq_increment = 0.0;
  double r3_increment = 0.0;
  std::optional<double> optimality_gap;
  double grad_norm = 0.0;
  double theta_norm = 0.0;
  double inner_residual = 0.0;
  double epsilon_estimate = 0.0;
  int adjoint_iterations = 0;
  int skipped = 0;
  std::optional<double> adjoint_drift;
  bool diverged = false;
};

struct RunResult {
  std::vector<RunRow> rows;
  std::string status = "ok";
  bool diverged = false;
  int diverged_round = 0;
  int rounds_completed = 0;
  double cumulative_regret = 0.0;
  double cumulative_loss = 0.0;
  double r_sq_total = 0.0;
  double r3_total = 0.0;
  double window_gap = std::numeric_limits<double>::quiet_NaN();
  double window_loss = std::numeric_limits<double>::quiet_NaN();
  int skipped_adjoints = 0;
  int poisson_cap_hits = 0;
  long floored_entries = 0;
  long adjoint_iterations = 0;
  std::uint64_t delay_hash = 0;
  ParamVector final_theta;
  std::vector<std::string> warnings;
};

inline RunResult run_single(Environment& env, const RunOptions& opt) {
  if (opt.rounds < 1) throw Error(ErrorKind::kConfig, "rounds must be >= 1");
  opt.delay.validate();
  const BilevelProblem& problem = env.problem();

  AlgorithmConfig algo = opt.algo;
  if (opt.domain_radius) algo.domain_radius = *opt.domain_radius;
  else if (auto r = env.domain_radius()) algo.domain_radius = *r;
  const std::size_t capacity = algo.buffer_capacity >= 0
                                   ? static_cast<std::size_t>(algo.buffer_capacity)
                                   : static_cast<std::size_t>(opt.delay.max_queue_bound());

  OnlineOptimizer optimizer(algo, problem, env.initial_params(), capacity);
  DelaySampler sampler(opt.delay, opt.seed);
  DelayQueue queue;
  const int nominal = opt.delay.nominal_delay();
  ParamHistory history(nominal);
  history.push(optimizer.theta());
  DecisionVector w_prev = env.initial_decision();
  Fnv1a delay_hash;

  RunResult res;
  const int window = std::max(1, opt.summary_window);
  std::vector<double> recent_gap, recent_loss;
  auto push_window = [window](std::vector<double>& v, double x) {
    v.push_back(x);
    if (static_cast<int>(v.size()) > window) v.erase(v.begin());
  };

  for (int t = 1; t <= opt.rounds; ++t) {
    RunRow row;
    row.t = t;
    const RoundData round = env.next_round(t);
    const ParamVector theta_t = optimizer.theta();

    InnerSolveReport inner;
    try {
      inner = problem.solve_inner(theta_t, round.context, w_prev);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInnerDivergence) throw;
      res.diverged = true;
      res.diverged_round = t;
      res.status = "diverged at round " + std::to_string(t) + " (inner solver)";
      row.diverged = true;
      if (opt.keep_rows) res.rows.push_back(row);
      break;
    }
    const DecisionVector& w_t = inner.solution;
    row.inner_residual = inner.residual_norm;
    row.epsilon_estimate = inner.epsilon_estimate;
    res.floored_entries += inner.floored_entries;

    row.true_loss = env.realized_loss(w_t, theta_t, round);
    row.comparator_loss = env.comparator_loss(round);
    row.regret_increment = row.true_loss - row.comparator_loss;
    row.optimality_gap = env.optimality_gap(w_t, round);
    res.cumulative_loss += row.true_loss;
    res.cumulative_regret += row.regret_increment;
    row.cumulative_regret = res.cumulative_regret;

    auto record = std::make_shared<OutcomeRecord>();
    record->round = t;
    record->context = round.context;
    record->outcome = round.outcome;
    record->dispatch_params = theta_t;
    record->dispatch_decision = w_t;

    row.delay = sampler.sample(t);
    delay_hash.add(static_cast<std::int64_t>(row.delay));
    const auto arrivals = queue.advance(t, row.delay, std::move(record));
    row.sigma = queue.sigma();
    row.envelope = queue.envelope();
    row.arrivals = static_cast<int>(arrivals.size());

    RoundUpdate upd = optimizer.round(t, arrivals, row.sigma, row.envelope);
    row.eta = upd.eta;
    row.step_norm_sq = upd.step_norm_sq;
    row.grad_norm = upd.gradient.norm();
    row.adjoint_iterations = upd.adjoint_iterations;
    row.skipped = upd.skipped;
    if (!std::isnan(upd.frozen_adjoint_drift)) row.adjoint_drift = upd.frozen_adjoint_drift;
    res.skipped_adjoints += upd.skipped;
    res.adjoint_iterations += upd.adjoint_iterations;
    for (auto& w : upd.warnings) {
      if (res.warnings.size() < 100) res.warnings.push_back(std::move(w));
    }

    history.push(optimizer.theta());
    const auto inc = transport_error_surrogates(history, queue.outstanding(), nominal, t);
    row.r_sq_increment = inc.r_sq;
    row.r3_increment = inc.r3;
    res.r_sq_total += inc.r_sq;
    res.r3_total += inc.r3;
    row.theta_norm = optimizer.theta().norm();

    if (row.optimality_gap) push_window(recent_gap, *row.optimality_gap);
    push_window(recent_loss, row.true_loss);
    res.rounds_completed = t;
    w_prev = w_t;

    if (optimizer.diverged()) {
      row.diverged = true;
      res.diverged = true;
      res.diverged_round = t;
      res.status = "diverged at round " + std::to_string(t);
      if (opt.keep_rows) res.rows.push_back(row);
      break;
    }
    if (opt.keep_rows) res.rows.push_back(std::move(row));
  }

  if (!recent_gap.empty()) res.window_gap = mean(recent_gap);
  if (!recent_loss.empty()) res.window_loss = mean(recent_loss);
  res.poisson_cap_hits = sampler.cap_hits();
  res.delay_hash = delay_hash.value();
  res.final_theta = optimizer.theta();
  return res;
}

}  // namespace igt

// Worked examples for the solvers, delay channel, transport engine,
// optimizers, environments and statistics.

#include "igt/igt.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace {

using namespace igt;

HardQuadraticProblem hard(double a = 1.0, double b = 2.0, double mu = 1.0, double eps = 0.0) {
  HardQuadraticConfig c;
  c.a = a;
  c.b = b;
  c.mu_w = mu;
  c.epsilon_inner = eps;
  return HardQuadraticProblem(c);
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

OutcomeRecordPtr hard_record(int round, double theta, double b = 2.0) {
  auto rec = std::make_shared<OutcomeRecord>();
  rec->round = round;
  rec->dispatch_params = vec({theta});
  rec->dispatch_decision = vec({b * theta});
  return rec;
}

template <typename F>
void expect_error(F&& f, ErrorKind kind) {
  try {
    f();
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

// ------------------------------------------------------------------ solvers

TEST(InnerGd, SingleStepByHand) {
  const auto p = hard();
  const auto r = inner_gd(p, vec({1.0}), {}, vec({0.0}), {1, 0.5, true});
  EXPECT_DOUBLE_EQ(r.solution(0), 1.0);
}

TEST(InnerGd, FixedPointAndContraction) {
  const auto p = hard();
  const auto fixed = inner_gd(p, vec({1.0}), {}, *p.exact_inner(vec({1.0}), {}), {17, 0.5, true});
  EXPECT_NEAR(fixed.solution(0), 2.0, 1e-12);
  const auto many = inner_gd(p, vec({1.0}), {}, vec({0.0}), {60, 0.5, true});
  EXPECT_LE(std::abs(many.solution(0) - 2.0), 1e-12);
  EXPECT_LE(many.epsilon_estimate, 1e-12);
}

TEST(InnerGd, DivergenceCarriesStep) {
  const auto p = hard();
  try {
    inner_gd(p, vec({1.0}), {}, vec({0.0}), {5000, 3.0, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInnerDivergence);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Sinkhorn, ConstantCostGivesProductCoupling) {
  const Vector u = Vector::Constant(2, 0.5);
  for (int k : {1, 7}) {
    const Matrix p = sinkhorn_log(Matrix::Constant(2, 2, 3.0), u, u, 0.1, k).coupling();
    EXPECT_LE((p.array() - 0.25).abs().maxCoeff(), 1e-14);
  }
}

TEST(Sinkhorn, SmallRegularizationIsDiagonal) {
  const Vector u = Vector::Constant(2, 0.5);
  Matrix c(2, 2);
  c << 0, 10, 10, 0;
  const Matrix p = sinkhorn_log(c, u, u, 0.05, 200).coupling();
  // The 2x2 LP optimum is the identity transport / 2.
  EXPECT_NEAR(p(0, 0), 0.5, 1e-8);
  EXPECT_NEAR(p(1, 1), 0.5, 1e-8);
  EXPECT_LE(p(0, 1), 1e-8);
  EXPECT_LE(p(1, 0), 1e-8);
}

TEST(Sinkhorn, TwoByTwoEntropicClosedForm) {
  // Symmetry gives P = [[p, 1/2-p], [1/2-p, p]] and the Gibbs form gives
  // p / (1/2 - p) = exp(c/eps).
  const Vector u = Vector::Constant(2, 0.5);
  for (double c : {0.02, 0.1, 0.3}) {
    const double eps = 0.05;
    Matrix cost(2, 2);
    cost << 0, c, c, 0;
    const Matrix p = sinkhorn_log(cost, u, u, eps, 400).coupling();
    const double expect = 0.5 / (1.0 + std::exp(-c / eps));
    EXPECT_NEAR(p(0, 0), expect, 1e-12);
    EXPECT_NEAR(p(1, 1), expect, 1e-12);
    EXPECT_NEAR(p(0, 1), 0.5 - expect, 1e-12);
  }
}

TEST(Sinkhorn, Contract) {
  const Vector u = Vector::Constant(2, 0.5);
  expect_error([&] { sinkhorn_log(Matrix::Zero(2, 2), u, u, 0.1, 0); }, ErrorKind::kInvalidArgument);
  expect_error([&] { sinkhorn_log(Matrix::Zero(2, 2), vec({1.0, 0.0}), u, 0.1, 3); },
               ErrorKind::kDegenerateMarginal);
}

TEST(Sinkhorn, MarginalResidualShrinksWithK) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Matrix c(5, 5);
  for (Index i = 0; i < c.size(); ++i) c(i) = U(rng);
  const Vector mu = Vector::Constant(5, 0.2);
  Vector nu = vec({0.1, 0.3, 0.2, 0.15, 0.25});
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 30; ++k) {
    const double r = marginal_residual(sinkhorn_log(c, mu, nu, 0.1, k).coupling(), mu, nu);
    EXPECT_LE(r, prev + 1e-15) << "K=" << k;
    prev = r;
  }
  EXPECT_LE(prev, 1e-6);
}

TEST(Dijkstra, Examples) {
  EXPECT_DOUBLE_EQ(dijkstra_grid(Matrix::Ones(2, 2), {0, 0}, {1, 1}).cost, 2.0);

  Matrix line(1, 3);
  line << 1, 5, 1;
  const auto forced = dijkstra_grid(line, {0, 0}, {0, 2});
  EXPECT_DOUBLE_EQ(forced.cost, 6.0);
  ASSERT_EQ(forced.cells.size(), 3u);
  EXPECT_EQ(forced.cells[1], (GridCell{0, 1}));

  Matrix center = Matrix::Ones(3, 3);
  center(1, 1) = 100;
  const auto around = dijkstra_grid(center, {0, 0}, {2, 2});
  EXPECT_DOUBLE_EQ(around.cost, 4.0);
  for (const auto& cell : around.cells) EXPECT_FALSE(cell == (GridCell{1, 1}));

  expect_error([] { dijkstra_grid(Matrix::Ones(2, 2), {0, 0}, {0, 0}); }, ErrorKind::kInvalidArgument);
}

TEST(ConjugateGradient, Examples) {
  const Vector b = vec({3.0, -1.0, 2.0});
  const auto id = conjugate_gradient([](const Vector& v) { return v; }, b, Vector::Zero(3), {});
  EXPECT_TRUE(id.converged);
  EXPECT_EQ(id.iterations, 1);
  EXPECT_LE((id.x - b).norm(), 1e-14);

  const Vector d = vec({1.0, 4.0});
  auto diag = [&](const Vector& v) { return Vector(d.cwiseProduct(v)); };
  const auto two = conjugate_gradient(diag, vec({1.0, 4.0}), Vector::Zero(2), {});
  EXPECT_LE(two.iterations, 2);
  EXPECT_LE(two.residual, 1e-8);
  EXPECT_LE((two.x - vec({1.0, 1.0})).norm(), 1e-12);

  const auto warm = conjugate_gradient(diag, vec({1.0, 4.0}), vec({1.0, 1.0}), {});
  EXPECT_EQ(warm.iterations, 0);
  EXPECT_LE(warm.residual, 1e-8);

  const Vector indef = vec({1.0, -1.0});
  expect_error([&] {
    conjugate_gradient([&](const Vector& v) { return Vector(indef.cwiseProduct(v)); }, vec({0.0, 1.0}),
                       Vector::Zero(2), {});
  }, ErrorKind::kNotSpd);
}

// ----------------------------------------------------------- bilevel core

TEST(DecisionRegret, HardQuadraticExamples) {
  const auto p = hard();
  auto trajectory = [&](double theta, int n) {
    std::vector<TrajectoryStep> out(static_cast<std::size_t>(n));
    for (auto& s : out) {
      s.theta = vec({theta});
      s.w = *p.exact_inner(s.theta, {});
    }
    return out;
  };
  EXPECT_DOUBLE_EQ(decision_regret(trajectory(0.0, 100), p, vec({0.0})).regret, 0.0);

  const auto held = decision_regret(trajectory(-0.1, 100), p, vec({0.0}));
  EXPECT_TRUE(held.comparator_available);
  EXPECT_NEAR(held.regret, 100 * p.outer_objective(-0.1), 1e-12);
  EXPECT_NEAR(held.regret, 0.5, 1e-12);

  // Regret is additive over concatenated trajectories.
  auto a = trajectory(-0.1, 30), b = trajectory(0.4, 20);
  auto ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  EXPECT_NEAR(decision_regret(ab, p, vec({0.2})).regret,
              decision_regret(a, p, vec({0.2})).regret + decision_regret(b, p, vec({0.2})).regret, 1e-12);
}

TEST(OptimalityGap, Examples) {
  EXPECT_DOUBLE_EQ(optimality_gap(10.0, 7.5), 2.5);
  EXPECT_DOUBLE_EQ(optimality_gap(7.5, 7.5), 0.0);
  expect_error([] { optimality_gap(7.5, 10.0); }, ErrorKind::kOracleNotOptimal);

  // Row-first greedy path on a 3x3 unit grid against the oracle.
  const Matrix unit = Matrix::Ones(3, 3);
  double greedy = 0.0;
  for (int step = 0; step < 4; ++step) greedy += 1.0;
  EXPECT_DOUBLE_EQ(optimality_gap(greedy, dijkstra_grid(unit, {0, 0}, {2, 2}).cost), 0.0);
}

// -------------------------------------------------------- transport engine

TEST(Adjoint, HardQuadraticClosedForm) {
  const auto p = hard();
  for (double theta : {0.5, 2.0, -1.3}) {
    const Vector w = *p.exact_inner(vec({theta}), {});
    const auto v = solve_adjoint(p, w, vec({theta}), {}, {}, {});
    EXPECT_NEAR(v.values(0), p.exact_adjoint(theta), 1e-12);
  }
  // rhs = 0 when w = a theta.
  const auto zero = solve_adjoint(p, vec({0.7}), vec({0.7}), {}, {}, {});
  EXPECT_EQ(zero.values(0), 0.0);
}

TEST(Hypergradient, HardQuadraticExamples) {
  const auto p = hard();
  const auto v = solve_adjoint(p, vec({1.0}), vec({0.5}), {}, {}, {});
  EXPECT_NEAR(v.values(0), 0.5, 1e-12);
  EXPECT_NEAR(hypergradient_at(p, vec({1.0}), v, vec({0.5}), {}, {}).values(0), 0.5, 1e-12);

  // Inner bias eps = 0.1 at theta = 0: C_0^2 * 0 + C_0 * eps.
  const auto vb = solve_adjoint(p, vec({0.1}), vec({0.0}), {}, {}, {});
  EXPECT_NEAR(hypergradient_at(p, vec({0.1}), vb, vec({0.0}), {}, {}).values(0), 0.1, 1e-12);

  // w = a theta makes both terms vanish.
  const AdjointVector none{vec({0.0}), 0.0, 0};
  EXPECT_EQ(hypergradient_at(p, vec({0.3}), none, vec({0.3}), {}, {}).values(0), 0.0);

  expect_error([&] { hypergradient_at(p, vec({1.0}), none, vec({1.0, 2.0}), {}, {}); },
               ErrorKind::kDimensionMismatch);
}

TEST(TransportStep, TrivialCases) {
  const auto p = hard();
  TransportBuffer buffer(4);
  std::optional<AdjointVector> last;
  const auto empty = transport_step(buffer, {}, p, vec({0.3}), 1, {}, last);
  EXPECT_EQ(empty.gradient.values(0), 0.0);
  EXPECT_EQ(buffer.size(), 0u);

  const std::vector<OutcomeRecordPtr> one{hard_record(1, 0.8)};
  const auto first = transport_step(buffer, one, p, vec({0.3}), 4, {}, last);
  const auto adj = freeze_round(p, *one[0], vec({0.3}), {}, nullptr);
  EXPECT_DOUBLE_EQ(first.gradient.values(0), evaluate_round(p, *one[0], adj, vec({0.3}))(0));
  EXPECT_EQ(buffer.size(), 1u);
}

TEST(TransportStep, FrozenEntryTelescopes) {
  const auto p = hard();
  TransportBuffer buffer(8);
  std::optional<AdjointVector> last;
  const std::vector<OutcomeRecordPtr> one{hard_record(1, 0.8)};
  std::vector<double> path{0.3, 0.1, -0.4, 0.25, 0.9, -0.05};
  double sum = transport_step(buffer, one, p, vec({path[0]}), 2, {}, last).gradient.values(0);
  for (std::size_t k = 1; k < path.size(); ++k) {
    sum += transport_step(buffer, {}, p, vec({path[k]}), static_cast<int>(k + 2), {}, last).gradient.values(0);
  }
  const auto& e = buffer.entries().front();
  EXPECT_NEAR(sum, evaluate_round(p, *one[0], e.adjoint, vec({path.back()}))(0), 1e-12);
}

TEST(TransportStep, EvictsOldestBeyondCapacity) {
  const auto p = hard();
  TransportBuffer buffer(2);
  std::optional<AdjointVector> last;
  for (int s = 1; s <= 4; ++s) {
    const std::vector<OutcomeRecordPtr> arr{hard_record(s, 0.1 * s)};
    transport_step(buffer, arr, p, vec({0.2}), s, {}, last);
  }
  ASSERT_EQ(buffer.size(), 2u);
  EXPECT_EQ(buffer.entries()[0].round, 3);
  EXPECT_EQ(buffer.entries()[1].round, 4);
}

TEST(Surrogates, ConstantDisplacement) {
  const double delta = 0.03;
  const int d = 10, t = 40;
  ParamHistory h(d);
  for (int k = 1; k <= t + 1; ++k) h.push(vec({delta * k}));
  std::set<int> q;
  for (int s = t - d + 1; s <= t; ++s) q.insert(s);
  const auto inc = transport_error_surrogates(h, q, d, t);
  EXPECT_NEAR(inc.r_sq, 100 * delta * delta, 1e-12);
  EXPECT_NEAR(inc.r3, 10 * delta * delta, 1e-12);
  EXPECT_NEAR(inc.r_sq / inc.r3, 10.0, 1e-9);
}

TEST(Surrogates, UnitDelayRatioIsOneOverARun) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N;
  const int T = 200;
  ParamHistory h(1);
  std::vector<Vector> path;
  for (int k = 1; k <= T + 1; ++k) path.push_back(vec({N(rng), N(rng)}));
  double rsq = 0.0, r3 = 0.0;
  h.push(path[0]);
  for (int t = 1; t <= T; ++t) {
    h.push(path[static_cast<std::size_t>(t)]);
    const auto inc = transport_error_surrogates(h, {t}, 1, t);
    rsq += inc.r_sq;
    r3 += inc.r3;
  }
  // R_sq lags R_3 by one step: they differ only by the last step.
  EXPECT_NEAR(rsq + h.step_sq(T), r3, 1e-9);
}

TEST(Surrogates, ZeroMovement) {
  ParamHistory h(5);
  for (int k = 0; k < 12; ++k) h.push(vec({1.0, -2.0}));
  const auto inc = transport_error_surrogates(h, {7, 8, 9, 10, 11}, 5, 11);
  EXPECT_EQ(inc.r_sq, 0.0);
  EXPECT_EQ(inc.r3, 0.0);
}

// ------------------------------------------------------------- optimizers

TEST(AdaptiveStep, Examples) {
  EXPECT_DOUBLE_EQ(adaptive_step({0.2, 1.0, ScheduleMode::kQueueAdaptive}, 0), 0.2);
  EXPECT_DOUBLE_EQ(adaptive_step({0.2, 1.0, ScheduleMode::kQueueAdaptive}, 3), 0.1);
  EXPECT_DOUBLE_EQ(adaptive_step({0.2, 1.0, ScheduleMode::kConstant}, 3), 0.2);
  double prev = 1.0;
  for (int s = 0; s < 50; ++s) {
    const double eta = adaptive_step({1.0, 0.5, ScheduleMode::kQueueAdaptive}, s);
    EXPECT_LE(eta, prev);
    prev = eta;
  }
}

TEST(BaseRules, FtrlLinearity) {
  BaseUpdateRule ftrl;
  ftrl.kind = BaseRuleKind::kFtrl;
  const ParamVector theta1 = vec({0.0, 1.0});
  const ParamVector g = vec({0.5, -2.0});
  BaseUpdater f(ftrl, theta1), gd({}, theta1);
  const ParamVector f2 = f.step(theta1, g, 0.1);
  EXPECT_LE((f2 - gd.step(theta1, g, 0.1)).norm(), 1e-15);
  const ParamVector f3 = f.step(f2, g, 0.1);
  EXPECT_LE((f3 - (theta1 - 0.1 * 2.0 * g)).norm(), 1e-15);
}

TEST(BaseRules, ClipToNorm) {
  EXPECT_NEAR(clip_to_norm(vec({3.0, 4.0}), 1.0).norm(), 1.0, 1e-15);
  EXPECT_EQ(clip_to_norm(vec({0.3, 0.4}), 1.0), vec({0.3, 0.4}));
  EXPECT_EQ(clip_to_norm(vec({3.0, 4.0}), std::nullopt), vec({3.0, 4.0}));
}

TEST(OnlineOptimizer, NoArrivalsKeepsTheta) {
  const auto p = hard();
  OnlineOptimizer opt(stale_omd(0.1), p, vec({0.7}), 4);
  const auto u = opt.round(1, {}, 1, 1);
  EXPECT_EQ(opt.theta()(0), 0.7);
  EXPECT_EQ(u.step_norm_sq, 0.0);
}

TEST(OnlineOptimizer, TwoStageZeroResidualIsZeroUpdate) {
  LQRConfig cfg;
  cfg.nx = 2;
  cfg.nu = 1;
  LQREnvironment env(cfg, 4);
  const auto& p = env.lqr();
  const ParamVector truth = p.true_params();
  auto rec = std::make_shared<OutcomeRecord>();
  rec->round = 1;
  rec->context = env.next_round(1).context;
  rec->outcome.values = Vector::Zero(cfg.nx);
  rec->dispatch_params = truth;
  rec->dispatch_decision = *p.exact_inner(truth, rec->context);
  OnlineOptimizer opt(two_stage(0.1), p, truth, 4);
  const std::vector<OutcomeRecordPtr> arr{rec};
  opt.round(1, arr, 0, 0);
  EXPECT_LE((opt.theta() - truth).norm(), 1e-14);
}

TEST(OnlineOptimizer, TwoStageRejectsMissingTarget) {
  const auto p = hard();
  OnlineOptimizer opt(two_stage(0.1), p, vec({0.7}), 4);
  const std::vector<OutcomeRecordPtr> arr{hard_record(1, 0.7)};
  expect_error([&] { opt.round(1, arr, 0, 0); }, ErrorKind::kConfig);
}

TEST(OnlineOptimizer, AttachTransportNames) {
  EXPECT_EQ(attach_transport(stale_adam()).name, "adam-igt");
  EXPECT_EQ(attach_transport(dftrl(0.1)).name, "dftrl-igt");
  EXPECT_EQ(attach_transport(stale_omd(0.1)).name, "igt-omd");
  EXPECT_EQ(attach_transport(stale_adam()).rule.kind, BaseRuleKind::kAdam);
  EXPECT_EQ(attach_transport(stale_adam()).source, GradientSource::kTransport);
}

HardQuadraticEnvironment hard_env(double eps = 0.0, double bound = 1.0) {
  HardQuadraticConfig c;
  c.epsilon_inner = eps;
  c.bound = bound;
  return HardQuadraticEnvironment(c);
}

TEST(Run, SynchronousGeometricDecay) {
  auto env = hard_env();
  RunOptions o;
  o.rounds = 30;
  o.delay = DelaySchedule::constant_delay(0);
  o.algo = igt_omd(0.1);
  o.algo.schedule.mode = ScheduleMode::kConstant;
  const auto res = run_single(env, o);
  // theta_{t+1} = (1 - eta C_0^2) theta_t from theta_1 = 1.
  EXPECT_NEAR(res.final_theta(0), std::pow(0.9, 30), 1e-12);
}

TEST(Run, SteadyStateIsOptimizerIndependent) {
  for (const auto& algo : {stale_omd(0.03), igt_omd(0.03), robust_omd(0.05, 10.0), dftrl(0.03)}) {
    auto env = hard_env(0.1);
    RunOptions o;
    o.rounds = 4000;
    o.delay = DelaySchedule::constant_delay(5);
    o.algo = algo;
    const auto res = run_single(env, o);
    EXPECT_NEAR(res.final_theta(0), -0.1, 2e-3) << algo.name;
  }
}

TEST(Run, StepNormEqualsEtaTimesGradient) {
  auto env = hard_env(0.05);
  RunOptions o;
  o.rounds = 200;
  o.delay = DelaySchedule::uniform(6);
  o.algo = igt_omd(0.05);
  o.domain_radius = std::numeric_limits<double>::infinity();
  const auto res = run_single(env, o);
  double prev_eta = 1.0;
  for (const auto& r : res.rows) {
    EXPECT_NEAR(std::sqrt(r.step_norm_sq), r.eta * r.grad_norm, 1e-14 + 1e-12 * r.eta * r.grad_norm);
    EXPECT_LE(r.eta, prev_eta);
    prev_eta = r.eta;
  }
}

TEST(Run, Deterministic) {
  SinkhornConfig c;
  c.n = 4;
  c.feature_dim = 5;
  c.hidden = 8;
  RunOptions o;
  o.rounds = 40;
  o.delay = DelaySchedule::uniform(5);
  o.algo = attach_transport(stale_adam());
  SinkhornEnvironment a(c, 9), b(c, 9);
  const auto ra = run_single(a, o), rb = run_single(b, o);
  ASSERT_EQ(ra.rows.size(), rb.rows.size());
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    EXPECT_EQ(ra.rows[i].true_loss, rb.rows[i].true_loss);
    EXPECT_EQ(ra.rows[i].step_norm_sq, rb.rows[i].step_norm_sq);
  }
  EXPECT_EQ(ra.final_theta, rb.final_theta);
  EXPECT_EQ(ra.delay_hash, rb.delay_hash);
}

// ----------------------------------------------------------------- delays

TEST(DelayQueue, ConstantDelayQueueLength) {
  for (int d : {0, 1, 4, 13}) {
    DelayQueue q;
    for (int t = 1; t <= 60; ++t) {
      q.advance(t, d, hard_record(t, 0.0));
      EXPECT_EQ(q.sigma(), std::min(t, d)) << "d=" << d << " t=" << t;
    }
  }
}

TEST(DelayQueue, BurstyReplay) {
  const auto sched = DelaySchedule::bursty(10, 40);
  DelaySampler sampler(sched, 1);
  DelayQueue q;
  const int T = 100;
  std::vector<int> arrival(T + 1);
  int max_sigma = 0, max_replay = 0;
  for (int t = 1; t <= T; ++t) {
    const int d = sampler.sample(t);
    EXPECT_EQ(d, ((t - 1) / 10) % 2 == 0 ? 0 : 40);
    arrival[static_cast<std::size_t>(t)] = t + d;
    const auto arr = q.advance(t, d, hard_record(t, 0.0));
    int replay = 0;
    for (int s = 1; s <= t; ++s) replay += arrival[static_cast<std::size_t>(s)] > t;
    int expected_arrivals = 0;
    for (int s = 1; s <= t; ++s) expected_arrivals += arrival[static_cast<std::size_t>(s)] == t;
    EXPECT_EQ(q.sigma(), replay) << "t=" << t;
    EXPECT_EQ(static_cast<int>(arr.size()), expected_arrivals);
    max_sigma = std::max(max_sigma, q.sigma());
    max_replay = std::max(max_replay, replay);
  }
  EXPECT_EQ(max_sigma, max_replay);
  EXPECT_LE(max_sigma, 40);
}

TEST(DelayQueue, UniformMeanQueueLength) {
  const int dmax = 20, T = 10000;
  DelaySampler sampler(DelaySchedule::uniform(dmax), 11);
  DelayQueue q;
  double total = 0.0;
  for (int t = 1; t <= T; ++t) {
    q.advance(t, sampler.sample(t), hard_record(t, 0.0));
    total += q.sigma();
  }
  EXPECT_NEAR(total / T, dmax / 2.0, 0.1 * dmax / 2.0);
}

TEST(DelayQueue, RejectsOutOfOrderRounds) {
  DelayQueue q;
  q.advance(1, 0, hard_record(1, 0.0));
  expect_error([&] { q.advance(3, 0, hard_record(3, 0.0)); }, ErrorKind::kInvalidArgument);
}

TEST(DelaySampler, PoissonCap) {
  auto s = DelaySchedule::poisson(2.0);
  s.poisson_cap_factor = 1.0;
  DelaySampler sampler(s, 2);
  for (int t = 1; t <= 2000; ++t) EXPECT_LE(sampler.sample(t), 2);
  EXPECT_GT(sampler.cap_hits(), 0);
}

TEST(OU, FixedPointAndDecay) {
  const Vector mean = vec({1.0, -1.0});
  OUProcess fixed(mean, 0.05, 0.0, 1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(fixed.step(), mean);

  OUProcess decay(mean, 0.05, 0.0, 1);
  decay.set_state(vec({3.0, 0.0}));
  double prev = (decay.state() - mean).norm();
  for (int i = 0; i < 20; ++i) {
    const double now = (decay.step() - mean).norm();
    EXPECT_NEAR(now / prev, 0.95, 1e-12);
    prev = now;
  }
}

TEST(OU, StationaryVarianceMonteCarlo) {
  const double gamma = 0.05, s = 0.1;
  OUProcess p(Vector::Zero(1), gamma, s, 17);
  for (int i = 0; i < 2000; ++i) p.step();
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = p.step()(0);
    sum += x;
    sq += x * x;
  }
  const double var = sq / n - (sum / n) * (sum / n);
  // AR(1) with coefficient (1 - gamma): s^2 / (1 - (1 - gamma)^2).
  const double ar1 = s * s / (1.0 - (1.0 - gamma) * (1.0 - gamma));
  EXPECT_NEAR(var, ar1, 0.1 * ar1);
  EXPECT_NEAR(p.stationary_variance(), ar1, 1e-15);
}

// ------------------------------------------------------------ environments

TEST(HardQuadratic, ClosedForms) {
  const auto p = hard();
  EXPECT_DOUBLE_EQ(p.outer_objective(3.0), 4.5);
  EXPECT_DOUBLE_EQ(p.exact_adjoint(2.0), 2.0);
  const Vector w = *p.exact_inner(vec({3.0}), {});
  EXPECT_DOUBLE_EQ(p.true_loss(w, vec({3.0}), {}, {}), 4.5);
  expect_error([] { hard(2.0, 2.0); }, ErrorKind::kConfig);
}

TEST(LQR, StationaryAtTruth) {
  // Summing the per-round loss over x = e_1..e_n with zero noise recovers
  // the Frobenius model loss, whose minimizer at the true dynamics is the
  // exact inner gain, so the summed hypergradient vanishes.
  LQRConfig cfg;
  cfg.nx = 4;
  cfg.nu = 2;
  LQREnvironment env(cfg, 7);
  const auto& p = env.lqr();
  const ParamVector truth = p.true_params();
  ParamVector g = ParamVector::Zero(p.param_dim());
  for (int i = 0; i < cfg.nx; ++i) {
    Context ctx;
    ctx.values = Vector::Unit(cfg.nx, i);
    Outcome z;
    z.values = Vector::Zero(cfg.nx);
    const Vector w = *p.exact_inner(truth, ctx);
    const auto v = solve_adjoint(p, w, truth, ctx, z, {1e-13, 0, false});
    g += hypergradient_at(p, w, v, truth, ctx, z).values;
  }
  EXPECT_LE(g.norm(), 1e-6);
}

TEST(LQR, ScalarGainClosedForm) {
  for (double r : {0.1, 0.2, 0.4}) {
    LQRConfig cfg;
    cfg.nx = 1;
    cfg.nu = 1;
    cfg.r_scale = r;
    LQRProblem p(cfg, Matrix::Constant(1, 1, 0.9), Matrix::Constant(1, 1, 0.5));
    const double k = (*p.exact_inner(p.true_params(), {}))(0);
    EXPECT_NEAR(k, 0.5 * 0.9 / (0.25 + r), 1e-12);
  }
  LQRConfig lo, hi;
  lo.nx = hi.nx = 2;
  lo.nu = hi.nu = 2;
  hi.r_scale = 2 * lo.r_scale;
  std::mt19937_64 rng(2);
  const Matrix a = stable_matrix(2, 0.9, rng), b = gaussian_matrix(2, 2, rng);
  LQRProblem pl(lo, a, b), ph(hi, a, b);
  EXPECT_LT(ph.exact_inner(ph.true_params(), {})->norm(), pl.exact_inner(pl.true_params(), {})->norm());
}

TEST(SinkhornOT, TrueLossIsModelLossWithoutEntropy) {
  SinkhornConfig c;
  c.n = 3;
  c.feature_dim = 4;
  c.hidden = 6;
  SinkhornEnvironment env(c, 1);
  const auto& p = env.sinkhorn();
  const auto round = env.next_round(1);
  const ParamVector theta = env.initial_params();
  const Vector w = *p.exact_inner(theta, round.context);
  Outcome z;
  z.values = p.predicted_cost(theta, round.context);
  const double entropy = c.epsilon * (w.array() * w.array().log()).sum();
  EXPECT_NEAR(p.true_loss(w, theta, round.context, z), p.model_loss(w, theta, round.context) - entropy,
              1e-12);
  EXPECT_NEAR(w.sum(), 1.0, 1e-9);
}

TEST(GridPath, OracleGapAndSurrogate) {
  GridPathConfig c;
  c.rows = c.cols = 6;
  c.maps = 2;
  c.features = 12;
  GridPathEnvironment env(c, 3);
  const auto& p = env.grid();
  for (int t = 1; t <= 5; ++t) {
    const auto round = env.next_round(t);
    const auto oracle = p.shortest_path(round.outcome.values, round.context);
    const Vector y = oracle.indicator(c.rows, c.cols);
    EXPECT_NEAR(*env.optimality_gap(y, round), 0.0, 1e-12);

    // A perturbation that leaves the path unchanged gives a zero surrogate.
    auto rec = std::make_shared<OutcomeRecord>();
    rec->context = round.context;
    rec->outcome.values = Vector::Zero(p.decision_dim());
    const ParamVector theta = env.initial_params();
    const auto frozen = p.surrogate()->freeze(*rec, theta);
    EXPECT_EQ(p.surrogate()->evaluate(*rec, frozen, theta).norm(), 0.0);
  }
  GridPathConfig bad = c;
  bad.perturbation = 0.0;
  expect_error([&] { GridPathEnvironment(bad, 1); }, ErrorKind::kConfig);
}

// -------------------------------------------------------------- statistics

TEST(Stats, LogLogExamples) {
  const std::vector<double> s{1, 2, 5, 10};
  std::vector<double> lin, quad;
  for (double x : s) {
    lin.push_back(x);
    quad.push_back(x * x);
  }
  EXPECT_NEAR(loglog_fit(s, lin).slope, 1.0, 1e-12);
  EXPECT_NEAR(loglog_fit(s, lin).r_squared, 1.0, 1e-12);
  EXPECT_NEAR(loglog_fit(s, quad).slope, 2.0, 1e-12);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> N(0.0, 0.01);
  const std::vector<double> wide{1, 2, 5, 10, 20, 50};
  std::vector<double> noisy;
  for (double x : wide) noisy.push_back(3.0 * std::pow(x, 1.5) * (1.0 + N(rng)));
  const double slope = loglog_fit(wide, noisy).slope;
  EXPECT_GE(slope, 1.45);
  EXPECT_LE(slope, 1.55);

  const std::vector<double> neg{1.0, -2.0, 3.0};
  expect_error([&] { loglog_fit(neg, neg); }, ErrorKind::kInvalidArgument);
}

TEST(Stats, WelchExamples) {
  const std::vector<double> same{1.0, 2.0, 3.0};
  const auto id = welch_t(same, same);
  EXPECT_EQ(id.t_stat, 0.0);
  EXPECT_EQ(id.p_value, 1.0);

  const std::vector<double> zeros{0, 0, 0, 0, 0}, ones{1, 1.001, 0.999, 1.0005, 0.9995};
  EXPECT_LT(welch_t(zeros, ones).p_value, 1e-4);

  // Hand computation: variances 55.5 and 24.5, se = 4, t = -49/4,
  // dof = 16^2 / ((11.1^2 + 4.9^2) / 4).
  const std::vector<double> a{579, 581, 575, 590, 570}, b{628, 630, 622, 635, 625};
  const auto r = welch_t(a, b);
  EXPECT_NEAR(r.t_stat, -12.25, 1e-12);
  EXPECT_NEAR(r.dof, 256.0 / ((11.1 * 11.1 + 4.9 * 4.9) / 4.0), 1e-9);
  EXPECT_LT(r.p_value, 0.001);

  const std::vector<double> single{1.0};
  expect_error([&] { welch_t(single, a); }, ErrorKind::kInsufficientSamples);
}

TEST(Stats, WelchPValueAgainstIntegratedDensity) {
  // Two-sided tail of Student's t by Simpson integration of the density.
  const std::vector<double> a{1.2, 0.4, 2.2, 1.9, 0.8, 1.1}, b{0.3, 0.9, -0.4, 0.5, 0.2};
  const auto r = welch_t(a, b);
  const double nu = r.dof;
  const double c = std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / nu, -(nu + 1) / 2); };
  const double t = std::abs(r.t_stat);
  const int n = 20000;
  const double h = t / n;
  double inner = pdf(0) + pdf(t);
  for (int i = 1; i < n; ++i) inner += (i % 2 ? 4 : 2) * pdf(i * h);
  inner *= h / 3;
  EXPECT_NEAR(r.p_value, 1.0 - 2.0 * inner, 1e-8);
}

TEST(Stats, ImprovementAndFormatting) {
  EXPECT_NEAR(improvement_pct(568, 628), 9.554140127, 1e-9);
  EXPECT_EQ(improvement_pct(579, 579), 0.0);
  EXPECT_EQ(format_p(1e-15), "<1e-12");
  EXPECT_EQ(format_p(0.0123), "0.0123");
}

double hard_eta_max(int d, int horizon, double resolution = 1e-3) {
  auto stable = [&](double eta) {
    auto env = hard_env();
    RunOptions o;
    o.rounds = horizon;
    o.delay = DelaySchedule::constant_delay(d);
    o.algo = stale_omd(eta);
    o.domain_radius = std::numeric_limits<double>::infinity();
    o.keep_rows = false;
    return !run_single(env, o).diverged;
  };
  return eta_max_search(stable, 1e-4, 2.5, resolution).eta_max;
}

TEST(EtaMax, SynchronousBoundary) {
  EXPECT_NEAR(hard_eta_max(0, 20000), 2.0, 1e-3);
}

TEST(EtaMax, DelayedRecurrence) {
  // theta_{t+1} = theta_t - eta theta_{t-d} loses stability at
  // eta = 2 sin(pi / (2 (2d + 1))).
  double prev = std::numeric_limits<double>::infinity();
  for (int d : {1, 2, 5, 10}) {
    const double eta = hard_eta_max(d, 20000);
    const double boundary = 2.0 * std::sin(std::numbers::pi / (2.0 * (2 * d + 1)));
    EXPECT_NEAR(eta, boundary, 5e-3) << "d=" << d;
    EXPECT_LT(eta, prev) << "d=" << d;
    if (d == 5) {
      EXPECT_GE(eta, 1.0 / (2.0 * d));
      EXPECT_LT(eta, 2.0);
    }
    prev = eta;
  }
}

TEST(EtaMax, HorizonDoublingMovesAtMostOneStep) {
  EXPECT_LE(std::abs(hard_eta_max(5, 20000) - hard_eta_max(5, 40000)), 1e-3 + 1e-12);
}

TEST(EtaMax, Contract) {
  expect_error([] { eta_max_search([](double) { return true; }, 1.0, 1.0, 1e-3); },
               ErrorKind::kDegenerateInterval);
  expect_error([] { eta_max_search([](double) { return false; }, 0.1, 1.0, 1e-3); },
               ErrorKind::kDiverged);
  const auto upper = eta_max_search([](double) { return true; }, 0.1, 1.0, 1e-3);
  EXPECT_TRUE(upper.upper_stable);
  EXPECT_EQ(upper.eta_max, 1.0);
}

}  // namespace

#pragma once

// Entropic optimal transport with a learned cost predictor. The decision is
// the coupling w (n x n, column-major), the model loss is
// <C_pred(theta, x), w> + eps * sum w log w over the transport polytope, and
// the realized loss is <C_true(t), w>. The features x_t follow an OU process
// around a fixed mean, C_true(t) is a fixed teacher network applied to x_t,
// optionally plus an unobserved OU drift on the costs themselves.

#include "igt/delay.hpp"
#include "igt/env/environment.hpp"
#include "igt/env/mlp.hpp"
#include "igt/solvers/assignment.hpp"
#include "igt/solvers/sinkhorn.hpp"

#include <cmath>

namespace igt {

struct SinkhornConfig {
  int n = 10;
  int feature_dim = 20;
  double epsilon = 0.05;
  int hidden = 128;  // 0 selects the linear predictor
  int iterations = 10;
  int reference_iterations = 5000;
  double reference_tolerance = 1e-12;
  double cost_floor = 1e-3;
  double coupling_floor = 1e-30;
  bool dual_adjoint = true;  // false solves the adjoint by CG on the coupling space
  bool entropic_true_loss = false;  // realized loss also charges eps * sum w log w

  int teacher_hidden = 32;
  double cost_offset = 1.0;
  double teacher_scale = 0.3;
  double feature_mean_scale = 1.0;  // x_bar ~ N(0, scale^2 I)
  double ou_gamma = 0.05;
  double ou_noise = 0.05;         // feature OU noise
  double cost_drift_noise = 0.0;  // unobserved OU drift added to C_true
  double init_out_scale = 0.1;
  std::uint64_t instance_seed = 0;
  bool instance_from_run_seed = false;

  void validate() const {
    if (n < 2) throw Error(ErrorKind::kConfig, "sinkhorn n must be >= 2");
    if (feature_dim < 1) throw Error(ErrorKind::kConfig, "feature_dim must be >= 1");
    if (!(epsilon > 0.0)) throw Error(ErrorKind::kConfig, "sinkhorn epsilon must be > 0");
    if (hidden < 0 || teacher_hidden < 0) throw Error(ErrorKind::kConfig, "hidden must be >= 0");
    if (iterations < 1) throw Error(ErrorKind::kConfig, "sinkhorn iterations must be >= 1");
    if (!(cost_floor > 0.0)) throw Error(ErrorKind::kConfig, "cost floor must be > 0");
    if (!(ou_gamma > 0.0 && ou_gamma <= 1.0)) throw Error(ErrorKind::kConfig, "ou gamma in (0,1]");
  }
};

class SinkhornProblem final : public BilevelProblem {
 public:
  explicit SinkhornProblem(SinkhornConfig cfg)
      : cfg_(cfg), net_((cfg.validate(), cfg.feature_dim), cfg.hidden, cfg.n * cfg.n),
        marginal_(Vector::Constant(cfg.n, 1.0 / cfg.n)) {}

  const SinkhornConfig& config() const { return cfg_; }
  const TwoLayerNet& network() const { return net_; }

  std::string_view name() const override { return "sinkhorn"; }
  Index param_dim() const override { return net_.param_count(); }
  Index decision_dim() const override { return static_cast<Index>(cfg_.n) * cfg_.n; }

  /// Clamped predicted cost vector.
  Vector predicted_cost(const ParamVector& theta, const Context& ctx) const {
    return net_.forward(theta, ctx.values).cwiseMax(cfg_.cost_floor);
  }

  double model_loss(const DecisionVector& w, const ParamVector& theta,
                    const Context& ctx) const override {
    const Vector c = predicted_cost(theta, ctx);
    const Vector wf = w.cwiseMax(cfg_.coupling_floor);
    return c.dot(w) + cfg_.epsilon * (w.array() * wf.array().log()).sum();
  }
  double true_loss(const DecisionVector& w, const ParamVector&, const Context&,
                   const Outcome& z) const override {
    if (!cfg_.entropic_true_loss) return z.values.dot(w);
    const Vector wf = w.cwiseMax(cfg_.coupling_floor);
    return z.values.dot(w) + cfg_.epsilon * (w.array() * wf.array().log()).sum();
  }
  DecisionVector grad_w_model(const DecisionVector& w, const ParamVector& theta,
                              const Context& ctx) const override {
    const Vector wf = w.cwiseMax(cfg_.coupling_floor);
    return predicted_cost(theta, ctx) + cfg_.epsilon * (wf.array().log() + 1.0).matrix();
  }
  DecisionVector grad_w_true(const DecisionVector& w, const ParamVector&, const Context&,
                             const Outcome& z) const override {
    if (!cfg_.entropic_true_loss) return z.values;
    const Vector wf = w.cwiseMax(cfg_.coupling_floor);
    return z.values + cfg_.epsilon * (wf.array().log() + 1.0).matrix();
  }
  ParamVector grad_theta_true_fixed_w(const DecisionVector&, const ParamVector&, const Context&,
                                      const Outcome&) const override {
    return ParamVector::Zero(param_dim());
  }
  DecisionVector hess_ww_model_vp(const DecisionVector& w, const ParamVector&, const Context&,
                                  const DecisionVector& v) const override {
    const Vector wf = w.cwiseMax(cfg_.coupling_floor);
    return project_tangent(w, (cfg_.epsilon * project_tangent(w, v).array() / wf.array()).matrix());
  }
  ParamVector cross_partial_transpose_vp(const DecisionVector&, const ParamVector& theta,
                                         const Context& ctx,
                                         const DecisionVector& v) const override {
    return net_.vjp(theta, ctx.values, masked(theta, ctx.values, v));
  }

  /// Removes row and column means: the tangent space of the polytope.
  DecisionVector project_tangent(const DecisionVector&, const DecisionVector& v) const override {
    Eigen::Map<const Matrix> m(v.data(), cfg_.n, cfg_.n);
    Matrix out = m;
    out.colwise() -= m.rowwise().mean();
    out.rowwise() -= m.colwise().mean();
    out.array() += m.mean();
    return Eigen::Map<const Vector>(out.data(), out.size());
  }

  // Stationarity of min_v 1/2 v^T D v - b^T v over the tangent space gives
  // v_ij = w_ij (b_ij + a_i + c_j) / eps with (a, c) from the 2n-dimensional
  // system enforcing zero row and column sums. D = eps / w has condition
  // number exp(cost spread / eps), which defeats CG on the 100-dim system.
  std::optional<DecisionVector> direct_adjoint(const DecisionVector& w, const ParamVector&,
                                               const Context&,
                                               const DecisionVector& rhs) const override {
    if (!cfg_.dual_adjoint) return std::nullopt;
    const Index n = cfg_.n;
    const Matrix wm = as_matrix(w.cwiseMax(cfg_.coupling_floor));
    const Matrix b = as_matrix(rhs);
    const Matrix wb = wm.cwiseProduct(b);
    // Unknowns (a_0..a_{n-1}, c_0..c_{n-2}); c_{n-1} = 0 removes the null direction.
    const Index m = 2 * n - 1;
    Matrix k = Matrix::Zero(m, m);
    Vector f(m);
    for (Index i = 0; i < n; ++i) {
      k(i, i) = wm.row(i).sum();
      for (Index j = 0; j + 1 < n; ++j) k(i, n + j) = wm(i, j);
      f(i) = -wb.row(i).sum();
    }
    for (Index j = 0; j + 1 < n; ++j) {
      for (Index i = 0; i < n; ++i) k(n + j, i) = wm(i, j);
      k(n + j, n + j) = wm.col(j).sum();
      f(n + j) = -wb.col(j).sum();
    }
    const Vector sol = k.ldlt().solve(f);
    Matrix v(n, n);
    for (Index j = 0; j < n; ++j) {
      const double cj = j + 1 < n ? sol(n + j) : 0.0;
      for (Index i = 0; i < n; ++i) v(i, j) = wm(i, j) * (b(i, j) + sol(i) + cj) / cfg_.epsilon;
    }
    return Eigen::Map<const Vector>(v.data(), v.size());
  }

  std::optional<DecisionVector> exact_inner(const ParamVector& theta,
                                            const Context& ctx) const override {
    return reference_coupling(predicted_cost(theta, ctx));
  }

  /// Cold-started K-step Sinkhorn; the warm start is not used because the
  /// potentials of a different cost matrix carry no useful information.
  InnerSolveReport solve_inner(const ParamVector& theta, const Context& ctx,
                               const DecisionVector&) const override {
    const Vector c = predicted_cost(theta, ctx);
    const auto res = sinkhorn_log(as_matrix(c), marginal_, marginal_, cfg_.epsilon,
                                  cfg_.iterations);
    Matrix p = res.coupling();
    InnerSolveReport r;
    r.iterations_used = cfg_.iterations;
    r.epsilon_estimate = marginal_residual(p, marginal_, marginal_);
    r.floored_entries = static_cast<int>((p.array() < cfg_.coupling_floor).count());
    p = p.cwiseMax(cfg_.coupling_floor);
    r.solution = Eigen::Map<const Vector>(p.data(), p.size());
    r.residual_norm = project_tangent(r.solution, grad_w_model(r.solution, theta, ctx)).norm();
    return r;
  }

  std::optional<Vector> prediction_target(const Context&, const OutcomeRecord& rec) const override {
    return rec.outcome.values;
  }
  Vector prediction(const ParamVector& theta, const OutcomeRecord& rec) const override {
    return predicted_cost(theta, rec.context);
  }
  ParamVector prediction_jacobian_transpose_vp(const ParamVector& theta, const OutcomeRecord& rec,
                                               const Vector& r) const override {
    return net_.vjp(theta, rec.context.values, masked(theta, rec.context.values, r));
  }

  /// Converged coupling for a cost vector.
  DecisionVector reference_coupling(const Vector& cost) const {
    const Matrix c = as_matrix(cost);
    auto res = sinkhorn_log(c, marginal_, marginal_, cfg_.epsilon, 50);
    int done = 50;
    while (done < cfg_.reference_iterations &&
           marginal_residual(res.coupling(), marginal_, marginal_) > cfg_.reference_tolerance) {
      res = sinkhorn_log(c, marginal_, marginal_, cfg_.epsilon, 50, &res.f, &res.g);
      done += 50;
    }
    const Matrix p = res.coupling();
    return Eigen::Map<const Vector>(p.data(), p.size());
  }

  Matrix as_matrix(const Vector& c) const { return Eigen::Map<const Matrix>(c.data(), cfg_.n, cfg_.n); }

 private:
  // Zeroes cotangent entries whose prediction sits on the floor.
  Vector masked(const ParamVector& theta, const Vector& x, const Vector& v) const {
    const Vector raw = net_.forward(theta, x);
    return (raw.array() > cfg_.cost_floor).select(v, 0.0);
  }

  SinkhornConfig cfg_;
  TwoLayerNet net_;
  Vector marginal_;
};

class SinkhornEnvironment final : public Environment {
 public:
  SinkhornEnvironment(SinkhornConfig cfg, std::uint64_t seed)
      : problem_(cfg), teacher_(cfg.feature_dim, cfg.teacher_hidden, cfg.n * cfg.n),
        features_(Vector::Zero(cfg.feature_dim), cfg.ou_gamma, cfg.ou_noise, seed ^ 0xfea7ull),
        drift_(Vector::Zero(cfg.n * cfg.n), cfg.ou_gamma, cfg.cost_drift_noise, seed ^ 0x5eedull) {
    auto inst = make_stream(cfg.instance_from_run_seed ? seed : cfg.instance_seed, 1);
    teacher_params_ = teacher_.init(inst, 1.0, 0.0);
    theta1_ = problem_.network().init(inst, cfg.init_out_scale, cfg.cost_offset);
    const Vector mean = gaussian_vector(cfg.feature_dim, inst, cfg.feature_mean_scale);
    features_ = OUProcess(mean, cfg.ou_gamma, cfg.ou_noise, seed ^ 0xfea7ull);
    features_.set_state(mean);
  }

  const SinkhornProblem& sinkhorn() const { return problem_; }
  const BilevelProblem& problem() const override { return problem_; }
  ParamVector initial_params() const override { return theta1_; }
  DecisionVector initial_decision() const override {
    const double n = problem_.config().n;
    return DecisionVector::Constant(problem_.decision_dim(), 1.0 / (n * n));
  }

  /// Noise-free cost generated by the teacher for features x.
  Vector teacher_cost(const Vector& x) const {
    const auto& c = problem_.config();
    return (c.cost_offset + c.teacher_scale * teacher_.forward(teacher_params_, x).array())
        .matrix();
  }

  RoundData next_round(int) override {
    RoundData r;
    r.context.values = features_.step();
    const Vector& d = drift_.step();
    r.outcome.values = teacher_cost(r.context.values) + d;
    return r;
  }

  // A fixed predictor reproducing the teacher costs scaled by k -> infinity
  // drives the entropic coupling to the unregularized optimum, so the
  // hindsight comparator is the exact transport LP value (a scaled
  // assignment under uniform marginals).
  // Under the entropic loss the per-round optimum is the converged coupling
  // of C_true itself.
  double comparator_loss(const RoundData& round) const override {
    const auto& c = problem_.config();
    if (c.entropic_true_loss) {
      const DecisionVector w = problem_.reference_coupling(round.outcome.values);
      return problem_.true_loss(w, {}, round.context, round.outcome);
    }
    const Matrix cost = problem_.as_matrix(round.outcome.values);
    return min_cost_assignment(cost).cost / c.n;
  }

  std::string metadata() const override {
    return problem_.config().hidden == 0
               ? "comparator: unregularized transport optimum; linear predictor"
               : "comparator: unregularized transport optimum; tanh MLP predictor";
  }

 private:
  SinkhornProblem problem_;
  TwoLayerNet teacher_;
  Vector teacher_params_;
  ParamVector theta1_;
  OUProcess features_;
  OUProcess drift_;
};

}  // namespace igt

#pragma once

// One-step LQR proxy with learned dynamics theta = [A_hat B_hat] (column-major
// vec of A_hat, then of B_hat) and decision w = vec(K) for the gain u = -K x.
//   J(K; theta) = tr((A_hat - B_hat K)^T Q (A_hat - B_hat K)) + tr(K^T R K) + tr(Q Sigma_w)
// is the expected one-step cost for x ~ N(0, I). The realized loss rolls
// the true dynamics once: y = (A - B K) x + xi, L = y^T Q y + (K x)^T R (K x).

#include "igt/env/environment.hpp"
#include "igt/solvers/inner_gd.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace igt {

struct LQRConfig {
  int nx = 10;
  int nu = 3;
  double q_scale = 1.0;     // Q = q_scale * I
  double r_scale = 0.1;     // R = r_scale * I
  double noise_var = 0.01;  // Sigma_w = noise_var * I
  double spectral_radius = 0.95;
  double b_scale = 0.5;
  double init_perturbation = 0.3;  // theta_1 = theta_true + this * N(0, I)
  double loss_cap = 1e6;
  InnerSolverConfig inner{10, 0.01, true};

  void validate() const {
    if (nx < 1 || nu < 1) throw Error(ErrorKind::kConfig, "LQR dimensions must be >= 1");
    if (!(q_scale > 0.0) || !(r_scale > 0.0)) throw Error(ErrorKind::kConfig, "Q, R must be > 0");
    if (!(noise_var >= 0.0)) throw Error(ErrorKind::kConfig, "noise variance must be >= 0");
    if (!(spectral_radius > 0.0 && spectral_radius < 1.0)) {
      throw Error(ErrorKind::kConfig, "spectral radius must lie in (0, 1)");
    }
    inner.validate();
  }
};

class LQRProblem final : public BilevelProblem {
 public:
  explicit LQRProblem(LQRConfig cfg, Matrix a_true, Matrix b_true)
      : cfg_((cfg.validate(), cfg)), a_true_(std::move(a_true)), b_true_(std::move(b_true)) {
    if (a_true_.rows() != cfg_.nx || a_true_.cols() != cfg_.nx || b_true_.rows() != cfg_.nx ||
        b_true_.cols() != cfg_.nu) {
      throw Error(ErrorKind::kDimensionMismatch, "true dynamics do not match LQR dimensions");
    }
  }

  const LQRConfig& config() const { return cfg_; }
  const Matrix& a_true() const { return a_true_; }
  const Matrix& b_true() const { return b_true_; }

  std::string_view name() const override { return "lqr"; }
  Index param_dim() const override { return static_cast<Index>(cfg_.nx) * (cfg_.nx + cfg_.nu); }
  Index decision_dim() const override { return static_cast<Index>(cfg_.nu) * cfg_.nx; }

  ParamVector pack(const Matrix& a, const Matrix& b) const {
    ParamVector th(param_dim());
    th.head(a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
    th.tail(b.size()) = Eigen::Map<const Vector>(b.data(), b.size());
    return th;
  }
  ParamVector true_params() const { return pack(a_true_, b_true_); }

  double model_loss(const DecisionVector& w, const ParamVector& th, const Context&) const override {
    const Matrix k = gain(w);
    const Matrix closed = a_hat(th) - b_hat(th) * k;
    return cfg_.q_scale * closed.squaredNorm() + cfg_.r_scale * k.squaredNorm() +
           cfg_.q_scale * cfg_.noise_var * cfg_.nx;
  }

  double true_loss(const DecisionVector& w, const ParamVector&, const Context& ctx,
                   const Outcome& z) const override {
    const Matrix k = gain(w);
    const Vector u = -k * ctx.values;
    const Vector y = a_true_ * ctx.values + b_true_ * u + z.values;
    const double loss = cfg_.q_scale * y.squaredNorm() + cfg_.r_scale * u.squaredNorm();
    return std::isfinite(loss) ? std::min(loss, cfg_.loss_cap) : cfg_.loss_cap;
  }

  DecisionVector grad_w_model(const DecisionVector& w, const ParamVector& th,
                              const Context&) const override {
    const Matrix k = gain(w);
    const Matrix bh = b_hat(th);
    const Matrix g = 2.0 * (-cfg_.q_scale * bh.transpose() * (a_hat(th) - bh * k) +
                            cfg_.r_scale * k);
    return flatten(g);
  }

  DecisionVector grad_w_true(const DecisionVector& w, const ParamVector&, const Context& ctx,
                             const Outcome& z) const override {
    const Matrix k = gain(w);
    const Vector& x = ctx.values;
    const Vector y = (a_true_ - b_true_ * k) * x + z.values;
    const Matrix g = -2.0 * cfg_.q_scale * b_true_.transpose() * y * x.transpose() +
                     2.0 * cfg_.r_scale * k * x * x.transpose();
    return flatten(g);
  }

  ParamVector grad_theta_true_fixed_w(const DecisionVector&, const ParamVector&, const Context&,
                                      const Outcome&) const override {
    return ParamVector::Zero(param_dim());
  }

  DecisionVector hess_ww_model_vp(const DecisionVector&, const ParamVector& th, const Context&,
                                  const DecisionVector& v) const override {
    const Matrix bh = b_hat(th);
    const Matrix vm = gain(v);
    return flatten(2.0 * (cfg_.q_scale * bh.transpose() * (bh * vm) + cfg_.r_scale * vm));
  }

  ParamVector cross_partial_transpose_vp(const DecisionVector& w, const ParamVector& th,
                                         const Context&, const DecisionVector& v) const override {
    const Matrix k = gain(w);
    const Matrix vm = gain(v);
    const Matrix ah = a_hat(th);
    const Matrix bh = b_hat(th);
    const double q = cfg_.q_scale;
    const Matrix da = -2.0 * q * bh * vm;
    const Matrix db = -2.0 * q * ah * vm.transpose() +
                      2.0 * q * bh * (k * vm.transpose() + vm * k.transpose());
    return pack(da, db);
  }

  std::optional<DecisionVector> exact_inner(const ParamVector& th, const Context&) const override {
    const Matrix bh = b_hat(th);
    const Matrix h = cfg_.q_scale * bh.transpose() * bh +
                     cfg_.r_scale * Matrix::Identity(cfg_.nu, cfg_.nu);
    const Matrix k = h.ldlt().solve(cfg_.q_scale * bh.transpose() * a_hat(th));
    return flatten(k);
  }

  InnerSolveReport solve_inner(const ParamVector& th, const Context& ctx,
                               const DecisionVector& warm) const override {
    return inner_gd(*this, th, ctx, warm, cfg_.inner, 2.0 * cfg_.r_scale);
  }

  std::optional<Vector> prediction_target(const Context& ctx,
                                          const OutcomeRecord& rec) const override {
    const Vector u = -gain(rec.dispatch_decision) * ctx.values;
    return Vector(a_true_ * ctx.values + b_true_ * u + rec.outcome.values);
  }
  Vector prediction(const ParamVector& th, const OutcomeRecord& rec) const override {
    const Vector u = -gain(rec.dispatch_decision) * rec.context.values;
    return a_hat(th) * rec.context.values + b_hat(th) * u;
  }
  ParamVector prediction_jacobian_transpose_vp(const ParamVector&, const OutcomeRecord& rec,
                                               const Vector& r) const override {
    const Vector u = -gain(rec.dispatch_decision) * rec.context.values;
    return pack(r * rec.context.values.transpose(), r * u.transpose());
  }

  Eigen::Map<const Matrix> a_hat(const ParamVector& th) const {
    return Eigen::Map<const Matrix>(th.data(), cfg_.nx, cfg_.nx);
  }
  Eigen::Map<const Matrix> b_hat(const ParamVector& th) const {
    return Eigen::Map<const Matrix>(th.data() + cfg_.nx * cfg_.nx, cfg_.nx, cfg_.nu);
  }
  Eigen::Map<const Matrix> gain(const DecisionVector& w) const {
    return Eigen::Map<const Matrix>(w.data(), cfg_.nu, cfg_.nx);
  }

 private:
  static DecisionVector flatten(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
  }

  LQRConfig cfg_;
  Matrix a_true_;
  Matrix b_true_;
};

/// Gaussian matrix rescaled to the requested spectral radius.
inline Matrix stable_matrix(Index n, double radius, std::mt19937_64& rng) {
  Matrix a = gaussian_matrix(n, n, rng);
  const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
  return a * (radius / rho);
}

class LQREnvironment final : public Environment {
 public:
  LQREnvironment(LQRConfig cfg, std::uint64_t seed)
      : problem_(make_problem(cfg, seed)), rounds_(make_stream(seed, 2)) {
    auto inst = make_stream(seed, 3);
    theta1_ = problem_.true_params() +
              gaussian_vector(problem_.param_dim(), inst, problem_.config().init_perturbation);
    k_true_ = *problem_.exact_inner(problem_.true_params(), {});
  }

  const LQRProblem& lqr() const { return problem_; }
  const BilevelProblem& problem() const override { return problem_; }
  ParamVector initial_params() const override { return theta1_; }

  RoundData next_round(int) override {
    RoundData r;
    r.context.values = gaussian_vector(problem_.config().nx, rounds_);
    r.outcome.values =
        gaussian_vector(problem_.config().nx, rounds_, std::sqrt(problem_.config().noise_var));
    return r;
  }

  double comparator_loss(const RoundData& round) const override {
    return problem_.true_loss(k_true_, problem_.true_params(), round.context, round.outcome);
  }

  std::string metadata() const override {
    return "comparator: optimal gain of the true dynamics";
  }

 private:
  static LQRProblem make_problem(const LQRConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto inst = make_stream(seed, 1);
    Matrix a = stable_matrix(cfg.nx, cfg.spectral_radius, inst);
    Matrix b = gaussian_matrix(cfg.nx, cfg.nu, inst, cfg.b_scale);
    return LQRProblem(cfg, std::move(a), std::move(b));
  }

  LQRProblem problem_;
  std::mt19937_64 rounds_;
  ParamVector theta1_;
  DecisionVector k_true_;
};

}  // namespace igt

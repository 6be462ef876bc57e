#pragma once

// Shortest paths on synthetic terrain grids. Cell costs are predicted by a
// linear model over fixed per-cell features (random ReLU features of a noisy
// 3x3 terrain patch plus a constant), Dijkstra is the inner solver, and
// outer gradients come from the perturbation surrogate
//   g = J_pred^T [y(c_hat + lambda c_true) - y(c_hat)] / lambda.
// Cell vectors are row-major over the grid.

#include "igt/delay.hpp"
#include "igt/env/environment.hpp"
#include "igt/solvers/dijkstra.hpp"
#include "igt/transport.hpp"

#include <array>
#include <numeric>

namespace igt {

struct GridPathConfig {
  int rows = 12;
  int cols = 12;
  int maps = 20;
  int features = 128;  // p, including the constant feature
  std::array<double, 4> level_costs{1.0, 2.0, 5.0, 10.0};
  std::array<double, 4> level_fractions{0.4, 0.3, 0.15, 0.15};
  int smoothness = 4;  // coarse lattice spacing of the terrain field
  double feature_noise = 0.3;
  double perturbation = 5.0;  // lambda
  double cost_floor = 1e-3;
  double ou_gamma = 0.05;
  double ou_noise = 0.1;
  double init_cost = 3.0;  // theta_1 predicts this constant everywhere
  // The surrogate passes through the floor clamp unmasked. Masking lets the
  // surrogate's net downward push park cells on the floor where they never
  // receive signal again.
  bool straight_through = true;

  void validate() const {
    if (rows < 1 || cols < 1 || rows * cols < 2) throw Error(ErrorKind::kConfig, "grid too small");
    if (maps < 1) throw Error(ErrorKind::kConfig, "need at least one map");
    if (features < 2) throw Error(ErrorKind::kConfig, "need at least two features");
    if (!(perturbation > 0.0)) {
      throw Error(ErrorKind::kConfig, "perturbation scale lambda must be > 0");
    }
    if (!(cost_floor > 0.0)) throw Error(ErrorKind::kConfig, "cost floor must be > 0");
    for (double c : level_costs) {
      if (!(c > 0.0)) throw Error(ErrorKind::kConfig, "terrain costs must be > 0");
    }
    if (smoothness < 1) throw Error(ErrorKind::kConfig, "smoothness must be >= 1");
  }
};

/// Terrain levels (0..3) and base costs of one map.
struct TerrainMap {
  std::vector<int> levels;  // row-major
  Vector base_cost;
};

/// Smooth random field (bilinear interpolation of a coarse Gaussian
/// lattice) cut into terrain levels at the configured quantiles.
inline TerrainMap generate_terrain(const GridPathConfig& cfg, std::mt19937_64& rng) {
  const int cr = cfg.rows / cfg.smoothness + 2;
  const int cc = cfg.cols / cfg.smoothness + 2;
  const Matrix coarse = gaussian_matrix(cr, cc, rng);
  std::normal_distribution<double> nd(0.0, 0.15);
  const int n = cfg.rows * cfg.cols;
  std::vector<double> field(static_cast<std::size_t>(n));
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      const double fr = static_cast<double>(r) / cfg.smoothness;
      const double fc = static_cast<double>(c) / cfg.smoothness;
      const int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
      const double ar = fr - r0, ac = fc - c0;
      const double v = (1 - ar) * (1 - ac) * coarse(r0, c0) + ar * (1 - ac) * coarse(r0 + 1, c0) +
                       (1 - ar) * ac * coarse(r0, c0 + 1) + ar * ac * coarse(r0 + 1, c0 + 1);
      field[static_cast<std::size_t>(r * cfg.cols + c)] = v + nd(rng);
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return field[a] < field[b]; });

  TerrainMap map;
  map.levels.assign(static_cast<std::size_t>(n), 3);
  map.base_cost.resize(n);
  double cum = 0.0;
  std::size_t k = 0;
  for (int level = 0; level < 4; ++level) {
    cum += cfg.level_fractions[static_cast<std::size_t>(level)];
    const auto upto = level == 3 ? order.size()
                                 : std::min(order.size(), static_cast<std::size_t>(std::lround(cum * n)));
    for (; k < upto; ++k) map.levels[static_cast<std::size_t>(order[k])] = level;
  }
  for (int i = 0; i < n; ++i) {
    map.base_cost(i) = cfg.level_costs[static_cast<std::size_t>(map.levels[static_cast<std::size_t>(i)])];
  }
  return map;
}

class GridPathProblem;

class PerturbationSurrogate final : public SurrogateGradient {
 public:
  explicit PerturbationSurrogate(const GridPathProblem& p) : problem_(&p) {}
  AdjointVector freeze(const OutcomeRecord& rec, const ParamVector& theta) const override;
  ParamVector evaluate(const OutcomeRecord& rec, const AdjointVector& frozen,
                       const ParamVector& theta) const override;

 private:
  const GridPathProblem* problem_;
};

/// Context indices: {map, start_row, start_col, goal_row, goal_col}.
/// Outcome: realized true cell costs.
class GridPathProblem final : public BilevelProblem {
 public:
  GridPathProblem(GridPathConfig cfg, std::vector<TerrainMap> maps, std::vector<Matrix> features)
      : cfg_((cfg.validate(), cfg)), maps_(std::move(maps)), features_(std::move(features)),
        surrogate_(*this) {
    if (maps_.size() != features_.size() || maps_.empty()) {
      throw Error(ErrorKind::kConfig, "each map needs a feature matrix");
    }
  }

  const GridPathConfig& config() const { return cfg_; }
  const std::vector<TerrainMap>& maps() const { return maps_; }
  const Matrix& features(int map) const { return features_.at(static_cast<std::size_t>(map)); }

  std::string_view name() const override { return "grid-path"; }
  Index param_dim() const override { return cfg_.features; }
  Index decision_dim() const override { return static_cast<Index>(cfg_.rows) * cfg_.cols; }

  Vector raw_cost(const ParamVector& theta, int map) const { return features(map) * theta; }
  Vector predicted_cost(const ParamVector& theta, int map) const {
    return raw_cost(theta, map).cwiseMax(cfg_.cost_floor);
  }

  /// J_pred^T r, with cells on the floor contributing nothing.
  ParamVector cost_vjp(const ParamVector& theta, int map, const Vector& r) const {
    const Vector raw = raw_cost(theta, map);
    const Vector masked = (raw.array() > cfg_.cost_floor).select(r, 0.0);
    return features(map).transpose() * masked;
  }

  GridPath shortest_path(const Vector& cell_costs, const Context& ctx) const {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Matrix grid = Eigen::Map<const RowMajor>(cell_costs.data(), cfg_.rows, cfg_.cols);
    return dijkstra_grid(grid, start(ctx), goal(ctx));
  }
  Vector path_indicator(const Vector& cell_costs, const Context& ctx) const {
    return shortest_path(cell_costs, ctx).indicator(cfg_.rows, cfg_.cols);
  }

  double model_loss(const DecisionVector& w, const ParamVector& theta,
                    const Context& ctx) const override {
    return predicted_cost(theta, map_index(ctx)).dot(w);
  }
  double true_loss(const DecisionVector& w, const ParamVector&, const Context&,
                   const Outcome& z) const override {
    return z.values.dot(w);
  }
  DecisionVector grad_w_model(const DecisionVector&, const ParamVector& theta,
                              const Context& ctx) const override {
    return predicted_cost(theta, map_index(ctx));
  }
  DecisionVector grad_w_true(const DecisionVector&, const ParamVector&, const Context&,
                             const Outcome& z) const override {
    return z.values;
  }
  ParamVector grad_theta_true_fixed_w(const DecisionVector&, const ParamVector&, const Context&,
                                      const Outcome&) const override {
    return ParamVector::Zero(param_dim());
  }
  // The path objective is linear in w: no curvature, so the adjoint system is
  // never formed for this environment.
  DecisionVector hess_ww_model_vp(const DecisionVector&, const ParamVector&, const Context&,
                                  const DecisionVector& v) const override {
    return DecisionVector::Zero(v.size());
  }
  ParamVector cross_partial_transpose_vp(const DecisionVector&, const ParamVector& theta,
                                         const Context& ctx,
                                         const DecisionVector& v) const override {
    return cost_vjp(theta, map_index(ctx), v);
  }
  std::optional<DecisionVector> exact_inner(const ParamVector& theta,
                                            const Context& ctx) const override {
    return path_indicator(predicted_cost(theta, map_index(ctx)), ctx);
  }
  InnerSolveReport solve_inner(const ParamVector& theta, const Context& ctx,
                               const DecisionVector&) const override {
    InnerSolveReport r;
    r.solution = *exact_inner(theta, ctx);
    r.iterations_used = 1;
    return r;
  }

  std::optional<Vector> prediction_target(const Context&, const OutcomeRecord& rec) const override {
    return rec.outcome.values;
  }
  Vector prediction(const ParamVector& theta, const OutcomeRecord& rec) const override {
    return predicted_cost(theta, map_index(rec.context));
  }
  ParamVector prediction_jacobian_transpose_vp(const ParamVector& theta, const OutcomeRecord& rec,
                                               const Vector& r) const override {
    return cost_vjp(theta, map_index(rec.context), r);
  }

  const SurrogateGradient* surrogate() const override { return &surrogate_; }

  static int map_index(const Context& ctx) { return ctx.indices.at(0); }
  static GridCell start(const Context& ctx) { return {ctx.indices.at(1), ctx.indices.at(2)}; }
  static GridCell goal(const Context& ctx) { return {ctx.indices.at(3), ctx.indices.at(4)}; }

 private:
  GridPathConfig cfg_;
  std::vector<TerrainMap> maps_;
  std::vector<Matrix> features_;
  PerturbationSurrogate surrogate_;
};

// The frozen state is u = [y(c_hat + lambda c_true) - y(c_hat)] / lambda with
// c_hat predicted at the parameters given to freeze(); evaluate() applies
// J_pred(theta)^T u at any later theta.
inline AdjointVector PerturbationSurrogate::freeze(const OutcomeRecord& rec,
                                                   const ParamVector& theta) const {
  const int map = GridPathProblem::map_index(rec.context);
  const double lambda = problem_->config().perturbation;
  const Vector c_hat = problem_->predicted_cost(theta, map);
  const Vector y = problem_->path_indicator(c_hat, rec.context);
  const Vector y_pert = problem_->path_indicator(c_hat + lambda * rec.outcome.values, rec.context);
  return {(y_pert - y) / lambda, 0.0, 0};
}

inline ParamVector PerturbationSurrogate::evaluate(const OutcomeRecord& rec,
                                                   const AdjointVector& frozen,
                                                   const ParamVector& theta) const {
  const int map = GridPathProblem::map_index(rec.context);
  if (problem_->config().straight_through) {
    return problem_->features(map).transpose() * frozen.values;
  }
  return problem_->cost_vjp(theta, map, frozen.values);
}

/// Per-cell features of one map: a constant plus ReLU random features of
/// the noisy one-hot terrain of the cell's 3x3 neighbourhood.
inline Matrix cell_features(const GridPathConfig& cfg, const TerrainMap& map,
                            const Matrix& projection, const Vector& offsets,
                            std::mt19937_64& rng) {
  const int n = cfg.rows * cfg.cols;
  const int patch = 36;
  std::normal_distribution<double> nd(0.0, cfg.feature_noise);
  Matrix phi(n, cfg.features);
  Vector o(patch);
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      o.setZero();
      int slot = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc, ++slot) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= cfg.rows || cc < 0 || cc >= cfg.cols) continue;
          o(slot * 4 + map.levels[static_cast<std::size_t>(rr * cfg.cols + cc)]) = 1.0;
        }
      }
      for (int i = 0; i < patch; ++i) o(i) += nd(rng);
      const int cell = r * cfg.cols + c;
      phi(cell, 0) = 1.0;
      phi.row(cell).tail(cfg.features - 1) =
          (projection * o + offsets).cwiseMax(0.0).transpose();
    }
  }
  return phi;
}

class GridPathEnvironment final : public Environment {
 public:
  GridPathEnvironment(GridPathConfig cfg, std::uint64_t seed)
      : problem_(make_problem(cfg, seed)), rounds_(make_stream(seed, 2)),
        drift_(Vector::Zero(static_cast<Index>(cfg.rows) * cfg.cols), cfg.ou_gamma, cfg.ou_noise,
               seed ^ 0x96d1ull) {
    theta1_ = ParamVector::Zero(problem_.param_dim());
    theta1_(0) = cfg.init_cost;
    comparator_ = fit_comparator();
  }

  const GridPathProblem& grid() const { return problem_; }
  const BilevelProblem& problem() const override { return problem_; }
  ParamVector initial_params() const override { return theta1_; }
  const ParamVector& comparator_params() const { return comparator_; }

  RoundData next_round(int) override {
    const auto& cfg = problem_.config();
    RoundData r;
    const int map = std::uniform_int_distribution<int>(0, cfg.maps - 1)(rounds_);
    const GridCell s = edge_cell(), g = distinct_edge_cell(s);
    r.context.indices = {map, s.row, s.col, g.row, g.col};
    const Vector& d = drift_.step();
    r.outcome.values =
        (problem_.maps()[static_cast<std::size_t>(map)].base_cost + d).cwiseMax(cfg.cost_floor);
    return r;
  }

  double comparator_loss(const RoundData& round) const override {
    const Vector y = problem_.path_indicator(
        problem_.predicted_cost(comparator_, GridPathProblem::map_index(round.context)),
        round.context);
    return round.outcome.values.dot(y);
  }

  std::optional<double> optimality_gap(const DecisionVector& w,
                                       const RoundData& round) const override {
    const double oracle = problem_.shortest_path(round.outcome.values, round.context).cost;
    return igt::optimality_gap(round.outcome.values.dot(w), oracle);
  }

  std::string metadata() const override {
    return "comparator: least-squares fit of base terrain costs; synthetic terrain maps";
  }

  /// Plain-text dump of a map's terrain costs, one grid row per line.
  std::string export_map(int map) const {
    const auto& cfg = problem_.config();
    std::string out;
    const auto& base = problem_.maps().at(static_cast<std::size_t>(map)).base_cost;
    for (int r = 0; r < cfg.rows; ++r) {
      for (int c = 0; c < cfg.cols; ++c) {
        if (c) out += ' ';
        char buf[16];
        std::snprintf(buf, sizeof buf, "%g", base(r * cfg.cols + c));
        out += buf;
      }
      out += '\n';
    }
    return out;
  }

 private:
  static GridPathProblem make_problem(const GridPathConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto inst = make_stream(seed, 1);
    const Matrix projection = gaussian_matrix(cfg.features - 1, 36, inst, 1.0 / std::sqrt(3.0));
    const Vector offsets = gaussian_vector(cfg.features - 1, inst, 0.5);
    std::vector<TerrainMap> maps;
    std::vector<Matrix> feats;
    for (int m = 0; m < cfg.maps; ++m) {
      maps.push_back(generate_terrain(cfg, inst));
      feats.push_back(cell_features(cfg, maps.back(), projection, offsets, inst));
    }
    return GridPathProblem(cfg, std::move(maps), std::move(feats));
  }

  ParamVector fit_comparator() const {
    const auto& cfg = problem_.config();
    Matrix gram = Matrix::Identity(cfg.features, cfg.features) * 1e-6;
    Vector rhs = Vector::Zero(cfg.features);
    for (int m = 0; m < cfg.maps; ++m) {
      const Matrix& phi = problem_.features(m);
      gram += phi.transpose() * phi;
      rhs += phi.transpose() * problem_.maps()[static_cast<std::size_t>(m)].base_cost;
    }
    return gram.ldlt().solve(rhs);
  }

  GridCell edge_cell() {
    const auto& cfg = problem_.config();
    const int perimeter = cfg.rows == 1 || cfg.cols == 1 ? cfg.rows * cfg.cols
                                                         : 2 * (cfg.rows + cfg.cols) - 4;
    int k = std::uniform_int_distribution<int>(0, perimeter - 1)(rounds_);
    if (cfg.rows == 1) return {0, k};
    if (cfg.cols == 1) return {k, 0};
    if (k < cfg.cols) return {0, k};
    k -= cfg.cols;
    if (k < cfg.cols) return {cfg.rows - 1, k};
    k -= cfg.cols;
    if (k < cfg.rows - 2) return {k + 1, 0};
    k -= cfg.rows - 2;
    return {k + 1, cfg.cols - 1};
  }

  GridCell distinct_edge_cell(GridCell s) {
    for (;;) {
      const GridCell g = edge_cell();
      if (!(g == s)) return g;
    }
  }

  GridPathProblem problem_;
  std::mt19937_64 rounds_;
  OUProcess drift_;
  ParamVector theta1_;
  ParamVector comparator_;
};

}  // namespace igt

#pragma once

// Experiment orchestration: turns a parsed config into (algorithm, delay,
// seed) runs, executes them on a worker pool, and writes per-run CSVs plus
// the mode-specific tables. Results are stored by job index, so the output
// does not depend on which worker finished first.

#include "igt/env/grid_path.hpp"
#include "igt/env/hard_quadratic.hpp"
#include "igt/env/lqr.hpp"
#include "igt/env/sinkhorn_ot.hpp"
#include "igt/harness/config.hpp"
#include "igt/harness/csv.hpp"
#include "igt/run.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace igt::harness {

enum class Mode { kRun, kStability, kCompare, kSweepK, kDelayPatterns };

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kRun: return "run";
    case Mode::kStability: return "stability";
    case Mode::kCompare: return "compare";
    case Mode::kSweepK: return "sweep-k";
    case Mode::kDelayPatterns: return "delay-patterns";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s, int line) {
  for (Mode m : {Mode::kRun, Mode::kStability, Mode::kCompare, Mode::kSweepK, Mode::kDelayPatterns}) {
    if (mode_name(m) == s) return m;
  }
  throw ConfigError(line, "unknown mode '" + s +
                              "' (expected run, stability, compare, sweep-k or delay-patterns)");
}

/// `const:D`, `uniform:DMAX`, `poisson:LAMBDA`, `bursty:L:DHIGH`.
inline DelaySchedule parse_delay(const std::string& text, int line) {
  const auto parts = split_list(text, ':');
  auto num = [&](std::size_t i) {
    if (i >= parts.size()) throw ConfigError(line, "delay '" + text + "' is missing a parameter");
    return ConfigSection::parse_double({"delay", parts[i], line});
  };
  auto whole = [&](std::size_t i) {
    const double v = num(i);
    if (v != std::floor(v)) throw ConfigError(line, "delay '" + text + "' needs an integer");
    return static_cast<int>(v);
  };
  if (parts.empty()) throw ConfigError(line, "empty delay descriptor");
  const std::string& kind = parts[0];
  DelaySchedule s;
  std::size_t expected = 2;
  if (kind == "const" || kind == "constant") s = DelaySchedule::constant_delay(whole(1));
  else if (kind == "uniform") s = DelaySchedule::uniform(whole(1));
  else if (kind == "poisson") s = DelaySchedule::poisson(num(1));
  else if (kind == "bursty") {
    s = DelaySchedule::bursty(whole(1), whole(2));
    expected = 3;
  } else {
    throw ConfigError(line, "unknown delay kind '" + kind + "' (const, uniform, poisson, bursty)");
  }
  if (parts.size() != expected) throw ConfigError(line, "malformed delay descriptor '" + text + "'");
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(line, e.what());
  }
  return s;
}

// ---------------------------------------------------------------- environment

struct EnvironmentSpec {
  std::string kind = "hard_quadratic";
  HardQuadraticConfig hard_quadratic;
  LQRConfig lqr;
  SinkhornConfig sinkhorn;
  GridPathConfig grid;
};

namespace detail {

inline void read_inner(const ConfigSection& s, InnerSolverConfig& in) {
  in.steps = s.get_int("inner_steps", in.steps);
  in.step_size = s.get_double("inner_step_size", in.step_size);
  in.warm_start = s.get_bool("inner_warm_start", in.warm_start);
}

template <std::size_t N>
void read_array(const ConfigSection& s, const char* key, std::array<double, N>& out) {
  const auto* e = s.find(key);
  if (!e) return;
  const auto v = s.get_double_list(key, {});
  if (v.size() != N) {
    throw ConfigError(e->line, "'" + std::string(key) + "' needs " + std::to_string(N) + " values");
  }
  std::copy(v.begin(), v.end(), out.begin());
}

}  // namespace detail

inline EnvironmentSpec parse_environment(const ConfigSection& s) {
  EnvironmentSpec spec;
  spec.kind = s.require_string("kind");
  if (spec.kind == "hard_quadratic") {
    auto& c = spec.hard_quadratic;
    c.a = s.get_double("a", c.a);
    c.b = s.get_double("b", c.b);
    c.mu_w = s.get_double("mu_w", c.mu_w);
    c.epsilon_inner = s.get_double("epsilon_inner", c.epsilon_inner);
    c.bound = s.get_double("bound", c.bound);
    c.exact_inner = s.get_bool("exact_inner", c.exact_inner);
    c.loss_at_exact_inner = s.get_bool("loss_at_exact_inner", c.loss_at_exact_inner);
    detail::read_inner(s, c.inner);
  } else if (spec.kind == "lqr") {
    auto& c = spec.lqr;
    c.nx = s.get_int("nx", c.nx);
    c.nu = s.get_int("nu", c.nu);
    c.q_scale = s.get_double("q_scale", c.q_scale);
    c.r_scale = s.get_double("r_scale", c.r_scale);
    c.noise_var = s.get_double("noise_var", c.noise_var);
    c.spectral_radius = s.get_double("spectral_radius", c.spectral_radius);
    c.b_scale = s.get_double("b_scale", c.b_scale);
    c.init_perturbation = s.get_double("init_perturbation", c.init_perturbation);
    c.loss_cap = s.get_double("loss_cap", c.loss_cap);
    detail::read_inner(s, c.inner);
  } else if (spec.kind == "sinkhorn") {
    auto& c = spec.sinkhorn;
    c.n = s.get_int("n", c.n);
    c.feature_dim = s.get_int("feature_dim", c.feature_dim);
    c.epsilon = s.get_double("epsilon", c.epsilon);
    c.hidden = s.get_int("hidden", c.hidden);
    c.iterations = s.get_int("iterations", c.iterations);
    c.reference_iterations = s.get_int("reference_iterations", c.reference_iterations);
    c.reference_tolerance = s.get_double("reference_tolerance", c.reference_tolerance);
    c.cost_floor = s.get_double("cost_floor", c.cost_floor);
    c.dual_adjoint = s.get_bool("dual_adjoint", c.dual_adjoint);
    c.entropic_true_loss = s.get_bool("entropic_true_loss", c.entropic_true_loss);
    c.teacher_hidden = s.get_int("teacher_hidden", c.teacher_hidden);
    c.cost_offset = s.get_double("cost_offset", c.cost_offset);
    c.teacher_scale = s.get_double("teacher_scale", c.teacher_scale);
    c.feature_mean_scale = s.get_double("feature_mean_scale", c.feature_mean_scale);
    c.ou_gamma = s.get_double("ou_gamma", c.ou_gamma);
    c.ou_noise = s.get_double("ou_noise", c.ou_noise);
    c.cost_drift_noise = s.get_double("cost_drift_noise", c.cost_drift_noise);
    c.init_out_scale = s.get_double("init_out_scale", c.init_out_scale);
    c.instance_seed = static_cast<std::uint64_t>(s.get_int("instance_seed", static_cast<int>(c.instance_seed)));
    c.instance_from_run_seed = s.get_bool("instance_from_run_seed", c.instance_from_run_seed);
  } else if (spec.kind == "grid") {
    auto& c = spec.grid;
    c.rows = s.get_int("rows", c.rows);
    c.cols = s.get_int("cols", c.cols);
    c.maps = s.get_int("maps", c.maps);
    c.features = s.get_int("features", c.features);
    detail::read_array(s, "level_costs", c.level_costs);
    detail::read_array(s, "level_fractions", c.level_fractions);
    c.smoothness = s.get_int("smoothness", c.smoothness);
    c.feature_noise = s.get_double("feature_noise", c.feature_noise);
    c.perturbation = s.get_double("perturbation", c.perturbation);
    c.cost_floor = s.get_double("cost_floor", c.cost_floor);
    c.ou_gamma = s.get_double("ou_gamma", c.ou_gamma);
    c.ou_noise = s.get_double("ou_noise", c.ou_noise);
    c.init_cost = s.get_double("init_cost", c.init_cost);
    c.straight_through = s.get_bool("straight_through", c.straight_through);
  } else {
    throw ConfigError(s.line(), "unknown environment kind '" + spec.kind +
                                    "' (hard_quadratic, lqr, sinkhorn, grid)");
  }
  try {
    if (spec.kind == "hard_quadratic") spec.hard_quadratic.validate();
    else if (spec.kind == "lqr") spec.lqr.validate();
    else if (spec.kind == "sinkhorn") spec.sinkhorn.validate();
    else spec.grid.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(s.line(), std::string("[environment]: ") + e.what());
  }
  return spec;
}

inline std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec, std::uint64_t seed) {
  if (spec.kind == "hard_quadratic") return std::make_unique<HardQuadraticEnvironment>(spec.hard_quadratic);
  if (spec.kind == "lqr") return std::make_unique<LQREnvironment>(spec.lqr, seed);
  if (spec.kind == "sinkhorn") return std::make_unique<SinkhornEnvironment>(spec.sinkhorn, seed);
  if (spec.kind == "grid") return std::make_unique<GridPathEnvironment>(spec.grid, seed);
  throw Error(ErrorKind::kConfig, "unknown environment kind '" + spec.kind + "'");
}

/// Sets the inner iteration budget K (Sinkhorn iterations or inner GD steps).
inline void set_inner_iterations(EnvironmentSpec& spec, int k) {
  if (k < 1) throw Error(ErrorKind::kConfig, "K must be >= 1");
  if (spec.kind == "sinkhorn") spec.sinkhorn.iterations = k;
  else if (spec.kind == "lqr") spec.lqr.inner.steps = k;
  else if (spec.kind == "hard_quadratic") {
    spec.hard_quadratic.exact_inner = false;
    spec.hard_quadratic.inner.steps = k;
  } else {
    throw Error(ErrorKind::kConfig, "environment '" + spec.kind + "' has no inner iteration count");
  }
}

// ------------------------------------------------------------------ algorithm

struct AlgorithmSpec {
  AlgorithmConfig config;
  std::optional<std::vector<int>> seeds;  // overrides [experiment] seeds
  int line = 0;
};

inline AlgorithmConfig base_algorithm(const std::string& base, double eta0, int line) {
  if (base == "igt-omd") return igt_omd(eta0);
  if (base == "stale-omd") return stale_omd(eta0);
  if (base == "robust-omd") return robust_omd(eta0, 1.0);
  if (base == "dftrl") return dftrl(eta0);
  if (base == "dftrl-igt") return attach_transport(dftrl(eta0));
  if (base == "two-stage") return two_stage(eta0);
  if (base == "stale-adam") return stale_adam(eta0);
  if (base == "adam-igt") return attach_transport(stale_adam(eta0));
  throw ConfigError(line, "unknown algorithm base '" + base +
                              "' (igt-omd, stale-omd, robust-omd, dftrl, dftrl-igt, two-stage, "
                              "stale-adam, adam-igt)");
}

inline AlgorithmSpec parse_algorithm(const ConfigSection& s) {
  if (s.arg().empty()) throw ConfigError(s.line(), "[algorithm] needs a name: [algorithm NAME]");
  AlgorithmSpec spec;
  spec.line = s.line();
  const std::string base = s.get_string("base", s.arg());
  if (!s.has("eta0")) throw ConfigError(s.line(), s.label() + " is missing required key 'eta0'");
  AlgorithmConfig c = base_algorithm(base, s.get_double("eta0", 0.0), s.line());
  c.name = s.arg();

  c.schedule.beta = s.get_double("beta", c.schedule.beta);
  if (const auto* e = s.find("schedule")) {
    if (e->value == "constant") c.schedule.mode = ScheduleMode::kConstant;
    else if (e->value == "adaptive") c.schedule.mode = ScheduleMode::kQueueAdaptive;
    else throw ConfigError(e->line, "schedule must be 'constant' or 'adaptive'");
  }
  if (const auto* e = s.find("rule")) {
    if (e->value == "gd") c.rule.kind = BaseRuleKind::kPlainGd;
    else if (e->value == "adam") c.rule.kind = BaseRuleKind::kAdam;
    else if (e->value == "ftrl") c.rule.kind = BaseRuleKind::kFtrl;
    else throw ConfigError(e->line, "rule must be 'gd', 'adam' or 'ftrl'");
  }
  if (const auto* e = s.find("source")) {
    if (e->value == "stale") c.source = GradientSource::kStale;
    else if (e->value == "transport") c.source = GradientSource::kTransport;
    else if (e->value == "two-stage") c.source = GradientSource::kTwoStage;
    else throw ConfigError(e->line, "source must be 'stale', 'transport' or 'two-stage'");
  }
  if (s.has("clip")) c.rule.clip_norm = s.get_optional_double("clip");
  if (s.has("g_hint")) c.rule.clip_norm = s.get_optional_double("g_hint");
  c.rule.beta1 = s.get_double("adam_beta1", c.rule.beta1);
  c.rule.beta2 = s.get_double("adam_beta2", c.rule.beta2);
  c.rule.epsilon = s.get_double("adam_epsilon", c.rule.epsilon);
  c.event_driven = s.get_bool("event_driven", c.event_driven);
  c.adjoint_at_dispatch = s.get_bool("adjoint_at_dispatch", c.adjoint_at_dispatch);
  c.two_stage_at_current = s.get_bool("two_stage_at_current", c.two_stage_at_current);
  c.cg.tolerance = s.get_double("cg_tolerance", c.cg.tolerance);
  c.cg.max_iterations = s.get_int("cg_max_iterations", c.cg.max_iterations);
  c.cg.warm_start = s.get_bool("cg_warm_start", c.cg.warm_start);
  c.divergence_bound = s.get_double("divergence_bound", c.divergence_bound);
  c.domain_radius = s.get_double("domain_radius", c.domain_radius);
  c.buffer_capacity = s.get_int("buffer_capacity", c.buffer_capacity);
  c.adjoint_refresh_every = s.get_int("adjoint_refresh_every", c.adjoint_refresh_every);
  if (s.find("seeds")) spec.seeds = s.get_int_list("seeds", {});
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(s.line(), s.label() + ": " + e.what());
  }
  spec.config = std::move(c);
  return spec;
}

// -------------------------------------------------------------------- config

struct StabilitySpec {
  double lo = 1e-4;
  double hi = 2.0;
  double resolution = 1e-3;
  int horizon = 1000;
  double radius = std::numeric_limits<double>::infinity();
};

struct CompareSpec {
  std::string treatment;
  std::string control;
  std::string metric = "regret";  // regret | gap
};

struct ExperimentConfig {
  std::string name = "experiment";
  Mode mode = Mode::kRun;
  int rounds = 1000;
  std::vector<int> seeds{0};
  int summary_window = 200;
  std::vector<DelaySchedule> delays;
  bool write_runs = true;
  std::string out = "igt-out";
  EnvironmentSpec environment;
  std::vector<AlgorithmSpec> algorithms;
  std::optional<StabilitySpec> stability;
  std::optional<CompareSpec> compare;
  std::vector<int> k_values;
  std::uint64_t config_hash = 0;

  const AlgorithmSpec& algorithm(const std::string& name) const {
    for (const auto& a : algorithms) {
      if (a.config.name == name) return a;
    }
    throw Error(ErrorKind::kConfig, "no algorithm named '" + name + "'");
  }

  const std::vector<int>& seeds_for(const AlgorithmSpec& a) const { return a.seeds ? *a.seeds : seeds; }
};

struct Overrides {
  std::optional<std::vector<int>> seeds;
  std::optional<std::string> out;
  std::optional<int> rounds;
  std::optional<Mode> mode;
};

inline ExperimentConfig parse_experiment(const ConfigDocument& doc, const Overrides& ov = {}) {
  for (const auto& s : doc.sections()) {
    static const char* known[] = {"experiment", "environment", "algorithm", "stability", "compare", "sweep_k"};
    if (std::find(std::begin(known), std::end(known), s.name()) == std::end(known)) {
      throw ConfigError(s.line(), "unknown section " + s.label());
    }
    if (s.name() != "algorithm" && !s.arg().empty()) {
      throw ConfigError(s.line(), "section [" + s.name() + "] takes no argument");
    }
  }
  ExperimentConfig cfg;
  const auto& ex = doc.require("experiment");
  cfg.name = ex.get_string("name", cfg.name);
  if (const auto* e = ex.find("mode")) cfg.mode = parse_mode(e->value, e->line);
  if (ov.mode) {
    if (ex.has("mode") && *ov.mode != cfg.mode) {
      throw ConfigError(ex.find("mode")->line, "config is a '" + mode_name(cfg.mode) +
                                                   "' experiment but was invoked as '" +
                                                   mode_name(*ov.mode) + "'");
    }
    cfg.mode = *ov.mode;
  }
  cfg.rounds = ex.get_int("rounds", cfg.rounds);
  if (ov.rounds) cfg.rounds = *ov.rounds;
  if (cfg.rounds < 1) throw ConfigError(ex.find("rounds") ? ex.find("rounds")->line : ex.line(), "rounds must be >= 1");
  cfg.seeds = ex.get_int_list("seeds", cfg.seeds);
  if (ov.seeds) cfg.seeds = *ov.seeds;
  if (cfg.seeds.empty()) throw ConfigError(ex.line(), "seed list is empty");
  cfg.summary_window = ex.get_int("summary_window", cfg.summary_window);
  if (cfg.summary_window < 1) throw ConfigError(ex.find("summary_window")->line, "summary_window must be >= 1");
  cfg.write_runs = ex.get_bool("write_runs", cfg.write_runs);
  cfg.out = ex.get_string("out", cfg.out);
  if (ov.out) cfg.out = *ov.out;
  if (const auto* e = ex.find("delays")) {
    for (const auto& d : split_list(e->value)) cfg.delays.push_back(parse_delay(d, e->line));
  }
  if (cfg.delays.empty()) throw ConfigError(ex.line(), "[experiment] needs a non-empty 'delays' list");

  cfg.environment = parse_environment(doc.require("environment"));
  for (const auto* s : doc.all("algorithm")) cfg.algorithms.push_back(parse_algorithm(*s));
  if (cfg.algorithms.empty()) throw ConfigError(0, "config defines no [algorithm NAME] section");

  if (const auto* s = doc.find("stability")) {
    StabilitySpec st;
    st.lo = s->get_double("lo", st.lo);
    st.hi = s->get_double("hi", st.hi);
    st.resolution = s->get_double("resolution", st.resolution);
    st.horizon = s->get_int("horizon", st.horizon);
    st.radius = s->get_double("radius", st.radius);
    if (!(st.hi > st.lo)) {
      throw ConfigError(s->line(), "degenerate search interval: need lo < hi (lo=" + fmt9(st.lo) +
                                       ", hi=" + fmt9(st.hi) + ")");
    }
    if (!(st.resolution > 0.0)) throw ConfigError(s->line(), "stability resolution must be > 0");
    if (st.horizon < 1) throw ConfigError(s->line(), "stability horizon must be >= 1");
    cfg.stability = st;
  }
  if (const auto* s = doc.find("compare")) {
    CompareSpec c;
    c.treatment = s->require_string("treatment");
    c.control = s->require_string("control");
    c.metric = s->get_string("metric", c.metric);
    if (c.metric != "regret" && c.metric != "gap") {
      throw ConfigError(s->find("metric")->line, "compare metric must be 'regret' or 'gap'");
    }
    for (const auto* name : {&c.treatment, &c.control}) {
      const bool found = std::any_of(cfg.algorithms.begin(), cfg.algorithms.end(),
                                     [&](const AlgorithmSpec& a) { return a.config.name == *name; });
      if (!found) throw ConfigError(s->line(), "[compare] names unknown algorithm '" + *name + "'");
    }
    const auto& ts = cfg.seeds_for(cfg.algorithm(c.treatment));
    const auto& cs = cfg.seeds_for(cfg.algorithm(c.control));
    if (ts != cs) {
      throw ConfigError(s->line(), "mismatched seed lists for treatment '" + c.treatment +
                                       "' and control '" + c.control + "'");
    }
    cfg.compare = c;
  }
  if (const auto* s = doc.find("sweep_k")) {
    cfg.k_values = s->get_int_list("values", {});
    if (cfg.k_values.empty()) throw ConfigError(s->line(), "[sweep_k] needs 'values'");
  }
  doc.check_all_used();

  if (cfg.mode == Mode::kStability && !cfg.stability) {
    throw ConfigError(0, "stability mode needs a [stability] section");
  }
  if (cfg.mode == Mode::kCompare && !cfg.compare) throw ConfigError(0, "compare mode needs a [compare] section");
  if (cfg.mode == Mode::kSweepK) {
    if (cfg.k_values.empty()) throw ConfigError(0, "sweep-k mode needs a [sweep_k] section");
    auto probe = cfg.environment;
    try {
      set_inner_iterations(probe, cfg.k_values.front());
    } catch (const Error& e) {
      throw ConfigError(doc.require("environment").line(), e.what());
    }
  }

  Fnv1a h;
  h.add(static_cast<std::int64_t>(doc.hash()));
  h.add(mode_name(cfg.mode));
  h.add(static_cast<std::int64_t>(cfg.rounds));
  for (int s : cfg.seeds) h.add(static_cast<std::int64_t>(s));
  cfg.config_hash = h.value();
  return cfg;
}

inline ExperimentConfig parse_experiment(std::string_view text, const Overrides& ov = {}) {
  return parse_experiment(ConfigDocument::parse(text), ov);
}

// ---------------------------------------------------------------- worker pool

/// Runs fn(0..n-1) on up to `workers` threads. Exceptions are captured per
/// job and returned; the first one never cancels the others.
inline std::vector<std::exception_ptr> parallel_for(std::size_t n, int workers,
                                                    const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (count == 1) {
    work();
    return errors;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < count; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return errors;
}

inline std::string describe_exception(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

// ------------------------------------------------------------------ run stats

inline const std::vector<std::string>& run_columns() {
  static const std::vector<std::string> cols{
      "t", "delay", "sigma", "envelope", "arrivals", "eta", "true_loss", "comparator_loss",
      "regret_increment", "cumulative_regret", "step_norm_sq", "r_sq_increment", "r3_increment",
      "optimality_gap", "grad_norm", "theta_norm", "inner_residual", "epsilon_estimate",
      "adjoint_iterations", "skipped", "adjoint_drift", "diverged"};
  return cols;
}

/// Per-run quantities, computed from 9-digit-rounded row values so a reader
/// of the run CSV reproduces them exactly.
struct RunStats {
  double cumulative_regret = 0.0;
  double r_sq = 0.0;
  double r3 = 0.0;
  double window_gap = std::numeric_limits<double>::quiet_NaN();
  double window_loss = std::numeric_limits<double>::quiet_NaN();
  double mean_sigma = 0.0;
  int max_sigma = 0;
  int rounds = 0;
  bool diverged = false;

  double ratio() const { return r3 > 0.0 ? r_sq / r3 : std::numeric_limits<double>::quiet_NaN(); }
};

struct StatsRow {
  double cumulative_regret, r_sq_increment, r3_increment, true_loss;
  std::optional<double> gap;
  int sigma;
  bool diverged;
};

inline RunStats compute_stats(const std::vector<StatsRow>& rows, int window) {
  RunStats s;
  s.rounds = static_cast<int>(rows.size());
  std::vector<double> gaps, losses;
  double sigma_sum = 0.0;
  for (const auto& r : rows) {
    s.r_sq += r.r_sq_increment;
    s.r3 += r.r3_increment;
    sigma_sum += r.sigma;
    s.max_sigma = std::max(s.max_sigma, r.sigma);
    s.diverged = s.diverged || r.diverged;
  }
  if (!rows.empty()) {
    s.cumulative_regret = rows.back().cumulative_regret;
    s.mean_sigma = sigma_sum / static_cast<double>(rows.size());
  }
  for (auto it = rows.rbegin(); it != rows.rend() && static_cast<int>(losses.size()) < window; ++it) {
    losses.push_back(it->true_loss);
  }
  for (auto it = rows.rbegin(); it != rows.rend() && static_cast<int>(gaps.size()) < window; ++it) {
    if (it->gap) gaps.push_back(*it->gap);
  }
  std::reverse(gaps.begin(), gaps.end());
  std::reverse(losses.begin(), losses.end());
  if (!gaps.empty()) s.window_gap = mean(gaps);
  if (!losses.empty()) s.window_loss = mean(losses);
  return s;
}

inline RunStats stats_from_result(const RunResult& res, int window) {
  std::vector<StatsRow> rows;
  rows.reserve(res.rows.size());
  for (const auto& r : res.rows) {
    std::optional<double> gap;
    if (r.optimality_gap) gap = round9(*r.optimality_gap);
    rows.push_back({round9(r.cumulative_regret), round9(r.r_sq_increment), round9(r.r3_increment),
                    round9(r.true_loss), gap, r.sigma, r.diverged});
  }
  return compute_stats(rows, window);
}

inline RunStats stats_from_csv(const CsvTable& t, int window) {
  std::vector<StatsRow> rows;
  const int creg = t.column("cumulative_regret"), rsq = t.column("r_sq_increment"),
            r3 = t.column("r3_increment"), loss = t.column("true_loss"),
            gap = t.column("optimality_gap"), sig = t.column("sigma"), div = t.column("diverged");
  for (const auto& r : t.rows) {
    std::optional<double> g;
    if (!r[static_cast<std::size_t>(gap)].empty()) g = parse_number(r[static_cast<std::size_t>(gap)]);
    rows.push_back({parse_number(r[static_cast<std::size_t>(creg)]),
                    parse_number(r[static_cast<std::size_t>(rsq)]),
                    parse_number(r[static_cast<std::size_t>(r3)]),
                    parse_number(r[static_cast<std::size_t>(loss)]), g,
                    std::stoi(r[static_cast<std::size_t>(sig)]),
                    r[static_cast<std::size_t>(div)] == "1"});
  }
  return compute_stats(rows, window);
}

/// Rows violating ||theta_t - theta_{t-d}||^2 <= d * sum of the d preceding
/// step_norm_sq values (constant delay only).
inline int cauchy_schwarz_violations(const RunResult& res, const DelaySchedule& delay) {
  if (delay.kind != DelayKind::kConstant || delay.constant < 1) return 0;
  const int d = delay.constant;
  int bad = 0;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    if (res.rows[i].diverged || i < static_cast<std::size_t>(d)) continue;
    double window = 0.0;
    for (std::size_t j = i - static_cast<std::size_t>(d); j < i; ++j) window += res.rows[j].step_norm_sq;
    const double bound = d * window;
    if (res.rows[i].r_sq_increment > bound * (1.0 + 1e-9) + 1e-300) ++bad;
  }
  return bad;
}

// ------------------------------------------------------------------- outputs

struct RunRecord {
  std::string algorithm;
  std::string delay;
  int seed = 0;
  int k = 0;  // inner iterations for sweep-k, 0 otherwise
  std::string status = "ok";
  bool errored = false;
  std::uint64_t delay_hash = 0;
  RunStats stats;
  ParamVector final_theta;
  std::string csv_path;
};

struct SummaryRow {
  int k = 0;
  std::string algorithm;
  std::string delay;
  int seeds = 0;
  double regret_mean = 0.0, regret_sd = 0.0;
  double gap_mean = std::numeric_limits<double>::quiet_NaN();
  double r_sq_mean = 0.0, r3_mean = 0.0, ratio_mean = 0.0;
  double mean_sigma = 0.0;
  int max_sigma = 0;
  int diverged = 0;
  int errors = 0;
  std::uint64_t delay_hash = 0;  // hash over the per-seed delay hashes
};

struct CompareRow {
  int k = 0;
  std::string delay;
  int seeds = 0;
  std::string metric;
  std::vector<double> treatment, control;
  WelchResult welch;
  double improvement = 0.0;
  bool paired = true;
};

struct StabilityRow {
  std::string algorithm;
  std::string delay;
  int sigma = 0;
  double eta_max = std::numeric_limits<double>::quiet_NaN();
  bool upper_stable = false;
  int probes = 0;
  std::string status = "ok";
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;
  std::vector<CompareRow> compare;
  std::vector<StabilityRow> stability;
  std::vector<std::string> errors;
  std::vector<std::string> files;

  bool ok() const { return errors.empty(); }
};

struct ExecutionOptions {
  int parallel = 1;
  bool print = true;
  std::ostream* log = &std::cout;
};

namespace detail {

inline std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

inline std::string yes(bool b) { return b ? "1" : "0"; }

inline CsvWriter run_csv(const ExperimentConfig& cfg, const RunRecord& rec, const RunResult& res,
                         const std::string& metadata) {
  CsvWriter w(run_columns());
  w.comment("igt-lab", "run");
  w.comment("experiment", cfg.name);
  w.comment("config_hash", hex64(cfg.config_hash));
  w.comment("seed", std::to_string(rec.seed));
  w.comment("algorithm", rec.algorithm);
  w.comment("delay", rec.delay);
  w.comment("delay_hash", hex64(res.delay_hash));
  w.comment("environment", cfg.environment.kind);
  if (rec.k > 0) w.comment("k", std::to_string(rec.k));
  if (!metadata.empty()) w.comment("metadata", metadata);
  w.comment("status", res.status);
  for (const auto& r : res.rows) {
    w.row({std::to_string(r.t), std::to_string(r.delay), std::to_string(r.sigma),
           std::to_string(r.envelope), std::to_string(r.arrivals), fmt9(r.eta), fmt9(r.true_loss),
           fmt9(r.comparator_loss), fmt9(r.regret_increment), fmt9(r.cumulative_regret),
           fmt9(r.step_norm_sq), fmt9(r.r_sq_increment), fmt9(r.r3_increment),
           fmt9(r.optimality_gap), fmt9(r.grad_norm), fmt9(r.theta_norm), fmt9(r.inner_residual),
           fmt9(r.epsilon_estimate), std::to_string(r.adjoint_iterations),
           std::to_string(r.skipped), fmt9(r.adjoint_drift), yes(r.diverged)});
  }
  return w;
}

struct RunJob {
  std::size_t algorithm = 0;
  std::size_t delay = 0;
  int seed = 0;
  int k = 0;
};

inline std::vector<RunJob> make_jobs(const ExperimentConfig& cfg, const std::vector<int>& ks) {
  std::vector<RunJob> jobs;
  for (int k : ks) {
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
      for (std::size_t d = 0; d < cfg.delays.size(); ++d) {
        for (int s : cfg.seeds_for(cfg.algorithms[a])) jobs.push_back({a, d, s, k});
      }
    }
  }
  return jobs;
}

inline RunRecord execute_job(const ExperimentConfig& cfg, const RunJob& job, const std::string& run_dir) {
  const auto& algo = cfg.algorithms[job.algorithm];
  const auto& delay = cfg.delays[job.delay];
  RunRecord rec;
  rec.algorithm = algo.config.name;
  rec.delay = delay.describe();
  rec.seed = job.seed;
  rec.k = job.k;

  EnvironmentSpec env_spec = cfg.environment;
  if (job.k > 0) set_inner_iterations(env_spec, job.k);
  auto env = make_environment(env_spec, static_cast<std::uint64_t>(job.seed));
  RunOptions opt;
  opt.rounds = cfg.rounds;
  opt.seed = static_cast<std::uint64_t>(job.seed);
  opt.delay = delay;
  opt.algo = algo.config;
  opt.summary_window = cfg.summary_window;
  const RunResult res = run_single(*env, opt);

  rec.status = res.status;
  rec.delay_hash = res.delay_hash;
  rec.final_theta = res.final_theta;
  rec.stats = stats_from_result(res, cfg.summary_window);
  if (const int bad = cauchy_schwarz_violations(res, delay)) {
    rec.errored = true;
    rec.status = "window inequality violated on " + std::to_string(bad) + " rounds";
  }
  if (!run_dir.empty()) {
    std::string dir = run_dir;
    if (job.k > 0) dir += "/k" + std::to_string(job.k);
    std::filesystem::create_directories(dir);
    rec.csv_path = dir + "/" + sanitize(rec.algorithm) + "__" + sanitize(rec.delay) + "__s" +
                   std::to_string(job.seed) + ".csv";
    run_csv(cfg, rec, res, env->metadata()).save(rec.csv_path);
  }
  return rec;
}

inline std::vector<SummaryRow> summarize(const ExperimentConfig& cfg, const std::vector<RunRecord>& runs,
                                         const std::vector<int>& ks) {
  std::vector<SummaryRow> out;
  for (int k : ks) {
    for (const auto& a : cfg.algorithms) {
      for (const auto& d : cfg.delays) {
        SummaryRow row;
        row.k = k;
        row.algorithm = a.config.name;
        row.delay = d.describe();
        std::vector<double> regret, gap, rsq, r3, ratio, sigma;
        Fnv1a h;
        for (const auto& r : runs) {
          if (r.k != k || r.algorithm != row.algorithm || r.delay != row.delay) continue;
          ++row.seeds;
          h.add(static_cast<std::int64_t>(r.delay_hash));
          if (r.errored) {
            ++row.errors;
            continue;
          }
          row.diverged += r.stats.diverged ? 1 : 0;
          regret.push_back(r.stats.cumulative_regret);
          if (!std::isnan(r.stats.window_gap)) gap.push_back(r.stats.window_gap);
          rsq.push_back(r.stats.r_sq);
          r3.push_back(r.stats.r3);
          if (!std::isnan(r.stats.ratio())) ratio.push_back(r.stats.ratio());
          sigma.push_back(r.stats.mean_sigma);
          row.max_sigma = std::max(row.max_sigma, r.stats.max_sigma);
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.delay_hash = h.value();
        row.regret_mean = regret.empty() ? nan : mean(regret);
        row.regret_sd = sample_sd(regret);
        row.gap_mean = gap.empty() ? nan : mean(gap);
        row.r_sq_mean = rsq.empty() ? nan : mean(rsq);
        row.r3_mean = r3.empty() ? nan : mean(r3);
        row.ratio_mean = ratio.empty() ? nan : mean(ratio);
        row.mean_sigma = sigma.empty() ? nan : mean(sigma);
        out.push_back(row);
      }
    }
  }
  return out;
}

inline std::vector<CompareRow> compare_rows(const ExperimentConfig& cfg, const std::vector<RunRecord>& runs,
                                            const std::vector<int>& ks) {
  std::vector<CompareRow> out;
  const auto& c = *cfg.compare;
  const auto& seeds = cfg.seeds_for(cfg.algorithm(c.treatment));
  for (int k : ks) {
    for (const auto& d : cfg.delays) {
      CompareRow row;
      row.k = k;
      row.delay = d.describe();
      row.metric = c.metric;
      for (int seed : seeds) {
        const RunRecord *t = nullptr, *ctl = nullptr;
        for (const auto& r : runs) {
          if (r.k != k || r.delay != row.delay || r.seed != seed) continue;
          if (r.algorithm == c.treatment) t = &r;
          if (r.algorithm == c.control) ctl = &r;
        }
        if (!t || !ctl || t->errored || ctl->errored) {
          throw Error(ErrorKind::kConfig, "comparison at " + row.delay + " seed " +
                                              std::to_string(seed) + " is missing a successful run");
        }
        if (t->delay_hash != ctl->delay_hash) {
          row.paired = false;
          throw Error(ErrorKind::kConfig, "delay sequences differ between treatment and control at " +
                                              row.delay + " seed " + std::to_string(seed));
        }
        auto metric = [&](const RunRecord& r) {
          return c.metric == "gap" ? r.stats.window_gap : r.stats.cumulative_regret;
        };
        row.treatment.push_back(metric(*t));
        row.control.push_back(metric(*ctl));
      }
      row.seeds = static_cast<int>(seeds.size());
      if (row.treatment.size() >= 2) {
        row.welch = welch_t(row.treatment, row.control);
      } else {
        row.welch.mean_a = mean(row.treatment);
        row.welch.mean_b = mean(row.control);
        row.welch.p_value = std::numeric_limits<double>::quiet_NaN();
      }
      row.improvement = improvement_pct(row.welch.mean_a, row.welch.mean_b);
      out.push_back(row);
    }
  }
  return out;
}

inline void write_summary(const ExperimentConfig& cfg, const std::vector<SummaryRow>& rows,
                          const std::string& path, bool with_k) {
  std::vector<std::string> cols{"algorithm", "delay", "seeds", "regret_mean", "regret_sd",
                                "gap_mean", "r_sq_mean", "r3_mean", "ratio_mean", "mean_sigma",
                                "max_sigma", "diverged", "errors", "delay_hash"};
  if (with_k) cols.insert(cols.begin(), "k");
  CsvWriter w(cols);
  w.comment("igt-lab", "summary");
  w.comment("experiment", cfg.name);
  w.comment("config_hash", hex64(cfg.config_hash));
  std::string seeds;
  for (int s : cfg.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
  w.comment("seeds", seeds);
  w.comment("rounds", std::to_string(cfg.rounds));
  w.comment("summary_window", std::to_string(cfg.summary_window));
  w.comment("environment", cfg.environment.kind);
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.algorithm, r.delay, std::to_string(r.seeds), fmt9(r.regret_mean),
                                   fmt9(r.regret_sd), fmt9(r.gap_mean), fmt9(r.r_sq_mean),
                                   fmt9(r.r3_mean), fmt9(r.ratio_mean), fmt9(r.mean_sigma),
                                   std::to_string(r.max_sigma), std::to_string(r.diverged),
                                   std::to_string(r.errors), hex64(r.delay_hash)};
    if (with_k) cells.insert(cells.begin(), std::to_string(r.k));
    w.row(std::move(cells));
  }
  w.save(path);
}

inline void write_compare(const ExperimentConfig& cfg, const std::vector<CompareRow>& rows,
                          const std::string& path, bool with_k) {
  std::vector<std::string> cols{"delay", "seeds", "metric", "treatment", "control",
                                "treatment_mean", "treatment_sd", "control_mean", "control_sd",
                                "improvement_pct", "t_stat", "dof", "p_value", "p_display"};
  if (with_k) cols.insert(cols.begin(), "k");
  CsvWriter w(cols);
  w.comment("igt-lab", "compare");
  w.comment("experiment", cfg.name);
  w.comment("config_hash", hex64(cfg.config_hash));
  for (const auto& r : rows) {
    std::vector<std::string> cells{
        r.delay, std::to_string(r.seeds), r.metric, cfg.compare->treatment, cfg.compare->control,
        fmt9(r.welch.mean_a), fmt9(r.welch.sd_a), fmt9(r.welch.mean_b), fmt9(r.welch.sd_b),
        fmt9(r.improvement), fmt9(r.welch.t_stat), fmt9(r.welch.dof), fmt9(r.welch.p_value),
        std::isnan(r.welch.p_value) ? std::string("n/a") : format_p(r.welch.p_value)};
    if (with_k) cells.insert(cells.begin(), std::to_string(r.k));
    w.row(std::move(cells));
  }
  w.save(path);
}

inline void print_summary(std::ostream& os, const std::vector<SummaryRow>& rows, bool with_k) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s%-14s %-14s %5s %12s %10s %10s %12s %12s %8s %4s\n",
                with_k ? "    K " : "", "algorithm", "delay", "seeds", "regret", "sd", "gap", "R_sq",
                "R_3", "ratio", "div");
  os << buf;
  for (const auto& r : rows) {
    std::string k = with_k ? (std::snprintf(buf, sizeof buf, "%5d ", r.k), std::string(buf)) : "";
    std::snprintf(buf, sizeof buf, "%-14s %-14s %5d %12.4g %10.3g %10.4g %12.4g %12.4g %8.3f %4d\n",
                  r.algorithm.c_str(), r.delay.c_str(), r.seeds, r.regret_mean, r.regret_sd,
                  r.gap_mean, r.r_sq_mean, r.r3_mean, r.ratio_mean, r.diverged);
    os << k << buf;
  }
}

inline void print_compare(std::ostream& os, const ExperimentConfig& cfg,
                          const std::vector<CompareRow>& rows, bool with_k) {
  char buf[256];
  os << "treatment " << cfg.compare->treatment << " vs control " << cfg.compare->control << " ("
     << cfg.compare->metric << ")\n";
  std::snprintf(buf, sizeof buf, "%s%-14s %14s %14s %12s %10s\n", with_k ? "    K " : "", "delay",
                "treatment", "control", "improvement", "p");
  os << buf;
  for (const auto& r : rows) {
    std::string k = with_k ? (std::snprintf(buf, sizeof buf, "%5d ", r.k), std::string(buf)) : "";
    std::snprintf(buf, sizeof buf, "%-14s %14.5g %14.5g %+11.2f%% %10s\n", r.delay.c_str(),
                  r.welch.mean_a, r.welch.mean_b, r.improvement,
                  std::isnan(r.welch.p_value) ? "n/a" : format_p(r.welch.p_value).c_str());
    os << k << buf;
  }
}

inline void run_grid(const ExperimentConfig& cfg, const ExecutionOptions& exec,
                     const std::vector<int>& ks, ExperimentResult& result) {
  const auto jobs = make_jobs(cfg, ks);
  const std::string run_dir = cfg.write_runs ? cfg.out + "/runs" : std::string();
  std::vector<RunRecord> records(jobs.size());
  std::mutex log_mutex;
  std::size_t finished = 0;
  const auto errors = parallel_for(jobs.size(), exec.parallel, [&](std::size_t i) {
    records[i] = execute_job(cfg, jobs[i], run_dir);
    if (exec.print && exec.log) {
      std::lock_guard lock(log_mutex);
      ++finished;
      *exec.log << "[" << finished << "/" << jobs.size() << "] " << records[i].algorithm << " "
                << records[i].delay << " seed " << records[i].seed
                << (records[i].k ? " K=" + std::to_string(records[i].k) : std::string()) << ": "
                << records[i].status << "\n";
    }
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (errors[i]) {
      auto& r = records[i];
      r.algorithm = cfg.algorithms[jobs[i].algorithm].config.name;
      r.delay = cfg.delays[jobs[i].delay].describe();
      r.seed = jobs[i].seed;
      r.k = jobs[i].k;
      r.errored = true;
      r.status = "error: " + describe_exception(errors[i]);
    }
    if (records[i].errored) {
      result.errors.push_back(records[i].algorithm + " " + records[i].delay + " seed " +
                              std::to_string(records[i].seed) + ": " + records[i].status);
    }
    if (!records[i].csv_path.empty()) result.files.push_back(records[i].csv_path);
  }
  result.runs = std::move(records);
}

}  // namespace detail

/// run, compare, sweep-k and delay-patterns: the full (K ×) algorithm ×
/// delay × seed grid, then the mode's tables.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExecutionOptions& exec = {}) {
  if (cfg.mode == Mode::kStability) throw Error(ErrorKind::kConfig, "use run_stability_sweep for stability mode");
  ExperimentResult result;
  const bool with_k = cfg.mode == Mode::kSweepK;
  const std::vector<int> ks = with_k ? cfg.k_values : std::vector<int>{0};
  std::filesystem::create_directories(cfg.out);
  detail::run_grid(cfg, exec, ks, result);

  result.summary = detail::summarize(cfg, result.runs, ks);
  const std::string summary_path = cfg.out + (with_k ? "/sweep_k.csv" : "/summary.csv");
  detail::write_summary(cfg, result.summary, summary_path, with_k);
  result.files.push_back(summary_path);
  if (exec.print && exec.log) detail::print_summary(*exec.log, result.summary, with_k);

  if (cfg.compare && result.errors.empty()) {
    try {
      result.compare = detail::compare_rows(cfg, result.runs, ks);
      const std::string path = cfg.out + (with_k ? "/sweep_k_compare.csv" : "/compare.csv");
      detail::write_compare(cfg, result.compare, path, with_k);
      result.files.push_back(path);
      if (exec.print && exec.log) detail::print_compare(*exec.log, cfg, result.compare, with_k);
    } catch (const Error& e) {
      result.errors.push_back(e.what());
    }
  }

  if (cfg.mode == Mode::kDelayPatterns) {
    CsvWriter w({"pattern", "algorithm", "seeds", "mean_sigma", "max_sigma", "regret_mean",
                 "regret_sd", "gap_mean", "improvement_pct", "p_value"});
    w.comment("igt-lab", "delay-patterns");
    w.comment("config_hash", hex64(cfg.config_hash));
    for (const auto& s : result.summary) {
      std::string impr, p;
      if (cfg.compare && s.algorithm == cfg.compare->treatment) {
        for (const auto& c : result.compare) {
          if (c.delay == s.delay) {
            impr = fmt9(c.improvement);
            p = fmt9(c.welch.p_value);
          }
        }
      }
      w.row({s.delay, s.algorithm, std::to_string(s.seeds), fmt9(s.mean_sigma),
             std::to_string(s.max_sigma), fmt9(s.regret_mean), fmt9(s.regret_sd), fmt9(s.gap_mean),
             impr, p});
    }
    const std::string path = cfg.out + "/patterns.csv";
    w.save(path);
    result.files.push_back(path);
  }
  if (exec.print && exec.log) {
    for (const auto& e : result.errors) *exec.log << "error: " << e << "\n";
  }
  return result;
}

/// eta_max per (algorithm, delay). A probe is stable iff no seed diverges
/// within the horizon; numerical failures at large eta count as divergence.
inline ExperimentResult run_stability_sweep(const ExperimentConfig& cfg, const ExecutionOptions& exec = {}) {
  if (!cfg.stability) throw Error(ErrorKind::kConfig, "stability sweep needs a [stability] section");
  const auto& st = *cfg.stability;
  if (!(st.hi > st.lo)) {
    throw Error(ErrorKind::kDegenerateInterval, "degenerate search interval: need lo < hi");
  }
  ExperimentResult result;
  std::filesystem::create_directories(cfg.out);
  struct Cell {
    std::size_t algorithm, delay;
  };
  std::vector<Cell> cells;
  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    for (std::size_t d = 0; d < cfg.delays.size(); ++d) cells.push_back({a, d});
  }
  std::vector<StabilityRow> rows(cells.size());
  const auto errors = parallel_for(cells.size(), exec.parallel, [&](std::size_t i) {
    const auto& algo = cfg.algorithms[cells[i].algorithm];
    const auto& delay = cfg.delays[cells[i].delay];
    auto& row = rows[i];
    row.algorithm = algo.config.name;
    row.delay = delay.describe();
    row.sigma = delay.max_queue_bound();
    auto stable = [&](double eta) {
      for (int seed : cfg.seeds_for(algo)) {
        auto env = make_environment(cfg.environment, static_cast<std::uint64_t>(seed));
        RunOptions opt;
        opt.rounds = st.horizon;
        opt.seed = static_cast<std::uint64_t>(seed);
        opt.delay = delay;
        opt.algo = algo.config;
        opt.algo.schedule.eta0 = eta;
        opt.domain_radius = st.radius;
        opt.keep_rows = false;
        try {
          if (run_single(*env, opt).diverged) return false;
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::kConfig) throw;
          return false;
        }
      }
      return true;
    };
    const auto r = eta_max_search(stable, st.lo, st.hi, st.resolution);
    row.eta_max = r.eta_max;
    row.upper_stable = r.upper_stable;
    row.probes = r.probes;
  });
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i]) continue;
    rows[i].algorithm = cfg.algorithms[cells[i].algorithm].config.name;
    rows[i].delay = cfg.delays[cells[i].delay].describe();
    rows[i].sigma = cfg.delays[cells[i].delay].max_queue_bound();
    rows[i].status = "error: " + describe_exception(errors[i]);
    result.errors.push_back(rows[i].algorithm + " " + rows[i].delay + ": " + rows[i].status);
  }

  CsvWriter w({"algorithm", "delay", "sigma", "eta_max", "upper_stable", "probes", "resolution",
               "horizon", "status"});
  w.comment("igt-lab", "stability");
  w.comment("experiment", cfg.name);
  w.comment("config_hash", hex64(cfg.config_hash));
  std::string seeds;
  for (int s : cfg.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
  w.comment("seeds", seeds);
  w.comment("environment", cfg.environment.kind);
  for (const auto& r : rows) {
    w.row({r.algorithm, r.delay, std::to_string(r.sigma), fmt9(r.eta_max), detail::yes(r.upper_stable),
           std::to_string(r.probes), fmt9(st.resolution), std::to_string(st.horizon), r.status});
  }
  const std::string path = cfg.out + "/stability.csv";
  w.save(path);
  result.files.push_back(path);
  if (exec.print && exec.log) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-14s %-14s %6s %10s %7s\n", "algorithm", "delay", "sigma",
                  "eta_max", "probes");
    *exec.log << buf;
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-14s %-14s %6d %10.4f %7d%s\n", r.algorithm.c_str(),
                    r.delay.c_str(), r.sigma, r.eta_max, r.probes, r.upper_stable ? "  (hi stable)" : "");
      *exec.log << buf;
    }
    for (const auto& e : result.errors) *exec.log << "error: " << e << "\n";
  }
  result.stability = std::move(rows);
  return result;
}

inline ExperimentResult execute(const ExperimentConfig& cfg, const ExecutionOptions& exec = {}) {
  return cfg.mode == Mode::kStability ? run_stability_sweep(cfg, exec) : run_experiment(cfg, exec);
}

}  // namespace igt::harness

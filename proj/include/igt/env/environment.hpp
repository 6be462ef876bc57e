#pragma once

// Runtime side of an environment: the per-round context/outcome stream,
// loss accounting and the hindsight comparator.

#include "igt/bilevel.hpp"

#include <optional>
#include <random>
#include <string>

namespace igt {

struct RoundData {
  Context context;
  Outcome outcome;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const BilevelProblem& problem() const = 0;

  /// Context and outcome for round t. Called once per round, in order.
  virtual RoundData next_round(int t) = 0;

  virtual ParamVector initial_params() const = 0;
  virtual DecisionVector initial_decision() const {
    return DecisionVector::Zero(problem().decision_dim());
  }

  /// Loss charged for executing w at theta this round.
  virtual double realized_loss(const DecisionVector& w, const ParamVector& theta,
                               const RoundData& round) const {
    return problem().true_loss(w, theta, round.context, round.outcome);
  }

  /// Loss of the hindsight comparator on the same realized outcome.
  virtual double comparator_loss(const RoundData& round) const = 0;

  virtual std::optional<double> optimality_gap(const DecisionVector& /*w*/,
                                               const RoundData& /*round*/) const {
    return std::nullopt;
  }

  /// Radius of the environment's natural parameter domain, if any.
  virtual std::optional<double> domain_radius() const { return std::nullopt; }

  /// Free-text notes written into CSV headers (comparator choice etc.).
  virtual std::string metadata() const { return {}; }
};

/// Independent generator for a named stream of a seeded run.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  return std::mt19937_64(seq);
}

inline Vector gaussian_vector(Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * nd(rng);
  return v;
}

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = scale * nd(rng);
  }
  return m;
}

}  // namespace igt

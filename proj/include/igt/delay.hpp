#pragma once

// Feedback channel: delay schedules, the outstanding-round queue and the
// Ornstein-Uhlenbeck drift applied to environment parameters.

#include "igt/bilevel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <cstdio>
#include <string>
#include <vector>

namespace igt {

enum class DelayKind { kConstant, kUniform, kPoisson, kBursty };

struct DelaySchedule {
  DelayKind kind = DelayKind::kConstant;
  int constant = 0;            // constant d
  int uniform_max = 0;         // Uniform[0, d_max]
  double poisson_mean = 0.0;   // lambda
  double poisson_cap_factor = 10.0;
  int burst_length = 10;       // L
  int burst_high = 40;         // d_high

  static DelaySchedule constant_delay(int d) {
    DelaySchedule s;
    s.kind = DelayKind::kConstant;
    s.constant = d;
    return s;
  }
  static DelaySchedule uniform(int d_max) {
    DelaySchedule s;
    s.kind = DelayKind::kUniform;
    s.uniform_max = d_max;
    return s;
  }
  static DelaySchedule poisson(double lambda) {
    DelaySchedule s;
    s.kind = DelayKind::kPoisson;
    s.poisson_mean = lambda;
    return s;
  }
  static DelaySchedule bursty(int length = 10, int high = 40) {
    DelaySchedule s;
    s.kind = DelayKind::kBursty;
    s.burst_length = length;
    s.burst_high = high;
    return s;
  }

  void validate() const {
    switch (kind) {
      case DelayKind::kConstant:
        if (constant < 0) throw Error(ErrorKind::kConfig, "constant delay must be >= 0");
        break;
      case DelayKind::kUniform:
        if (uniform_max < 0) throw Error(ErrorKind::kConfig, "uniform d_max must be >= 0");
        break;
      case DelayKind::kPoisson:
        if (!(poisson_mean >= 0.0)) throw Error(ErrorKind::kConfig, "poisson mean must be >= 0");
        break;
      case DelayKind::kBursty:
        if (burst_length < 1 || burst_high < 0) {
          throw Error(ErrorKind::kConfig, "bursty schedule needs length >= 1 and d_high >= 0");
        }
        break;
    }
  }

  int poisson_cap() const { return static_cast<int>(std::ceil(poisson_cap_factor * poisson_mean)); }

  /// Upper bound on the queue length any realization can reach.
  int max_queue_bound() const {
    switch (kind) {
      case DelayKind::kConstant: return constant;
      case DelayKind::kUniform: return uniform_max;
      case DelayKind::kPoisson: return poisson_cap();
      case DelayKind::kBursty: return burst_high;
    }
    return 0;
  }

  /// Representative delay used for the R_sq window.
  int nominal_delay() const {
    switch (kind) {
      case DelayKind::kConstant: return constant;
      case DelayKind::kUniform: return uniform_max;
      case DelayKind::kPoisson: return static_cast<int>(std::lround(poisson_mean));
      case DelayKind::kBursty: return burst_high;
    }
    return 0;
  }

  std::string describe() const {
    switch (kind) {
      case DelayKind::kConstant: return "const" + std::to_string(constant);
      case DelayKind::kUniform: return "uniform" + std::to_string(uniform_max);
      case DelayKind::kPoisson: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "poisson%g", poisson_mean);
        return buf;
      }
      case DelayKind::kBursty:
        return "bursty" + std::to_string(burst_length) + "x" + std::to_string(burst_high);
    }
    return "?";
  }
};

/// Draws d_t from a schedule with its own seed stream, so the realization
/// is identical for every algorithm run under the same seed.
class DelaySampler {
 public:
  DelaySampler(DelaySchedule schedule, std::uint64_t seed) : schedule_(schedule) {
    schedule_.validate();
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      0xde1a9u};
    rng_.seed(seq);
  }

  int sample(int t) {
    switch (schedule_.kind) {
      case DelayKind::kConstant: return schedule_.constant;
      case DelayKind::kUniform:
        return std::uniform_int_distribution<int>(0, schedule_.uniform_max)(rng_);
      case DelayKind::kPoisson: {
        if (schedule_.poisson_mean <= 0.0) return 0;
        const int d = std::poisson_distribution<int>(schedule_.poisson_mean)(rng_);
        const int cap = schedule_.poisson_cap();
        if (d > cap) {
          ++cap_hits_;
          return cap;
        }
        return d;
      }
      case DelayKind::kBursty: {
        const int block = (t - 1) / schedule_.burst_length;
        return block % 2 == 0 ? 0 : schedule_.burst_high;
      }
    }
    return 0;
  }

  int cap_hits() const { return cap_hits_; }
  const DelaySchedule& schedule() const { return schedule_; }

 private:
  DelaySchedule schedule_;
  std::mt19937_64 rng_;
  int cap_hits_ = 0;
};

/// Outstanding-round bookkeeping: Q_t, sigma_t = |Q_t|, the monotone
/// envelope, and the records waiting for their arrival round.
class DelayQueue {
 public:
  /// Dispatches round t with delay d_t and returns A_t = {s : s + d_s = t}
  /// in ascending round order. Rounds must be dispatched in order.
  std::vector<OutcomeRecordPtr> advance(int t, int delay, OutcomeRecordPtr record) {
    if (t != last_round_ + 1) {
      throw Error(ErrorKind::kInvalidArgument, "rounds must be dispatched in order");
    }
    if (delay < 0) throw Error(ErrorKind::kInvalidArgument, "negative delay");
    last_round_ = t;
    outstanding_.insert(t);
    pending_[t + delay].push_back(std::move(record));
    ++dispatched_;

    std::vector<OutcomeRecordPtr> arrivals;
    if (auto it = pending_.find(t); it != pending_.end()) {
      arrivals = std::move(it->second);
      pending_.erase(it);
    }
    std::sort(arrivals.begin(), arrivals.end(),
              [](const OutcomeRecordPtr& a, const OutcomeRecordPtr& b) { return a->round < b->round; });
    for (const auto& rec : arrivals) outstanding_.erase(rec->round);
    arrived_ += static_cast<long>(arrivals.size());

    sigma_ = static_cast<int>(outstanding_.size());
    envelope_ = std::max(envelope_, sigma_);
    return arrivals;
  }

  const std::set<int>& outstanding() const { return outstanding_; }
  int sigma() const { return sigma_; }
  int envelope() const { return envelope_; }
  long dispatched() const { return dispatched_; }
  long arrived() const { return arrived_; }

 private:
  std::set<int> outstanding_;
  std::map<int, std::vector<OutcomeRecordPtr>> pending_;
  int sigma_ = 0;
  int envelope_ = 0;
  int last_round_ = 0;
  long dispatched_ = 0;
  long arrived_ = 0;
};

/// x <- (1 - gamma) x + gamma * mean + noise_scale * xi, xi ~ N(0, I).
class OUProcess {
 public:
  OUProcess(Vector mean, double gamma, double noise_scale, std::uint64_t seed)
      : state_(mean), mean_(std::move(mean)), gamma_(gamma), noise_scale_(noise_scale) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      0x0e0u};
    rng_.seed(seq);
  }

  const Vector& step() {
    state_ = (1.0 - gamma_) * state_ + gamma_ * mean_;
    if (noise_scale_ != 0.0) {
      for (Index i = 0; i < state_.size(); ++i) state_(i) += noise_scale_ * normal_(rng_);
    }
    return state_;
  }

  const Vector& state() const { return state_; }
  void set_state(Vector x) { state_ = std::move(x); }
  double gamma() const { return gamma_; }
  double noise_scale() const { return noise_scale_; }

  /// Stationary per-coordinate variance of the recursion above.
  double stationary_variance() const {
    return noise_scale_ * noise_scale_ / (gamma_ * (2.0 - gamma_));
  }

 private:
  Vector state_;
  Vector mean_;
  double gamma_;
  double noise_scale_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace igt

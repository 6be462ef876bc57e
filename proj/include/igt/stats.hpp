#pragma once

// Summary statistics: log-log regression, Welch's t-test, improvement
// percentages and the binary search for the largest stable step size.

#include "igt/core.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace igt {

inline double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

/// OLS of ln(value) on ln(sigma).
inline RegressionResult loglog_fit(std::span<const double> sigma, std::span<const double> value) {
  if (sigma.size() != value.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "loglog_fit: sigma and value lengths differ");
  }
  if (sigma.size() < 3) throw Error(ErrorKind::kInsufficientSamples, "loglog_fit needs >= 3 points");
  const std::size_t n = sigma.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma[i] > 0.0) || !(value[i] > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "loglog_fit needs positive inputs");
    }
    x[i] = std::log(sigma[i]);
    y[i] = std::log(value[i]);
  }
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::kInvalidArgument, "loglog_fit: all sigma equal");
  RegressionResult r;
  r.n_points = static_cast<int>(n);
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return r;
}

struct WelchResult {
  double mean_a = 0.0, mean_b = 0.0;
  double sd_a = 0.0, sd_b = 0.0;
  double t_stat = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.
inline WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorKind::kInsufficientSamples, "welch_t needs >= 2 samples per group");
  }
  WelchResult r;
  r.mean_a = mean(a);
  r.mean_b = mean(b);
  r.sd_a = sample_sd(a);
  r.sd_b = sample_sd(b);
  const double va = r.sd_a * r.sd_a / static_cast<double>(a.size());
  const double vb = r.sd_b * r.sd_b / static_cast<double>(b.size());
  const double se2 = va + vb;
  const double diff = r.mean_a - r.mean_b;
  if (se2 == 0.0) {
    r.t_stat = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t_stat = diff / std::sqrt(se2);
  r.dof = se2 * se2 /
          (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.dof);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_stat))),
                         0.0, 1.0);
  return r;
}

/// Formats a p-value, flooring anything below 1e-12.
inline std::string format_p(double p) {
  if (p < 1e-12) return "<1e-12";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", p);
  return buf;
}

/// 100 (control - treatment) / control.
inline double improvement_pct(double treatment, double control) {
  return 100.0 * (control - treatment) / control;
}

struct EtaSearchResult {
  double eta_max = 0.0;
  bool upper_stable = false;  // hi itself was stable; eta_max == hi
  int probes = 0;
};

/// Largest eta in [lo, hi] for which `stable(eta)` holds, to within
/// `resolution`, assuming stability is monotone in eta.
inline EtaSearchResult eta_max_search(const std::function<bool(double)>& stable, double lo,
                                      double hi, double resolution) {
  if (!(hi > lo)) throw Error(ErrorKind::kDegenerateInterval, "need lo < hi");
  if (!(resolution > 0.0)) throw Error(ErrorKind::kDegenerateInterval, "resolution must be > 0");
  EtaSearchResult r;
  ++r.probes;
  if (!stable(lo)) {
    throw Error(ErrorKind::kDiverged,
                "lower bound eta=" + std::to_string(lo) + " is already unstable");
  }
  ++r.probes;
  if (stable(hi)) {
    r.eta_max = hi;
    r.upper_stable = true;
    return r;
  }
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    ++r.probes;
    if (stable(mid)) lo = mid;
    else hi = mid;
  }
  r.eta_max = lo;
  return r;
}

}  // namespace igt

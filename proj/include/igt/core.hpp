#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace igt {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Outer predictor parameters (theta, length p).
using ParamVector = Eigen::VectorXd;
/// Inner decision (w, length q).
using DecisionVector = Eigen::VectorXd;

enum class ErrorKind {
  kConfig,
  kInvalidArgument,
  kDimensionMismatch,
  kInnerDivergence,
  kNotSpd,
  kDegenerateMarginal,
  kNoPath,
  kOracleNotOptimal,
  kUnavailable,
  kInsufficientSamples,
  kDegenerateInterval,
  kDiverged,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kInnerDivergence: return "inner divergence";
    case ErrorKind::kNotSpd: return "operator not SPD";
    case ErrorKind::kDegenerateMarginal: return "degenerate marginal";
    case ErrorKind::kNoPath: return "no path";
    case ErrorKind::kOracleNotOptimal: return "oracle not optimal";
    case ErrorKind::kUnavailable: return "unavailable";
    case ErrorKind::kInsufficientSamples: return "insufficient samples";
    case ErrorKind::kDegenerateInterval: return "degenerate search interval";
    case ErrorKind::kDiverged: return "diverged";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline bool all_finite(const Eigen::Ref<const Vector>& v) { return v.allFinite(); }

inline void require_same_size(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                              const char* where) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch, std::string(where) + ": " +
                                                   std::to_string(a.size()) + " vs " +
                                                   std::to_string(b.size()));
  }
}

/// 64-bit FNV-1a, used for config and delay-sequence fingerprints.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add(std::int64_t v) { add_bytes(&v, sizeof v); }
  void add(const std::string& s) { add_bytes(s.data(), s.size()); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace igt

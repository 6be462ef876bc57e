#pragma once

// Matrix-free conjugate gradient for the adjoint systems H_w v = rhs.

#include "igt/core.hpp"

#include <algorithm>

namespace igt {

struct CGConfig {
  double tolerance = 1e-8;
  int max_iterations = 0;  // 0 selects 10 * dim
  bool warm_start = true;

  void validate() const {
    if (!(tolerance > 0.0)) throw Error(ErrorKind::kConfig, "CG tolerance must be > 0");
    if (max_iterations < 0) throw Error(ErrorKind::kConfig, "CG max_iterations must be >= 0");
  }
};

struct CGResult {
  Vector x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Solves A x = b for a symmetric positive definite operator given as a
/// callable Vector -> Vector. Stops when ||A x - b|| <= tol * max(1, ||b||)
/// or at the iteration cap (converged == false).
template <typename Op>
CGResult conjugate_gradient(Op&& apply_a, const Vector& b, const Vector& x0,
                            const CGConfig& cfg) {
  const Index n = b.size();
  const int max_iter = cfg.max_iterations > 0 ? cfg.max_iterations : static_cast<int>(10 * n);
  const double target = cfg.tolerance * std::max(1.0, b.norm());

  CGResult out;
  if (cfg.warm_start && x0.size() == n) {
    out.x = x0;
  } else {
    out.x = Vector::Zero(n);
  }

  Vector r = b - apply_a(out.x);
  double rr = r.squaredNorm();
  out.residual = std::sqrt(rr);
  if (out.residual <= target) {
    out.converged = true;
    return out;
  }

  Vector p = r;
  while (out.iterations < max_iter) {
    const Vector ap = apply_a(p);
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0)) {
      throw Error(ErrorKind::kNotSpd,
                  "p^T A p = " + std::to_string(curvature) + " at iteration " +
                      std::to_string(out.iterations));
    }
    const double alpha = rr / curvature;
    out.x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    ++out.iterations;

    const double rr_next = r.squaredNorm();
    out.residual = std::sqrt(rr_next);
    if (out.residual <= target) {
      out.converged = true;
      return out;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  // The recursive residual drifts on ill-conditioned systems; report the true one.
  out.residual = (b - apply_a(out.x)).norm();
  out.converged = out.residual <= target;
  return out;
}

}  // namespace igt

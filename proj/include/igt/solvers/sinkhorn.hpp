#pragma once

// Log-domain Sinkhorn iterations for entropic optimal transport. The
// exp-domain coupling is only formed on request: small regularization
// underflows in the exp domain.

#include "igt/core.hpp"

namespace igt {

struct SinkhornResult {
  Matrix cost;
  Vector f;  // row potentials
  Vector g;  // column potentials
  double epsilon = 0.0;
  int iterations = 0;

  Matrix log_coupling() const {
    Matrix out = -cost;
    out.colwise() += f;
    out.rowwise() += g.transpose();
    return out / epsilon;
  }
  Matrix coupling() const { return log_coupling().array().exp().matrix(); }
};

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline void check_marginal(const Vector& m, const char* which) {
  if (m.size() == 0) throw Error(ErrorKind::kInvalidArgument, std::string(which) + " is empty");
  if ((m.array() <= 0.0).any()) {
    throw Error(ErrorKind::kDegenerateMarginal, std::string(which) + " has a non-positive entry");
  }
  if (std::abs(m.sum() - 1.0) > 1e-12) {
    throw Error(ErrorKind::kInvalidArgument, std::string(which) + " does not sum to 1");
  }
}

}  // namespace detail

/// K log-domain Sinkhorn sweeps (row update then column update), started
/// from zero potentials or from (f0, g0) when given.
inline SinkhornResult sinkhorn_log(const Matrix& cost, const Vector& mu, const Vector& nu,
                                   double epsilon, int iterations, const Vector* f0 = nullptr,
                                   const Vector* g0 = nullptr) {
  if (iterations < 1) throw Error(ErrorKind::kInvalidArgument, "Sinkhorn needs K >= 1");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "Sinkhorn needs epsilon > 0");
  detail::check_marginal(mu, "mu");
  detail::check_marginal(nu, "nu");
  if (cost.rows() != mu.size() || cost.cols() != nu.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "cost matrix does not match marginals");
  }

  const Index n = mu.size();
  const Index m = nu.size();
  SinkhornResult out;
  out.cost = cost;
  out.epsilon = epsilon;
  out.f = f0 ? *f0 : Vector::Zero(n);
  out.g = g0 ? *g0 : Vector::Zero(m);
  const Vector log_mu = mu.array().log();
  const Vector log_nu = nu.array().log();

  Vector scratch_row(m);
  Vector scratch_col(n);
  for (int k = 0; k < iterations; ++k) {
    for (Index i = 0; i < n; ++i) {
      scratch_row = (out.g.transpose() - cost.row(i)) / epsilon;
      out.f(i) = epsilon * (log_mu(i) - detail::log_sum_exp(scratch_row));
    }
    for (Index j = 0; j < m; ++j) {
      scratch_col = (out.f - cost.col(j)) / epsilon;
      out.g(j) = epsilon * (log_nu(j) - detail::log_sum_exp(scratch_col));
    }
  }
  out.iterations = iterations;
  return out;
}

/// max(||P 1 - mu||_inf, ||P^T 1 - nu||_inf)
inline double marginal_residual(const Matrix& coupling, const Vector& mu, const Vector& nu) {
  const double rows = (coupling.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  const double cols = (coupling.colwise().sum().transpose() - nu).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

}  // namespace igt

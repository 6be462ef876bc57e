#pragma once

// Small fully connected predictor y = W2 tanh(W1 x + b1) + b2 with a
// hand-written vector-Jacobian product. hidden == 0 gives the linear map
// y = W x + b. Parameters are packed column-major: W1, b1, W2, b2.

#include "igt/core.hpp"

#include <random>

namespace igt {

class TwoLayerNet {
 public:
  TwoLayerNet(Index in, Index hidden, Index out) : in_(in), hidden_(hidden), out_(out) {
    if (in < 1 || out < 1 || hidden < 0) {
      throw Error(ErrorKind::kConfig, "network dimensions must be positive");
    }
  }

  Index input_dim() const { return in_; }
  Index hidden_dim() const { return hidden_; }
  Index output_dim() const { return out_; }
  bool linear() const { return hidden_ == 0; }

  Index param_count() const {
    if (linear()) return out_ * in_ + out_;
    return hidden_ * in_ + hidden_ + out_ * hidden_ + out_;
  }

  Vector forward(const Vector& theta, const Vector& x) const {
    check(theta, x);
    if (linear()) return w_out(theta) * x + b_out(theta);
    const Vector h = hidden_activations(theta, x);
    return w_out(theta) * h + b_out(theta);
  }

  /// J(theta, x)^T v, the gradient of <v, forward(theta, x)> in theta.
  Vector vjp(const Vector& theta, const Vector& x, const Vector& v) const {
    check(theta, x);
    if (v.size() != out_) throw Error(ErrorKind::kDimensionMismatch, "vjp cotangent size");
    Vector g(param_count());
    if (linear()) {
      Eigen::Map<Matrix>(g.data(), out_, in_) = v * x.transpose();
      g.tail(out_) = v;
      return g;
    }
    const Vector h = hidden_activations(theta, x);
    const Vector dh = w_out(theta).transpose() * v;
    const Vector da = dh.array() * (1.0 - h.array().square());
    Index k = 0;
    Eigen::Map<Matrix>(g.data() + k, hidden_, in_) = da * x.transpose();
    k += hidden_ * in_;
    g.segment(k, hidden_) = da;
    k += hidden_;
    Eigen::Map<Matrix>(g.data() + k, out_, hidden_) = v * h.transpose();
    k += out_ * hidden_;
    g.segment(k, out_) = v;
    return g;
  }

  /// Gaussian init with fan-in scaling; output layer scaled by out_scale and
  /// output bias set to out_bias.
  Vector init(std::mt19937_64& rng, double out_scale, double out_bias) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vector theta = Vector::Zero(param_count());
    auto fill = [&](Index start, Index count, double scale) {
      for (Index i = 0; i < count; ++i) theta(start + i) = scale * nd(rng);
    };
    if (linear()) {
      fill(0, out_ * in_, out_scale / std::sqrt(static_cast<double>(in_)));
      theta.tail(out_).setConstant(out_bias);
      return theta;
    }
    fill(0, hidden_ * in_, 1.0 / std::sqrt(static_cast<double>(in_)));
    const Index w2 = hidden_ * in_ + hidden_;
    fill(w2, out_ * hidden_, out_scale / std::sqrt(static_cast<double>(hidden_)));
    theta.tail(out_).setConstant(out_bias);
    return theta;
  }

 private:
  void check(const Vector& theta, const Vector& x) const {
    if (theta.size() != param_count() || x.size() != in_) {
      throw Error(ErrorKind::kDimensionMismatch, "network parameter or input size");
    }
  }

  Vector hidden_activations(const Vector& theta, const Vector& x) const {
    Eigen::Map<const Matrix> w1(theta.data(), hidden_, in_);
    const auto b1 = theta.segment(hidden_ * in_, hidden_);
    return (w1 * x + b1).array().tanh().matrix();
  }

  Eigen::Map<const Matrix> w_out(const Vector& theta) const {
    if (linear()) return Eigen::Map<const Matrix>(theta.data(), out_, in_);
    return Eigen::Map<const Matrix>(theta.data() + hidden_ * in_ + hidden_, out_, hidden_);
  }

  Eigen::VectorBlock<const Vector> b_out(const Vector& theta) const { return theta.tail(out_); }

  Index in_, hidden_, out_;
};

}  // namespace igt

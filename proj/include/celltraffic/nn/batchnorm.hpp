#pragma once

// Per-channel batch normalization over (batch, row, col).

#include <cmath>
#include <cstddef>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/nn/tensor.hpp"

namespace celltraffic::nn {

enum class Mode { train, infer };

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  /// Weight of the newest batch in the running averages.
  double momentum = 0.1;
  double epsilon = 1e-5;

  BatchNormParams() = default;
  explicit BatchNormParams(std::size_t channels)
      : gamma(channels, 1.0), beta(channels, 0.0), running_mean(channels, 0.0), running_var(channels, 1.0) {}

  std::size_t channels() const noexcept { return gamma.size(); }
  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

struct BatchNormGrads {
  Tensor4 input;
  std::vector<double> gamma;
  std::vector<double> beta;
};

namespace detail {

struct ChannelMoments {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};

inline ChannelMoments batch_moments(const Tensor4& x) {
  const std::size_t C = x.channels();
  const double n = static_cast<double>(x.batch() * x.shape().plane());
  ChannelMoments m{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (double v : x.plane(b, c)) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (double v : x.plane(b, c)) sq += (v - mean) * (v - mean);
    m.mean[c] = mean;
    m.var[c] = sq / n;
  }
  return m;
}

inline void check_bn(const Tensor4& x, const BatchNormParams& p) {
  if (x.channels() != p.channels())
    throw ShapeError("batchnorm: input has " + std::to_string(x.channels()) + " channels, params have " +
                     std::to_string(p.channels()));
}

}  // namespace detail

/// Train mode normalizes with batch statistics and folds them into the running
/// averages (unbiased variance); infer mode uses the running statistics and
/// leaves `params` untouched.
inline Tensor4 batchnorm_forward(const Tensor4& x, BatchNormParams& params, Mode mode) {
  detail::check_bn(x, params);
  const std::size_t C = x.channels();
  Tensor4 y(x.shape());
  std::vector<double> mean(C), inv_std(C);
  if (mode == Mode::train) {
    if (x.batch() < 2) throw BatchSizeError("batchnorm: train mode needs a batch of at least 2");
    const auto m = detail::batch_moments(x);
    const double n = static_cast<double>(x.batch() * x.shape().plane());
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = m.mean[c];
      inv_std[c] = 1.0 / std::sqrt(m.var[c] + params.epsilon);
      params.running_mean[c] = (1.0 - params.momentum) * params.running_mean[c] + params.momentum * m.mean[c];
      params.running_var[c] =
          (1.0 - params.momentum) * params.running_var[c] + params.momentum * m.var[c] * n / (n - 1.0);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = params.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(params.running_var[c] + params.epsilon);
    }
  }
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < C; ++c) {
      auto src = x.plane(b, c);
      auto dst = y.plane(b, c);
      const double scale = params.gamma[c] * inv_std[c];
      const double shift = params.beta[c] - mean[c] * scale;
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * scale + shift;
    }
  return y;
}

/// Gradients of the train-mode forward map; batch statistics are recomputed
/// from `x`.
inline BatchNormGrads batchnorm_backward(const Tensor4& x, const BatchNormParams& params, const Tensor4& grad_out) {
  detail::check_bn(x, params);
  if (grad_out.shape() != x.shape()) throw ShapeError("batchnorm_backward: grad_out shape differs from input");
  if (x.batch() < 2) throw BatchSizeError("batchnorm_backward: needs a batch of at least 2");
  const std::size_t C = x.channels();
  const double n = static_cast<double>(x.batch() * x.shape().plane());
  const auto m = detail::batch_moments(x);
  BatchNormGrads g{Tensor4(x.shape()), std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
  for (std::size_t c = 0; c < C; ++c) {
    const double inv_std = 1.0 / std::sqrt(m.var[c] + params.epsilon);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < x.batch(); ++b) {
      auto src = x.plane(b, c);
      auto dy = grad_out.plane(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * (src[i] - m.mean[c]) * inv_std;
      }
    }
    g.beta[c] = sum_dy;
    g.gamma[c] = sum_dy_xhat;
    const double k = params.gamma[c] * inv_std / n;
    for (std::size_t b = 0; b < x.batch(); ++b) {
      auto src = x.plane(b, c);
      auto dy = grad_out.plane(b, c);
      auto dx = g.input.plane(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        const double xhat = (src[i] - m.mean[c]) * inv_std;
        dx[i] = k * (n * dy[i] - sum_dy - xhat * sum_dy_xhat);
      }
    }
  }
  return g;
}

}  // namespace celltraffic::nn

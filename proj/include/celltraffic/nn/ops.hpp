#pragma once

// Elementwise ReLU, non-overlapping average pooling and fully connected maps.
// Flat activations use the (batch, features, 1, 1) tensor shape.

#include <cstddef>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/nn/tensor.hpp"

namespace celltraffic::nn {

inline Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 y(x.shape());
  auto src = x.data();
  auto dst = y.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
  return y;
}

/// `x` is the forward input; the subgradient at 0 is taken as 0.
inline Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
  if (x.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor4 g(x.shape());
  auto src = x.data();
  auto gy = grad_out.data();
  auto gx = g.data();
  for (std::size_t i = 0; i < src.size(); ++i) gx[i] = src[i] > 0.0 ? gy[i] : 0.0;
  return g;
}

struct PoolSpec {
  std::size_t size_h = 5;
  std::size_t size_w = 5;
  std::size_t stride_h = 5;
  std::size_t stride_w = 5;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

inline std::size_t pooled_extent(std::size_t n, std::size_t size, std::size_t stride) {
  if (size == 0 || stride == 0 || n < size || (n - size) % stride != 0)
    throw ShapeError("pooling window " + std::to_string(size) + "/stride " + std::to_string(stride) +
                     " does not tile extent " + std::to_string(n));
  return (n - size) / stride + 1;
}

inline Tensor4 avg_pool_forward(const Tensor4& x, const PoolSpec& p) {
  const std::size_t oh = pooled_extent(x.height(), p.size_h, p.stride_h);
  const std::size_t ow = pooled_extent(x.width(), p.size_w, p.stride_w);
  const double inv = 1.0 / static_cast<double>(p.size_h * p.size_w);
  Tensor4 y(x.batch(), x.channels(), oh, ow);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t q = 0; q < ow; ++q) {
          double sum = 0.0;
          for (std::size_t i = 0; i < p.size_h; ++i)
            for (std::size_t j = 0; j < p.size_w; ++j) sum += x.at(b, c, r * p.stride_h + i, q * p.stride_w + j);
          y.at(b, c, r, q) = sum * inv;
        }
  return y;
}

inline Tensor4 avg_pool_backward(const Shape4& input_shape, const PoolSpec& p, const Tensor4& grad_out) {
  const std::size_t oh = pooled_extent(input_shape.height, p.size_h, p.stride_h);
  const std::size_t ow = pooled_extent(input_shape.width, p.size_w, p.stride_w);
  if (grad_out.shape() != Shape4{input_shape.batch, input_shape.channels, oh, ow})
    throw ShapeError("avg_pool_backward: grad_out shape mismatch");
  const double inv = 1.0 / static_cast<double>(p.size_h * p.size_w);
  Tensor4 g(input_shape);
  for (std::size_t b = 0; b < input_shape.batch; ++b)
    for (std::size_t c = 0; c < input_shape.channels; ++c)
      for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t q = 0; q < ow; ++q) {
          const double v = grad_out.at(b, c, r, q) * inv;
          for (std::size_t i = 0; i < p.size_h; ++i)
            for (std::size_t j = 0; j < p.size_w; ++j) g.at(b, c, r * p.stride_h + i, q * p.stride_w + j) += v;
        }
  return g;
}

/// Same data, new shape.
inline Tensor4 reshape(const Tensor4& x, Shape4 shape) {
  if (shape.count() != x.size()) throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  Tensor4 y(shape);
  std::copy(x.data().begin(), x.data().end(), y.data().begin());
  return y;
}

inline Tensor4 flatten(const Tensor4& x) {
  return reshape(x, {x.batch(), x.channels() * x.shape().plane(), 1, 1});
}

struct LinearParams {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  /// (out, in) row-major.
  std::vector<double> weights;
  std::vector<double> bias;

  LinearParams() = default;
  LinearParams(std::size_t in, std::size_t out)
      : in_features(in), out_features(out), weights(in * out, 0.0), bias(out, 0.0) {}
  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

struct LinearGrads {
  Tensor4 input;
  std::vector<double> weights;
  std::vector<double> bias;
};

inline Tensor4 linear_forward(const Tensor4& x, const LinearParams& p) {
  const std::size_t features = x.channels() * x.shape().plane();
  if (features != p.in_features)
    throw ShapeError("linear: input has " + std::to_string(features) + " features, expected " +
                     std::to_string(p.in_features));
  Tensor4 y(x.batch(), p.out_features, 1, 1);
  for (std::size_t b = 0; b < x.batch(); ++b) {
    auto in = x.item(b);
    auto out = y.item(b);
    for (std::size_t o = 0; o < p.out_features; ++o) {
      const double* w = p.weights.data() + o * p.in_features;
      double acc = 0.0;
      for (std::size_t i = 0; i < p.in_features; ++i) acc += w[i] * in[i];
      out[o] = acc + p.bias[o];
    }
  }
  return y;
}

inline LinearGrads linear_backward(const Tensor4& x, const LinearParams& p, const Tensor4& grad_out) {
  const std::size_t features = x.channels() * x.shape().plane();
  if (features != p.in_features) throw ShapeError("linear_backward: input feature mismatch");
  if (grad_out.shape() != Shape4{x.batch(), p.out_features, 1, 1}) throw ShapeError("linear_backward: grad_out mismatch");
  LinearGrads g{Tensor4(x.shape()), std::vector<double>(p.weights.size(), 0.0), std::vector<double>(p.out_features, 0.0)};
  for (std::size_t b = 0; b < x.batch(); ++b) {
    auto in = x.item(b);
    auto gy = grad_out.item(b);
    auto gx = g.input.item(b);
    for (std::size_t o = 0; o < p.out_features; ++o) {
      const double d = gy[o];
      g.bias[o] += d;
      if (d == 0.0) continue;
      const double* w = p.weights.data() + o * p.in_features;
      double* gw = g.weights.data() + o * p.in_features;
      for (std::size_t i = 0; i < p.in_features; ++i) {
        gw[i] += d * in[i];
        gx[i] += d * w[i];
      }
    }
  }
  return g;
}

}  // namespace celltraffic::nn

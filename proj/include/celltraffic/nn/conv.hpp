#pragma once

// 3x3 same-size convolution (cross-correlation, stride 1, zero padding 1).

#include <algorithm>
#include <cstddef>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/nn/tensor.hpp"

namespace celltraffic::nn {

inline constexpr std::size_t kKernel = 3;

struct ConvParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  /// (out, in, 3, 3) row-major.
  std::vector<double> kernels;
  std::vector<double> bias;

  ConvParams() = default;
  ConvParams(std::size_t out, std::size_t in)
      : out_channels(out), in_channels(in), kernels(out * in * kKernel * kKernel, 0.0), bias(out, 0.0) {}

  double& weight(std::size_t o, std::size_t i, std::size_t kr, std::size_t kc) {
    return kernels[((o * in_channels + i) * kKernel + kr) * kKernel + kc];
  }
  double weight(std::size_t o, std::size_t i, std::size_t kr, std::size_t kc) const {
    return kernels[((o * in_channels + i) * kKernel + kr) * kKernel + kc];
  }
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct ConvGrads {
  Tensor4 input;
  std::vector<double> kernels;
  std::vector<double> bias;
};

namespace detail {

// Valid output index range [lo, hi) for a kernel offset k in {0,1,2} under padding 1.
inline std::size_t conv_lo(std::size_t k) { return k == 0 ? 1 : 0; }
inline std::size_t conv_hi(std::size_t k, std::size_t n) { return k == 2 ? n - 1 : n; }

}  // namespace detail

inline Tensor4 conv2d_forward(const Tensor4& input, const ConvParams& p) {
  if (input.channels() != p.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(input.channels()) + " channels, kernel expects " +
                     std::to_string(p.in_channels));
  const std::size_t H = input.height(), W = input.width();
  Tensor4 out(input.batch(), p.out_channels, H, W);
  for (std::size_t n = 0; n < input.batch(); ++n)
    for (std::size_t o = 0; o < p.out_channels; ++o) {
      auto dst = out.plane(n, o);
      std::fill(dst.begin(), dst.end(), p.bias[o]);
      for (std::size_t i = 0; i < p.in_channels; ++i) {
        auto src = input.plane(n, i);
        for (std::size_t kr = 0; kr < kKernel; ++kr)
          for (std::size_t kc = 0; kc < kKernel; ++kc) {
            const double w = p.weight(o, i, kr, kc);
            const std::size_t c_lo = detail::conv_lo(kc), c_hi = detail::conv_hi(kc, W);
            for (std::size_t r = detail::conv_lo(kr); r < detail::conv_hi(kr, H); ++r) {
              double* d = dst.data() + r * W;
              const double* s = src.data() + (r + kr - 1) * W;
              for (std::size_t c = c_lo; c < c_hi; ++c) d[c] += w * s[c + kc - 1];
            }
          }
      }
    }
  return out;
}

inline ConvGrads conv2d_backward(const Tensor4& input, const ConvParams& p, const Tensor4& grad_out) {
  if (input.channels() != p.in_channels) throw ShapeError("conv2d_backward: input channel mismatch");
  const Shape4 expected{input.batch(), p.out_channels, input.height(), input.width()};
  if (grad_out.shape() != expected)
    throw ShapeError("conv2d_backward: grad_out " + to_string(grad_out.shape()) + ", expected " + to_string(expected));
  const std::size_t H = input.height(), W = input.width();
  ConvGrads g{Tensor4(input.shape()), std::vector<double>(p.kernels.size(), 0.0), std::vector<double>(p.out_channels, 0.0)};
  for (std::size_t n = 0; n < input.batch(); ++n)
    for (std::size_t o = 0; o < p.out_channels; ++o) {
      auto go = grad_out.plane(n, o);
      double bsum = 0.0;
      for (double v : go) bsum += v;
      g.bias[o] += bsum;
      for (std::size_t i = 0; i < p.in_channels; ++i) {
        auto src = input.plane(n, i);
        auto gi = g.input.plane(n, i);
        for (std::size_t kr = 0; kr < kKernel; ++kr)
          for (std::size_t kc = 0; kc < kKernel; ++kc) {
            const double w = p.weight(o, i, kr, kc);
            const std::size_t c_lo = detail::conv_lo(kc), c_hi = detail::conv_hi(kc, W);
            double wsum = 0.0;
            for (std::size_t r = detail::conv_lo(kr); r < detail::conv_hi(kr, H); ++r) {
              const double* gr = go.data() + r * W;
              const double* s = src.data() + (r + kr - 1) * W;
              double* gs = gi.data() + (r + kr - 1) * W;
              for (std::size_t c = c_lo; c < c_hi; ++c) {
                wsum += gr[c] * s[c + kc - 1];
                gs[c + kc - 1] += w * gr[c];
              }
            }
            g.kernels[((o * p.in_channels + i) * kKernel + kr) * kKernel + kc] += wsum;
          }
      }
    }
  return g;
}

}  // namespace celltraffic::nn

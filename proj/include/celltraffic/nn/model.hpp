#pragma once

// Densely connected convolutional regression network.
//
//   input (B, N, H, W)
//   L dense layers: y = ReLU(BN(Conv3x3(state))), state <- concat[state, y]
//   average pooling (5x5, stride 5) -> flatten
//   affine -> ReLU (H*W hidden units) -> affine (H*W outputs) -> (B, 1, H, W)
//
// Dense connectivity is channel concatenation, so layer l sees N + (l-1) g
// channels. Each layer applies Conv, then BN, then ReLU in that order (the
// reference DenseNet uses BN-ReLU-Conv). The regression output has no
// activation.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/nn/batchnorm.hpp"
#include "celltraffic/nn/conv.hpp"
#include "celltraffic/nn/ops.hpp"
#include "celltraffic/nn/tensor.hpp"

namespace celltraffic::nn {

struct ModelConfig {
  std::size_t num_layers = 4;
  std::size_t growth = 8;
  std::size_t input_channels = 1;
  std::size_t height = 20;
  std::size_t width = 20;
  PoolSpec pool{};
  std::size_t fc_hidden = 400;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;

  /// Desk-scale default: 4 layers, growth 8.
  static ModelConfig desk(std::size_t input_channels, std::size_t height, std::size_t width) {
    ModelConfig c;
    c.input_channels = input_channels;
    c.height = height;
    c.width = width;
    c.fc_hidden = height * width;
    return c;
  }

  /// 32 filters per layer and 58 dense layers, the layer count of the four
  /// dense blocks of DenseNet-121 (6 + 12 + 24 + 16) without transitions.
  static ModelConfig full_scale(std::size_t input_channels, std::size_t height = 100, std::size_t width = 100) {
    ModelConfig c = desk(input_channels, height, width);
    c.num_layers = 58;
    c.growth = 32;
    return c;
  }

  std::size_t channels_before(std::size_t layer) const noexcept { return input_channels + layer * growth; }
  std::size_t final_channels() const noexcept { return channels_before(num_layers); }
  std::size_t pooled_height() const { return pooled_extent(height, pool.size_h, pool.stride_h); }
  std::size_t pooled_width() const { return pooled_extent(width, pool.size_w, pool.stride_w); }
  std::size_t head_features() const { return final_channels() * pooled_height() * pooled_width(); }

  void validate() const {
    if (num_layers < 1) throw ConfigError("model needs at least one dense layer");
    if (growth < 1 || input_channels < 1) throw ConfigError("growth and input channels must be positive");
    if (height == 0 || width == 0) throw ConfigError("empty grid");
    if (fc_hidden < 1) throw ConfigError("fc_hidden must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0) || !(bn_epsilon > 0.0)) throw ConfigError("bad batchnorm constants");
    (void)pooled_height();
    (void)pooled_width();
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DenseLayer {
  ConvParams conv;
  BatchNormParams bn;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct Model {
  ModelConfig config;
  std::vector<DenseLayer> layers;
  LinearParams hidden;
  LinearParams output;
  std::uint64_t seed = 0;

  /// Learnable tensors in declaration order.
  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    for (auto& l : layers) {
      out.emplace_back(l.conv.kernels);
      out.emplace_back(l.conv.bias);
      out.emplace_back(l.bn.gamma);
      out.emplace_back(l.bn.beta);
    }
    out.emplace_back(hidden.weights);
    out.emplace_back(hidden.bias);
    out.emplace_back(output.weights);
    out.emplace_back(output.bias);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = hidden.weights.size() + hidden.bias.size() + output.weights.size() + output.bias.size();
    for (const auto& l : layers) n += l.conv.kernels.size() + l.conv.bias.size() + l.bn.gamma.size() + l.bn.beta.size();
    return n;
  }

  friend bool operator==(const Model&, const Model&) = default;
};

struct LayerGrads {
  std::vector<double> kernels;
  std::vector<double> bias;
  std::vector<double> gamma;
  std::vector<double> beta;
};

/// Gradients laid out like Model::parameters().
struct ModelGrads {
  std::vector<LayerGrads> layers;
  std::vector<double> hidden_weights;
  std::vector<double> hidden_bias;
  std::vector<double> output_weights;
  std::vector<double> output_bias;

  std::vector<std::span<const double>> tensors() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : layers) {
      out.emplace_back(l.kernels);
      out.emplace_back(l.bias);
      out.emplace_back(l.gamma);
      out.emplace_back(l.beta);
    }
    out.emplace_back(hidden_weights);
    out.emplace_back(hidden_bias);
    out.emplace_back(output_weights);
    out.emplace_back(output_bias);
    return out;
  }

  bool all_finite() const {
    for (auto t : tensors())
      for (double v : t)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Model with correctly sized, zero-filled tensors and fresh BN state.
inline Model allocate_model(const ModelConfig& config, std::uint64_t seed = 0) {
  config.validate();
  Model m;
  m.config = config;
  m.seed = seed;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    DenseLayer layer{ConvParams(config.growth, config.channels_before(l)), BatchNormParams(config.growth)};
    layer.bn.momentum = config.bn_momentum;
    layer.bn.epsilon = config.bn_epsilon;
    m.layers.push_back(std::move(layer));
  }
  m.hidden = LinearParams(config.head_features(), config.fc_hidden);
  m.output = LinearParams(config.fc_hidden, config.height * config.width);
  return m;
}

/// Zero-mean Gaussian weights with variance 1/fan_in; zero biases; BN starts
/// at gamma=1, beta=0, running statistics (0, 1).
inline Model init_model(const ModelConfig& config, std::uint64_t seed) {
  Model m = allocate_model(config, seed);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](std::vector<double>& w, std::size_t fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(fan_in)));
    for (double& v : w) v = dist(rng);
  };
  for (auto& layer : m.layers) fill(layer.conv.kernels, layer.conv.in_channels * kKernel * kKernel);
  fill(m.hidden.weights, m.hidden.in_features);
  fill(m.output.weights, m.output.in_features);
  return m;
}

/// Intermediate activations of one dense layer.
struct LayerCache {
  Tensor4 input;     // state entering the layer
  Tensor4 conv_out;  // BN input
  Tensor4 bn_out;    // ReLU input
};

/// Everything model_backward needs from a train-mode forward pass.
struct ForwardCache {
  bool valid = false;
  std::vector<LayerCache> layers;
  Shape4 final_state_shape;
  Tensor4 pooled;       // flattened pooling output
  Tensor4 hidden_pre;   // hidden affine output before ReLU
  Tensor4 hidden_post;  // after ReLU
};

/// One Conv-BN-ReLU step followed by concatenation onto the incoming state.
inline Tensor4 dense_layer_forward(const Tensor4& state, DenseLayer& layer, Mode mode, LayerCache* cache = nullptr) {
  if (state.channels() != layer.conv.in_channels)
    throw ShapeError("dense layer expects " + std::to_string(layer.conv.in_channels) + " channels, state has " +
                     std::to_string(state.channels()));
  auto conv_out = conv2d_forward(state, layer.conv);
  auto bn_out = batchnorm_forward(conv_out, layer.bn, mode);
  auto y = relu_forward(bn_out);
  auto next = concat_channels(state, y);
  if (cache) {
    cache->input = state;
    cache->conv_out = std::move(conv_out);
    cache->bn_out = std::move(bn_out);
  }
  return next;
}

namespace detail {

inline void check_input(const Tensor4& input, const ModelConfig& c) {
  const Shape4 expected{input.batch(), c.input_channels, c.height, c.width};
  if (input.shape() != expected || input.batch() == 0)
    throw ShapeError("model input " + to_string(input.shape()) + ", expected " + to_string(expected));
}

}  // namespace detail

/// Returns predictions of shape (B, 1, H, W). Train mode updates BN running
/// statistics and, when `cache` is given, records activations for backward.
inline Tensor4 model_forward(const Tensor4& input, Model& model, Mode mode, ForwardCache* cache = nullptr) {
  const auto& c = model.config;
  detail::check_input(input, c);
  if (cache) {
    *cache = ForwardCache{};
    cache->layers.resize(model.layers.size());
  }
  Tensor4 state = input;
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    state = dense_layer_forward(state, model.layers[l], mode, cache ? &cache->layers[l] : nullptr);
  auto pooled = flatten(avg_pool_forward(state, c.pool));
  auto hidden_pre = linear_forward(pooled, model.hidden);
  auto hidden_post = relu_forward(hidden_pre);
  auto out = linear_forward(hidden_post, model.output);
  if (cache) {
    cache->final_state_shape = state.shape();
    cache->pooled = std::move(pooled);
    cache->hidden_pre = std::move(hidden_pre);
    cache->hidden_post = std::move(hidden_post);
    cache->valid = mode == Mode::train;
  }
  return reshape(out, {input.batch(), 1, c.height, c.width});
}

/// Inference on a const model; running statistics are read, never written.
inline Tensor4 model_predict(const Tensor4& input, const Model& model) {
  // Infer mode performs no writes through the reference.
  return model_forward(input, const_cast<Model&>(model), Mode::infer);
}

/// Gradients of every learnable tensor given d(loss)/d(predictions).
inline ModelGrads model_backward(const Model& model, const ForwardCache& cache, const Tensor4& grad_pred) {
  if (!cache.valid || cache.layers.size() != model.layers.size())
    throw StateError("model_backward: no train-mode forward cache for this model");
  const auto& c = model.config;
  const std::size_t B = cache.pooled.batch();
  if (grad_pred.shape() != Shape4{B, 1, c.height, c.width})
    throw ShapeError("model_backward: grad_pred " + to_string(grad_pred.shape()));

  ModelGrads g;
  auto gout = linear_backward(cache.hidden_post, model.output, reshape(grad_pred, {B, c.height * c.width, 1, 1}));
  g.output_weights = std::move(gout.weights);
  g.output_bias = std::move(gout.bias);
  auto ghid = linear_backward(cache.pooled, model.hidden, relu_backward(cache.hidden_pre, gout.input));
  g.hidden_weights = std::move(ghid.weights);
  g.hidden_bias = std::move(ghid.bias);

  const Shape4& fs = cache.final_state_shape;
  const Shape4 pooled_shape{B, fs.channels, c.pooled_height(), c.pooled_width()};
  Tensor4 grad_state = avg_pool_backward(fs, c.pool, reshape(ghid.input, pooled_shape));

  g.layers.resize(model.layers.size());
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& layer = model.layers[l];
    const auto& lc = cache.layers[l];
    const std::size_t prefix = lc.input.channels();
    // The concatenation sends the prefix cotangent straight to the skip path
    // and the tail to this layer's output; both reach the incoming state.
    Tensor4 grad_prev = slice_channels(grad_state, 0, prefix);
    Tensor4 grad_y = slice_channels(grad_state, prefix, layer.conv.out_channels);
    auto gbn = batchnorm_backward(lc.conv_out, layer.bn, relu_backward(lc.bn_out, grad_y));
    auto gconv = conv2d_backward(lc.input, layer.conv, gbn.input);
    add_into(grad_prev, gconv.input);
    g.layers[l] = LayerGrads{std::move(gconv.kernels), std::move(gconv.bias), std::move(gbn.gamma), std::move(gbn.beta)};
    grad_state = std::move(grad_prev);
  }
  return g;
}

}  // namespace celltraffic::nn

#pragma once

// MSE loss, SGD with classical momentum, the step learning-rate schedule and
// the mini-batch training loop.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/nn/model.hpp"
#include "celltraffic/windowing.hpp"

namespace celltraffic {

struct TrainConfig {
  double initial_lr = 0.10;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  /// Multiplier applied every `decay_every` epochs (0.8 = a 20% cut).
  double lr_decay = 0.8;
  std::size_t decay_every = 10;
  std::uint64_t shuffle_seed = 7;

  /// Full-scale settings: mini-batches of 128.
  static TrainConfig full_scale() {
    TrainConfig c;
    c.batch_size = 128;
    return c;
  }

  void validate() const {
    if (!(initial_lr > 0.0)) throw ConfigError("initial learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
    if (batch_size < 2) throw ConfigError("batch size must be at least 2 for batch normalization");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (decay_every < 1) throw ConfigError("decay_every must be at least 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_rmse;
  double seconds = 0.0;
  std::size_t steps = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct MseResult {
  double loss = 0.0;
  nn::Tensor4 grad;
};

/// Mean of squared errors over every element and its gradient 2(p - t)/n.
inline MseResult mse_loss(const nn::Tensor4& pred, const nn::Tensor4& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: " + nn::to_string(pred.shape()) + " vs " + nn::to_string(target.shape()));
  if (pred.size() == 0) throw ShapeError("mse_loss: empty tensors");
  MseResult r{0.0, nn::Tensor4(pred.shape())};
  const double n = static_cast<double>(pred.size());
  auto p = pred.data();
  auto t = target.data();
  auto g = r.grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - t[i];
    r.loss += e * e;
    g[i] = 2.0 * e / n;
  }
  r.loss /= n;
  return r;
}

/// initial_lr * lr_decay^floor((epoch - 1) / decay_every), evaluated as a
/// division by the inverse factor so decimal schedules come out exact
/// (0.10, 0.08, 0.064, ...).
inline double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  if (epoch < 1 || epoch > config.epochs)
    throw RangeError("lr_at_epoch: epoch " + std::to_string(epoch) + " outside 1.." + std::to_string(config.epochs));
  const auto steps = static_cast<double>((epoch - 1) / config.decay_every);
  return config.initial_lr / std::pow(1.0 / config.lr_decay, steps);
}

/// v <- momentum * v - lr * g;  p <- p + v.
inline void sgdm_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity, double lr,
                      double momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw ShapeError("sgdm_step: parameter, gradient and velocity sizes differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grads[i];
    params[i] += velocity[i];
  }
}

/// Velocity buffers for every learnable tensor of one model.
class SgdmOptimizer {
 public:
  explicit SgdmOptimizer(nn::Model& model) {
    for (auto p : model.parameters()) velocity_.emplace_back(p.size(), 0.0);
  }

  void step(nn::Model& model, const nn::ModelGrads& grads, double lr, double momentum) {
    auto params = model.parameters();
    auto g = grads.tensors();
    if (params.size() != g.size() || params.size() != velocity_.size())
      throw ShapeError("SgdmOptimizer: gradient set does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) sgdm_step(params[i], g[i], velocity_[i], lr, momentum);
  }

 private:
  std::vector<std::vector<double>> velocity_;
};

/// Stacks the inputs of the selected samples into (B, N, H, W).
inline nn::Tensor4 gather_inputs(const SampleSet& samples, std::span<const std::size_t> indices) {
  nn::Tensor4 x(indices.size(), samples.channels(), samples.height(), samples.width());
  for (std::size_t b = 0; b < indices.size(); ++b) samples.copy_input(indices[b], x.item(b));
  return x;
}

inline nn::Tensor4 gather_targets(const SampleSet& samples, std::span<const std::size_t> indices) {
  nn::Tensor4 y(indices.size(), 1, samples.height(), samples.width());
  for (std::size_t b = 0; b < indices.size(); ++b) samples.copy_target(indices[b], y.item(b));
  return y;
}

struct TrainCallbacks {
  /// Optional per-epoch validation score (e.g. held-out RMSE).
  std::function<std::optional<double>(const nn::Model&)> validate;
  std::function<void(std::size_t epoch, const nn::Model&)> on_epoch_end;
};

/// Number of optimizer steps one epoch takes: full batches plus a trailing
/// partial batch when it still holds at least two samples.
inline std::size_t steps_per_epoch(std::size_t samples, std::size_t batch_size) {
  const std::size_t full = samples / batch_size;
  return full + (samples % batch_size >= 2 ? 1 : 0);
}

/// Trains `model` in place. Each epoch shuffles with a generator seeded from
/// (shuffle_seed, epoch), so runs are reproducible given the seeds.
inline TrainHistory train(nn::Model& model, const SampleSet& samples, const TrainConfig& config,
                          const TrainCallbacks& callbacks = {}) {
  config.validate();
  if (samples.empty()) throw InputError("train: empty sample set");
  if (config.batch_size > samples.size())
    throw InputError("train: batch size " + std::to_string(config.batch_size) + " exceeds " +
                     std::to_string(samples.size()) + " samples");
  if (samples.channels() != model.config.input_channels || samples.height() != model.config.height ||
      samples.width() != model.config.width)
    throw ConfigError("train: samples do not match the model's input geometry");

  SgdmOptimizer optimizer(model);
  TrainHistory history;
  std::vector<std::size_t> order(samples.size());
  nn::ForwardCache cache;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.shuffle_seed ^ (0x9E3779B97F4A7C15ULL * epoch));
    std::shuffle(order.begin(), order.end(), rng);

    const double lr = lr_at_epoch(config, epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      if (count < 2) break;
      std::span<const std::size_t> batch(order.data() + start, count);
      auto inputs = gather_inputs(samples, batch);
      auto targets = gather_targets(samples, batch);
      auto pred = nn::model_forward(inputs, model, nn::Mode::train, &cache);
      auto loss = mse_loss(pred, targets);
      if (!std::isfinite(loss.loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(steps + 1));
      auto grads = nn::model_backward(model, cache, loss.grad);
      if (!grads.all_finite()) throw NumericError("non-finite gradient at epoch " + std::to_string(epoch));
      optimizer.step(model, grads, lr, config.momentum);
      loss_sum += loss.loss;
      ++steps;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.steps = steps;
    record.train_loss = loss_sum / static_cast<double>(steps);
    if (callbacks.validate) record.val_rmse = callbacks.validate(model);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back(record);
    if (callbacks.on_epoch_end) callbacks.on_epoch_end(epoch, model);
  }
  return history;
}

/// `epoch,lr,train_loss,val_rmse,seconds`; an absent validation score is an
/// empty field. With `include_timing` false the seconds column is written as
/// 0 so the file is byte-stable across runs.
inline std::string history_csv(const TrainHistory& history, bool include_timing = true) {
  std::string out = "epoch,lr,train_loss,val_rmse,seconds\n";
  for (const auto& r : history.epochs) {
    out += std::to_string(r.epoch) + "," + io::format_double(r.lr) + "," + io::format_double(r.train_loss) + ",";
    if (r.val_rmse) out += io::format_double(*r.val_rmse);
    out += "," + (include_timing ? io::format_double(r.seconds) : std::string("0")) + "\n";
  }
  return out;
}

}  // namespace celltraffic

#pragma once

// Per-slot RMSE in original units, reference baselines, the
// normalize/train/evaluate pipeline, lag-spec grid search, hotspot track
// comparison and intensity map export.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "celltraffic/checkpoint.hpp"
#include "celltraffic/correlation.hpp"
#include "celltraffic/error.hpp"
#include "celltraffic/grid_core.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/nn/model.hpp"
#include "celltraffic/trainer.hpp"
#include "celltraffic/windowing.hpp"

namespace celltraffic {

/// sqrt of the mean squared per-cell error over the whole grid.
inline double rmse_slot(const TrafficFrame& pred, const TrafficFrame& truth) {
  if (pred.height() != truth.height() || pred.width() != truth.width() || pred.size() == 0)
    throw ShapeError("rmse_slot: frames differ in shape");
  auto p = pred.values();
  auto t = truth.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] - t[i]) * (p[i] - t[i]);
  return std::sqrt(sum / static_cast<double>(p.size()));
}

struct SlotRmse {
  std::size_t slot = 0;
  double rmse = 0.0;
};

struct EvalReport {
  std::vector<SlotRmse> per_slot;
  double average_rmse = 0.0;
  ServiceKind service = ServiceKind::total;
  std::string model_id;
};

/// Scores predicted frames against the truth frames at the same slots.
inline EvalReport score_frames(const std::vector<TrafficFrame>& predictions, const TrafficCube& truth, SlotRange range,
                               std::string model_id) {
  if (predictions.size() != range.size()) throw ShapeError("score_frames: prediction count differs from range size");
  if (range.end > truth.length()) throw RangeError("score_frames: range past the cube end");
  EvalReport report;
  report.service = truth.service();
  report.model_id = std::move(model_id);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::size_t t = range.begin + i;
    const double e = rmse_slot(predictions[i], truth.frame(t));
    report.per_slot.push_back({t, e});
    sum += e;
  }
  report.average_rmse = report.per_slot.empty() ? 0.0 : sum / static_cast<double>(report.per_slot.size());
  return report;
}

inline std::string report_csv(const EvalReport& report) {
  std::string out = "t,rmse\n";
  for (const auto& s : report.per_slot) out += std::to_string(s.slot) + "," + io::format_double(s.rmse) + "\n";
  return out;
}

/// Denormalized predictions for every slot of `range`. `predictor` maps a
/// (B, N, H, W) lag stack and the B target slots to (B, 1, H, W) normalized
/// frames.
template <typename Predictor>
std::vector<TrafficFrame> predict_range(Predictor&& predictor, std::shared_ptr<const TrafficCube> cube,
                                        const NormStats& stats, const LagSpec& spec, SlotRange range,
                                        std::size_t batch_size = 32) {
  if (!cube->normalized()) throw StateError("predict_range: cube must be normalized");
  auto samples = build_samples(cube, spec, range);
  std::vector<TrafficFrame> out;
  out.reserve(samples.size());
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    indices.resize(count);
    for (std::size_t i = 0; i < count; ++i) indices[i] = start + i;
    auto inputs = gather_inputs(samples, indices);
    std::span<const std::size_t> slots = samples.target_slots().subspan(start, count);
    nn::Tensor4 pred = predictor(inputs, slots);
    if (pred.shape() != nn::Shape4{count, 1, cube->height(), cube->width()})
      throw ShapeError("predictor returned " + nn::to_string(pred.shape()));
    for (std::size_t b = 0; b < count; ++b) {
      auto src = pred.item(b);
      TrafficFrame frame(cube->height(), cube->width(), std::vector<double>(src.begin(), src.end()),
                         static_cast<std::int64_t>(slots[b]));
      out.push_back(denormalize_frame(frame, stats));
    }
  }
  return out;
}

inline void check_model_matches(const nn::Model& model, const TrafficCube& cube, const LagSpec& spec) {
  const auto lags = lag_set(spec);
  if (model.config.input_channels != lags.size())
    throw ConfigError("model expects " + std::to_string(model.config.input_channels) + " input channels but lag spec " +
                      to_string(spec) + " yields " + std::to_string(lags.size()));
  if (model.config.height != cube.height() || model.config.width != cube.width())
    throw ConfigError("model grid " + std::to_string(model.config.height) + "x" + std::to_string(model.config.width) +
                      " does not match cube grid " + std::to_string(cube.height()) + "x" +
                      std::to_string(cube.width()));
}

inline auto model_predictor(const nn::Model& model) {
  return [&model](const nn::Tensor4& inputs, std::span<const std::size_t>) { return nn::model_predict(inputs, model); };
}

/// Scores any predictor on `range` of a normalized cube; truth and
/// predictions are both mapped back to original units first.
template <typename Predictor>
EvalReport evaluate_predictor(Predictor&& predictor, std::shared_ptr<const TrafficCube> cube, const NormStats& stats,
                              const LagSpec& spec, SlotRange range, std::string model_id) {
  auto predictions = predict_range(std::forward<Predictor>(predictor), cube, stats, spec, range);
  return score_frames(predictions, denormalize(*cube, stats), range, std::move(model_id));
}

inline EvalReport evaluate_model(const nn::Model& model, std::shared_ptr<const TrafficCube> cube,
                                 const NormStats& stats, const LagSpec& spec, SlotRange range,
                                 std::string model_id = "model") {
  check_model_matches(model, *cube, spec);
  return evaluate_predictor(model_predictor(model), std::move(cube), stats, spec, range, std::move(model_id));
}

inline void check_raw_range(const TrafficCube& cube, SlotRange range, std::size_t offset, const char* who) {
  if (cube.normalized()) throw StateError(std::string(who) + ": cube must be in original units");
  if (range.size() == 0 || range.end > cube.length()) throw RangeError(std::string(who) + ": bad test range");
  if (range.begin < offset)
    throw RangeError(std::string(who) + ": first test slot " + std::to_string(range.begin) + " has no frame " +
                     std::to_string(offset) + " slots earlier");
}

/// Predicts slot t with an earlier frame t - offset.
inline EvalReport baseline_shifted(const TrafficCube& cube, std::size_t offset, SlotRange range, std::string id) {
  std::vector<TrafficFrame> predictions;
  predictions.reserve(range.size());
  for (std::size_t t = range.begin; t < range.end; ++t) predictions.push_back(cube.frame(t - offset));
  return score_frames(predictions, cube, range, std::move(id));
}

/// Previous-hour predictor.
inline EvalReport baseline_persistence(const TrafficCube& cube, SlotRange range) {
  check_raw_range(cube, range, 1, "baseline_persistence");
  return baseline_shifted(cube, 1, range, "persistence");
}

/// Seasonal-naive predictor: slot t gets frame t - period.
inline EvalReport baseline_seasonal(const TrafficCube& cube, std::size_t period, SlotRange range) {
  if (period < 1) throw RangeError("baseline_seasonal: period must be positive");
  check_raw_range(cube, range, period, "baseline_seasonal");
  return baseline_shifted(cube, period, range, "seasonal:" + std::to_string(period));
}

/// Model and training settings shared by every run of the pipeline.
struct PipelineSetup {
  std::size_t num_layers = 4;
  std::size_t growth = 8;
  nn::PoolSpec pool{};
  /// 0 means H * W.
  std::size_t fc_hidden = 0;
  TrainConfig train{};
  std::size_t total_weeks = 7;
  std::size_t train_weeks = 6;
  std::uint64_t model_seed = 42;
};

/// Normalized cube, stats from the training weeks only, and the sample sets.
struct PreparedData {
  std::shared_ptr<const TrafficCube> normalized;
  NormStats stats;
  WeekSplit split;
  SampleSet train_samples;
};

inline PreparedData prepare_data(const TrafficCube& raw, const LagSpec& spec, std::size_t total_weeks,
                                 std::size_t train_weeks) {
  if (raw.normalized()) throw StateError("prepare_data: cube must be in original units");
  const auto split = split_weeks(raw, total_weeks, train_weeks);
  const auto lags = lag_set(spec);
  if (lags.back() >= split.train.end)
    throw HistoryUnderflowError("lag spec " + to_string(spec) + " needs " + std::to_string(lags.back()) +
                                " hours of history, the training weeks hold " + std::to_string(split.train.end));
  const auto stats = compute_norm_stats(raw, split.train);
  auto cube = std::make_shared<const TrafficCube>(normalize_with(raw, stats));
  auto train_samples = build_samples(cube, spec, {lags.back(), split.train.end});
  return {cube, stats, split, std::move(train_samples)};
}

inline nn::ModelConfig model_config_for(const PipelineSetup& setup, const LagSpec& spec, const TrafficCube& cube) {
  nn::ModelConfig c = nn::ModelConfig::desk(lag_set(spec).size(), cube.height(), cube.width());
  c.num_layers = setup.num_layers;
  c.growth = setup.growth;
  c.pool = setup.pool;
  if (setup.fc_hidden != 0) c.fc_hidden = setup.fc_hidden;
  return c;
}

struct PipelineRun {
  Checkpoint checkpoint;
  TrainHistory history;
  EvalReport report;
  double train_seconds = 0.0;
};

/// Normalize on the training weeks, train a freshly seeded model and score it
/// on the held-out weeks.
inline PipelineRun run_pipeline(const TrafficCube& raw, const LagSpec& spec, const PipelineSetup& setup,
                                const TrainCallbacks& callbacks = {}) {
  auto data = prepare_data(raw, spec, setup.total_weeks, setup.train_weeks);
  PipelineRun run;
  run.checkpoint.model = nn::init_model(model_config_for(setup, spec, raw), setup.model_seed);
  run.checkpoint.meta = PipelineMeta{spec, data.stats, setup.total_weeks, setup.train_weeks, raw.service()};
  const auto started = std::chrono::steady_clock::now();
  run.history = train(run.checkpoint.model, data.train_samples, setup.train, callbacks);
  run.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  run.report = evaluate_model(run.checkpoint.model, data.normalized, data.stats, spec, data.split.test,
                              "dense" + to_string(spec));
  return run;
}

struct GridEntry {
  LagSpec spec;
  bool ok = false;
  double average_rmse = 0.0;
  double train_seconds = 0.0;
  std::string error;
};

struct GridSearchResult {
  std::vector<GridEntry> entries;
  std::optional<std::size_t> best;

  const GridEntry* best_entry() const { return best ? &entries[*best] : nullptr; }
};

/// Lowest average RMSE wins; ties go to the smaller input channel count, then
/// to the smaller (h, d, w).
inline std::optional<std::size_t> pick_best(const std::vector<GridEntry>& entries) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.ok) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = entries[*best];
    const auto key = std::tuple(e.average_rmse, e.spec.channel_count(), e.spec);
    const auto bkey = std::tuple(b.average_rmse, b.spec.channel_count(), b.spec);
    if (key < bkey) best = i;
  }
  return best;
}

/// Runs the pipeline once per spec with the same model and shuffle seeds. A
/// failing spec is recorded and the search moves on.
inline GridSearchResult grid_search(const TrafficCube& raw, const std::vector<LagSpec>& specs,
                                    const PipelineSetup& setup) {
  GridSearchResult result;
  for (const auto& spec : specs) {
    GridEntry entry;
    entry.spec = spec;
    try {
      auto run = run_pipeline(raw, spec, setup);
      entry.ok = true;
      entry.average_rmse = run.report.average_rmse;
      entry.train_seconds = run.train_seconds;
    } catch (const NumericError&) {
      throw;
    } catch (const Error& e) {
      entry.error = e.what();
    }
    result.entries.push_back(std::move(entry));
  }
  result.best = pick_best(result.entries);
  return result;
}

/// `h,d,w,avg_rmse,train_s,status,best`, rows sorted by (h, d, w). Failed
/// rows leave the numeric fields empty. With `include_timing` false train_s is
/// written as 0.
inline std::string grid_csv(const GridSearchResult& result, bool include_timing = true) {
  std::vector<std::size_t> order(result.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return result.entries[a].spec < result.entries[b].spec; });
  std::string out = "h,d,w,avg_rmse,train_s,status,best\n";
  for (auto i : order) {
    const auto& e = result.entries[i];
    out += std::to_string(e.spec.h) + "," + std::to_string(e.spec.d) + "," + std::to_string(e.spec.w) + ",";
    if (e.ok)
      out += io::format_double(e.average_rmse) + "," + (include_timing ? io::format_double(e.train_seconds) : "0") +
             ",ok,";
    else
      out += ",,failed,";
    out += (result.best && *result.best == i) ? "1\n" : "0\n";
  }
  return out;
}

struct HotspotMatch {
  std::size_t slot = 0;
  Cell predicted;
  Cell actual;
  /// Chebyshev (king-move) distance between the two cells.
  std::size_t distance = 0;
  /// |predicted hotspot value - true hotspot value|.
  double value_error = 0.0;
};

struct HotspotComparison {
  std::vector<HotspotMatch> matches;
  /// Fraction of slots whose predicted hotspot is exactly the true one.
  double hit_rate = 0.0;
};

inline std::size_t chebyshev(Cell a, Cell b) {
  const auto dr = a.row > b.row ? a.row - b.row : b.row - a.row;
  const auto dc = a.col > b.col ? a.col - b.col : b.col - a.col;
  return std::max(dr, dc);
}

/// `predictions[i]` is the forecast for slot range.begin + i.
inline HotspotComparison compare_hotspot_tracks(const std::vector<TrafficFrame>& predictions, const TrafficCube& truth,
                                                SlotRange range) {
  if (predictions.size() != range.size() || range.end > truth.length() || range.size() == 0)
    throw ShapeError("compare_hotspot_tracks: predictions do not cover the range");
  HotspotComparison cmp;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& pred = predictions[i];
    const auto& real = truth.frame(range.begin + i);
    if (pred.height() != real.height() || pred.width() != real.width())
      throw ShapeError("compare_hotspot_tracks: frame geometry differs");
    HotspotMatch m;
    m.slot = range.begin + i;
    m.predicted = hotspot(pred);
    m.actual = hotspot(real);
    m.distance = chebyshev(m.predicted, m.actual);
    m.value_error = std::abs(pred.at(m.predicted) - real.at(m.actual));
    if (m.distance == 0) ++hits;
    cmp.matches.push_back(m);
  }
  cmp.hit_rate = static_cast<double>(hits) / static_cast<double>(predictions.size());
  return cmp;
}

inline HotspotComparison compare_hotspot_tracks(const TrafficCube& predicted, const TrafficCube& truth,
                                                SlotRange range) {
  if (predicted.height() != truth.height() || predicted.width() != truth.width() || range.end > predicted.length())
    throw ShapeError("compare_hotspot_tracks: cube geometry differs");
  std::vector<TrafficFrame> frames(predicted.frames().begin() + static_cast<std::ptrdiff_t>(range.begin),
                                   predicted.frames().begin() + static_cast<std::ptrdiff_t>(range.end));
  return compare_hotspot_tracks(frames, truth, range);
}

inline std::string hotspot_csv(const HotspotComparison& cmp) {
  std::string out = "t,pred_row,pred_col,true_row,true_col,distance,value_error\n";
  for (const auto& m : cmp.matches)
    out += std::to_string(m.slot) + "," + std::to_string(m.predicted.row) + "," + std::to_string(m.predicted.col) +
           "," + std::to_string(m.actual.row) + "," + std::to_string(m.actual.col) + "," +
           std::to_string(m.distance) + "," + io::format_double(m.value_error) + "\n";
  return out;
}

enum class MapFormat { csv, pgm };

/// 8-bit gray levels, min-max scaled per frame; a constant frame is all 128.
inline std::vector<unsigned char> intensity_levels(const TrafficFrame& frame) {
  auto values = frame.values();
  for (double v : values)
    if (!std::isfinite(v)) throw InputError("intensity map: frame holds non-finite values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::vector<unsigned char> levels(values.size(), 128);
  if (*hi > *lo)
    for (std::size_t i = 0; i < values.size(); ++i)
      levels[i] = static_cast<unsigned char>(std::lround(255.0 * (values[i] - *lo) / (*hi - *lo)));
  return levels;
}

inline std::string intensity_map_bytes(const TrafficFrame& frame, MapFormat format) {
  if (format == MapFormat::pgm) {
    auto levels = intensity_levels(frame);
    std::string out = "P5\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
    out.append(levels.begin(), levels.end());
    return out;
  }
  std::string out;
  for (std::size_t r = 0; r < frame.height(); ++r) {
    for (std::size_t c = 0; c < frame.width(); ++c) {
      if (c) out += ",";
      out += io::format_double(frame.at(r, c));
    }
    out += "\n";
  }
  return out;
}

inline void export_intensity_map(const TrafficFrame& frame, const std::string& path, MapFormat format) {
  io::write_text_file(path, intensity_map_bytes(frame, format));
}

}  // namespace celltraffic

#pragma once

// Gridded traffic values: frames, cubes, hourly aggregation and the reversible
// min-max + z-score normalization.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "celltraffic/error.hpp"

namespace celltraffic {

enum class ServiceKind : std::uint8_t {
  sms_in = 0,
  sms_out = 1,
  call_in = 2,
  call_out = 3,
  internet = 4,
  sms_combined = 5,
  call_combined = 6,
  total = 7,
};

inline constexpr std::string_view to_string(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::sms_in: return "sms_in";
    case ServiceKind::sms_out: return "sms_out";
    case ServiceKind::call_in: return "call_in";
    case ServiceKind::call_out: return "call_out";
    case ServiceKind::internet: return "internet";
    case ServiceKind::sms_combined: return "sms_combined";
    case ServiceKind::call_combined: return "call_combined";
    case ServiceKind::total: return "total";
  }
  return "unknown";
}

inline std::optional<ServiceKind> service_from_string(std::string_view name) {
  for (std::uint8_t tag = 0; tag <= static_cast<std::uint8_t>(ServiceKind::total); ++tag) {
    auto kind = static_cast<ServiceKind>(tag);
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

inline constexpr bool is_combined(ServiceKind kind) {
  return kind == ServiceKind::sms_combined || kind == ServiceKind::call_combined || kind == ServiceKind::total;
}

/// Grid coordinate, 0-based.
struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Half-open range of slot indices [begin, end).
struct SlotRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  friend bool operator==(const SlotRange&, const SlotRange&) = default;
};

class TrafficFrame {
 public:
  TrafficFrame() = default;
  TrafficFrame(std::size_t height, std::size_t width, std::int64_t slot = 0)
      : height_(height), width_(width), slot_(slot), values_(height * width, 0.0) {}
  TrafficFrame(std::size_t height, std::size_t width, std::vector<double> values, std::int64_t slot = 0)
      : height_(height), width_(width), slot_(slot), values_(std::move(values)) {
    if (values_.size() != height_ * width_)
      throw ShapeError("frame holds " + std::to_string(values_.size()) + " values, expected " +
                       std::to_string(height_ * width_));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::int64_t slot() const noexcept { return slot_; }
  void set_slot(std::int64_t slot) noexcept { slot_ = slot; }

  double& at(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  double at(Cell cell) const { return at(cell.row, cell.col); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const TrafficFrame&, const TrafficFrame&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::int64_t slot_ = 0;
  std::vector<double> values_;
};

/// Time-ordered stack of frames; frame i covers start_time + i * slot_duration.
class TrafficCube {
 public:
  TrafficCube() = default;

  static TrafficCube zeros(std::size_t height, std::size_t width, std::size_t length, std::int64_t start_time,
                           std::int64_t slot_duration, ServiceKind service) {
    if (length == 0) throw ShapeError("cube needs at least one frame");
    if (height == 0 || width == 0) throw ShapeError("cube needs a non-empty grid");
    TrafficCube cube;
    cube.height_ = height;
    cube.width_ = width;
    cube.start_time_ = start_time;
    cube.slot_duration_ = slot_duration;
    cube.service_ = service;
    cube.frames_.reserve(length);
    for (std::size_t t = 0; t < length; ++t) cube.frames_.emplace_back(height, width, static_cast<std::int64_t>(t));
    return cube;
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t length() const noexcept { return frames_.size(); }
  std::size_t cells() const noexcept { return height_ * width_; }
  std::int64_t start_time() const noexcept { return start_time_; }
  std::int64_t slot_duration() const noexcept { return slot_duration_; }
  ServiceKind service() const noexcept { return service_; }
  bool normalized() const noexcept { return normalized_; }

  void set_service(ServiceKind kind) noexcept { service_ = kind; }
  void set_normalized(bool flag) noexcept { normalized_ = flag; }
  void set_slot_duration(std::int64_t seconds) noexcept { slot_duration_ = seconds; }

  TrafficFrame& frame(std::size_t t) { return frames_.at(t); }
  const TrafficFrame& frame(std::size_t t) const { return frames_.at(t); }
  const std::vector<TrafficFrame>& frames() const noexcept { return frames_; }

  double& at(std::size_t t, std::size_t row, std::size_t col) { return frames_[t].at(row, col); }
  double at(std::size_t t, std::size_t row, std::size_t col) const { return frames_[t].at(row, col); }

  /// Series of one cell over all slots.
  std::vector<double> series(Cell cell) const {
    std::vector<double> out;
    out.reserve(frames_.size());
    for (const auto& f : frames_) out.push_back(f.at(cell));
    return out;
  }

  bool same_geometry(const TrafficCube& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && length() == other.length() &&
           start_time_ == other.start_time_ && slot_duration_ == other.slot_duration_;
  }

  friend bool operator==(const TrafficCube&, const TrafficCube&) = default;

 private:
  std::vector<TrafficFrame> frames_;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::int64_t start_time_ = 0;
  std::int64_t slot_duration_ = 3600;
  ServiceKind service_ = ServiceKind::total;
  bool normalized_ = false;
};

/// Constants of the two-stage normalization: min-max to [0,1], then z-score.
/// mean and std describe the min-max scaled values.
struct NormStats {
  double min_val = 0.0;
  double max_val = 1.0;
  double mean = 0.0;
  double std = 1.0;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

namespace detail {

inline ServiceKind combined_tag(ServiceKind a, ServiceKind b) {
  auto pair_of = [&](ServiceKind x, ServiceKind y) { return (a == x && b == y) || (a == y && b == x); };
  if (pair_of(ServiceKind::sms_in, ServiceKind::sms_out)) return ServiceKind::sms_combined;
  if (pair_of(ServiceKind::call_in, ServiceKind::call_out)) return ServiceKind::call_combined;
  return ServiceKind::total;
}

}  // namespace detail

/// Element-wise sum of two raw cubes. sms_in+sms_out gives sms_combined,
/// call_in+call_out gives call_combined, anything else gives total.
inline TrafficCube combine_services(const TrafficCube& a, const TrafficCube& b) {
  if (!a.same_geometry(b)) throw ShapeError("combine_services: cubes differ in grid, length or time axis");
  if (a.normalized() || b.normalized()) throw StateError("combine_services: inputs must be un-normalized");
  TrafficCube out = a;
  for (std::size_t t = 0; t < a.length(); ++t) {
    auto dst = out.frame(t).values();
    auto src = b.frame(t).values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  out.set_service(detail::combined_tag(a.service(), b.service()));
  return out;
}

/// Sums sub-hourly slots into hourly frames. Ragged trailing hours are rejected.
inline TrafficCube aggregate_hourly(const TrafficCube& cube) {
  const auto slot = cube.slot_duration();
  if (slot <= 0 || 3600 % slot != 0)
    throw AggregationError("slot duration " + std::to_string(slot) + "s does not divide one hour");
  const auto per_hour = static_cast<std::size_t>(3600 / slot);
  if (cube.length() % per_hour != 0)
    throw AggregationError("cube of " + std::to_string(cube.length()) + " slots leaves a partial hour (" +
                           std::to_string(per_hour) + " slots per hour)");
  const std::size_t hours = cube.length() / per_hour;
  auto out = TrafficCube::zeros(cube.height(), cube.width(), hours, cube.start_time(), 3600, cube.service());
  out.set_normalized(cube.normalized());
  for (std::size_t h = 0; h < hours; ++h) {
    auto dst = out.frame(h).values();
    for (std::size_t k = 0; k < per_hour; ++k) {
      auto src = cube.frame(h * per_hour + k).values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  return out;
}

/// Normalization constants over the frames in `range` of a raw cube.
inline NormStats compute_norm_stats(const TrafficCube& cube, SlotRange range) {
  if (cube.normalized()) throw StateError("compute_norm_stats: cube is already normalized");
  if (range.size() == 0 || range.end > cube.length()) throw RangeError("compute_norm_stats: empty or out-of-range slots");
  NormStats s;
  s.min_val = cube.frame(range.begin).values()[0];
  s.max_val = s.min_val;
  for (std::size_t t = range.begin; t < range.end; ++t)
    for (double v : cube.frame(t).values()) {
      s.min_val = std::min(s.min_val, v);
      s.max_val = std::max(s.max_val, v);
    }
  if (!(s.max_val > s.min_val)) throw DegenerateScaleError("constant cube: max equals min");
  const double span = s.max_val - s.min_val;
  const double n = static_cast<double>(range.size() * cube.cells());
  double sum = 0.0;
  for (std::size_t t = range.begin; t < range.end; ++t)
    for (double v : cube.frame(t).values()) sum += (v - s.min_val) / span;
  s.mean = sum / n;
  double sq = 0.0;
  for (std::size_t t = range.begin; t < range.end; ++t)
    for (double v : cube.frame(t).values()) {
      const double d = (v - s.min_val) / span - s.mean;
      sq += d * d;
    }
  s.std = std::sqrt(sq / n);
  if (!(s.std > 0.0)) throw DegenerateScaleError("zero standard deviation after min-max scaling");
  return s;
}

inline double normalize_value(double x, const NormStats& s) {
  return ((x - s.min_val) / (s.max_val - s.min_val) - s.mean) / s.std;
}

inline double denormalize_value(double z, const NormStats& s) {
  return (z * s.std + s.mean) * (s.max_val - s.min_val) + s.min_val;
}

inline TrafficFrame denormalize_frame(const TrafficFrame& frame, const NormStats& stats) {
  TrafficFrame out = frame;
  for (double& v : out.values()) v = denormalize_value(v, stats);
  return out;
}

/// Applies caller-supplied stats, e.g. ones computed on a training range only.
inline TrafficCube normalize_with(const TrafficCube& cube, const NormStats& stats) {
  if (cube.normalized()) throw StateError("normalize: cube is already normalized");
  TrafficCube out = cube;
  for (std::size_t t = 0; t < out.length(); ++t)
    for (double& v : out.frame(t).values()) v = normalize_value(v, stats);
  out.set_normalized(true);
  return out;
}

/// Normalizes with statistics taken over the whole cube.
inline std::pair<TrafficCube, NormStats> normalize(const TrafficCube& cube) {
  auto stats = compute_norm_stats(cube, {0, cube.length()});
  return {normalize_with(cube, stats), stats};
}

inline TrafficCube denormalize(const TrafficCube& cube, const NormStats& stats) {
  if (!cube.normalized()) throw StateError("denormalize: cube is not normalized");
  TrafficCube out = cube;
  for (std::size_t t = 0; t < out.length(); ++t)
    for (double& v : out.frame(t).values()) v = denormalize_value(v, stats);
  out.set_normalized(false);
  return out;
}

}  // namespace celltraffic

#pragma once

// Multi-scale lag sets (recent hours, same hour on previous days, same hour in
// previous weeks) and the supervised samples built from them.

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/grid_core.hpp"

namespace celltraffic {

inline constexpr std::size_t kHoursPerDay = 24;
inline constexpr std::size_t kHoursPerWeek = 168;

/// h recent hours, d daily repeats, w weekly repeats.
struct LagSpec {
  std::size_t h = 1;
  std::size_t d = 0;
  std::size_t w = 0;

  /// Expected lag count h * (d + 1) * (w + 1).
  std::size_t channel_count() const noexcept { return h * (d + 1) * (w + 1); }
  friend auto operator<=>(const LagSpec&, const LagSpec&) = default;
};

inline std::string to_string(const LagSpec& s) {
  return "(h=" + std::to_string(s.h) + ", d=" + std::to_string(s.d) + ", w=" + std::to_string(s.w) + ")";
}

/// Ascending lags of the three families
///   recent  i                  for i = 1..h
///   daily   24 j + i           for j = 1..d, i = 0..h-1
///   weekly  168 k - 24 j + i   for k = 1..w, j = 0..d, i = 0..h-1
/// The weekly family reproduces the worked (h=2, d=2, w=1) example
/// {1,2,24,25,48,49,120,121,144,145,168,169}. A lag <= 0 or a lag produced by
/// two members is rejected, never silently dropped.
inline std::vector<std::size_t> lag_set(const LagSpec& spec) {
  if (spec.h < 1) throw DegenerateSpecError("lag spec needs h >= 1");
  const auto h = static_cast<long long>(spec.h);
  const auto d = static_cast<long long>(spec.d);
  const auto w = static_cast<long long>(spec.w);

  std::map<long long, std::string> origin;  // lag -> member that produced it
  auto add = [&](long long lag, std::string member) {
    if (lag <= 0)
      throw DegenerateSpecError("lag spec " + to_string(spec) + " yields non-positive lag " + std::to_string(lag) +
                                " at " + member);
    auto [it, inserted] = origin.emplace(lag, member);
    if (!inserted)
      throw DegenerateSpecError("lag spec " + to_string(spec) + " yields lag " + std::to_string(lag) + " twice: " +
                                it->second + " and " + member);
  };

  for (long long i = 1; i <= h; ++i) add(i, "recent(i=" + std::to_string(i) + ")");
  for (long long j = 1; j <= d; ++j)
    for (long long i = 0; i < h; ++i)
      add(24 * j + i, "daily(j=" + std::to_string(j) + ", i=" + std::to_string(i) + ")");
  for (long long k = 1; k <= w; ++k)
    for (long long j = 0; j <= d; ++j)
      for (long long i = 0; i < h; ++i)
        add(168 * k - 24 * j + i,
            "weekly(k=" + std::to_string(k) + ", j=" + std::to_string(j) + ", i=" + std::to_string(i) + ")");

  std::vector<std::size_t> lags;
  lags.reserve(origin.size());
  for (const auto& [lag, member] : origin) lags.push_back(static_cast<std::size_t>(lag));
  return lags;
}

/// Lazily materialized (lag stack, target frame) pairs over a shared cube.
/// Channel c of sample i is the frame at target_slots[i] - lags[c].
class SampleSet {
 public:
  SampleSet(std::shared_ptr<const TrafficCube> cube, LagSpec spec, std::vector<std::size_t> lags,
            std::vector<std::size_t> target_slots)
      : cube_(std::move(cube)), spec_(spec), lags_(std::move(lags)), target_slots_(std::move(target_slots)) {}

  std::size_t size() const noexcept { return target_slots_.size(); }
  bool empty() const noexcept { return target_slots_.empty(); }
  std::size_t channels() const noexcept { return lags_.size(); }
  std::size_t height() const noexcept { return cube_->height(); }
  std::size_t width() const noexcept { return cube_->width(); }
  const LagSpec& lag_spec() const noexcept { return spec_; }
  std::span<const std::size_t> lags() const noexcept { return lags_; }
  std::span<const std::size_t> target_slots() const noexcept { return target_slots_; }
  const TrafficCube& cube() const noexcept { return *cube_; }

  const TrafficFrame& input_frame(std::size_t sample, std::size_t channel) const {
    return cube_->frame(target_slots_.at(sample) - lags_.at(channel));
  }
  const TrafficFrame& target(std::size_t sample) const { return cube_->frame(target_slots_.at(sample)); }

  /// Copies the channels x H x W input stack of one sample into `out`.
  void copy_input(std::size_t sample, std::span<double> out) const {
    const std::size_t plane = height() * width();
    if (out.size() != channels() * plane) throw ShapeError("copy_input: destination has the wrong size");
    for (std::size_t c = 0; c < channels(); ++c) {
      auto src = input_frame(sample, c).values();
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(c * plane));
    }
  }

  void copy_target(std::size_t sample, std::span<double> out) const {
    auto src = target(sample).values();
    if (out.size() != src.size()) throw ShapeError("copy_target: destination has the wrong size");
    std::copy(src.begin(), src.end(), out.begin());
  }

 private:
  std::shared_ptr<const TrafficCube> cube_;
  LagSpec spec_;
  std::vector<std::size_t> lags_;
  std::vector<std::size_t> target_slots_;
};

/// One sample per target slot in `range`.
inline SampleSet build_samples(std::shared_ptr<const TrafficCube> cube, const LagSpec& spec, SlotRange range) {
  if (!cube) throw InputError("build_samples: null cube");
  if (cube->slot_duration() != 3600) throw ConfigError("build_samples: lags are in hours, cube must be hourly");
  auto lags = lag_set(spec);
  const std::size_t max_lag = lags.back();
  if (range.size() == 0) throw InputError("build_samples: empty slot range");
  if (range.end > cube->length())
    throw RangeError("build_samples: slot range ends at " + std::to_string(range.end) + " past cube length " +
                     std::to_string(cube->length()));
  if (range.begin < max_lag)
    throw HistoryUnderflowError("build_samples: slot " + std::to_string(range.begin) + " has less history than the " +
                                "largest lag " + std::to_string(max_lag));
  std::vector<std::size_t> targets;
  targets.reserve(range.size());
  for (std::size_t t = range.begin; t < range.end; ++t) targets.push_back(t);
  return SampleSet(std::move(cube), spec, std::move(lags), std::move(targets));
}

inline SampleSet build_samples(const TrafficCube& cube, const LagSpec& spec, SlotRange range) {
  return build_samples(std::make_shared<const TrafficCube>(cube), spec, range);
}

struct WeekSplit {
  SlotRange train;
  SlotRange test;
};

/// Splits the first total_weeks weeks of an hourly cube at a week boundary;
/// the final (total_weeks - train_weeks) weeks are held out.
inline WeekSplit split_weeks(const TrafficCube& cube, std::size_t total_weeks, std::size_t train_weeks) {
  if (cube.slot_duration() != 3600) throw ConfigError("split_weeks: cube must be hourly");
  if (train_weeks < 1 || train_weeks >= total_weeks)
    throw RangeError("split_weeks: need 1 <= train_weeks < total_weeks");
  if (cube.length() < total_weeks * kHoursPerWeek)
    throw RangeError("split_weeks: cube has " + std::to_string(cube.length()) + " slots, " +
                     std::to_string(total_weeks) + " weeks need " + std::to_string(total_weeks * kHoursPerWeek));
  return {{0, train_weeks * kHoursPerWeek}, {train_weeks * kHoursPerWeek, total_weeks * kHoursPerWeek}};
}

}  // namespace celltraffic

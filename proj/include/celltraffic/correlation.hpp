#pragma once

// Temporal and spatial correlation diagnostics: average traffic volume ratio,
// Pearson maps around a cell, and per-frame hotspots.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/grid_core.hpp"
#include "celltraffic/io.hpp"

namespace celltraffic {

struct AtvrProfile {
  std::vector<std::size_t> taus;
  std::vector<double> values;
};

/// Average over all cells and slots t >= tau of x_t / x_{t-tau}. Terms whose
/// denominator is zero are left out of both the sum and the count.
inline double atvr(const TrafficCube& cube, std::size_t tau) {
  if (tau < 1 || tau >= cube.length())
    throw RangeError("atvr: tau=" + std::to_string(tau) + " must lie in [1, " + std::to_string(cube.length()) + ")");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = tau; t < cube.length(); ++t) {
    auto now = cube.frame(t).values();
    auto past = cube.frame(t - tau).values();
    for (std::size_t i = 0; i < now.size(); ++i) {
      if (past[i] == 0.0) continue;
      sum += now[i] / past[i];
      ++count;
    }
  }
  if (count == 0) throw UndefinedError("atvr: every denominator is zero at tau=" + std::to_string(tau));
  return sum / static_cast<double>(count);
}

inline AtvrProfile atvr_profile(const TrafficCube& cube, std::size_t tau_max) {
  if (tau_max < 1 || tau_max >= cube.length())
    throw RangeError("atvr_profile: tau_max=" + std::to_string(tau_max) + " must be below the cube length " +
                     std::to_string(cube.length()));
  AtvrProfile profile;
  for (std::size_t tau = 1; tau <= tau_max; ++tau) {
    profile.taus.push_back(tau);
    profile.values.push_back(atvr(cube, tau));
  }
  return profile;
}

/// Sample Pearson coefficient of two equal-length series.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: series lengths differ");
  if (x.size() < 2) throw UndefinedError("pearson: need at least two samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedError("pearson: constant series has zero standard deviation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline void check_cell(const TrafficCube& cube, Cell cell) {
  if (cell.row >= cube.height() || cell.col >= cube.width())
    throw RangeError("cell (" + std::to_string(cell.row) + "," + std::to_string(cell.col) + ") outside " +
                     std::to_string(cube.height()) + "x" + std::to_string(cube.width()) + " grid");
}

inline double pearson(const TrafficCube& cube, Cell a, Cell b) {
  check_cell(cube, a);
  check_cell(cube, b);
  const auto xa = cube.series(a);
  const auto xb = cube.series(b);
  return pearson(std::span<const double>(xa), std::span<const double>(xb));
}

/// Pearson coefficients of every cell in a (2r+1)^2 window against its center.
/// Entries whose series is constant have no value.
struct CorrelationMap {
  Cell center;
  std::size_t radius = 0;
  std::vector<std::optional<double>> values;

  std::size_t side() const noexcept { return 2 * radius + 1; }
  const std::optional<double>& at(std::size_t row, std::size_t col) const { return values.at(row * side() + col); }
};

inline CorrelationMap correlation_map(const TrafficCube& cube, Cell center, std::size_t radius) {
  check_cell(cube, center);
  if (center.row < radius || center.col < radius || center.row + radius >= cube.height() ||
      center.col + radius >= cube.width())
    throw RangeError("correlation_map: window of radius " + std::to_string(radius) + " leaves the grid");
  CorrelationMap map{center, radius, {}};
  const auto reference = cube.series(center);
  map.values.reserve(map.side() * map.side());
  for (std::size_t r = center.row - radius; r <= center.row + radius; ++r)
    for (std::size_t c = center.col - radius; c <= center.col + radius; ++c) {
      const auto other = cube.series({r, c});
      try {
        map.values.emplace_back(pearson(std::span<const double>(reference), std::span<const double>(other)));
      } catch (const UndefinedError&) {
        map.values.emplace_back(std::nullopt);
      }
    }
  return map;
}

/// Cell of maximum activity; ties go to the smallest row, then column.
inline Cell hotspot(const TrafficFrame& frame) {
  if (frame.size() == 0) throw InputError("hotspot: empty frame");
  auto values = frame.values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return {best / frame.width(), best % frame.width()};
}

struct HotspotEntry {
  std::size_t slot = 0;
  Cell cell;
  double value = 0.0;
};

struct HotspotTrack {
  std::vector<HotspotEntry> entries;
};

inline HotspotTrack hotspot_trajectory(const TrafficCube& cube) {
  HotspotTrack track;
  for (std::size_t t = 0; t < cube.length(); ++t) {
    const auto cell = hotspot(cube.frame(t));
    track.entries.push_back({t, cell, cube.frame(t).at(cell)});
  }
  return track;
}

inline std::string atvr_csv(const AtvrProfile& profile) {
  std::string out = "tau,atvr\n";
  for (std::size_t i = 0; i < profile.taus.size(); ++i)
    out += std::to_string(profile.taus[i]) + "," + io::format_double(profile.values[i]) + "\n";
  return out;
}

/// Header row of absolute column indices, then one row per grid row led by
/// its absolute row index. Undefined coefficients are written as NA.
inline std::string correlation_map_csv(const CorrelationMap& map) {
  std::string out = "row";
  for (std::size_t c = 0; c < map.side(); ++c) out += "," + std::to_string(map.center.col - map.radius + c);
  out += "\n";
  for (std::size_t r = 0; r < map.side(); ++r) {
    out += std::to_string(map.center.row - map.radius + r);
    for (std::size_t c = 0; c < map.side(); ++c) {
      const auto& v = map.at(r, c);
      out += "," + (v ? io::format_double(*v) : std::string("NA"));
    }
    out += "\n";
  }
  return out;
}

inline std::string hotspot_track_csv(const HotspotTrack& track) {
  std::string out = "t,row,col,value\n";
  for (const auto& e : track.entries)
    out += std::to_string(e.slot) + "," + std::to_string(e.cell.row) + "," + std::to_string(e.cell.col) + "," +
           io::format_double(e.value) + "\n";
  return out;
}

}  // namespace celltraffic

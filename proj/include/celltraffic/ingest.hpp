#pragma once

// CDR text parsing, dense cube assembly, the CGF1 binary cube format and the
// seeded synthetic traffic generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/grid_core.hpp"
#include "celltraffic/io.hpp"

namespace celltraffic {

/// One line of a CDR grid file. Empty activity fields read as zero.
struct CdrRecord {
  std::int64_t square_id = 0;
  std::int64_t timestamp_ms = 0;
  double sms_in = 0.0;
  double sms_out = 0.0;
  double call_in = 0.0;
  double call_out = 0.0;
  double internet = 0.0;

  double activity(ServiceKind kind) const {
    switch (kind) {
      case ServiceKind::sms_in: return sms_in;
      case ServiceKind::sms_out: return sms_out;
      case ServiceKind::call_in: return call_in;
      case ServiceKind::call_out: return call_out;
      case ServiceKind::internet: return internet;
      default: throw ConfigError("combined service '" + std::string(to_string(kind)) + "' is not a raw CDR field");
    }
  }
  friend bool operator==(const CdrRecord&, const CdrRecord&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::int64_t parse_int_field(std::string_view text, std::size_t line, const char* name) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(line, std::string(name) + " is not an integer: '" + std::string(text) + "'");
  return value;
}

inline double parse_activity_field(std::string_view text, std::size_t line, const char* name) {
  if (text.empty()) return 0.0;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    throw ParseError(line, std::string(name) + " is not a number: '" + std::string(text) + "'");
  if (value < 0.0) throw ParseError(line, std::string(name) + " is negative");
  return value;
}

}  // namespace detail

/// Parses `square_id, timestamp_ms, country_code, sms_in, sms_out, call_in,
/// call_out, internet` (tab separated). The country code is discarded.
inline CdrRecord parse_cdr_line(std::string_view line, std::size_t line_number = 0) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto fields = detail::split_tabs(line);
  if (fields.size() != 8)
    throw ParseError(line_number, "expected 8 tab-separated fields, got " + std::to_string(fields.size()));
  CdrRecord r;
  r.square_id = detail::parse_int_field(fields[0], line_number, "square_id");
  r.timestamp_ms = detail::parse_int_field(fields[1], line_number, "timestamp");
  r.sms_in = detail::parse_activity_field(fields[3], line_number, "sms_in");
  r.sms_out = detail::parse_activity_field(fields[4], line_number, "sms_out");
  r.call_in = detail::parse_activity_field(fields[5], line_number, "call_in");
  r.call_out = detail::parse_activity_field(fields[6], line_number, "call_out");
  r.internet = detail::parse_activity_field(fields[7], line_number, "internet");
  return r;
}

/// Reads every non-blank line of a CDR file; errors carry `path:line`.
inline std::vector<CdrRecord> read_cdr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<CdrRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    try {
      records.push_back(parse_cdr_line(line, line_number));
    } catch (const ParseError& e) {
      throw ParseError(line_number, e.detail(), path);
    }
  }
  return records;
}

/// Dense cube over [earliest, latest] record time. Absent (cell, slot) pairs
/// are zero; duplicate pairs (one per country code) are summed. Square ids are
/// 1-based and row-major.
inline TrafficCube assemble_cube(const std::vector<CdrRecord>& records, std::size_t height, std::size_t width,
                                 ServiceKind service, std::int64_t slot_duration) {
  if (records.empty()) throw InputError("assemble_cube: no records, time range is undefined");
  if (is_combined(service))
    throw ConfigError("assemble_cube: '" + std::string(to_string(service)) + "' must be built with combine_services");
  if (slot_duration <= 0) throw ConfigError("assemble_cube: slot duration must be positive");
  const std::int64_t slot_ms = slot_duration * 1000;
  const auto cells = static_cast<std::int64_t>(height * width);

  auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                      [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  const std::int64_t origin = lo->timestamp_ms;
  const std::int64_t last = hi->timestamp_ms;

  // (slot, cell, value) triples sorted so the per-cell sums are independent of record order.
  std::vector<std::tuple<std::int64_t, std::int64_t, double>> entries;
  entries.reserve(records.size());
  for (const auto& r : records) {
    if (r.square_id < 1 || r.square_id > cells)
      throw IndexError("square_id " + std::to_string(r.square_id) + " outside grid of " + std::to_string(cells) +
                       " cells");
    if ((r.timestamp_ms - origin) % slot_ms != 0)
      throw AlignmentError("timestamp " + std::to_string(r.timestamp_ms) + " is not aligned to " +
                           std::to_string(slot_duration) + "s slots from origin " + std::to_string(origin));
    entries.emplace_back((r.timestamp_ms - origin) / slot_ms, r.square_id - 1, r.activity(service));
  }
  std::sort(entries.begin(), entries.end());

  const auto length = static_cast<std::size_t>((last - origin) / slot_ms + 1);
  auto cube = TrafficCube::zeros(height, width, length, origin / 1000, slot_duration, service);
  for (const auto& [slot, cell, value] : entries)
    cube.frame(static_cast<std::size_t>(slot)).values()[static_cast<std::size_t>(cell)] += value;
  return cube;
}

inline constexpr std::string_view kCubeMagic = "CGF1";

inline std::vector<unsigned char> encode_cube(const TrafficCube& cube) {
  io::ByteWriter w;
  w.magic(kCubeMagic);
  w.put<std::uint64_t>(cube.height());
  w.put<std::uint64_t>(cube.width());
  w.put<std::uint64_t>(cube.length());
  w.put<std::int64_t>(cube.slot_duration());
  w.put<std::int64_t>(cube.start_time());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cube.service()));
  w.put<std::uint8_t>(cube.normalized() ? 1 : 0);
  for (const auto& f : cube.frames())
    for (double v : f.values()) w.put(v);
  return w.bytes();
}

inline TrafficCube decode_cube(io::ByteReader& r) {
  r.expect_magic(kCubeMagic);
  const auto height = r.get<std::uint64_t>();
  const auto width = r.get<std::uint64_t>();
  const auto length = r.get<std::uint64_t>();
  const auto slot_duration = r.get<std::int64_t>();
  const auto start_time = r.get<std::int64_t>();
  const auto tag = r.get<std::uint8_t>();
  const auto normalized = r.get<std::uint8_t>();
  if (tag > static_cast<std::uint8_t>(ServiceKind::total)) throw FormatError(r.source() + ": unknown service tag");
  if (normalized > 1) throw FormatError(r.source() + ": bad normalized flag");
  if (height == 0 || width == 0 || length == 0) throw FormatError(r.source() + ": empty cube geometry");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
  if (height > limit / width || height * width > limit / length) throw FormatError(r.source() + ": geometry overflow");
  const std::size_t expected = height * width * length * sizeof(double);
  if (r.remaining() != expected)
    throw FormatError(r.source() + ": payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(expected));
  auto cube = TrafficCube::zeros(height, width, length, start_time, slot_duration, static_cast<ServiceKind>(tag));
  cube.set_normalized(normalized == 1);
  for (std::size_t t = 0; t < length; ++t)
    for (double& v : cube.frame(t).values()) v = r.get<double>();
  return cube;
}

inline void save_cube(const TrafficCube& cube, const std::string& path) {
  io::write_binary_file(path, encode_cube(cube));
}

inline TrafficCube load_cube(const std::string& path) {
  auto reader = io::ByteReader::from_file(path);
  return decode_cube(reader);
}

struct Hotspot {
  std::size_t row = 0;
  std::size_t col = 0;
  double peak = 1.0;
  /// Shift of this hotspot's daily cycle in hours.
  double phase_hours = 0.0;
};

/// Parameters of the synthetic generator. Slot 0 is Monday 00:00 UTC
/// (2013-11-04), so days 5 and 6 of each week are the weekend.
struct SynthConfig {
  std::size_t height = 20;
  std::size_t width = 20;
  std::size_t weeks = 1;
  std::uint64_t seed = 1;
  std::vector<Hotspot> hotspots;
  double base_level = 1.0;
  double daily_amplitude = 0.5;
  double weekly_weekend_factor = 0.6;
  double noise_std = 0.0;
  double spatial_sigma = 3.0;
  std::int64_t start_time = 1383523200;
};

namespace detail {

inline bool is_weekend(std::size_t hour) { return (hour / 24) % 7 >= 5; }

}  // namespace detail

/// Noise-free value of the generator at (hour, row, col), before clamping.
inline double synthetic_mean(const SynthConfig& config, std::size_t hour, std::size_t row, std::size_t col) {
  const double hod = static_cast<double>(hour % 24);
  const double weekly = detail::is_weekend(hour) ? config.weekly_weekend_factor : 1.0;
  double value = 0.0;
  for (const auto& h : config.hotspots) {
    const double dr = static_cast<double>(row) - static_cast<double>(h.row);
    const double dc = static_cast<double>(col) - static_cast<double>(h.col);
    const double kernel = std::exp(-(dr * dr + dc * dc) / (2.0 * config.spatial_sigma * config.spatial_sigma));
    const double daily = config.base_level + config.daily_amplitude * std::sin(2.0 * std::numbers::pi * (hod - h.phase_hours) / 24.0);
    value += h.peak * kernel * daily;
  }
  return value * weekly;
}

/// Hourly cube of weeks*168 frames: Gaussian hotspots with a daily sinusoid,
/// a weekend dip and additive Gaussian noise, clamped at zero.
inline TrafficCube generate_synthetic(const SynthConfig& config) {
  if (config.hotspots.empty()) throw ConfigError("synthetic config needs at least one hotspot");
  if (config.height == 0 || config.width == 0 || config.weeks == 0) throw ConfigError("synthetic config has an empty extent");
  if (!(config.weekly_weekend_factor > 0.0 && config.weekly_weekend_factor <= 1.0))
    throw ConfigError("weekend factor must lie in (0, 1]");
  if (!(config.noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
  if (!(config.spatial_sigma > 0.0)) throw ConfigError("spatial_sigma must be positive");
  for (const auto& h : config.hotspots)
    if (h.row >= config.height || h.col >= config.width) throw ConfigError("hotspot center outside the grid");

  const std::size_t hours = config.weeks * 168;
  auto cube = TrafficCube::zeros(config.height, config.width, hours, config.start_time, 3600, ServiceKind::total);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, config.noise_std > 0.0 ? config.noise_std : 1.0);
  for (std::size_t t = 0; t < hours; ++t)
    for (std::size_t r = 0; r < config.height; ++r)
      for (std::size_t c = 0; c < config.width; ++c) {
        double v = synthetic_mean(config, t, r, c);
        if (config.noise_std > 0.0) v += noise(rng);
        cube.at(t, r, c) = std::max(0.0, v);
      }
  return cube;
}

}  // namespace celltraffic

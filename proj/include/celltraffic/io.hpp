#pragma once

// Little-endian binary primitives and round-trip decimal formatting shared by
// the cube, checkpoint and CSV writers.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "celltraffic/error.hpp"

namespace celltraffic::io {

inline void write_binary_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

class ByteWriter {
 public:
  void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    auto raw = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  void put_doubles(const std::vector<double>& values) {
    for (double v : values) put(v);
  }

  const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes, std::string source = "<buffer>")
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  static ByteReader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes), path);
  }

  void expect_magic(std::string_view tag) {
    if (remaining() < tag.size() || std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0)
      throw FormatError(source_ + ": bad magic, expected \"" + std::string(tag) + "\"");
    pos_ += tag.size();
  }

  template <typename T>
  T get() {
    require(sizeof(T), "header");
    std::array<unsigned char, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(raw);
  }

  /// Reads `count` doubles; a short buffer reports expected vs actual payload bytes.
  std::vector<double> get_doubles(std::size_t count, std::string_view what = "payload") {
    require(count * sizeof(double), what);
    std::vector<double> out(count);
    for (auto& v : out) v = get<double>();
    return out;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  const std::string& source() const noexcept { return source_; }

 private:
  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n)
      throw FormatError(source_ + ": truncated " + std::string(what) + ", expected " + std::to_string(n) +
                        " bytes but only " + std::to_string(remaining()) + " remain");
  }

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double value) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw Error("to_chars failed");
  return std::string(buf.data(), end);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw InputError("not a number: '" + std::string(text) + "'");
  return value;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace celltraffic::io

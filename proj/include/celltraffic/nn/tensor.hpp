#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "celltraffic/error.hpp"

namespace celltraffic::nn {

struct Shape4 {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const noexcept { return height * width; }
  std::size_t count() const noexcept { return batch * channels * height * width; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.batch) + "," + std::to_string(s.channels) + "," + std::to_string(s.height) + "," +
         std::to_string(s.width) + ")";
}

/// Dense (batch, channel, row, col) array of doubles, row-major.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0) : shape_(shape), data_(shape.count(), fill) {}
  Tensor4(std::size_t b, std::size_t c, std::size_t h, std::size_t w) : Tensor4(Shape4{b, c, h, w}) {}

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t batch() const noexcept { return shape_.batch; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t b, std::size_t c, std::size_t r, std::size_t col) const noexcept {
    return ((b * shape_.channels + c) * shape_.height + r) * shape_.width + col;
  }
  double& at(std::size_t b, std::size_t c, std::size_t r, std::size_t col) { return data_[index(b, c, r, col)]; }
  double at(std::size_t b, std::size_t c, std::size_t r, std::size_t col) const { return data_[index(b, c, r, col)]; }

  std::span<double> plane(std::size_t b, std::size_t c) {
    return {data_.data() + index(b, c, 0, 0), shape_.plane()};
  }
  std::span<const double> plane(std::size_t b, std::size_t c) const {
    return {data_.data() + index(b, c, 0, 0), shape_.plane()};
  }
  /// All channels of one batch element.
  std::span<double> item(std::size_t b) { return {data_.data() + index(b, 0, 0, 0), shape_.channels * shape_.plane()}; }
  std::span<const double> item(std::size_t b) const {
    return {data_.data() + index(b, 0, 0, 0), shape_.channels * shape_.plane()};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  bool all_finite() const noexcept {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

/// Channel-wise concatenation [a, b].
inline Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  if (a.batch() != b.batch() || a.height() != b.height() || a.width() != b.width())
    throw ShapeError("concat_channels: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor4 out(a.batch(), a.channels() + b.channels(), a.height(), a.width());
  for (std::size_t n = 0; n < a.batch(); ++n) {
    auto dst = out.item(n);
    auto sa = a.item(n);
    auto sb = b.item(n);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.size()));
  }
  return out;
}

/// Channels [first, first + count) of every batch element.
inline Tensor4 slice_channels(const Tensor4& t, std::size_t first, std::size_t count) {
  if (first + count > t.channels()) throw ShapeError("slice_channels: range past channel count");
  Tensor4 out(t.batch(), count, t.height(), t.width());
  const std::size_t plane = t.shape().plane();
  for (std::size_t n = 0; n < t.batch(); ++n) {
    auto src = t.item(n).subspan(first * plane, count * plane);
    std::copy(src.begin(), src.end(), out.item(n).begin());
  }
  return out;
}

inline void add_into(Tensor4& dst, const Tensor4& src) {
  if (dst.shape() != src.shape()) throw ShapeError("add_into: " + to_string(dst.shape()) + " vs " + to_string(src.shape()));
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace celltraffic::nn

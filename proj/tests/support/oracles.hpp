#pragma once

// Test-side reference implementations. Each one is written directly from the
// defining formula with plain loops and shares no code with the library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "celltraffic/celltraffic.hpp"

namespace oracle {

using celltraffic::TrafficCube;
using celltraffic::TrafficFrame;
using celltraffic::nn::Tensor4;

inline TrafficCube random_cube(std::size_t h, std::size_t w, std::size_t t, std::uint64_t seed, double lo = 0.5,
                               double hi = 10.0) {
  auto cube = TrafficCube::zeros(h, w, t, 0, 3600, celltraffic::ServiceKind::internet);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::size_t s = 0; s < t; ++s)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) cube.at(s, r, c) = dist(rng);
  return cube;
}

inline TrafficFrame random_frame(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo = -5.0,
                                 double hi = 5.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  TrafficFrame f(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) f.at(r, c) = dist(rng);
  return f;
}

inline Tensor4 random_tensor(celltraffic::nn::Shape4 shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor4 t(shape);
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline double rel_error(double got, double want) {
  const double denom = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / denom;
}

// sqrt((H*W)^-1 * sum_a sum_b (p - y)^2)
inline double rmse(const TrafficFrame& p, const TrafficFrame& y) {
  long double acc = 0.0L;
  for (std::size_t a = 0; a < y.height(); ++a)
    for (std::size_t b = 0; b < y.width(); ++b) {
      const long double e = static_cast<long double>(p.at(a, b)) - y.at(a, b);
      acc += e * e;
    }
  return static_cast<double>(std::sqrt(acc / static_cast<long double>(y.height() * y.width())));
}

// Mean of x_t(a,b) / x_{t-tau}(a,b) over t in [tau, T) and all cells, skipping
// zero denominators.
inline double atvr(const TrafficCube& cube, std::size_t tau) {
  long double acc = 0.0L;
  std::size_t n = 0;
  for (std::size_t t = tau; t < cube.length(); ++t)
    for (std::size_t a = 0; a < cube.height(); ++a)
      for (std::size_t b = 0; b < cube.width(); ++b) {
        const double den = cube.at(t - tau, a, b);
        if (den == 0.0) continue;
        acc += static_cast<long double>(cube.at(t, a, b)) / den;
        ++n;
      }
  return static_cast<double>(acc / static_cast<long double>(n));
}

// cov(x, y) / (s_x s_y) with the n-1 sample convention throughout.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0.0L, my = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double cov = 0.0L, vx = 0.0L, vy = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  cov /= (n - 1);
  const long double sx = std::sqrt(vx / (n - 1));
  const long double sy = std::sqrt(vy / (n - 1));
  return static_cast<double>(cov / (sx * sy));
}

inline double mse(const Tensor4& p, const Tensor4& y) {
  long double acc = 0.0L;
  for (std::size_t b = 0; b < p.batch(); ++b)
    for (std::size_t c = 0; c < p.channels(); ++c)
      for (std::size_t r = 0; r < p.height(); ++r)
        for (std::size_t k = 0; k < p.width(); ++k) {
          const long double e = static_cast<long double>(p.at(b, c, r, k)) - y.at(b, c, r, k);
          acc += e * e;
        }
  return static_cast<double>(acc / static_cast<long double>(p.size()));
}

// Zero-padded 3x3 cross-correlation, one output at a time.
inline Tensor4 conv3x3(const Tensor4& x, const celltraffic::nn::ConvParams& p) {
  Tensor4 y(x.batch(), p.out_channels, x.height(), x.width());
  const long long H = static_cast<long long>(x.height());
  const long long W = static_cast<long long>(x.width());
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t o = 0; o < p.out_channels; ++o)
      for (long long r = 0; r < H; ++r)
        for (long long c = 0; c < W; ++c) {
          double acc = p.bias[o];
          for (std::size_t i = 0; i < p.in_channels; ++i)
            for (long long kr = 0; kr < 3; ++kr)
              for (long long kc = 0; kc < 3; ++kc) {
                const long long rr = r + kr - 1;
                const long long cc = c + kc - 1;
                if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                acc += p.weight(o, i, kr, kc) * x.at(b, i, rr, cc);
              }
          y.at(b, o, r, c) = acc;
        }
  return y;
}

// Recent, daily and weekly families enumerated member by member, then sorted.
inline std::vector<std::size_t> lag_family(std::size_t h, std::size_t d, std::size_t w) {
  std::vector<long long> all;
  for (std::size_t i = 1; i <= h; ++i) all.push_back(static_cast<long long>(i));
  for (std::size_t j = 1; j <= d; ++j)
    for (std::size_t i = 0; i < h; ++i) all.push_back(static_cast<long long>(24 * j + i));
  for (std::size_t k = 1; k <= w; ++k)
    for (std::size_t j = 0; j <= d; ++j)
      for (std::size_t i = 0; i < h; ++i)
        all.push_back(168LL * static_cast<long long>(k) - 24LL * static_cast<long long>(j) + static_cast<long long>(i));
  std::vector<std::size_t> out;
  for (auto v : all) out.push_back(static_cast<std::size_t>(v));
  std::sort(out.begin(), out.end());
  return out;
}

// True when every family member is positive and no two coincide.
inline bool family_is_clean(std::size_t h, std::size_t d, std::size_t w) {
  std::set<long long> seen;
  std::size_t n = 0;
  for (std::size_t i = 1; i <= h; ++i, ++n) seen.insert(static_cast<long long>(i));
  for (std::size_t j = 1; j <= d; ++j)
    for (std::size_t i = 0; i < h; ++i, ++n) seen.insert(static_cast<long long>(24 * j + i));
  for (std::size_t k = 1; k <= w; ++k)
    for (std::size_t j = 0; j <= d; ++j)
      for (std::size_t i = 0; i < h; ++i, ++n) {
        const long long v = 168LL * static_cast<long long>(k) - 24LL * static_cast<long long>(j) + static_cast<long long>(i);
        if (v <= 0) return false;
        seen.insert(v);
      }
  return seen.size() == n;
}

/// Relative discrepancy between analytic and central-difference gradients.
/// Denominators are floored at `floor` so coordinates whose true gradient is
/// essentially zero are compared absolutely.
inline double relative_gap(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central difference of `loss` with respect to `value`, restoring it after.
inline double central_difference(double& value, const std::function<double()>& loss, double eps = 1e-5) {
  const double saved = value;
  value = saved + eps;
  const double up = loss();
  value = saved - eps;
  const double down = loss();
  value = saved;
  return (up - down) / (2.0 * eps);
}

/// sum(weights * y): a scalar probe whose gradient with respect to y is weights.
inline double probe(const Tensor4& y, const Tensor4& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * weights.data()[i];
  return s;
}

class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("celltraffic_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace oracle

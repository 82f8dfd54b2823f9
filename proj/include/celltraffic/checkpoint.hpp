#pragma once

// CGM1 model checkpoints: magic, config block, pipeline metadata, then every
// parameter tensor (BN running statistics included) as little-endian f64 in
// declaration order.

#include <cstdint>
#include <string>
#include <vector>

#include "celltraffic/error.hpp"
#include "celltraffic/grid_core.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/nn/model.hpp"
#include "celltraffic/windowing.hpp"

namespace celltraffic {

/// What a trained model needs to be evaluated against a cube again.
struct PipelineMeta {
  LagSpec lag{};
  NormStats stats{};
  std::size_t total_weeks = 0;
  std::size_t train_weeks = 0;
  ServiceKind service = ServiceKind::total;
  friend bool operator==(const PipelineMeta&, const PipelineMeta&) = default;
};

struct Checkpoint {
  nn::Model model;
  PipelineMeta meta;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::string_view kModelMagic = "CGM1";

namespace detail {

inline std::vector<std::vector<double>*> stored_tensors(nn::Model& m) {
  std::vector<std::vector<double>*> out;
  for (auto& l : m.layers) {
    out.push_back(&l.conv.kernels);
    out.push_back(&l.conv.bias);
    out.push_back(&l.bn.gamma);
    out.push_back(&l.bn.beta);
    out.push_back(&l.bn.running_mean);
    out.push_back(&l.bn.running_var);
  }
  out.push_back(&m.hidden.weights);
  out.push_back(&m.hidden.bias);
  out.push_back(&m.output.weights);
  out.push_back(&m.output.bias);
  return out;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
  const auto& c = ck.model.config;
  io::ByteWriter w;
  w.magic(kModelMagic);
  for (std::uint64_t v : {c.num_layers, c.growth, c.input_channels, c.height, c.width, c.pool.size_h, c.pool.size_w,
                          c.pool.stride_h, c.pool.stride_w, c.fc_hidden})
    w.put<std::uint64_t>(v);
  w.put(c.bn_momentum);
  w.put(c.bn_epsilon);
  w.put<std::uint64_t>(ck.model.seed);

  const auto& m = ck.meta;
  for (std::uint64_t v : {m.lag.h, m.lag.d, m.lag.w, m.total_weeks, m.train_weeks}) w.put<std::uint64_t>(v);
  w.put(m.stats.min_val);
  w.put(m.stats.max_val);
  w.put(m.stats.mean);
  w.put(m.stats.std);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.service));

  nn::Model copy = ck.model;
  for (auto* t : detail::stored_tensors(copy)) w.put_doubles(*t);
  return w.bytes();
}

inline Checkpoint decode_checkpoint(io::ByteReader& r) {
  r.expect_magic(kModelMagic);
  nn::ModelConfig c;
  c.num_layers = r.get<std::uint64_t>();
  c.growth = r.get<std::uint64_t>();
  c.input_channels = r.get<std::uint64_t>();
  c.height = r.get<std::uint64_t>();
  c.width = r.get<std::uint64_t>();
  c.pool.size_h = r.get<std::uint64_t>();
  c.pool.size_w = r.get<std::uint64_t>();
  c.pool.stride_h = r.get<std::uint64_t>();
  c.pool.stride_w = r.get<std::uint64_t>();
  c.fc_hidden = r.get<std::uint64_t>();
  c.bn_momentum = r.get<double>();
  c.bn_epsilon = r.get<double>();
  const auto seed = r.get<std::uint64_t>();

  Checkpoint ck;
  auto& m = ck.meta;
  m.lag.h = r.get<std::uint64_t>();
  m.lag.d = r.get<std::uint64_t>();
  m.lag.w = r.get<std::uint64_t>();
  m.total_weeks = r.get<std::uint64_t>();
  m.train_weeks = r.get<std::uint64_t>();
  m.stats.min_val = r.get<double>();
  m.stats.max_val = r.get<double>();
  m.stats.mean = r.get<double>();
  m.stats.std = r.get<double>();
  const auto tag = r.get<std::uint8_t>();
  if (tag > static_cast<std::uint8_t>(ServiceKind::total)) throw FormatError(r.source() + ": unknown service tag");
  m.service = static_cast<ServiceKind>(tag);

  if (c.num_layers > 4096 || c.growth > 4096 || c.input_channels > 65536 || c.height > 100000 || c.width > 100000 ||
      c.fc_hidden > 100000000)
    throw FormatError(r.source() + ": implausible model config");
  try {
    c.validate();
    // Size check before allocating so a corrupt header cannot request gigabytes.
    double count = 0.0;
    for (std::size_t l = 0; l < c.num_layers; ++l)
      count += static_cast<double>(c.growth) * (static_cast<double>(c.channels_before(l)) * 9.0 + 5.0);
    count += (static_cast<double>(c.head_features()) + 1.0) * static_cast<double>(c.fc_hidden);
    count += (static_cast<double>(c.fc_hidden) + 1.0) * static_cast<double>(c.height * c.width);
    if (count * sizeof(double) != static_cast<double>(r.remaining()))
      throw FormatError(r.source() + ": parameter payload holds " + std::to_string(r.remaining()) +
                        " bytes, expected " + std::to_string(static_cast<std::uint64_t>(count) * sizeof(double)));
    ck.model = nn::allocate_model(c, seed);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(r.source() + ": invalid model config: " + e.what());
  }
  std::size_t expected = 0;
  for (auto* t : detail::stored_tensors(ck.model)) expected += t->size();
  if (r.remaining() != expected * sizeof(double))
    throw FormatError(r.source() + ": parameter payload holds " + std::to_string(r.remaining()) +
                      " bytes, expected " + std::to_string(expected * sizeof(double)));
  for (auto* t : detail::stored_tensors(ck.model)) *t = r.get_doubles(t->size());
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  io::write_binary_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  auto reader = io::ByteReader::from_file(path);
  return decode_checkpoint(reader);
}

}  // namespace celltraffic

// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/nn/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cwtrnn/core/error.hpp"
#include "cwtrnn/nn/half.hpp"

namespace cwtrnn::nn {

std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::kF32: return "f32";
    case Precision::kF16: return "f16";
    case Precision::kInt8: return "int8";
  }
  return "?";
}

Precision parse_precision(std::string_view name) {
  if (name == "f32") return Precision::kF32;
  if (name == "f16") return Precision::kF16;
  if (name == "int8") return Precision::kInt8;
  throw InvalidArgument("unknown precision '" + std::string(name) + "' (expected f32, f16 or int8)");
}

float symmetric_scale(std::span<const float> values) noexcept {
  float max_abs = 0.0f;
  for (float v : values) max_abs = std::max(max_abs, std::fabs(v));
  return max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
}

void quantize_int8(std::span<const float> values, float scale, std::span<std::int8_t> out) noexcept {
  const float inv = 1.0f / scale;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float q = std::nearbyint(values[i] * inv);
    out[i] = static_cast<std::int8_t>(std::clamp(q, -127.0f, 127.0f));
  }
}

QuantizedTensor quantize(const Tensor& t, QuantMode mode) {
  if (!t.all_finite()) throw InvalidArgument("cannot quantize non-finite values");
  QuantizedTensor q;
  q.mode = mode;
  q.shape = t.shape();
  if (mode == QuantMode::kF16) {
    q.f16.resize(t.numel());
    float_to_half(t.data(), std::span(q.f16));
    return q;
  }
  q.scale = symmetric_scale(t.data());
  q.zero_point = 0;
  q.i8.resize(t.numel());
  quantize_int8(t.data(), q.scale, q.i8);
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  std::vector<float> data(q.numel());
  if (q.mode == QuantMode::kF16) {
    half_to_float(std::span<const std::uint16_t>(q.f16), std::span(data));
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = static_cast<float>(static_cast<std::int32_t>(q.i8[i]) - q.zero_point) * q.scale;
    }
  }
  return Tensor(q.shape, std::move(data));
}

}  // namespace cwtrnn::nn

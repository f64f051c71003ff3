// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cwtrnn/nn/tensor.hpp"

namespace cwtrnn::nn {

enum class Precision { kF32, kF16, kInt8 };

std::string_view to_string(Precision p);
// Accepts "f32", "f16", "int8". Throws InvalidArgument otherwise.
Precision parse_precision(std::string_view name);

enum class QuantMode { kF16, kInt8 };

/// Reduced-precision storage for a tensor.
///
/// int8 is per-tensor symmetric: q = round(v / scale) clamped to [-127, 127],
/// scale = max|v| / 127, zero_point = 0. An all-zero tensor gets scale 1.
struct QuantizedTensor {
  QuantMode mode = QuantMode::kInt8;
  std::vector<std::size_t> shape;
  std::vector<std::uint16_t> f16;  // f16 payload
  std::vector<std::int8_t> i8;     // int8 payload
  float scale = 1.0f;
  std::int32_t zero_point = 0;

  std::size_t numel() const noexcept { return mode == QuantMode::kF16 ? f16.size() : i8.size(); }
  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

QuantizedTensor quantize(const Tensor& t, QuantMode mode);
Tensor dequantize(const QuantizedTensor& q);

// Symmetric per-tensor scale for int8; 1.0 when every value is zero.
float symmetric_scale(std::span<const float> values) noexcept;
// Quantizes with a given scale; out[i] = clamp(round_half_even(v / scale), -127, 127).
void quantize_int8(std::span<const float> values, float scale, std::span<std::int8_t> out) noexcept;

}  // namespace cwtrnn::nn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

namespace cwtrnn::nn {

// IEEE binary16 conversions, round-to-nearest-even on narrowing.
std::uint16_t float_to_half(float value) noexcept;
float half_to_float(std::uint16_t bits) noexcept;

// Bit-level reference conversion used when F16C is unavailable.
std::uint16_t float_to_half_portable(float value) noexcept;
float half_to_float_portable(std::uint16_t bits) noexcept;

void float_to_half(std::span<const float> in, std::span<std::uint16_t> out) noexcept;
void half_to_float(std::span<const std::uint16_t> in, std::span<float> out) noexcept;

// out[i] = half_to_float(float_to_half(in[i])).
void round_to_half(std::span<const float> in, std::span<float> out) noexcept;

}  // namespace cwtrnn::nn

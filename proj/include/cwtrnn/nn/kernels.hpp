// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/nn/quantize.hpp"
#include "cwtrnn/nn/tensor.hpp"

namespace cwtrnn::nn {

inline constexpr float kDefaultLeakySlope = 0.01f;
inline constexpr float kLayerNormEps = 1e-5f;

// y[B x O] = x[B x I] W[O x I]^T + b[O].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

// Dense layer with offline-quantized weights. int8 quantizes x per call with
// its own symmetric scale; f16 rounds x to binary16 and accumulates in f32.
Tensor dense_quantized(const Tensor& x, const QuantizedTensor& wq, const Tensor& b);

// Reusable per-thread buffers for DenseLayer::forward.
struct DenseScratch {
  std::vector<float> xf;
  std::vector<std::int16_t> xi;
};

/// Dense layer with weights prepared once for one precision.
///
/// The f16 layer keeps the binary16 payload and a widened f32 copy: a
/// product of two binary16 values is exact in f32, so multiplying widened
/// weights by half-rounded inputs is the f16-operand, f32-accumulate
/// product. The int8 layer keeps the int8 payload widened to int16 for
/// pair-wise multiply-add; accumulation is exact in int32.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const Tensor& w, const Tensor& b, Precision precision);
  DenseLayer(const QuantizedTensor& wq, const Tensor& b);

  // x: batch rows of in() floats, y: batch rows of out() floats.
  void forward(const float* x, std::size_t batch, float* y, DenseScratch& scratch) const;

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }
  Precision precision() const noexcept { return precision_; }
  const QuantizedTensor& quantized() const noexcept { return wq_; }

 private:
  void prepare_int8();

  Precision precision_ = Precision::kF32;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::size_t in_padded_ = 0;  // int8 row stride (multiple of 16)
  std::vector<float> w32_;
  std::vector<std::int16_t> w16_;
  std::vector<float> bias_;
  QuantizedTensor wq_;
};

/// Cross-correlation conv over x[B x C x H x W] with kernels[O x C x kh x kw],
/// zero padding (pad_h, pad_w) on each side. f16 rounds operands to
/// binary16; int8 is not supported for convolutions and runs in f32.
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, std::size_t pad_h, std::size_t pad_w,
              Precision precision = Precision::kF32);

void leaky_relu(std::span<float> x, float slope = kDefaultLeakySlope) noexcept;
// Normalizes each row of `width` values; gain/bias have `width` entries.
void layer_norm(std::span<float> x, std::size_t width, std::span<const float> gain, std::span<const float> bias,
                float eps = kLayerNormEps);
void log_softmax(std::span<float> x, std::size_t width);
void softmax(std::span<float> x, std::size_t width);

// Mask of 0 or 1/(1-p), drawn in index order from rng.
std::vector<float> dropout_mask(std::size_t n, float p, Rng& rng);
// Identity when !training.
void dropout(std::span<float> x, float p, Rng& rng, bool training);

namespace detail {
// Raw GEMM kernels, y[b*ldy + o] = sum_i x[b*ldx + i] * w[o*ldw + i] (+ bias[o]).
void gemm_f32(const float* x, std::size_t ldx, const float* w, std::size_t ldw, std::size_t batch,
              std::size_t out, std::size_t in, float* y, std::size_t ldy, const float* bias) noexcept;
// Int16 operands, int32 accumulation, y = acc * scale + bias. `in` must be a multiple of 16.
void gemm_i16(const std::int16_t* x, std::size_t ldx, const std::int16_t* w, std::size_t ldw,
              std::size_t batch, std::size_t out, std::size_t in, float* y, std::size_t ldy, float scale,
              const float* bias) noexcept;
}  // namespace detail

}  // namespace cwtrnn::nn

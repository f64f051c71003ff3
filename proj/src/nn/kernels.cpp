// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/nn/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define CWTRNN_HAVE_AVX2 1
#endif

#include "cwtrnn/core/error.hpp"
#include "cwtrnn/nn/half.hpp"

namespace cwtrnn::nn {

namespace detail {

namespace {

// Block sizes: one K block of a 64-row panel stays in L2.
constexpr std::size_t kKc = 1024;
constexpr std::size_t kOc = 64;

#if CWTRNN_HAVE_AVX2
inline float hsum(__m256 v) noexcept {
  __m128 lo = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
  __m128 sh = _mm_movehdup_ps(lo);
  __m128 s = _mm_add_ps(lo, sh);
  sh = _mm_movehl_ps(sh, s);
  s = _mm_add_ss(s, sh);
  return _mm_cvtss_f32(s);
}

inline std::int32_t hsum(__m256i v) noexcept {
  __m128i s = _mm_add_epi32(_mm256_castsi256_si128(v), _mm256_extracti128_si256(v, 1));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, 0x4E));
  s = _mm_add_epi32(s, _mm_shuffle_epi32(s, 0xB1));
  return _mm_cvtsi128_si32(s);
}
#endif

using F32Block = void (*)(const float*, std::size_t, const float*, std::size_t, std::size_t, float*, std::size_t,
                          const float*, bool);

// RB x RO tile over one K range. `accumulate` adds onto y instead of the bias.
template <int RB, int RO>
void f32_block(const float* x, std::size_t ldx, const float* w, std::size_t ldw, std::size_t in, float* y,
               std::size_t ldy, const float* bias, bool accumulate) {
  float sums[RB][RO] = {};
  std::size_t i = 0;
#if CWTRNN_HAVE_AVX2
  __m256 acc[RB][RO];
  for (int b = 0; b < RB; ++b)
    for (int r = 0; r < RO; ++r) acc[b][r] = _mm256_setzero_ps();
  for (; i + 8 <= in; i += 8) {
    __m256 wv[RO];
    for (int r = 0; r < RO; ++r) wv[r] = _mm256_loadu_ps(w + r * ldw + i);
    for (int b = 0; b < RB; ++b) {
      const __m256 xv = _mm256_loadu_ps(x + b * ldx + i);
      for (int r = 0; r < RO; ++r) acc[b][r] = _mm256_fmadd_ps(xv, wv[r], acc[b][r]);
    }
  }
  for (int b = 0; b < RB; ++b)
    for (int r = 0; r < RO; ++r) sums[b][r] = hsum(acc[b][r]);
#endif
  for (; i < in; ++i) {
    for (int b = 0; b < RB; ++b)
      for (int r = 0; r < RO; ++r) sums[b][r] += x[b * ldx + i] * w[r * ldw + i];
  }
  for (int b = 0; b < RB; ++b) {
    for (int r = 0; r < RO; ++r) {
      float& dst = y[b * ldy + r];
      const float base = accumulate ? dst : (bias ? bias[r] : 0.0f);
      dst = base + sums[b][r];
    }
  }
}

using I16Block = void (*)(const std::int16_t*, std::size_t, const std::int16_t*, std::size_t, std::size_t, float*,
                          std::size_t, float, const float*, bool);

template <int RB, int RO>
void i16_block(const std::int16_t* x, std::size_t ldx, const std::int16_t* w, std::size_t ldw, std::size_t in,
               float* y, std::size_t ldy, float scale, const float* bias, bool accumulate) {
  std::int32_t sums[RB][RO] = {};
  std::size_t i = 0;
#if CWTRNN_HAVE_AVX2
  __m256i acc[RB][RO];
  for (int b = 0; b < RB; ++b)
    for (int r = 0; r < RO; ++r) acc[b][r] = _mm256_setzero_si256();
  for (; i + 16 <= in; i += 16) {
    __m256i wv[RO];
    for (int r = 0; r < RO; ++r) wv[r] = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(w + r * ldw + i));
    for (int b = 0; b < RB; ++b) {
      const __m256i xv = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(x + b * ldx + i));
      for (int r = 0; r < RO; ++r) acc[b][r] = _mm256_add_epi32(acc[b][r], _mm256_madd_epi16(xv, wv[r]));
    }
  }
  for (int b = 0; b < RB; ++b)
    for (int r = 0; r < RO; ++r) sums[b][r] = hsum(acc[b][r]);
#endif
  for (; i < in; ++i) {
    for (int b = 0; b < RB; ++b)
      for (int r = 0; r < RO; ++r)
        sums[b][r] += static_cast<std::int32_t>(x[b * ldx + i]) * static_cast<std::int32_t>(w[r * ldw + i]);
  }
  for (int b = 0; b < RB; ++b) {
    for (int r = 0; r < RO; ++r) {
      float& dst = y[b * ldy + r];
      const float base = accumulate ? dst : (bias ? bias[r] : 0.0f);
      dst = base + static_cast<float>(sums[b][r]) * scale;
    }
  }
}

template <template <int, int> class Holder, class Fn, int RB>
constexpr std::array<Fn, 4> make_row() {
  return {Holder<RB, 1>::fn, Holder<RB, 2>::fn, Holder<RB, 3>::fn, Holder<RB, 4>::fn};
}

template <int RB, int RO>
struct F32Holder {
  static constexpr F32Block fn = f32_block<RB, RO>;
};
template <int RB, int RO>
struct I16Holder {
  static constexpr I16Block fn = i16_block<RB, RO>;
};

constexpr std::array<std::array<F32Block, 4>, 4> kF32Table = {
    make_row<F32Holder, F32Block, 1>(), make_row<F32Holder, F32Block, 2>(), make_row<F32Holder, F32Block, 3>(),
    make_row<F32Holder, F32Block, 4>()};
constexpr std::array<std::array<I16Block, 4>, 4> kI16Table = {
    make_row<I16Holder, I16Block, 1>(), make_row<I16Holder, I16Block, 2>(), make_row<I16Holder, I16Block, 3>(),
    make_row<I16Holder, I16Block, 4>()};

}  // namespace

// Reduction order is fixed by (K block, row tile, column tile), independent of the caller.
void gemm_f32(const float* x, std::size_t ldx, const float* w, std::size_t ldw, std::size_t batch,
              std::size_t out, std::size_t in, float* y, std::size_t ldy, const float* bias) noexcept {
  if (in == 0) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out; ++o) y[b * ldy + o] = bias ? bias[o] : 0.0f;
    return;
  }
  for (std::size_t k0 = 0; k0 < in; k0 += kKc) {
    const std::size_t kc = std::min(kKc, in - k0);
    const bool accumulate = k0 > 0;
    for (std::size_t o0 = 0; o0 < out; o0 += kOc) {
      const std::size_t oc = std::min(kOc, out - o0);
      for (std::size_t b = 0; b < batch; b += 4) {
        const std::size_t rb = std::min<std::size_t>(4, batch - b);
        for (std::size_t o = o0; o < o0 + oc; o += 4) {
          const std::size_t ro = std::min<std::size_t>(4, o0 + oc - o);
          kF32Table[rb - 1][ro - 1](x + b * ldx + k0, ldx, w + o * ldw + k0, ldw, kc, y + b * ldy + o, ldy,
                                    bias ? bias + o : nullptr, accumulate);
        }
      }
    }
  }
}

void gemm_i16(const std::int16_t* x, std::size_t ldx, const std::int16_t* w, std::size_t ldw,
              std::size_t batch, std::size_t out, std::size_t in, float* y, std::size_t ldy, float scale,
              const float* bias) noexcept {
  if (in == 0) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out; ++o) y[b * ldy + o] = bias ? bias[o] : 0.0f;
    return;
  }
  // 1024 products of |q| <= 127 stay below 2^24, so each block sum is exact in f32.
  for (std::size_t k0 = 0; k0 < in; k0 += kKc) {
    const std::size_t kc = std::min(kKc, in - k0);
    const bool accumulate = k0 > 0;
    for (std::size_t o0 = 0; o0 < out; o0 += kOc) {
      const std::size_t oc = std::min(kOc, out - o0);
      for (std::size_t b = 0; b < batch; b += 4) {
        const std::size_t rb = std::min<std::size_t>(4, batch - b);
        for (std::size_t o = o0; o < o0 + oc; o += 4) {
          const std::size_t ro = std::min<std::size_t>(4, o0 + oc - o);
          kI16Table[rb - 1][ro - 1](x + b * ldx + k0, ldx, w + o * ldw + k0, ldw, kc, y + b * ldy + o, ldy,
                                    scale, bias ? bias + o : nullptr, accumulate);
        }
      }
    }
  }
}

}  // namespace detail

namespace {

void check_dense_shapes(const Tensor& x, const std::vector<std::size_t>& wshape, const Tensor& b) {
  if (x.rank() != 2 || wshape.size() != 2 || b.rank() != 1) {
    throw ShapeError("dense expects x[B x I], W[O x I], b[O]");
  }
  if (x.dim(1) != wshape[1] || b.dim(0) != wshape[0]) {
    throw ShapeError("dense shape mismatch: x " + x.shape_string() + ", W " + shape_string(wshape) + ", b " +
                     b.shape_string());
  }
}

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

float max_abs(const float* x, std::size_t n) noexcept {
  std::size_t i = 0;
  float m = 0.0f;
#if CWTRNN_HAVE_AVX2
  const __m256 sign = _mm256_set1_ps(-0.0f);
  __m256 acc = _mm256_setzero_ps();
  for (; i + 8 <= n; i += 8) acc = _mm256_max_ps(acc, _mm256_andnot_ps(sign, _mm256_loadu_ps(x + i)));
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, acc);
  for (float v : lanes) m = std::max(m, v);
#endif
  for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

}  // namespace

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_dense_shapes(x, w.shape(), b);
  Tensor y({x.dim(0), w.dim(0)});
  detail::gemm_f32(x.ptr(), x.dim(1), w.ptr(), w.dim(1), x.dim(0), w.dim(0), x.dim(1), y.ptr(), w.dim(0), b.ptr());
  return y;
}

Tensor dense_quantized(const Tensor& x, const QuantizedTensor& wq, const Tensor& b) {
  check_dense_shapes(x, wq.shape, b);
  DenseLayer layer(wq, b);
  DenseScratch scratch;
  Tensor y({x.dim(0), layer.out()});
  layer.forward(x.ptr(), x.dim(0), y.ptr(), scratch);
  return y;
}

DenseLayer::DenseLayer(const Tensor& w, const Tensor& b, Precision precision) : precision_(precision) {
  if (w.rank() != 2 || b.rank() != 1 || b.dim(0) != w.dim(0)) {
    throw ShapeError("dense layer expects W[O x I] and b[O], got " + w.shape_string() + ", " + b.shape_string());
  }
  out_ = w.dim(0);
  in_ = w.dim(1);
  bias_.assign(b.data().begin(), b.data().end());
  switch (precision) {
    case Precision::kF32:
      w32_.assign(w.data().begin(), w.data().end());
      break;
    case Precision::kF16:
      wq_ = quantize(w, QuantMode::kF16);
      w32_ = dequantize(wq_).storage();
      break;
    case Precision::kInt8:
      wq_ = quantize(w, QuantMode::kInt8);
      prepare_int8();
      break;
  }
}

DenseLayer::DenseLayer(const QuantizedTensor& wq, const Tensor& b) : wq_(wq) {
  if (wq.shape.size() != 2 || b.rank() != 1 || b.dim(0) != wq.shape[0]) {
    throw ShapeError("dense layer expects W[O x I] and b[O], got " + shape_string(wq.shape) + ", " +
                     b.shape_string());
  }
  out_ = wq.shape[0];
  in_ = wq.shape[1];
  bias_.assign(b.data().begin(), b.data().end());
  if (wq.mode == QuantMode::kF16) {
    precision_ = Precision::kF16;
    w32_ = dequantize(wq_).storage();
  } else {
    precision_ = Precision::kInt8;
    if (wq.zero_point != 0) throw InvalidArgument("int8 dense layers require zero_point 0");
    prepare_int8();
  }
}

void DenseLayer::prepare_int8() {
  in_padded_ = round_up(std::max<std::size_t>(in_, 1), 16);
  w16_.assign(out_ * in_padded_, 0);
  for (std::size_t o = 0; o < out_; ++o)
    for (std::size_t i = 0; i < in_; ++i) w16_[o * in_padded_ + i] = wq_.i8[o * in_ + i];
}

void DenseLayer::forward(const float* x, std::size_t batch, float* y, DenseScratch& scratch) const {
  switch (precision_) {
    case Precision::kF32:
      detail::gemm_f32(x, in_, w32_.data(), in_, batch, out_, in_, y, out_, bias_.data());
      return;
    case Precision::kF16: {
      scratch.xf.resize(batch * in_);
      round_to_half(std::span(x, batch * in_), std::span(scratch.xf));
      detail::gemm_f32(scratch.xf.data(), in_, w32_.data(), in_, batch, out_, in_, y, out_, bias_.data());
      return;
    }
    case Precision::kInt8: {
      const float m = max_abs(x, batch * in_);
      const float x_scale = m > 0.0f ? m / 127.0f : 1.0f;
      const float inv = 1.0f / x_scale;
      scratch.xi.resize(batch * in_padded_);
      for (std::size_t b = 0; b < batch; ++b) {
        const float* src = x + b * in_;
        std::int16_t* dst = scratch.xi.data() + b * in_padded_;
        for (std::size_t i = 0; i < in_; ++i) {
          const float q = std::clamp(std::nearbyint(src[i] * inv), -127.0f, 127.0f);
          dst[i] = static_cast<std::int16_t>(q);
        }
        std::fill(dst + in_, dst + in_padded_, std::int16_t{0});
      }
      detail::gemm_i16(scratch.xi.data(), in_padded_, w16_.data(), in_padded_, batch, out_, in_padded_, y, out_,
                       x_scale * wq_.scale, bias_.data());
      return;
    }
  }
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, std::size_t pad_h, std::size_t pad_w,
              Precision precision) {
  if (x.rank() != 4 || kernels.rank() != 4 || bias.rank() != 1) {
    throw ShapeError("conv2d expects x[B x C x H x W], kernels[O x C x kh x kw], bias[O]");
  }
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != C || bias.dim(0) != O) {
    throw ShapeError("conv2d channel mismatch: x " + x.shape_string() + ", kernels " + kernels.shape_string() +
                     ", bias " + bias.shape_string());
  }
  if (H + 2 * pad_h < kh || W + 2 * pad_w < kw) {
    throw ShapeError("conv2d kernel " + kernels.shape_string() + " larger than padded input " + x.shape_string());
  }
  const std::size_t Ho = H + 2 * pad_h - kh + 1;
  const std::size_t Wo = W + 2 * pad_w - kw + 1;
  const std::size_t patch = C * kh * kw;
  const std::size_t positions = Ho * Wo;

  std::vector<float> k(kernels.data().begin(), kernels.data().end());
  if (precision == Precision::kF16) round_to_half(k, k);

  Tensor y({B, O, Ho, Wo});
  std::vector<float> cols(positions * patch);
  std::vector<float> tmp(positions * O);
  for (std::size_t b = 0; b < B; ++b) {
    const float* xb = x.ptr() + b * C * H * W;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        float* dst = cols.data() + (oy * Wo + ox) * patch;
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad_h);
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad_w);
              const bool inside = iy >= 0 && iy < static_cast<std::ptrdiff_t>(H) && ix >= 0 &&
                                  ix < static_cast<std::ptrdiff_t>(W);
              *dst++ = inside ? xb[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)] : 0.0f;
            }
          }
        }
      }
    }
    if (precision == Precision::kF16) round_to_half(cols, cols);
    detail::gemm_f32(cols.data(), patch, k.data(), patch, positions, O, patch, tmp.data(), O, bias.ptr());
    float* yb = y.ptr() + b * O * positions;
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t o = 0; o < O; ++o) yb[o * positions + p] = tmp[p * O + o];
  }
  return y;
}

void leaky_relu(std::span<float> x, float slope) noexcept {
  for (auto& v : x) v = v > 0.0f ? v : v * slope;
}

void layer_norm(std::span<float> x, std::size_t width, std::span<const float> gain, std::span<const float> bias,
                float eps) {
  if (width == 0 || x.size() % width != 0 || gain.size() != width || bias.size() != width) {
    throw ShapeError("layer_norm: width " + std::to_string(width) + " does not fit " + std::to_string(x.size()) +
                     " values / gain " + std::to_string(gain.size()) + " / bias " + std::to_string(bias.size()));
  }
  for (std::size_t r = 0; r < x.size(); r += width) {
    float* row = x.data() + r;
    float mean = 0.0f;
    for (std::size_t i = 0; i < width; ++i) mean += row[i];
    mean /= static_cast<float>(width);
    float var = 0.0f;
    for (std::size_t i = 0; i < width; ++i) {
      const float d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<float>(width);
    const float rstd = 1.0f / std::sqrt(var + eps);
    for (std::size_t i = 0; i < width; ++i) row[i] = (row[i] - mean) * rstd * gain[i] + bias[i];
  }
}

void log_softmax(std::span<float> x, std::size_t width) {
  if (width == 0 || x.size() % width != 0) throw ShapeError("log_softmax: bad row width");
  for (std::size_t r = 0; r < x.size(); r += width) {
    float* row = x.data() + r;
    const float m = *std::max_element(row, row + width);
    float sum = 0.0f;
    for (std::size_t i = 0; i < width; ++i) sum += std::exp(row[i] - m);
    const float lse = m + std::log(sum);
    for (std::size_t i = 0; i < width; ++i) row[i] -= lse;
  }
}

void softmax(std::span<float> x, std::size_t width) {
  if (width == 0 || x.size() % width != 0) throw ShapeError("softmax: bad row width");
  for (std::size_t r = 0; r < x.size(); r += width) {
    float* row = x.data() + r;
    const float m = *std::max_element(row, row + width);
    float sum = 0.0f;
    for (std::size_t i = 0; i < width; ++i) {
      row[i] = std::exp(row[i] - m);
      sum += row[i];
    }
    const float inv = 1.0f / sum;
    for (std::size_t i = 0; i < width; ++i) row[i] *= inv;
  }
}

std::vector<float> dropout_mask(std::size_t n, float p, Rng& rng) {
  if (!(p >= 0.0f && p < 1.0f)) throw InvalidArgument("dropout probability must be in [0, 1)");
  const float keep = 1.0f / (1.0f - p);
  std::vector<float> mask(n);
  for (auto& m : mask) m = rng.uniform() < static_cast<double>(p) ? 0.0f : keep;
  return mask;
}

void dropout(std::span<float> x, float p, Rng& rng, bool training) {
  if (!(p >= 0.0f && p < 1.0f)) throw InvalidArgument("dropout probability must be in [0, 1)");
  if (!training || p == 0.0f) return;
  const auto mask = dropout_mask(x.size(), p, rng);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
}

}  // namespace cwtrnn::nn

// Naive triple-loop references for the blocked kernels, accumulated in double.
#include <cmath>
#include <vector>

#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/nn/half.hpp"
#include "cwtrnn/nn/kernels.hpp"
#include "doctest.h"

using namespace cwtrnn;
using namespace cwtrnn::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal() * scale);
  return t;
}

// Returns (value, sum of |terms|) per output so errors can be judged relative to the magnitude of the sum.
std::pair<std::vector<double>, std::vector<double>> naive_dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t B = x.dim(0), I = x.dim(1), O = w.dim(0);
  std::vector<double> y(B * O), mag(B * O);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t o = 0; o < O; ++o) {
      double acc = b[o], m = std::fabs(b[o]);
      for (std::size_t i = 0; i < I; ++i) {
        const double p = static_cast<double>(x.at(r, i)) * w.at(o, i);
        acc += p;
        m += std::fabs(p);
      }
      y[r * O + o] = acc;
      mag[r * O + o] = m;
    }
  }
  return {y, mag};
}

Tensor naive_conv(const Tensor& x, const Tensor& k, const Tensor& bias, std::size_t ph, std::size_t pw) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t Ho = H + 2 * ph - kh + 1, Wo = W + 2 * pw - kw + 1;
  Tensor y({B, O, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t dy = 0; dy < kh; ++dy)
              for (std::size_t dx = 0; dx < kw; ++dx) {
                const long iy = static_cast<long>(oy + dy) - static_cast<long>(ph);
                const long ix = static_cast<long>(ox + dx) - static_cast<long>(pw);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                acc += static_cast<double>(x[((b * C + c) * H + iy) * W + ix]) * k[((o * C + c) * kh + dy) * kw + dx];
              }
          y[((b * O + o) * Ho + oy) * Wo + ox] = static_cast<float>(acc);
        }
  return y;
}

}  // namespace

TEST_CASE("f32 dense matches the naive reference across shapes") {
  Rng rng(31);
  const std::size_t shapes[][3] = {{1, 1, 1},   {1, 5, 3},    {3, 7, 9},     {4, 8, 4},  {5, 17, 13},
                                   {32, 96, 64}, {7, 1500, 6}, {9, 2100, 70}, {1024, 64, 11}};
  for (const auto& s : shapes) {
    const auto x = random_tensor({s[0], s[1]}, rng);
    const auto w = random_tensor({s[2], s[1]}, rng);
    const auto b = random_tensor({s[2]}, rng);
    const auto y = dense(x, w, b);
    const auto [ref, mag] = naive_dense(x, w, b);
    for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(std::fabs(y[i] - ref[i]) <= 1e-6 * mag[i] + 1e-30);
  }
}

TEST_CASE("f16 dense equals f32 dense on half-rounded operands") {
  Rng rng(32);
  const auto x = random_tensor({6, 50}, rng), w = random_tensor({9, 50}, rng), b = random_tensor({9}, rng);
  Tensor xr = x, wr = w;
  round_to_half(xr.data(), xr.data());
  round_to_half(wr.data(), wr.data());
  CHECK(dense_quantized(x, quantize(w, QuantMode::kF16), b) == dense(xr, wr, b));
}

TEST_CASE("int16 GEMM is exact against integer arithmetic") {
  Rng rng(33);
  const std::size_t B = 6, O = 7, I = 2064;
  std::vector<std::int16_t> x(B * I), w(O * I);
  for (auto& v : x) v = static_cast<std::int16_t>(static_cast<int>(rng.below(255)) - 127);
  for (auto& v : w) v = static_cast<std::int16_t>(static_cast<int>(rng.below(255)) - 127);
  std::vector<float> y(B * O);
  detail::gemm_i16(x.data(), I, w.data(), I, B, O, I, y.data(), O, 1.0f, nullptr);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t o = 0; o < O; ++o) {
      long long acc = 0;
      for (std::size_t i = 0; i < I; ++i) acc += static_cast<long long>(x[r * I + i]) * w[o * I + i];
      CHECK(static_cast<double>(y[r * O + o]) == doctest::Approx(static_cast<double>(acc)).epsilon(1e-7));
    }
  // One K block only: the int32 sum converts exactly.
  std::vector<float> y1(B * O);
  detail::gemm_i16(x.data(), I, w.data(), I, B, O, 1024, y1.data(), O, 1.0f, nullptr);
  long long acc = 0;
  for (std::size_t i = 0; i < 1024; ++i) acc += static_cast<long long>(x[i]) * w[i];
  CHECK(y1[0] == static_cast<float>(acc));
}

TEST_CASE("int8 dense error respects the analytic bound") {
  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_tensor({8, 70}, rng, 2.0), w = random_tensor({12, 70}, rng, 0.3);
    const auto b = random_tensor({12}, rng);
    const auto wq = quantize(w, QuantMode::kInt8);
    const float sw = wq.scale;

    // Weight quantization alone: |dy| <= sum |x| * sw / 2.
    const auto yw = dense(x, dequantize(wq), b);
    const auto y = dense(x, w, b);
    for (std::size_t r = 0; r < 8; ++r) {
      double sx_abs = 0;
      for (std::size_t i = 0; i < 70; ++i) sx_abs += std::fabs(x.at(r, i));
      for (std::size_t o = 0; o < 12; ++o) CHECK(std::fabs(yw.at(r, o) - y.at(r, o)) <= sx_abs * sw / 2 * 1.001 + 1e-5);
    }

    // Dynamic activation quantization adds the symmetric term.
    const auto yq = dense_quantized(x, wq, b);
    float mx = 0;
    for (float v : x.data()) mx = std::max(mx, std::fabs(v));
    const double sx = mx / 127.0;
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t o = 0; o < 12; ++o) {
        double bound = 0;
        for (std::size_t i = 0; i < 70; ++i) bound += std::fabs(x.at(r, i)) * sw / 2 + std::fabs(w.at(o, i)) * sx / 2 + sx * sw / 4;
        CHECK(std::fabs(yq.at(r, o) - y.at(r, o)) <= bound * 1.001 + 1e-5);
      }
  }
}

TEST_CASE("dense is linear in x") {
  Rng rng(35);
  const auto w = random_tensor({5, 33}, rng);
  const Tensor zero({5});
  const auto a = random_tensor({2, 33}, rng), c = random_tensor({2, 33}, rng);
  Tensor comb({2, 33});
  for (std::size_t i = 0; i < comb.numel(); ++i) comb[i] = 3.0f * a[i] - c[i];
  const auto ya = dense(a, w, zero), yc = dense(c, w, zero), yy = dense(comb, w, zero);
  for (std::size_t i = 0; i < yy.numel(); ++i) CHECK(yy[i] == doctest::Approx(3.0f * ya[i] - yc[i]).epsilon(1e-5));
}

TEST_CASE("conv2d matches the naive reference") {
  Rng rng(36);
  struct Case {
    std::vector<std::size_t> x, k;
    std::size_t ph, pw;
  };
  const Case cases[] = {{{2, 1, 2, 128}, {256, 1, 1, 3}, 0, 2},
                        {{1, 16, 2, 40}, {80, 16, 2, 3}, 0, 2},
                        {{3, 2, 5, 7}, {3, 2, 3, 3}, 1, 1},
                        {{1, 3, 4, 4}, {2, 3, 4, 4}, 0, 0}};
  for (const auto& c : cases) {
    const auto x = random_tensor(c.x, rng), k = random_tensor(c.k, rng), b = random_tensor({c.k[0]}, rng);
    const auto y = conv2d(x, k, b, c.ph, c.pw);
    const auto ref = naive_conv(x, k, b, c.ph, c.pw);
    REQUIRE(y.shape() == ref.shape());
    double worst = 0, scale = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
      worst = std::max(worst, static_cast<double>(std::fabs(y[i] - ref[i])));
      scale = std::max(scale, static_cast<double>(std::fabs(ref[i])));
    }
    CHECK(worst <= 1e-6 * scale);
  }
}

TEST_CASE("f16 conv equals f32 conv on half-rounded operands") {
  Rng rng(37);
  const auto x = random_tensor({1, 2, 2, 20}, rng), k = random_tensor({4, 2, 2, 3}, rng), b = random_tensor({4}, rng);
  Tensor xr = x, kr = k;
  round_to_half(xr.data(), xr.data());
  round_to_half(kr.data(), kr.data());
  CHECK(conv2d(x, k, b, 0, 2, Precision::kF16) == conv2d(xr, kr, b, 0, 2));
}

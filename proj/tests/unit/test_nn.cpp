#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/nn/half.hpp"
#include "cwtrnn/nn/kernels.hpp"
#include "cwtrnn/nn/quantize.hpp"
#include "doctest.h"

using namespace cwtrnn;
using namespace cwtrnn::nn;

TEST_CASE("tensor shape checks") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), ShapeError);
  CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}), ShapeError);
  Tensor t({2, 3});
  t.at(1, 2) = 4.0f;
  CHECK(t[5] == 4.0f);
  t.reshape({3, 2});
  CHECK(t.shape_string() == "[3x2]");
  CHECK_THROWS_AS(t.reshape({4, 2}), ShapeError);
}

TEST_CASE("half conversion known values") {
  CHECK(half_to_float(float_to_half(0.1f)) == 0.0999755859375f);
  CHECK(float_to_half(1.0f) == 0x3C00);
  CHECK(float_to_half(-2.0f) == 0xC000);
  CHECK(float_to_half(65504.0f) == 0x7BFF);
  CHECK(float_to_half(65520.0f) == 0x7C00);
  CHECK(float_to_half(5.9604644775390625e-8f) == 0x0001);
  // Ties go to even: 1 + 2^-11 sits halfway between 1 and 1 + 2^-10.
  CHECK(float_to_half(1.0f + std::ldexp(1.0f, -11)) == 0x3C00);
  CHECK(float_to_half(1.0f + 3 * std::ldexp(1.0f, -11)) == 0x3C02);
  CHECK(std::isnan(half_to_float(float_to_half(std::numeric_limits<float>::quiet_NaN()))));
}

TEST_CASE("portable and hardware half conversions agree bit for bit") {
  Rng rng(21);
  for (int i = 0; i < 200000; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(rng.next_u64());
    float f;
    std::memcpy(&f, &bits, 4);
    if (std::isnan(f)) continue;
    REQUIRE(float_to_half(f) == float_to_half_portable(f));
  }
  for (std::uint32_t h = 0; h < 0x10000; ++h) {
    const float a = half_to_float(static_cast<std::uint16_t>(h));
    const float b = half_to_float_portable(static_cast<std::uint16_t>(h));
    if (std::isnan(a)) {
      CHECK(std::isnan(b));
    } else {
      REQUIRE(std::memcmp(&a, &b, 4) == 0);
    }
  }
}

TEST_CASE("int8 quantization by hand") {
  Tensor t({3}, {-1.0f, 0.0f, 1.0f});
  const auto q = quantize(t, QuantMode::kInt8);
  CHECK(q.i8 == std::vector<std::int8_t>{-127, 0, 127});
  CHECK(q.scale == doctest::Approx(1.0 / 127));
  CHECK(q.zero_point == 0);
  const auto z = quantize(Tensor({4}), QuantMode::kInt8);
  CHECK(z.scale == 1.0f);
  CHECK_THROWS_AS(quantize(Tensor({1}, {INFINITY}), QuantMode::kInt8), InvalidArgument);
}

TEST_CASE("int8 roundtrip error is within one half step") {
  Rng rng(22);
  Tensor t({1000});
  for (auto& v : t.data()) v = static_cast<float>(rng.normal() * 3.0);
  const auto q = quantize(t, QuantMode::kInt8);
  const auto back = dequantize(q);
  float m = 0.0f;
  for (float v : t.data()) m = std::max(m, std::fabs(v));
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(std::fabs(back[i] - t[i]) <= m / 127 * 0.5f * 1.0001f);
}

TEST_CASE("precision names") {
  CHECK(parse_precision("int8") == Precision::kInt8);
  CHECK(to_string(Precision::kF16) == "f16");
  CHECK_THROWS_AS(parse_precision("bf16"), InvalidArgument);
}

TEST_CASE("dense by hand") {
  const auto y = dense(Tensor({1, 2}, {1, 2}), Tensor({1, 2}, {3, 4}), Tensor({1}, {5}));
  CHECK(y.shape() == std::vector<std::size_t>{1, 1});
  CHECK(y[0] == 16.0f);
  CHECK_THROWS_AS(dense(Tensor({1, 3}), Tensor({1, 2}), Tensor({1})), ShapeError);
  CHECK_THROWS_AS(dense(Tensor({1, 2}), Tensor({1, 2}), Tensor({2})), ShapeError);
}

TEST_CASE("identity weights in every precision") {
  Rng rng(23);
  const std::size_t n = 40;
  Tensor w({n, n});
  for (std::size_t i = 0; i < n; ++i) w.at(i, i) = 1.0f;
  Tensor x({3, n});
  for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-2, 2));
  float m = 0.0f;
  for (float v : x.data()) m = std::max(m, std::fabs(v));
  const Tensor b({n});
  CHECK(dense(x, w, b) == x);
  const auto y16 = dense_quantized(x, quantize(w, QuantMode::kF16), b);
  const auto y8 = dense_quantized(x, quantize(w, QuantMode::kInt8), b);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(y16[i] == half_to_float(float_to_half(x[i])));
    CHECK(std::fabs(y8[i] - x[i]) <= m / 127);
  }
}

TEST_CASE("zero weights give exactly the bias in all modes") {
  Tensor x({5, 17});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i) - 30.0f;
  const Tensor w({3, 17});
  const Tensor b({3}, {0.5f, -1.25f, 3.0f});
  for (auto p : {Precision::kF32, Precision::kF16, Precision::kInt8}) {
    DenseLayer layer(w, b, p);
    DenseScratch s;
    std::vector<float> y(15);
    layer.forward(x.ptr(), 5, y.data(), s);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t o = 0; o < 3; ++o) CHECK(y[r * 3 + o] == b[o]);
  }
}

TEST_CASE("batch 1024 is accepted and rows are batch independent") {
  Rng rng(24);
  Tensor w({11, 64}), b({11});
  for (auto& v : w.data()) v = static_cast<float>(rng.normal());
  Tensor x({1024, 64});
  for (auto& v : x.data()) v = static_cast<float>(rng.normal());
  for (auto p : {Precision::kF32, Precision::kF16}) {
    DenseLayer layer(w, b, p);
    DenseScratch s;
    std::vector<float> all(1024 * 11), one(11);
    layer.forward(x.ptr(), 1024, all.data(), s);
    for (std::size_t r : {0u, 3u, 1021u, 1023u}) {
      layer.forward(x.ptr() + r * 64, 1, one.data(), s);
      for (std::size_t o = 0; o < 11; ++o) CHECK(one[o] == all[r * 11 + o]);
    }
  }
}

TEST_CASE("activations") {
  std::vector<float> v = {-1.0f, 0.0f, 2.0f};
  leaky_relu(v, 0.01f);
  CHECK(v[0] == -0.01f);
  CHECK(v[2] == 2.0f);

  std::vector<float> u(7, 0.3f);
  log_softmax(u, 7);
  for (float x : u) CHECK(x == doctest::Approx(-std::log(7.0)).epsilon(1e-6));

  std::vector<float> c(4, 2.5f);
  const std::vector<float> gain = {1, 2, 3, 4}, bias = {0.1f, 0.2f, 0.3f, 0.4f};
  layer_norm(c, 4, gain, bias);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c[i] == bias[i]);

  std::vector<float> d = {1, 2, 3, 4};
  layer_norm(d, 4, std::vector<float>(4, 1.0f), std::vector<float>(4, 0.0f));
  // mean 2.5, var 1.25.
  CHECK(d[0] == doctest::Approx(-1.5 / std::sqrt(1.25 + 1e-5)).epsilon(1e-6));
  CHECK_THROWS_AS(layer_norm(d, 3, gain, bias), ShapeError);

  std::vector<float> l = {1.0f, 2.0f, 3.0f, 1000.0f, 0.0f, -1000.0f};
  log_softmax(l, 3);
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += std::exp(static_cast<double>(l[r * 3 + i]));
    CHECK(std::fabs(s - 1.0) < 1e-6);
  }
  std::vector<float> p = {1.0f, 2.0f, 3.0f};
  softmax(p, 3);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0f));
}

TEST_CASE("dropout") {
  Rng rng(25);
  std::vector<float> x(1000, 2.0f);
  auto y = x;
  dropout(y, 0.5f, rng, false);
  CHECK(y == x);
  CHECK_THROWS_AS(dropout(y, 1.0f, rng, true), InvalidArgument);
  CHECK_THROWS_AS(dropout(y, -0.1f, rng, true), InvalidArgument);

  // Expectation is preserved: the mean over 1e5 draws is within 1%.
  std::vector<float> big(100000, 1.5f);
  dropout(big, 0.3f, rng, true);
  double mean = std::accumulate(big.begin(), big.end(), 0.0) / big.size();
  CHECK(std::fabs(mean - 1.5) < 0.015);
  for (float v : big) CHECK((v == 0.0f || v == doctest::Approx(1.5f / 0.7f)));

  Rng a(3), b(3);
  CHECK(dropout_mask(50, 0.25f, a) == dropout_mask(50, 0.25f, b));
}

TEST_CASE("conv2d identity, zero kernels and width arithmetic") {
  Rng rng(26);
  Tensor x({2, 1, 2, 128});
  for (auto& v : x.data()) v = static_cast<float>(rng.normal());
  const auto id = conv2d(x, Tensor({1, 1, 1, 1}, {1.0f}), Tensor({1}), 0, 0);
  CHECK(id == x);

  const auto y = conv2d(x, Tensor({4, 1, 2, 3}), Tensor({4}, {1, 2, 3, 4}), 0, 1);
  CHECK(y.shape() == std::vector<std::size_t>{2, 4, 1, 128});
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == static_cast<float>(1 + (i / 128) % 4));

  CHECK_THROWS_AS(conv2d(x, Tensor({1, 2, 1, 1}), Tensor({1}), 0, 0), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor({1, 1, 3, 1}), Tensor({1}), 0, 0), ShapeError);
}

TEST_CASE("conv2d is translation consistent away from padding") {
  Rng rng(27);
  Tensor k({3, 1, 1, 3}), b({3});
  for (auto& v : k.data()) v = static_cast<float>(rng.normal());
  Tensor x({1, 1, 1, 40}), xs({1, 1, 1, 40});
  for (std::size_t i = 0; i < 40; ++i) x[i] = static_cast<float>(rng.normal());
  for (std::size_t i = 0; i + 5 < 40; ++i) xs[i + 5] = x[i];
  const auto y = conv2d(x, k, b, 0, 2), ys = conv2d(xs, k, b, 0, 2);
  const std::size_t wo = 42;
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t p = 2; p + 7 < wo; ++p) CHECK(ys[o * wo + p + 5] == doctest::Approx(y[o * wo + p]).epsilon(1e-6));
}

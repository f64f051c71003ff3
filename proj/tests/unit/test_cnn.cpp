#include <cmath>

#include "cwtrnn/cnnref/cnn.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/nn/quantize.hpp"
#include "doctest.h"

using namespace cwtrnn;
using namespace cwtrnn::cnnref;

namespace {

CnnConfig tiny() {
  CnnConfig c;
  c.timesteps = 16;
  c.conv1_filters = 6;
  c.conv2_filters = 4;
  c.dense_units = 10;
  c.classes = 3;
  return c;
}

std::vector<float> random_input(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  return x;
}

float leaky(double v, double s) { return static_cast<float>(v > 0 ? v : v * s); }

// Direct loops over the documented layer stack, in double.
std::vector<double> naive_forward(const nn::WeightSet& w, const CnnConfig& c, const float* x) {
  const auto& k1 = w.tensor("conv1.weight");
  const auto& b1 = w.tensor("conv1.bias");
  const auto& k2 = w.tensor("conv2.weight");
  const auto& b2 = w.tensor("conv2.bias");
  const auto& d1 = w.tensor("dense1.weight");
  const auto& e1 = w.tensor("dense1.bias");
  const auto& d2 = w.tensor("dense2.weight");
  const auto& e2 = w.tensor("dense2.bias");
  const long T = static_cast<long>(c.timesteps), P = static_cast<long>(c.pad_w), K = static_cast<long>(c.kernel_w);
  const long W1 = static_cast<long>(c.conv1_width()), W2 = static_cast<long>(c.conv2_width());
  std::vector<double> a(c.conv1_filters * 2 * W1);
  for (std::size_t f = 0; f < c.conv1_filters; ++f)
    for (long r = 0; r < 2; ++r)
      for (long t = 0; t < W1; ++t) {
        double s = b1.data()[f];
        for (long k = 0; k < K; ++k) {
          const long src = t + k - P;
          if (src >= 0 && src < T) s += double(k1.data()[f * K + k]) * x[r * T + src];
        }
        a[(f * 2 + r) * W1 + t] = leaky(s, c.leaky_slope);
      }
  std::vector<double> flat(c.flatten_size());
  for (std::size_t g = 0; g < c.conv2_filters; ++g)
    for (long t = 0; t < W2; ++t) {
      double s = b2.data()[g];
      for (std::size_t f = 0; f < c.conv1_filters; ++f)
        for (long r = 0; r < 2; ++r)
          for (long k = 0; k < K; ++k) {
            const long src = t + k - P;
            if (src >= 0 && src < W1)
              s += double(k2.data()[((g * c.conv1_filters + f) * 2 + r) * K + k]) * a[(f * 2 + r) * W1 + src];
          }
      flat[g * W2 + t] = leaky(s, c.leaky_slope);
    }
  std::vector<double> h(c.dense_units), y(c.classes);
  for (std::size_t o = 0; o < c.dense_units; ++o) {
    double s = e1.data()[o];
    for (std::size_t i = 0; i < flat.size(); ++i) s += double(d1.data()[o * flat.size() + i]) * flat[i];
    h[o] = leaky(s, c.leaky_slope);
  }
  double top = -1e300;
  for (std::size_t o = 0; o < c.classes; ++o) {
    double s = e2.data()[o];
    for (std::size_t i = 0; i < h.size(); ++i) s += double(d2.data()[o * h.size() + i]) * h[i];
    y[o] = s;
    top = std::max(top, s);
  }
  double z = 0;
  for (auto& v : y) z += (v = std::exp(v - top));
  for (auto& v : y) v /= z;
  return y;
}

}  // namespace

TEST_CASE("default configuration chains to eleven classes") {
  const CnnConfig c;
  CHECK(c.conv1_width() == 130);
  CHECK(c.conv2_width() == 132);
  CHECK(c.flatten_size() == 10560);
  const auto shapes = cnn_parameter_shapes(c);
  CHECK(shapes[2].shape == std::vector<std::size_t>{80, 256, 2, 3});
  CHECK(shapes[4].shape == std::vector<std::size_t>{256, 10560});
  CHECK(shapes[6].shape == std::vector<std::size_t>{11, 256});
}

TEST_CASE("zero weights give uniform rows") {
  const CnnConfig c;
  const Cnn net(zero_cnn_weights(c), nn::Precision::kF32, c);
  const auto out = net.forward(random_input(2 * 256, 1), 2);
  for (float v : out) CHECK(v == doctest::Approx(1.0 / 11).epsilon(1e-6));
}

TEST_CASE("f32 forward matches the naive stack") {
  const auto c = tiny();
  Rng rng(3);
  const auto w = random_cnn_weights(c, rng);
  const Cnn net(w, nn::Precision::kF32, c);
  const std::size_t B = 3;
  const auto x = random_input(B * 2 * c.timesteps, 4);
  const auto out = net.forward(x, B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto ref = naive_forward(w, c, x.data() + b * 2 * c.timesteps);
    double sum = 0;
    for (std::size_t k = 0; k < c.classes; ++k) {
      CHECK(out[b * c.classes + k] == doctest::Approx(ref[k]).epsilon(1e-5));
      sum += out[b * c.classes + k];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("rows do not depend on the batch they are computed in") {
  const auto c = tiny();
  Rng rng(5);
  const auto w = random_cnn_weights(c, rng);
  const auto x = random_input(64 * 2 * c.timesteps, 6);
  for (auto p : {nn::Precision::kF32, nn::Precision::kF16}) {
    const Cnn net(w, p, c);
    const auto all = net.forward(x, 64);
    for (std::size_t b : {0u, 17u, 63u}) {
      const auto one = net.forward(std::span(x).subspan(b * 2 * c.timesteps, 2 * c.timesteps), 1);
      for (std::size_t k = 0; k < c.classes; ++k) CHECK(one[k] == all[b * c.classes + k]);
    }
  }
}

TEST_CASE("reduced precisions stay near f32") {
  const auto c = tiny();
  Rng rng(7);
  const auto w = random_cnn_weights(c, rng);
  const auto x = random_input(8 * 2 * c.timesteps, 8);
  const auto ref = Cnn(w, nn::Precision::kF32, c).forward(x, 8);
  const auto h = Cnn(w, nn::Precision::kF16, c).forward(x, 8);
  const auto q = Cnn(w, nn::Precision::kInt8, c).forward(x, 8);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(std::fabs(h[i] - ref[i]) < 5e-3);
    CHECK(std::fabs(q[i] - ref[i]) < 5e-2);
  }
}

TEST_CASE("prequantized dense weights bind") {
  const auto c = tiny();
  Rng rng(9);
  const auto w = random_cnn_weights(c, rng);
  nn::WeightSet q;
  for (const auto& e : w.entries()) {
    if (e.name == "dense1.weight" || e.name == "dense2.weight") {
      q.add(e.name, nn::quantize(std::get<nn::Tensor>(e.value), nn::QuantMode::kInt8));
    } else {
      q.add(e.name, e.value);
    }
  }
  const auto x = random_input(2 * c.timesteps, 10);
  CHECK(Cnn(q, nn::Precision::kInt8, c).forward(x, 1) == Cnn(w, nn::Precision::kInt8, c).forward(x, 1));
}

TEST_CASE("missing or misshapen weights are rejected") {
  const auto c = tiny();
  Rng rng(11);
  const auto w = random_cnn_weights(c, rng);
  nn::WeightSet missing, wrong;
  for (const auto& e : w.entries()) {
    if (e.name != "conv2.bias") missing.add(e.name, e.value);
    wrong.add(e.name, e.name == "dense1.weight" ? nn::WeightSet::Value(nn::Tensor({c.dense_units, 7})) : e.value);
  }
  auto kind = [&](const nn::WeightSet& ws) {
    try {
      Cnn net(ws, nn::Precision::kF32, c);
    } catch (const FormatError& e) {
      return e.kind();
    }
    return FormatErrorKind::kBadMagic;
  };
  CHECK(kind(missing) == FormatErrorKind::kBadValue);
  CHECK(kind(wrong) == FormatErrorKind::kSizeMismatch);
  CHECK_THROWS_AS(Cnn(w, nn::Precision::kF32, c).forward(std::vector<float>(5), 1), ShapeError);
}

TEST_CASE("IQ rows layout") {
  IQSignal s(std::vector<Complex>{{1, 2}, {3, 4}});
  std::vector<float> out;
  append_iq_rows(s, out);
  CHECK(out == std::vector<float>{1, 3, 2, 4});
}

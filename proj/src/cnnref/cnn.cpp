// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/cnnref/cnn.hpp"

#include <cmath>
#include <string>

#include "cwtrnn/core/error.hpp"
#include "cwtrnn/nn/quantize.hpp"

namespace cwtrnn::cnnref {

using nn::Tensor;

void CnnConfig::validate() const {
  if (timesteps == 0 || conv1_filters == 0 || conv2_filters == 0 || kernel_w == 0 || dense_units == 0 ||
      classes == 0) {
    throw InvalidArgument("CNN layer sizes must be positive");
  }
  if (timesteps + 2 * pad_w < kernel_w || conv1_width() + 2 * pad_w < kernel_w) {
    throw InvalidArgument("CNN kernel wider than its padded input");
  }
}

std::vector<CnnParamShape> cnn_parameter_shapes(const CnnConfig& c) {
  c.validate();
  return {{"conv1.weight", {c.conv1_filters, 1, 1, c.kernel_w}},
          {"conv1.bias", {c.conv1_filters}},
          {"conv2.weight", {c.conv2_filters, c.conv1_filters, 2, c.kernel_w}},
          {"conv2.bias", {c.conv2_filters}},
          {"dense1.weight", {c.dense_units, c.flatten_size()}},
          {"dense1.bias", {c.dense_units}},
          {"dense2.weight", {c.classes, c.dense_units}},
          {"dense2.bias", {c.classes}}};
}

namespace {

std::size_t fan_in(const std::vector<std::size_t>& weight_shape) {
  std::size_t n = 1;
  for (std::size_t i = 1; i < weight_shape.size(); ++i) n *= weight_shape[i];
  return n;
}

// Float view of an entry, widening f16 payloads.
Tensor float_entry(const nn::WeightSet& w, const CnnParamShape& p, bool allow_int8) {
  if (!w.contains(p.name)) throw FormatError(FormatErrorKind::kBadValue, std::string("missing weight ") + p.name);
  const auto& v = w.get(p.name);
  Tensor t;
  if (const auto* f = std::get_if<Tensor>(&v)) {
    t = *f;
  } else if (const auto* q = std::get_if<nn::QuantizedTensor>(&v)) {
    if (q->mode == nn::QuantMode::kInt8 && !allow_int8) {
      throw FormatError(FormatErrorKind::kBadValue, std::string(p.name) + ": int8 convolution weights are not supported");
    }
    t = nn::dequantize(*q);
  } else {
    throw FormatError(FormatErrorKind::kBadValue, std::string(p.name) + " is not a tensor");
  }
  if (t.shape() != p.shape) {
    throw FormatError(FormatErrorKind::kSizeMismatch,
                      std::string(p.name) + " has shape " + t.shape_string() + ", expected " + nn::shape_string(p.shape));
  }
  return t;
}

nn::DenseLayer bind_dense(const nn::WeightSet& w, const CnnParamShape& wp, const CnnParamShape& bp,
                          nn::Precision precision) {
  const Tensor b = float_entry(w, bp, false);
  if (const auto* q = std::get_if<nn::QuantizedTensor>(&w.get(wp.name))) {
    if (q->mode == nn::QuantMode::kInt8 && precision == nn::Precision::kInt8) {
      if (q->shape != wp.shape) throw FormatError(FormatErrorKind::kSizeMismatch, std::string(wp.name) + " has the wrong shape");
      return nn::DenseLayer(*q, b);
    }
  }
  return nn::DenseLayer(float_entry(w, wp, true), b, precision);
}

}  // namespace

nn::WeightSet random_cnn_weights(const CnnConfig& c, Rng& rng) {
  nn::WeightSet w;
  double bound = 1.0;
  for (const auto& p : cnn_parameter_shapes(c)) {
    Tensor t(p.shape);
    if (p.shape.size() > 1) bound = 1.0 / std::sqrt(static_cast<double>(fan_in(p.shape)));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    w.add(p.name, std::move(t));
  }
  return w;
}

nn::WeightSet zero_cnn_weights(const CnnConfig& c) {
  nn::WeightSet w;
  for (const auto& p : cnn_parameter_shapes(c)) w.add(p.name, Tensor(p.shape));
  return w;
}

Cnn::Cnn(const nn::WeightSet& weights, nn::Precision precision, const CnnConfig& config)
    : config_(config), precision_(precision) {
  const auto shapes = cnn_parameter_shapes(config_);
  conv1_w_ = float_entry(weights, shapes[0], false);
  conv1_b_ = float_entry(weights, shapes[1], false);
  conv2_w_ = float_entry(weights, shapes[2], false);
  conv2_b_ = float_entry(weights, shapes[3], false);
  dense1_ = bind_dense(weights, shapes[4], shapes[5], precision);
  dense2_ = bind_dense(weights, shapes[6], shapes[7], precision);
}

void Cnn::forward(const float* x, std::size_t batch, float* out) const {
  const auto& c = config_;
  const auto conv_precision = precision_ == nn::Precision::kF16 ? nn::Precision::kF16 : nn::Precision::kF32;
  Tensor input({batch, 1, 2, c.timesteps}, std::vector<float>(x, x + batch * 2 * c.timesteps));
  Tensor a = nn::conv2d(input, conv1_w_, conv1_b_, 0, c.pad_w, conv_precision);
  nn::leaky_relu(a.data(), c.leaky_slope);
  Tensor b = nn::conv2d(a, conv2_w_, conv2_b_, 0, c.pad_w, conv_precision);
  nn::leaky_relu(b.data(), c.leaky_slope);
  // b is batch x F2 x 1 x W2, contiguous per example: already the flattened layout.
  std::vector<float> hidden(batch * c.dense_units);
  nn::DenseScratch scratch;
  dense1_.forward(b.ptr(), batch, hidden.data(), scratch);
  nn::leaky_relu(hidden, c.leaky_slope);
  dense2_.forward(hidden.data(), batch, out, scratch);
  nn::softmax(std::span(out, batch * c.classes), c.classes);
}

std::vector<float> Cnn::forward(std::span<const float> x, std::size_t batch) const {
  if (x.size() != batch * 2 * config_.timesteps) {
    throw ShapeError("CNN input holds " + std::to_string(x.size()) + " values, expected " + std::to_string(batch) +
                     " x 2 x " + std::to_string(config_.timesteps));
  }
  std::vector<float> out(batch * config_.classes);
  forward(x.data(), batch, out.data());
  return out;
}

void append_iq_rows(const IQSignal& s, std::vector<float>& out) {
  for (const auto& v : s.samples) out.push_back(static_cast<float>(v.real()));
  for (const auto& v : s.samples) out.push_back(static_cast<float>(v.imag()));
}

}  // namespace cwtrnn::cnnref

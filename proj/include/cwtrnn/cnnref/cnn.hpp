// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/core/types.hpp"
#include "cwtrnn/nn/kernels.hpp"
#include "cwtrnn/nn/weights.hpp"

namespace cwtrnn::cnnref {

/// Layer sizes of the reference two-conv classifier:
///   conv(conv1_filters, 1 x 3) -> leaky -> conv(conv2_filters, 2 x 3) -> leaky
///   -> dense(dense_units) -> leaky -> dense(classes) -> softmax
/// on a 1 x 2 x T input of I and Q rows. Both convs pad the time axis by
/// `pad_w` on each side. Dropout layers exist only in training and are not
/// part of inference.
struct CnnConfig {
  std::size_t timesteps = 128;
  std::size_t conv1_filters = 256;
  std::size_t conv2_filters = 80;
  std::size_t kernel_w = 3;
  std::size_t pad_w = 2;
  std::size_t dense_units = 256;
  std::size_t classes = 11;
  float leaky_slope = nn::kDefaultLeakySlope;

  std::size_t conv1_width() const noexcept { return timesteps + 2 * pad_w - kernel_w + 1; }
  std::size_t conv2_width() const noexcept { return conv1_width() + 2 * pad_w - kernel_w + 1; }
  // conv2 collapses the two rows, so the flattened width is filters x conv2_width.
  std::size_t flatten_size() const noexcept { return conv2_filters * conv2_width(); }
  void validate() const;
};

struct CnnParamShape {
  const char* name;
  std::vector<std::size_t> shape;
};

// conv1.weight [F1,1,1,k], conv1.bias, conv2.weight [F2,F1,2,k], conv2.bias,
// dense1.weight [D, flatten], dense1.bias, dense2.weight [N, D], dense2.bias.
std::vector<CnnParamShape> cnn_parameter_shapes(const CnnConfig& config);

// f32 weights uniform in +-1/sqrt(fan_in).
nn::WeightSet random_cnn_weights(const CnnConfig& config, Rng& rng);
nn::WeightSet zero_cnn_weights(const CnnConfig& config);

/// Eval-mode forward pass bound to a weight set.
///
/// Dense layers run at the requested precision. Convolutions run in f16
/// for kF16 and in f32 otherwise. Dense weights may be stored quantized;
/// conv weights must be f32 or f16 in the file.
class Cnn {
 public:
  // Throws FormatError for missing names, mistyped entries or wrong shapes.
  Cnn(const nn::WeightSet& weights, nn::Precision precision, const CnnConfig& config = {});

  /// x: batch x 2 x T (I row then Q row). out: batch x classes probabilities.
  void forward(const float* x, std::size_t batch, float* out) const;
  std::vector<float> forward(std::span<const float> x, std::size_t batch) const;

  const CnnConfig& config() const noexcept { return config_; }
  nn::Precision precision() const noexcept { return precision_; }

 private:
  CnnConfig config_;
  nn::Precision precision_;
  nn::Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  nn::DenseLayer dense1_, dense2_;
};

// Appends the 2 x T layout of one signal (real parts, then imaginary parts).
void append_iq_rows(const IQSignal& signal, std::vector<float>& out);

}  // namespace cwtrnn::cnnref

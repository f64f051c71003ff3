// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/nn/kernels.hpp"
#include "cwtrnn/nn/quantize.hpp"
#include "cwtrnn/nn/tensor.hpp"
#include "cwtrnn/nn/weights.hpp"

namespace cwtrnn::rnn {

struct RnnConfig {
  std::size_t freq_count = 32;  // F; inputs are [A(F); phi(F)]
  std::size_t hidden = 64;      // H
  std::size_t classes = 11;     // N
  float dropout = 0.2f;
  float leaky_slope = nn::kDefaultLeakySlope;

  std::size_t input_width() const noexcept { return 2 * freq_count; }
  // Width of z = [x~; h].
  std::size_t concat_width() const noexcept { return input_width() + hidden; }
  void validate() const;

  friend bool operator==(const RnnConfig&, const RnnConfig&) = default;
};

/// CWT-RNN parameters.
///
/// One step with input x = [A; phi] and state h:
///   z  = [layer_norm(A); phi; h]
///   a1 = dropout(leaky(W1 z + b1))
///   h' = W2 a1 + b2
///   a3 = leaky(W3 h' + b3)
///   y  = log_softmax(W4 a3 + b4)
/// h' is the next state and y the online prediction.
struct RnnModel {
  RnnConfig config;
  nn::Tensor w1, b1;  // H x (2F + H), H
  nn::Tensor w2, b2;  // H x H, H
  nn::Tensor w3, b3;  // H x H, H
  nn::Tensor w4, b4;  // N x H, N
  nn::Tensor ln_gain, ln_bias;  // F, F

  // All weights zero, gain 1, bias 0.
  static RnnModel zeros(const RnnConfig& config);
  // Weights and biases uniform in +-1/sqrt(fan_in); gain 1, bias 0.
  static RnnModel init(const RnnConfig& config, Rng& rng);

  struct Param {
    const char* name;
    nn::Tensor* tensor;
  };
  // Fixed order: w1 b1 w2 b2 w3 b3 w4 b4 ln_gain ln_bias.
  std::vector<Param> parameters();
  std::size_t parameter_count() const noexcept;

  // Throws ShapeError when a tensor disagrees with config.
  void check_shapes() const;

  friend bool operator==(const RnnModel&, const RnnModel&) = default;
};

struct RnnState {
  std::vector<float> h;
  std::size_t t = 0;

  static RnnState zeros(const RnnConfig& config) { return {std::vector<float>(config.hidden, 0.0f), 0}; }
};

/// Reference single step in f32. Updates `state` and returns the N
/// log-probabilities. In training mode dropout draws H values from rng.
std::vector<float> rnn_step(const RnnModel& model, RnnState& state, std::span<const float> x, bool training,
                            Rng& rng);

/// Sequential fold of rnn_step from a zero state over T x 2F features.
/// Returns T x N log-probabilities; row t is the prediction after t + 1 inputs.
nn::Tensor rnn_forward(const RnnModel& model, std::span<const float> features, std::size_t timesteps,
                       bool training, Rng& rng);

enum class LossMode { kAllTimesteps, kFinalOnly };

// Mean over rows (or the last row only) of -log_probs[t, label].
double nll_loss(const nn::Tensor& log_probs, std::size_t label, LossMode mode = LossMode::kAllTimesteps);

/// Batched eval-mode inference on prepared dense layers.
///
/// f16 and int8 apply to the four dense layers; layer norm and activations
/// stay f32. Each call is single-threaded and touches only `scratch`.
class RnnInference {
 public:
  struct Scratch {
    std::vector<float> z, a1, h, a3, logits;
    nn::DenseScratch dense;
  };

  RnnInference() = default;
  RnnInference(const RnnModel& model, nn::Precision precision);

  /// features: batch x T x 2F. out: batch x T x N log-probabilities, or
  /// batch x N when `final_only`.
  void forward(const float* features, std::size_t batch, std::size_t timesteps, float* out, Scratch& scratch,
               bool final_only = false) const;
  std::vector<float> forward(std::span<const float> features, std::size_t batch, std::size_t timesteps,
                             bool final_only = false) const;

  const RnnConfig& config() const noexcept { return config_; }
  nn::Precision precision() const noexcept { return precision_; }

 private:
  RnnConfig config_;
  nn::Precision precision_ = nn::Precision::kF32;
  nn::DenseLayer l1_, l2_, l3_, l4_;
  std::vector<float> gain_, bias_;
};

}  // namespace cwtrnn::rnn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cwtrnn/rnn/features.hpp"
#include "cwtrnn/rnn/model.hpp"

namespace cwtrnn::rnn {

std::size_t argmax(std::span<const float> values) noexcept;

// Fraction of predictions equal to their label; 0 for empty input.
double accuracy_top1(std::span<const std::size_t> predictions, std::span<const std::uint16_t> labels);

struct EvalResult {
  std::size_t count = 0;
  double accuracy = 0.0;             // top-1 at the final timestep
  double loss = 0.0;                 // mean nll_loss
  std::vector<double> per_timestep;  // top-1 accuracy of each row t
  std::vector<std::vector<std::size_t>> confusion;  // [label][prediction], final timestep
  std::vector<double> per_class_recall;
};

/// Eval-mode metrics over a feature set. Work is split into fixed chunks
/// of 256 examples, so results do not depend on `threads`.
EvalResult evaluate(const RnnInference& model, const FeatureSet& data, std::size_t threads = 1,
                    LossMode mode = LossMode::kAllTimesteps);

std::vector<double> per_timestep_accuracy(const RnnInference& model, const FeatureSet& data,
                                          std::size_t threads = 1);

}  // namespace cwtrnn::rnn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cwtrnn/rnn/features.hpp"
#include "cwtrnn/rnn/model.hpp"

namespace cwtrnn::rnn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// One decoupled-weight-decay Adam update at step t (1-based):
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + lambda theta)
void adamw_step(std::span<float> params, std::span<const float> grads, std::span<float> m, std::span<float> v,
                std::size_t t, double lr, const AdamWConfig& config);

enum class ScheduleKind { kConstant, kLinear, kExponential };

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::kLinear;
  double gamma = 0.99;  // exponential decay factor per epoch
};

// linear: lr0 (1 - epoch / total); exponential: lr0 gamma^epoch. Requires epoch < total.
double lr_schedule(const LrSchedule& schedule, double lr0, std::size_t epoch, std::size_t total_epochs);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  AdamWConfig optimizer;
  LrSchedule schedule;
  LossMode loss = LossMode::kAllTimesteps;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  // Gradients of a batch are summed over micro-batches in a fixed order.
  std::size_t micro_batch = 128;
  // Global L2 norm clip; 0 disables.
  double grad_clip = 0.0;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean over the epoch's training examples, with dropout
  double val_loss = 0.0;
  double val_accuracy = 0.0;  // final-timestep top-1
};

struct TrainResult {
  RnnModel model;
  std::vector<EpochStats> curves;
};

/// Minibatch AdamW with BPTT. Deterministic for a seed: shuffling and
/// dropout masks come from one generator in a fixed order, gradients are
/// summed in micro-batch order regardless of `threads`. Validation metrics
/// are zero when `validation` is null or empty.
TrainResult train(RnnModel model, const FeatureSet& training, const FeatureSet* validation,
                  const TrainConfig& config, const std::function<void(const EpochStats&)>& progress = {});

}  // namespace cwtrnn::rnn

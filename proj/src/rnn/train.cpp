// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/rnn/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/parallel.hpp"
#include "cwtrnn/rnn/bptt.hpp"
#include "cwtrnn/rnn/metrics.hpp"

namespace cwtrnn::rnn {

void adamw_step(std::span<float> params, std::span<const float> grads, std::span<float> m, std::span<float> v,
                std::size_t t, double lr, const AdamWConfig& c) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw ShapeError("adamw_step: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw InvalidArgument("adamw_step: step counter starts at 1");
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double update = (mi / bc1) / (std::sqrt(vi / bc2) + c.eps) + c.weight_decay * params[i];
    params[i] = static_cast<float>(params[i] - lr * update);
  }
}

double lr_schedule(const LrSchedule& s, double lr0, std::size_t epoch, std::size_t total) {
  if (total == 0 || epoch >= total) {
    throw InvalidArgument("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total) +
                          ")");
  }
  switch (s.kind) {
    case ScheduleKind::kConstant: return lr0;
    case ScheduleKind::kLinear: return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(total));
    case ScheduleKind::kExponential: return lr0 * std::pow(s.gamma, static_cast<double>(epoch));
  }
  return lr0;
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || micro_batch == 0) {
    throw InvalidArgument("epochs, batch size and micro-batch must be positive");
  }
  const auto& o = optimizer;
  if (!(o.lr > 0.0) || !(o.beta1 >= 0.0 && o.beta1 < 1.0) || !(o.beta2 >= 0.0 && o.beta2 < 1.0) ||
      !(o.eps > 0.0) || !(o.weight_decay >= 0.0)) {
    throw InvalidArgument("invalid AdamW hyperparameters");
  }
  if (schedule.kind == ScheduleKind::kExponential && !(schedule.gamma > 0.0 && schedule.gamma <= 1.0)) {
    throw InvalidArgument("exponential decay gamma must be in (0, 1]");
  }
  if (!(grad_clip >= 0.0)) throw InvalidArgument("grad_clip must be >= 0");
}

TrainResult train(RnnModel model, const FeatureSet& training, const FeatureSet* validation,
                  const TrainConfig& config, const std::function<void(const EpochStats&)>& progress) {
  config.validate();
  model.check_shapes();
  const auto& mc = model.config;
  if (training.size() == 0) throw InvalidArgument("cannot train on an empty dataset");
  if (training.width != mc.input_width()) {
    throw ShapeError("features have width " + std::to_string(training.width) + ", model expects " +
                     std::to_string(mc.input_width()));
  }
  const std::size_t T = training.timesteps, H = mc.hidden;

  Rng rng(config.seed);
  auto params = to_params<float>(model);
  auto m = params.zeros_like();
  auto v = params.zeros_like();
  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(config.schedule, config.optimizer.lr, epoch, config.epochs);
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, n);
      const std::size_t micro = (n + config.micro_batch - 1) / config.micro_batch;

      std::vector<float> masks;
      if (mc.dropout > 0.0f) {
        masks.reserve(n * T * H);
        for (std::size_t b = 0; b < n; ++b) {
          const auto mk = nn::dropout_mask(T * H, mc.dropout, rng);
          masks.insert(masks.end(), mk.begin(), mk.end());
        }
      }
      std::vector<ParamsT<float>> partial(micro);
      std::vector<double> partial_loss(micro, 0.0);
      parallel_for(micro, config.threads, [&](std::size_t k) {
        const std::size_t lo = k * config.micro_batch, len = std::min(config.micro_batch, n - lo);
        BatchView view{&training, batch.subspan(lo, len), masks.empty() ? nullptr : masks.data() + lo * T * H};
        partial_loss[k] = loss_and_gradients<float>(params, mc, view, config.loss, &partial[k]);
      });
      auto grad = std::move(partial[0]);
      double batch_loss = partial_loss[0];
      for (std::size_t k = 1; k < micro; ++k) {
        auto dst = grad.blocks();
        auto src = partial[k].blocks();
        for (std::size_t j = 0; j < dst.size(); ++j)
          for (std::size_t i = 0; i < dst[j].second; ++i) dst[j].first[i] += src[j].first[i];
        batch_loss += partial_loss[k];
      }
      epoch_loss += batch_loss;

      const auto scale = 1.0f / static_cast<float>(n);
      auto g_blocks = grad.blocks();
      double norm2 = 0.0;
      for (auto& [ptr, len] : g_blocks)
        for (std::size_t i = 0; i < len; ++i) {
          ptr[i] *= scale;
          norm2 += static_cast<double>(ptr[i]) * ptr[i];
        }
      if (config.grad_clip > 0.0 && std::sqrt(norm2) > config.grad_clip) {
        const auto c = static_cast<float>(config.grad_clip / std::sqrt(norm2));
        for (auto& [ptr, len] : g_blocks)
          for (std::size_t i = 0; i < len; ++i) ptr[i] *= c;
      }

      ++step;
      auto p_blocks = params.blocks();
      auto m_blocks = m.blocks();
      auto v_blocks = v.blocks();
      for (std::size_t j = 0; j < p_blocks.size(); ++j) {
        const std::size_t len = p_blocks[j].second;
        adamw_step({p_blocks[j].first, len}, {g_blocks[j].first, len}, {m_blocks[j].first, len},
                   {v_blocks[j].first, len}, step, lr, config.optimizer);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = epoch_loss / static_cast<double>(training.size());
    if (validation && validation->size() > 0) {
      from_params<float>(params, model);
      const auto eval = evaluate(RnnInference(model, nn::Precision::kF32), *validation, config.threads, config.loss);
      stats.val_loss = eval.loss;
      stats.val_accuracy = eval.accuracy;
    }
    result.curves.push_back(stats);
    if (progress) progress(stats);
  }
  from_params<float>(params, model);
  result.model = std::move(model);
  return result;
}

}  // namespace cwtrnn::rnn

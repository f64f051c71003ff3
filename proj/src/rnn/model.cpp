// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/rnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cwtrnn/core/error.hpp"

namespace cwtrnn::rnn {

using nn::Tensor;

void RnnConfig::validate() const {
  if (freq_count == 0 || hidden == 0 || classes == 0) {
    throw InvalidArgument("RNN sizes must be positive (F=" + std::to_string(freq_count) +
                          ", H=" + std::to_string(hidden) + ", N=" + std::to_string(classes) + ")");
  }
  if (!(dropout >= 0.0f && dropout < 1.0f)) throw InvalidArgument("dropout must be in [0, 1)");
  if (!(leaky_slope >= 0.0f) || !std::isfinite(leaky_slope)) throw InvalidArgument("leaky slope must be >= 0");
}

RnnModel RnnModel::zeros(const RnnConfig& c) {
  c.validate();
  RnnModel m;
  m.config = c;
  m.w1 = Tensor({c.hidden, c.concat_width()});
  m.b1 = Tensor({c.hidden});
  m.w2 = Tensor({c.hidden, c.hidden});
  m.b2 = Tensor({c.hidden});
  m.w3 = Tensor({c.hidden, c.hidden});
  m.b3 = Tensor({c.hidden});
  m.w4 = Tensor({c.classes, c.hidden});
  m.b4 = Tensor({c.classes});
  m.ln_gain = Tensor({c.freq_count}, std::vector<float>(c.freq_count, 1.0f));
  m.ln_bias = Tensor({c.freq_count});
  return m;
}

RnnModel RnnModel::init(const RnnConfig& c, Rng& rng) {
  RnnModel m = zeros(c);
  auto fill = [&](Tensor& w, Tensor& b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.dim(1)));
    for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    for (auto& v : b.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  };
  fill(m.w1, m.b1);
  fill(m.w2, m.b2);
  fill(m.w3, m.b3);
  fill(m.w4, m.b4);
  return m;
}

std::vector<RnnModel::Param> RnnModel::parameters() {
  return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}, {"w3", &w3},
          {"b3", &b3}, {"w4", &w4}, {"b4", &b4}, {"ln_gain", &ln_gain}, {"ln_bias", &ln_bias}};
}

std::size_t RnnModel::parameter_count() const noexcept {
  return w1.numel() + b1.numel() + w2.numel() + b2.numel() + w3.numel() + b3.numel() + w4.numel() + b4.numel() +
         ln_gain.numel() + ln_bias.numel();
}

void RnnModel::check_shapes() const {
  config.validate();
  const auto& c = config;
  auto expect = [](const Tensor& t, std::vector<std::size_t> shape, const char* name) {
    if (t.shape() != shape) {
      throw ShapeError(std::string("RNN ") + name + " has shape " + t.shape_string() + ", expected " +
                       nn::shape_string(shape));
    }
  };
  expect(w1, {c.hidden, c.concat_width()}, "w1");
  expect(b1, {c.hidden}, "b1");
  expect(w2, {c.hidden, c.hidden}, "w2");
  expect(b2, {c.hidden}, "b2");
  expect(w3, {c.hidden, c.hidden}, "w3");
  expect(b3, {c.hidden}, "b3");
  expect(w4, {c.classes, c.hidden}, "w4");
  expect(b4, {c.classes}, "b4");
  expect(ln_gain, {c.freq_count}, "ln_gain");
  expect(ln_bias, {c.freq_count}, "ln_bias");
}

namespace {

void matvec(const Tensor& w, const Tensor& b, std::span<const float> x, std::span<float> y) {
  const std::size_t in = w.dim(1);
  for (std::size_t o = 0; o < w.dim(0); ++o) {
    float acc = b[o];
    const float* row = w.ptr() + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

}  // namespace

std::vector<float> rnn_step(const RnnModel& m, RnnState& state, std::span<const float> x, bool training,
                            Rng& rng) {
  const auto& c = m.config;
  if (x.size() != c.input_width()) {
    throw ShapeError("RNN input has width " + std::to_string(x.size()) + ", expected " +
                     std::to_string(c.input_width()));
  }
  if (state.h.size() != c.hidden) throw ShapeError("RNN state has the wrong width");
  const std::size_t F = c.freq_count;
  std::vector<float> z(c.concat_width());
  std::copy(x.begin(), x.end(), z.begin());
  nn::layer_norm(std::span(z).first(F), F, m.ln_gain.data(), m.ln_bias.data());
  std::copy(state.h.begin(), state.h.end(), z.begin() + static_cast<std::ptrdiff_t>(2 * F));

  std::vector<float> a1(c.hidden), h(c.hidden), a3(c.hidden), y(c.classes);
  matvec(m.w1, m.b1, z, a1);
  nn::leaky_relu(a1, c.leaky_slope);
  nn::dropout(a1, c.dropout, rng, training);
  matvec(m.w2, m.b2, a1, h);
  matvec(m.w3, m.b3, h, a3);
  nn::leaky_relu(a3, c.leaky_slope);
  matvec(m.w4, m.b4, a3, y);
  nn::log_softmax(y, c.classes);
  state.h = std::move(h);
  ++state.t;
  return y;
}

Tensor rnn_forward(const RnnModel& m, std::span<const float> features, std::size_t timesteps, bool training,
                   Rng& rng) {
  const std::size_t W = m.config.input_width();
  if (features.size() != timesteps * W) {
    throw ShapeError("features hold " + std::to_string(features.size()) + " values, expected " +
                     std::to_string(timesteps) + " x " + std::to_string(W));
  }
  if (timesteps == 0) throw InvalidArgument("rnn_forward needs at least one timestep");
  Tensor out({timesteps, m.config.classes});
  RnnState state = RnnState::zeros(m.config);
  for (std::size_t t = 0; t < timesteps; ++t) {
    const auto y = rnn_step(m, state, features.subspan(t * W, W), training, rng);
    std::copy(y.begin(), y.end(), out.ptr() + t * m.config.classes);
  }
  return out;
}

double nll_loss(const Tensor& log_probs, std::size_t label, LossMode mode) {
  if (log_probs.rank() != 2 || log_probs.dim(0) == 0) throw ShapeError("nll_loss expects T x N log-probabilities");
  const std::size_t T = log_probs.dim(0), N = log_probs.dim(1);
  if (label >= N) throw InvalidArgument("label " + std::to_string(label) + " >= " + std::to_string(N) + " classes");
  if (mode == LossMode::kFinalOnly) return -static_cast<double>(log_probs.at(T - 1, label));
  double sum = 0.0;
  for (std::size_t t = 0; t < T; ++t) sum -= log_probs.at(t, label);
  return sum / static_cast<double>(T);
}

RnnInference::RnnInference(const RnnModel& model, nn::Precision precision)
    : config_(model.config),
      precision_(precision),
      l1_(model.w1, model.b1, precision),
      l2_(model.w2, model.b2, precision),
      l3_(model.w3, model.b3, precision),
      l4_(model.w4, model.b4, precision),
      gain_(model.ln_gain.data().begin(), model.ln_gain.data().end()),
      bias_(model.ln_bias.data().begin(), model.ln_bias.data().end()) {
  model.check_shapes();
}

void RnnInference::forward(const float* features, std::size_t batch, std::size_t timesteps, float* out,
                           Scratch& s, bool final_only) const {
  const std::size_t F = config_.freq_count, W = config_.input_width(), H = config_.hidden;
  const std::size_t Z = config_.concat_width(), N = config_.classes;
  s.z.assign(batch * Z, 0.0f);
  s.a1.resize(batch * H);
  s.h.assign(batch * H, 0.0f);
  s.a3.resize(batch * H);
  s.logits.resize(batch * N);
  for (std::size_t t = 0; t < timesteps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      float* z = s.z.data() + b * Z;
      const float* x = features + (b * timesteps + t) * W;
      std::copy(x, x + W, z);
      std::copy(s.h.data() + b * H, s.h.data() + (b + 1) * H, z + W);
    }
    // layer_norm handles one row per call here because z rows are strided.
    for (std::size_t b = 0; b < batch; ++b) nn::layer_norm(std::span(s.z.data() + b * Z, F), F, gain_, bias_);
    l1_.forward(s.z.data(), batch, s.a1.data(), s.dense);
    nn::leaky_relu(s.a1, config_.leaky_slope);
    l2_.forward(s.a1.data(), batch, s.h.data(), s.dense);
    l3_.forward(s.h.data(), batch, s.a3.data(), s.dense);
    nn::leaky_relu(s.a3, config_.leaky_slope);
    l4_.forward(s.a3.data(), batch, s.logits.data(), s.dense);
    nn::log_softmax(s.logits, N);
    if (final_only && t + 1 != timesteps) continue;
    for (std::size_t b = 0; b < batch; ++b) {
      float* dst = final_only ? out + b * N : out + (b * timesteps + t) * N;
      std::copy(s.logits.data() + b * N, s.logits.data() + (b + 1) * N, dst);
    }
  }
}

std::vector<float> RnnInference::forward(std::span<const float> features, std::size_t batch,
                                         std::size_t timesteps, bool final_only) const {
  if (features.size() != batch * timesteps * config_.input_width()) {
    throw ShapeError("features hold " + std::to_string(features.size()) + " values, expected " +
                     std::to_string(batch) + " x " + std::to_string(timesteps) + " x " +
                     std::to_string(config_.input_width()));
  }
  std::vector<float> out(batch * (final_only ? 1 : timesteps) * config_.classes);
  Scratch s;
  forward(features.data(), batch, timesteps, out.data(), s, final_only);
  return out;
}

}  // namespace cwtrnn::rnn

// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/rnn/metrics.hpp"

#include <algorithm>

#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/parallel.hpp"

namespace cwtrnn::rnn {

std::size_t argmax(std::span<const float> values) noexcept {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

double accuracy_top1(std::span<const std::size_t> predictions, std::span<const std::uint16_t> labels) {
  if (predictions.size() != labels.size()) throw InvalidArgument("one prediction per label is required");
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

constexpr std::size_t kChunk = 256;

struct Partial {
  double loss = 0.0;
  std::vector<std::size_t> hits_per_t;
  std::vector<std::vector<std::size_t>> confusion;
};

}  // namespace

EvalResult evaluate(const RnnInference& model, const FeatureSet& data, std::size_t threads, LossMode mode) {
  const auto& c = model.config();
  if (data.size() == 0) throw InvalidArgument("cannot evaluate an empty feature set");
  if (data.width != c.input_width()) {
    throw ShapeError("features have width " + std::to_string(data.width) + ", model expects " +
                     std::to_string(c.input_width()));
  }
  const std::size_t T = data.timesteps, N = c.classes;
  for (auto l : data.labels) {
    if (l >= N) throw InvalidArgument("label " + std::to_string(l) + " >= model classes " + std::to_string(N));
  }
  const std::size_t chunks = (data.size() + kChunk - 1) / kChunk;
  std::vector<Partial> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t k) {
    const std::size_t lo = k * kChunk, n = std::min(kChunk, data.size() - lo);
    std::vector<float> out(n * T * N);
    RnnInference::Scratch scratch;
    model.forward(data.example(lo), n, T, out.data(), scratch);
    Partial& p = parts[k];
    p.hits_per_t.assign(T, 0);
    p.confusion.assign(N, std::vector<std::size_t>(N, 0));
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t label = data.labels[lo + b];
      double ex_loss = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const std::span<const float> row(out.data() + (b * T + t) * N, N);
        const std::size_t pred = argmax(row);
        p.hits_per_t[t] += pred == label;
        if (mode == LossMode::kAllTimesteps) ex_loss -= row[label];
        if (t + 1 == T) {
          ++p.confusion[label][pred];
          if (mode == LossMode::kFinalOnly) ex_loss = -row[label];
        }
      }
      p.loss += mode == LossMode::kAllTimesteps ? ex_loss / static_cast<double>(T) : ex_loss;
    }
  });

  EvalResult r;
  r.count = data.size();
  r.per_timestep.assign(T, 0.0);
  r.confusion.assign(N, std::vector<std::size_t>(N, 0));
  std::vector<std::size_t> hits(T, 0);
  for (const auto& p : parts) {
    r.loss += p.loss;
    for (std::size_t t = 0; t < T; ++t) hits[t] += p.hits_per_t[t];
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) r.confusion[i][j] += p.confusion[i][j];
  }
  const auto n = static_cast<double>(data.size());
  r.loss /= n;
  for (std::size_t t = 0; t < T; ++t) r.per_timestep[t] = static_cast<double>(hits[t]) / n;
  r.accuracy = r.per_timestep.back();
  r.per_class_recall.assign(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t total = 0;
    for (auto v : r.confusion[i]) total += v;
    r.per_class_recall[i] = total ? static_cast<double>(r.confusion[i][i]) / static_cast<double>(total) : 0.0;
  }
  return r;
}

std::vector<double> per_timestep_accuracy(const RnnInference& model, const FeatureSet& data, std::size_t threads) {
  return evaluate(model, data, threads).per_timestep;
}

}  // namespace cwtrnn::rnn

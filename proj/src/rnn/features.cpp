// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/rnn/features.hpp"

#include <algorithm>

#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/parallel.hpp"
#include "cwtrnn/cwt/cwt.hpp"

namespace cwtrnn::rnn {

FeatureSet make_features(std::span<const LabeledExample> examples, std::span<const std::uint16_t> labels,
                         const cwt::MorletParams& params, std::size_t threads) {
  if (examples.size() != labels.size()) throw InvalidArgument("one label per example is required");
  FeatureSet fs;
  fs.labels.assign(labels.begin(), labels.end());
  if (examples.empty()) return fs;
  const std::size_t T = examples.front().signal.size();
  const double rate = examples.front().signal.sample_rate_hz;
  for (const auto& ex : examples) {
    if (ex.signal.size() != T) throw ShapeError("examples have mixed lengths");
  }
  const cwt::CwtPlan plan(params, T, rate);
  fs.timesteps = T;
  fs.width = 2 * params.frequencies.size();
  fs.values.resize(examples.size() * fs.stride());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    const auto f = cwt::spectrogram_to_features(plan.transform(examples[i].signal));
    std::copy(f.values.begin(), f.values.end(), fs.values.begin() + static_cast<std::ptrdiff_t>(i * fs.stride()));
  });
  return fs;
}

std::vector<int> snr_bin_preset(std::size_t bins) {
  if (bins == 9) return {-16, -12, -8, -4, 0, 4, 8, 12, 16};
  if (bins == 5) return {0, 4, 8, 12, 16};
  throw InvalidArgument("no SNR bin preset for " + std::to_string(bins) + " bins (use 9, 5 or a level list)");
}

TaskLabels map_task(const Dataset& d, const TaskSpec& spec) {
  TaskLabels out;
  if (spec.task == Task::kClass) {
    out.class_names = d.class_names;
    out.indices.resize(d.examples.size());
    out.labels.resize(d.examples.size());
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
      out.indices[i] = i;
      out.labels[i] = d.examples[i].class_id;
    }
    return out;
  }
  const auto& levels = spec.snr_levels;
  if (levels.empty()) throw InvalidArgument("SNR task needs at least one level");
  if (!std::is_sorted(levels.begin(), levels.end()) ||
      std::adjacent_find(levels.begin(), levels.end()) != levels.end()) {
    throw InvalidArgument("SNR levels must be strictly increasing");
  }
  for (int l : levels) out.class_names.push_back("snr" + std::to_string(l));
  const int last_width = levels.size() > 1 ? levels.back() - levels[levels.size() - 2] : 1;
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    const int snr = d.examples[i].snr_db;
    std::ptrdiff_t bin = -1;
    if (spec.binning == SnrBinning::kSelect) {
      const auto it = std::find(levels.begin(), levels.end(), snr);
      if (it != levels.end()) bin = it - levels.begin();
    } else {
      const auto it = std::upper_bound(levels.begin(), levels.end(), snr);
      if (it != levels.begin()) {
        const auto k = (it - levels.begin()) - 1;
        if (it != levels.end() || snr < levels.back() + last_width) bin = k;
      }
    }
    if (bin < 0) continue;
    out.indices.push_back(i);
    out.labels.push_back(static_cast<std::uint16_t>(bin));
  }
  return out;
}

}  // namespace cwtrnn::rnn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwtrnn/core/dataset.hpp"
#include "cwtrnn/cwt/morlet.hpp"

namespace cwtrnn::rnn {

/// Precomputed CWT feature sequences with one label each.
/// values holds size() x timesteps x width floats.
struct FeatureSet {
  std::size_t timesteps = 0;
  std::size_t width = 0;
  std::vector<float> values;
  std::vector<std::uint16_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t stride() const noexcept { return timesteps * width; }
  const float* example(std::size_t i) const { return values.data() + i * stride(); }
  std::span<const float> example_span(std::size_t i) const { return {example(i), stride()}; }
};

// Transforms every signal with one shared plan; parallel over examples, output independent of threads.
FeatureSet make_features(std::span<const LabeledExample> examples, std::span<const std::uint16_t> labels,
                         const cwt::MorletParams& params, std::size_t threads = 1);

enum class Task { kClass, kSnr };
enum class SnrBinning { kSelect, kPool };

/// What the classifier predicts.
///
/// kClass uses the container's class ids. kSnr uses `snr_levels` (sorted
/// ascending): with kSelect only records at exactly those levels are kept,
/// label = position in the list; with kPool level L goes to the last bin
/// whose level is <= L, provided L is below the next bin's level (or within
/// one bin spacing of the last one).
struct TaskSpec {
  Task task = Task::kClass;
  std::vector<int> snr_levels;
  SnrBinning binning = SnrBinning::kSelect;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// 9 bins: -16, -12, ..., 16. 5 bins: 0, 4, 8, 12, 16.
std::vector<int> snr_bin_preset(std::size_t bins);

struct TaskLabels {
  std::vector<std::size_t> indices;  // records kept, in dataset order
  std::vector<std::uint16_t> labels;
  std::vector<std::string> class_names;
};

TaskLabels map_task(const Dataset& dataset, const TaskSpec& spec);

}  // namespace cwtrnn::rnn

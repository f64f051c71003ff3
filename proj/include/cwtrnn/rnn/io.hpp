// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "cwtrnn/cwt/morlet.hpp"
#include "cwtrnn/nn/weights.hpp"
#include "cwtrnn/rnn/features.hpp"
#include "cwtrnn/rnn/model.hpp"

namespace cwtrnn::rnn {

/// A trained model together with the feature transform and task it expects.
///
/// Stored as a .wgts container: tensors rnn.w1 ... rnn.ln_bias in f32, and
/// f64 metadata arrays
///   meta.rnn        [F, H, N, dropout, leaky_slope]
///   meta.cwt        [sigma_kind (0 seconds, 1 cycles), sigma_value, truncation]
///   meta.cwt_freqs  [f_1 ... f_F]
///   meta.task       [task (0 class, 1 snr), binning (0 select, 1 pool), levels...]
struct RnnBundle {
  RnnModel model;
  cwt::MorletParams cwt;
  TaskSpec task;

  friend bool operator==(const RnnBundle&, const RnnBundle&) = default;
};

nn::WeightSet to_weight_set(const RnnBundle& bundle);
// Throws FormatError when entries are missing, mistyped or inconsistent.
RnnBundle from_weight_set(const nn::WeightSet& weights);

void save_bundle(const std::filesystem::path& path, const RnnBundle& bundle);
RnnBundle load_bundle(const std::filesystem::path& path);

}  // namespace cwtrnn::rnn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/core/types.hpp"

namespace cwtrnn::datagen {

/// Demo chirp S(t) = sin(pi (0.1 + t^2/100)) - i cos(pi (0.1 + t^2/100)),
/// sampled at t = n / fs. Unit magnitude everywhere.
IQSignal gen_chirp(std::size_t timesteps = 128, double sample_rate_hz = 1.0);

// a * exp(i (2 pi f n + phase)), f in cycles/sample.
IQSignal gen_tone(double frequency, std::size_t timesteps, double phase = 0.0, double amplitude = 1.0);

enum class PhasePolicy { kRandom, kFixed };

/// The five stand-in tones, in cycles/sample.
struct ToneSpec {
  std::vector<double> frequencies = {0.02, 0.05, 0.09, 0.15, 0.25};
  std::vector<double> amplitudes = {1.0, 1.0, 1.0, 1.0, 1.0};
  PhasePolicy phase_policy = PhasePolicy::kRandom;
  std::vector<double> fixed_phases;  // used with kFixed; empty means all zero

  // 0 < f < 0.5, distinct, matching amplitude count. Throws InvalidArgument.
  void validate() const;
};

// Parses "0.02,0.05,..." into a ToneSpec with unit amplitudes.
ToneSpec parse_tones(std::string_view list);

/// Table of classes, each a weighted subset of the tones.
///
/// Text form: entries separated by ';', terms by '+', each term a 1-based
/// tone index with an optional "coef*" prefix, e.g. "1;2;0.5*1+2".
struct QrfClassTable {
  struct Term {
    std::size_t tone = 0;  // 0-based
    double coefficient = 1.0;
    friend bool operator==(const Term&, const Term&) = default;
  };
  std::vector<std::vector<Term>> entries;

  static QrfClassTable parse(std::string_view text);
  static QrfClassTable default_table();

  std::size_t size() const noexcept { return entries.size(); }
  // Canonical text of one entry, e.g. "1+2"; used as the class name.
  std::string name(std::size_t class_id) const;
  std::vector<std::string> names() const;
  // Entries non-empty and distinct, tone indices below `tone_count`.
  void validate(std::size_t tone_count) const;
};

inline constexpr std::string_view kDefaultClassTable = "1;2;3;4;5;1+2;2+3;3+4;4+5;1+5;1+2+3+4+5";

/// Sum of the class's tones with per-example random phases (or fixed
/// phases), scaled to unit mean power.
IQSignal gen_tone_mix(std::size_t class_id, const QrfClassTable& table, const ToneSpec& tones,
                      std::size_t timesteps, Rng& rng);

struct NoisySignal {
  IQSignal signal;
  double measured_snr_db = 0.0;  // SNR of this noise realization
};

/// Adds complex white Gaussian noise of variance P / 10^(snr_db / 10),
/// half in each quadrature. An infinite snr_db returns the input unchanged.
NoisySignal add_awgn(const IQSignal& signal, double snr_db, Rng& rng);

// min, min + step, ... up to and including max.
std::vector<int> snr_grid(int min_db, int max_db, int step_db);

struct QrfOptions {
  ToneSpec tones;
  QrfClassTable table = QrfClassTable::default_table();
  std::size_t per_class_per_snr = 1000;
  std::vector<int> snrs = snr_grid(-20, 18, 2);
  std::size_t timesteps = 128;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

std::size_t qrf_record_count(const QrfOptions& options) noexcept;

/// Example `index` in (class, snr, repeat) order, drawn from its own
/// stream Rng::derive(seed, index): tone phases first, then noise.
LabeledExample gen_qrf_example(const QrfOptions& options, std::size_t index);

std::vector<LabeledExample> gen_qrf_examples(const QrfOptions& options);
// Streams the dataset to disk in record order; output does not depend on threads.
void write_qrf_dataset(const std::filesystem::path& path, const QrfOptions& options);

}  // namespace cwtrnn::datagen

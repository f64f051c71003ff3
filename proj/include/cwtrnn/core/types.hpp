// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace cwtrnn {

using Complex = std::complex<double>;

/// Complex baseband timeseries s_t = i_t + j*q_t.
///
/// Samples are held in double precision; the dataset container stores them
/// as f32, so a signal read back from disk holds exactly representable
/// single-precision values.
struct IQSignal {
  std::vector<Complex> samples;
  double sample_rate_hz = 1.0;

  IQSignal() = default;
  explicit IQSignal(std::vector<Complex> s, double rate = 1.0)
      : samples(std::move(s)), sample_rate_hz(rate) {}

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  const Complex& operator[](std::size_t t) const { return samples[t]; }
  Complex& operator[](std::size_t t) { return samples[t]; }

  // Mean of |s_t|^2.
  double mean_power() const noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const IQSignal&, const IQSignal&) = default;
};

// SNR recorded for noiseless records (the container stores SNR as i16 dB).
inline constexpr std::int16_t kNoiselessSnrDb = std::numeric_limits<std::int16_t>::max();

struct LabeledExample {
  IQSignal signal;
  std::uint16_t class_id = 0;
  std::int16_t snr_db = 0;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

}  // namespace cwtrnn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cwtrnn/core/types.hpp"
#include "cwtrnn/cwt/morlet.hpp"

namespace cwtrnn::cwt {

// T x F grid of complex wavelet coefficients, row-major by time.
struct CoefficientGrid {
  std::size_t timesteps = 0;
  std::size_t freq_count = 0;
  std::vector<Complex> values;

  const Complex& at(std::size_t t, std::size_t f) const { return values[t * freq_count + f]; }
  Complex& at(std::size_t t, std::size_t f) { return values[t * freq_count + f]; }
};

struct Spectrogram {
  std::size_t timesteps = 0;
  std::size_t freq_count = 0;
  std::vector<double> amplitude;  // T x F, >= 0
  std::vector<double> phase;      // T x F, in (-pi, pi]
  std::vector<double> frequencies;
  double sample_rate_hz = 1.0;

  double amp(std::size_t t, std::size_t f) const { return amplitude[t * freq_count + f]; }
  double phi(std::size_t t, std::size_t f) const { return phase[t * freq_count + f]; }
};

enum class Method { kFft, kDirect };

/// Precomputed transform for a fixed (params, length, sample rate).
///
/// Per frequency, the output is the same-length correlation
///   c(t, f) = sum_m s[t + m] * conj(w_f[m])
/// with zeros outside the signal. The FFT path zero-pads to a power of two
/// of at least T + 2M; kernel taps beyond |m| = T - 1 never overlap the
/// signal and are dropped, so long kernels cost no more than 2T - 1 taps.
/// Immutable after construction; `coefficients` may be called concurrently.
class CwtPlan {
 public:
  CwtPlan(MorletParams params, std::size_t timesteps, double sample_rate_hz = 1.0,
          std::size_t max_kernel_length = 0 /* 0 = max(16 * timesteps, 65536) */);
  ~CwtPlan();
  CwtPlan(CwtPlan&&) noexcept;
  CwtPlan& operator=(CwtPlan&&) noexcept;

  CoefficientGrid coefficients(const IQSignal& signal, Method method = Method::kFft) const;
  Spectrogram transform(const IQSignal& signal, Method method = Method::kFft) const;

  const MorletParams& params() const noexcept;
  std::size_t timesteps() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

CoefficientGrid cwt_coefficients(const IQSignal& signal, const MorletParams& params,
                                 Method method = Method::kFft);
Spectrogram cwt(const IQSignal& signal, const MorletParams& params, Method method = Method::kFft);

Spectrogram to_spectrogram(const CoefficientGrid& grid, std::vector<double> frequencies,
                           double sample_rate_hz);

// Per-timestep input rows [A(t, f_1..f_F), phi(t, f_1..f_F)], row-major T x 2F.
struct FeatureSequence {
  std::size_t timesteps = 0;
  std::size_t width = 0;
  std::vector<float> values;

  const float* row(std::size_t t) const { return values.data() + t * width; }
};

FeatureSequence spectrogram_to_features(const Spectrogram& spec);

// Variance (Hz^2) of grid frequency under p(f) proportional to sum_t A(t, f).
double frequency_spread(const Spectrogram& spec);
// Index of the largest amplitude at time t.
std::size_t ridge_index(const Spectrogram& spec, std::size_t t);

}  // namespace cwtrnn::cwt

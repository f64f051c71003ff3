// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "cwtrnn/core/types.hpp"

namespace cwtrnn::cwt {

// Gaussian envelope width in seconds, the same for every frequency.
struct FixedSigma {
  double seconds = 2.0;
  friend bool operator==(const FixedSigma&, const FixedSigma&) = default;
};

// Envelope width follows n cycles of the carrier: sigma = n / f.
struct FixedCycles {
  double cycles = 2.0;
  friend bool operator==(const FixedCycles&, const FixedCycles&) = default;
};

using SigmaMode = std::variant<FixedSigma, FixedCycles>;

enum class GridSpacing { kLog, kLinear };

// Kernels are sampled on t in [-K sigma, +K sigma]; exp(-K^2/2) < 3.4e-4 at K = 4.
inline constexpr double kDefaultTruncation = 4.0;

struct MorletParams {
  SigmaMode sigma = FixedSigma{2.0};
  std::vector<double> frequencies;  // Hz, strictly increasing, all > 0
  double truncation = kDefaultTruncation;

  // Throws InvalidArgument when the invariants above do not hold.
  void validate() const;

  friend bool operator==(const MorletParams&, const MorletParams&) = default;
};

double effective_sigma(double frequency_hz, const SigmaMode& mode);

/// `count` frequencies from f_min to f_max inclusive. Requires
/// 0 < f_min < f_max <= sample_rate / 2 and count >= 2.
std::vector<double> frequency_grid(std::size_t count, double f_min, double f_max,
                                   GridSpacing spacing = GridSpacing::kLog, double sample_rate_hz = 1.0);

// 32 log-spaced values from 1/T Hz to 0.3 Hz for T-sample, 1 Hz signals.
std::vector<double> nominal_frequency_grid(std::size_t timesteps = 128);

// Sigma = 2 s on the nominal grid.
MorletParams nominal_params(std::size_t timesteps = 128);

/// Discrete Morlet wavelet w[m] = exp(2 pi i f m dt) exp(-(m dt)^2 / 2 sigma^2)
/// for m in [-M, M], M = floor(K sigma fs), scaled to unit L2 norm.
/// Length is 2M + 1 with the t = 0 sample at index M. Throws when the
/// length exceeds `max_length`.
std::vector<Complex> morlet_kernel(double frequency_hz, const SigmaMode& mode, double sample_rate_hz,
                                   std::size_t max_length, double truncation = kDefaultTruncation);

// Half-width M of the kernel above.
std::size_t kernel_half_width(double frequency_hz, const SigmaMode& mode, double sample_rate_hz,
                              double truncation = kDefaultTruncation);

}  // namespace cwtrnn::cwt

// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/cwt/morlet.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cwtrnn/core/error.hpp"

namespace cwtrnn::cwt {

void MorletParams::validate() const {
  std::visit(
      [](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, FixedSigma>) {
          if (!(m.seconds > 0.0)) throw InvalidArgument("sigma must be positive");
        } else {
          if (!(m.cycles > 0.0)) throw InvalidArgument("cycle count must be positive");
        }
      },
      sigma);
  if (frequencies.empty()) throw InvalidArgument("frequency grid is empty");
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (!(frequencies[i] > 0.0)) throw InvalidArgument("frequencies must be positive");
    if (i > 0 && !(frequencies[i] > frequencies[i - 1])) {
      throw InvalidArgument("frequencies must be strictly increasing");
    }
  }
  if (!(truncation > 0.0)) throw InvalidArgument("truncation must be positive");
}

double effective_sigma(double frequency_hz, const SigmaMode& mode) {
  if (const auto* fs = std::get_if<FixedSigma>(&mode)) return fs->seconds;
  return std::get<FixedCycles>(mode).cycles / frequency_hz;
}

std::vector<double> frequency_grid(std::size_t count, double f_min, double f_max, GridSpacing spacing,
                                   double sample_rate_hz) {
  if (count < 2) throw InvalidArgument("frequency grid needs at least 2 points");
  if (!(f_min > 0.0) || !(f_min < f_max)) throw InvalidArgument("need 0 < f_min < f_max");
  if (f_max > sample_rate_hz / 2.0) {
    throw InvalidArgument("f_max " + std::to_string(f_max) + " Hz above Nyquist " +
                          std::to_string(sample_rate_hz / 2.0) + " Hz");
  }
  std::vector<double> out(count);
  const double last = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = static_cast<double>(i) / last;
    out[i] = spacing == GridSpacing::kLog ? f_min * std::pow(f_max / f_min, u) : f_min + (f_max - f_min) * u;
  }
  // Exact endpoints regardless of pow rounding.
  out.front() = f_min;
  out.back() = f_max;
  return out;
}

std::vector<double> nominal_frequency_grid(std::size_t timesteps) {
  return frequency_grid(32, 1.0 / static_cast<double>(timesteps), 0.3, GridSpacing::kLog, 1.0);
}

MorletParams nominal_params(std::size_t timesteps) {
  MorletParams p;
  p.sigma = FixedSigma{2.0};
  p.frequencies = nominal_frequency_grid(timesteps);
  return p;
}

std::size_t kernel_half_width(double frequency_hz, const SigmaMode& mode, double sample_rate_hz,
                              double truncation) {
  const double sigma = effective_sigma(frequency_hz, mode);
  return static_cast<std::size_t>(std::floor(truncation * sigma * sample_rate_hz));
}

std::vector<Complex> morlet_kernel(double frequency_hz, const SigmaMode& mode, double sample_rate_hz,
                                   std::size_t max_length, double truncation) {
  if (!(frequency_hz > 0.0)) throw InvalidArgument("kernel frequency must be positive");
  if (!(sample_rate_hz > 0.0)) throw InvalidArgument("sample rate must be positive");
  const double sigma = effective_sigma(frequency_hz, mode);
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  const std::size_t half = kernel_half_width(frequency_hz, mode, sample_rate_hz, truncation);
  const std::size_t length = 2 * half + 1;
  if (length > max_length) {
    throw InvalidArgument("Morlet kernel at " + std::to_string(frequency_hz) + " Hz needs " +
                          std::to_string(length) + " taps, limit is " + std::to_string(max_length));
  }
  std::vector<Complex> w(length);
  const double dt = 1.0 / sample_rate_hz;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    const double t = (static_cast<double>(i) - static_cast<double>(half)) * dt;
    const double envelope = std::exp(-t * t / (2.0 * sigma * sigma));
    const double arg = 2.0 * std::numbers::pi * frequency_hz * t;
    w[i] = envelope * Complex(std::cos(arg), std::sin(arg));
    norm2 += envelope * envelope;
  }
  const double scale = 1.0 / std::sqrt(norm2);
  for (auto& v : w) v *= scale;
  return w;
}

}  // namespace cwtrnn::cwt

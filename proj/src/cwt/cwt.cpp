// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/cwt/cwt.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>

#include "cwtrnn/core/error.hpp"

namespace cwtrnn::cwt {

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

double principal_phase(const Complex& c) {
  const double a = std::arg(c);
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

}  // namespace

struct CwtPlan::Impl {
  MorletParams params;
  std::size_t timesteps = 0;
  double sample_rate_hz = 1.0;
  std::size_t fft_size = 0;
  // Cropped kernels (half-width <= T - 1), tap m at index half + m.
  std::vector<std::vector<Complex>> kernels;
  std::vector<std::size_t> half_widths;
  // FFT of the time-reversed conjugate kernel, one row per frequency.
  std::vector<std::vector<Complex>> kernel_spectra;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

CwtPlan::CwtPlan(MorletParams params, std::size_t timesteps, double sample_rate_hz,
                 std::size_t max_kernel_length)
    : impl_(std::make_unique<Impl>()) {
  params.validate();
  if (timesteps == 0) throw InvalidArgument("signal length must be at least 1");
  if (max_kernel_length == 0) max_kernel_length = std::max<std::size_t>(16 * timesteps, std::size_t{1} << 16);
  auto& im = *impl_;
  im.params = std::move(params);
  im.timesteps = timesteps;
  im.sample_rate_hz = sample_rate_hz;

  std::size_t max_half = 0;
  for (double f : im.params.frequencies) {
    auto full = morlet_kernel(f, im.params.sigma, sample_rate_hz, max_kernel_length, im.params.truncation);
    const std::size_t half = full.size() / 2;
    const std::size_t kept = std::min(half, timesteps - 1);
    im.kernels.emplace_back(full.begin() + static_cast<std::ptrdiff_t>(half - kept),
                            full.begin() + static_cast<std::ptrdiff_t>(half + kept + 1));
    im.half_widths.push_back(kept);
    max_half = std::max(max_half, kept);
  }

  im.fft_size = std::bit_ceil(timesteps + max_half);
  const std::size_t n = im.fft_size;
  std::vector<Complex> a(n), b(n);
  {
    std::lock_guard lock(planner_mutex());
    im.forward = fftw_plan_dft_1d(static_cast<int>(n), as_fftw(a.data()), as_fftw(b.data()), FFTW_FORWARD,
                                  FFTW_ESTIMATE | FFTW_UNALIGNED);
    im.backward = fftw_plan_dft_1d(static_cast<int>(n), as_fftw(a.data()), as_fftw(b.data()), FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  if (!im.forward || !im.backward) throw Error("FFTW planning failed");

  for (std::size_t k = 0; k < im.kernels.size(); ++k) {
    std::fill(a.begin(), a.end(), Complex{});
    const auto& w = im.kernels[k];
    const auto half = static_cast<std::ptrdiff_t>(im.half_widths[k]);
    // g[j] = conj(w[-j]) stored circularly.
    for (std::ptrdiff_t m = -half; m <= half; ++m) {
      const std::ptrdiff_t j = -m;
      const std::size_t slot = static_cast<std::size_t>((j + static_cast<std::ptrdiff_t>(n)) %
                                                         static_cast<std::ptrdiff_t>(n));
      a[slot] = std::conj(w[static_cast<std::size_t>(m + half)]);
    }
    fftw_execute_dft(im.forward, as_fftw(a.data()), as_fftw(b.data()));
    im.kernel_spectra.push_back(b);
  }
}

CwtPlan::~CwtPlan() = default;
CwtPlan::CwtPlan(CwtPlan&&) noexcept = default;
CwtPlan& CwtPlan::operator=(CwtPlan&&) noexcept = default;

const MorletParams& CwtPlan::params() const noexcept { return impl_->params; }
std::size_t CwtPlan::timesteps() const noexcept { return impl_->timesteps; }

CoefficientGrid CwtPlan::coefficients(const IQSignal& signal, Method method) const {
  const auto& im = *impl_;
  if (signal.size() != im.timesteps) {
    throw ShapeError("CWT plan built for " + std::to_string(im.timesteps) + " samples, got " +
                     std::to_string(signal.size()));
  }
  const std::size_t T = im.timesteps;
  const std::size_t F = im.kernels.size();
  CoefficientGrid out{T, F, std::vector<Complex>(T * F)};

  if (method == Method::kDirect) {
    for (std::size_t f = 0; f < F; ++f) {
      const auto& w = im.kernels[f];
      const auto half = static_cast<std::ptrdiff_t>(im.half_widths[f]);
      for (std::size_t t = 0; t < T; ++t) {
        Complex acc{};
        for (std::ptrdiff_t m = -half; m <= half; ++m) {
          const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) + m;
          if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(T)) continue;
          acc += signal[static_cast<std::size_t>(idx)] * std::conj(w[static_cast<std::size_t>(m + half)]);
        }
        out.at(t, f) = acc;
      }
    }
    return out;
  }

  const std::size_t n = im.fft_size;
  std::vector<Complex> buf(n), spectrum(n), product(n);
  std::copy(signal.samples.begin(), signal.samples.end(), buf.begin());
  fftw_execute_dft(im.forward, as_fftw(buf.data()), as_fftw(spectrum.data()));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t f = 0; f < F; ++f) {
    const auto& g = im.kernel_spectra[f];
    for (std::size_t k = 0; k < n; ++k) product[k] = spectrum[k] * g[k];
    fftw_execute_dft(im.backward, as_fftw(product.data()), as_fftw(buf.data()));
    for (std::size_t t = 0; t < T; ++t) out.at(t, f) = buf[t] * inv_n;
  }
  return out;
}

Spectrogram CwtPlan::transform(const IQSignal& signal, Method method) const {
  return to_spectrogram(coefficients(signal, method), impl_->params.frequencies, impl_->sample_rate_hz);
}

CoefficientGrid cwt_coefficients(const IQSignal& signal, const MorletParams& params, Method method) {
  return CwtPlan(params, signal.size(), signal.sample_rate_hz).coefficients(signal, method);
}

Spectrogram cwt(const IQSignal& signal, const MorletParams& params, Method method) {
  return CwtPlan(params, signal.size(), signal.sample_rate_hz).transform(signal, method);
}

Spectrogram to_spectrogram(const CoefficientGrid& grid, std::vector<double> frequencies,
                           double sample_rate_hz) {
  if (frequencies.size() != grid.freq_count) throw ShapeError("frequency list does not match grid");
  Spectrogram s;
  s.timesteps = grid.timesteps;
  s.freq_count = grid.freq_count;
  s.frequencies = std::move(frequencies);
  s.sample_rate_hz = sample_rate_hz;
  s.amplitude.resize(grid.values.size());
  s.phase.resize(grid.values.size());
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    s.amplitude[i] = std::abs(grid.values[i]);
    s.phase[i] = principal_phase(grid.values[i]);
  }
  return s;
}

FeatureSequence spectrogram_to_features(const Spectrogram& spec) {
  const std::size_t F = spec.freq_count;
  FeatureSequence out{spec.timesteps, 2 * F, std::vector<float>(spec.timesteps * 2 * F)};
  for (std::size_t t = 0; t < spec.timesteps; ++t) {
    float* row = out.values.data() + t * out.width;
    for (std::size_t f = 0; f < F; ++f) {
      row[f] = static_cast<float>(spec.amp(t, f));
      row[F + f] = static_cast<float>(spec.phi(t, f));
    }
  }
  return out;
}

double frequency_spread(const Spectrogram& spec) {
  std::vector<double> marginal(spec.freq_count, 0.0);
  for (std::size_t t = 0; t < spec.timesteps; ++t) {
    for (std::size_t f = 0; f < spec.freq_count; ++f) marginal[f] += spec.amp(t, f);
  }
  double total = 0.0;
  for (double m : marginal) total += m;
  if (!(total > 0.0)) return 0.0;
  double mean = 0.0;
  for (std::size_t f = 0; f < spec.freq_count; ++f) mean += marginal[f] / total * spec.frequencies[f];
  double var = 0.0;
  for (std::size_t f = 0; f < spec.freq_count; ++f) {
    const double d = spec.frequencies[f] - mean;
    var += marginal[f] / total * d * d;
  }
  return var;
}

std::size_t ridge_index(const Spectrogram& spec, std::size_t t) {
  const double* row = spec.amplitude.data() + t * spec.freq_count;
  return static_cast<std::size_t>(std::max_element(row, row + spec.freq_count) - row);
}

}  // namespace cwtrnn::cwt

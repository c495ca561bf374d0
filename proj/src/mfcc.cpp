// Copyright (c) 2026, The DS-ResNet KWS Authors
// SPDX-License-Identifier: Apache-2.0

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "dsresnet/audio.hpp"
#include "dsresnet/errors.hpp"

namespace dsresnet {
namespace {

// FFTW planning is not thread-safe; execution with a finished plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct MfccExtractor::Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

double hz_to_mel(double hz) noexcept { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) noexcept { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MfccExtractor::MfccExtractor(MfccConfig config) : config_(config), plan_(std::make_unique<Plan>()) {
  if (config_.window == 0 || config_.hop == 0 || config_.fft_size < config_.window ||
      config_.num_filters == 0 || config_.num_coeffs == 0 ||
      config_.num_coeffs > config_.num_filters || !(config_.low_hz < config_.high_hz)) {
    throw ConfigError("mfcc: inconsistent configuration");
  }
  const std::size_t n = config_.window;
  window_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                      static_cast<double>(n));
  }

  // Triangular filters with edges equally spaced on the mel scale,
  // evaluated at each FFT bin frequency.
  const std::size_t bins = config_.fft_size / 2 + 1;
  const std::size_t f = config_.num_filters;
  const double mel_lo = hz_to_mel(config_.low_hz), mel_hi = hz_to_mel(config_.high_hz);
  std::vector<double> edges(f + 2);
  for (std::size_t i = 0; i < f + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(f + 1));
  }
  filterbank_.assign(f * bins, 0.0);
  for (std::size_t m = 0; m < f; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * config_.sample_rate / config_.fft_size;
      double weight = 0.0;
      if (hz > left && hz <= center) weight = (hz - left) / (center - left);
      else if (hz > center && hz < right) weight = (right - hz) / (right - center);
      filterbank_[m * bins + k] = weight;
    }
  }

  const std::size_t c = config_.num_coeffs;
  dct_.resize(c * f);
  for (std::size_t k = 0; k < c; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(f));
    for (std::size_t i = 0; i < f; ++i) {
      dct_[k * f + i] = scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                         (2.0 * static_cast<double>(i) + 1.0) /
                                         (2.0 * static_cast<double>(f)));
    }
  }

  std::vector<double> in(config_.fft_size);
  std::vector<std::complex<double>> out(bins);
  std::lock_guard lock(planner_mutex());
  plan_->plan = fftw_plan_dft_r2c_1d(static_cast<int>(config_.fft_size), in.data(),
                                     reinterpret_cast<fftw_complex*>(out.data()),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan_->plan) throw ConfigError("mfcc: FFT planning failed");
}

MfccExtractor::~MfccExtractor() = default;

std::size_t MfccExtractor::frame_count(std::size_t samples) const noexcept {
  return 1 + samples / config_.hop;
}

Tensor MfccExtractor::compute(std::span<const double> samples) const {
  const std::size_t n = samples.size();
  const std::size_t half = config_.window / 2;
  if (n <= half) throw IngestionError("mfcc: signal shorter than half a window");
  for (double s : samples) {
    if (!std::isfinite(s)) throw NumericError("mfcc: non-finite sample");
  }

  // Reflect padding, edge sample not repeated.
  std::vector<double> padded(n + 2 * half);
  for (std::size_t i = 0; i < half; ++i) {
    padded[i] = samples[half - i];
    padded[half + n + i] = samples[n - 2 - i];
  }
  std::copy(samples.begin(), samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(half));

  const std::size_t frames = frame_count(n);
  const std::size_t bins = config_.fft_size / 2 + 1;
  const std::size_t f = config_.num_filters, c = config_.num_coeffs;
  Tensor out({1, frames, c});
  std::vector<double> frame(config_.fft_size, 0.0);
  std::vector<std::complex<double>> spectrum(bins);
  std::vector<double> magnitude(bins), log_mel(f);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = padded.data() + t * config_.hop;
    for (std::size_t i = 0; i < config_.window; ++i) frame[i] = src[i] * window_[i];
    fftw_execute_dft_r2c(plan_->plan, frame.data(), reinterpret_cast<fftw_complex*>(spectrum.data()));
    for (std::size_t k = 0; k < bins; ++k) magnitude[k] = std::abs(spectrum[k]);
    for (std::size_t m = 0; m < f; ++m) {
      double energy = 0.0;
      const double* weights = filterbank_.data() + m * bins;
      for (std::size_t k = 0; k < bins; ++k) energy += weights[k] * magnitude[k];
      log_mel[m] = std::log(std::max(energy, config_.log_floor));
    }
    for (std::size_t k = 0; k < c; ++k) {
      double sum = 0.0;
      for (std::size_t m = 0; m < f; ++m) sum += dct_[k * f + m] * log_mel[m];
      out[t * c + k] = sum;
    }
  }
  return out;
}

Tensor mfcc(std::span<const double> samples) {
  if (samples.size() != kClipSamples) {
    throw IngestionError("mfcc: expected " + std::to_string(kClipSamples) + " samples, got " +
                         std::to_string(samples.size()));
  }
  static const MfccExtractor extractor;
  return extractor.compute(samples);
}

}  // namespace dsresnet

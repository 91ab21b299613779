#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "otmorph/errors.hpp"
#include "otmorph/fft.hpp"
#include "otmorph/grid.hpp"
#include "otmorph/summation.hpp"

namespace otmorph {

// Short-time Fourier analysis and synthesis.
//
// Framing policy: frames are whole windows inside the signal, hop-spaced from
// sample 0; a trailing partial frame is dropped and there is no zero padding.
// The analysis window is a periodic Hann, the FFT length equals the window
// length, and synthesis is weighted overlap-add normalized by the summed
// squared window, which makes istft the least-squares inverse of stft.

struct AnalysisConfig {
  int sample_rate_hz = 0;
  double window_ms = 0.0;
  double overlap_frac = 0.0;
  int window_samples = 0;  // derived, even
  int hop_samples = 0;     // derived, >= 1
  int bins = 0;            // derived, window_samples / 2 + 1

  bool operator==(const AnalysisConfig&) const = default;
};

inline AnalysisConfig make_analysis_config(int sample_rate_hz, double window_ms,
                                           double overlap_frac) {
  if (sample_rate_hz < 1) throw InputError("analysis: sample rate must be positive");
  if (!(window_ms > 0.0)) throw InputError("analysis: window duration must be positive");
  if (!(overlap_frac >= 0.0 && overlap_frac < 1.0))
    throw InputError("analysis: overlap must lie in [0, 1)");
  AnalysisConfig cfg;
  cfg.sample_rate_hz = sample_rate_hz;
  cfg.window_ms = window_ms;
  cfg.overlap_frac = overlap_frac;
  cfg.window_samples = static_cast<int>(std::lround(sample_rate_hz * window_ms / 1000.0));
  if (cfg.window_samples < 2 || cfg.window_samples % 2 != 0)
    throw InputError("analysis: window must span an even, positive number of samples");
  cfg.hop_samples = static_cast<int>(std::lround(cfg.window_samples * (1.0 - overlap_frac)));
  if (cfg.hop_samples < 1) throw InputError("analysis: hop must be at least one sample");
  cfg.bins = cfg.window_samples / 2 + 1;
  return cfg;
}

// Periodic Hann, w[t] = 0.5 - 0.5 cos(2 pi t / W). Sums to a constant at 50%
// overlap, which keeps frame totals stable; synthesis normalization below does
// not rely on that.
inline std::vector<double> hann_window(int length) {
  std::vector<double> w(length);
  for (int t = 0; t < length; ++t)
    w[t] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / length);
  return w;
}

struct ComplexSpectrogram {
  AnalysisConfig config;
  int frames = 0;
  // bins x frames, frame-major: coeffs[n * bins + m]
  std::vector<std::complex<double>> coeffs;

  std::complex<double>& at(int m, int n) {
    return coeffs[static_cast<std::size_t>(n) * config.bins + m];
  }
  const std::complex<double>& at(int m, int n) const {
    return coeffs[static_cast<std::size_t>(n) * config.bins + m];
  }
  void validate() const {
    if (coeffs.size() != static_cast<std::size_t>(config.bins) * frames)
      throw InputError("spectrogram: coefficient count does not match dimensions");
  }
};

struct MagSpectrogram {
  AnalysisConfig config;
  int frames = 0;
  std::vector<double> values;  // bins x frames, frame-major

  double& at(int m, int n) { return values[static_cast<std::size_t>(n) * config.bins + m]; }
  const double& at(int m, int n) const {
    return values[static_cast<std::size_t>(n) * config.bins + m];
  }
  void validate() const {
    if (values.size() != static_cast<std::size_t>(config.bins) * frames)
      throw InputError("spectrogram: value count does not match dimensions");
    for (double v : values)
      if (!(v >= 0.0)) throw InputError("spectrogram: magnitudes must be nonnegative");
  }

  TfGrid grid(CoordMode mode = CoordMode::dimensionless) const {
    return build_grid(config.bins, frames, config.sample_rate_hz, config.hop_samples, mode);
  }
};

inline int frame_count(std::size_t signal_len, const AnalysisConfig& cfg) {
  if (signal_len < static_cast<std::size_t>(cfg.window_samples)) return 0;
  return static_cast<int>((signal_len - cfg.window_samples) / cfg.hop_samples) + 1;
}

// Number of samples istft will produce for N frames.
inline std::size_t synthesis_length(int frames, const AnalysisConfig& cfg) {
  return static_cast<std::size_t>(frames - 1) * cfg.hop_samples + cfg.window_samples;
}

inline ComplexSpectrogram stft(std::span<const double> signal, const AnalysisConfig& cfg) {
  if (signal.size() < static_cast<std::size_t>(cfg.window_samples))
    throw InputError("stft: signal too short");
  for (double x : signal)
    if (!std::isfinite(x)) throw InputError("stft: invalid signal");

  const int W = cfg.window_samples;
  const int M = cfg.bins;
  const int N = frame_count(signal.size(), cfg);
  const std::vector<double> window = hann_window(W);
  Fft fft(static_cast<std::size_t>(W));

  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.frames = N;
  spec.coeffs.resize(static_cast<std::size_t>(M) * N);

  std::vector<std::complex<double>> frame(W);
  for (int n = 0; n < N; ++n) {
    const double* x = signal.data() + static_cast<std::size_t>(n) * cfg.hop_samples;
    for (int t = 0; t < W; ++t) frame[t] = std::complex<double>(x[t] * window[t], 0.0);
    fft.forward(frame);
    for (int m = 0; m < M; ++m) spec.coeffs[static_cast<std::size_t>(n) * M + m] = frame[m];
  }
  return spec;
}

inline std::vector<double> istft(const ComplexSpectrogram& spec) {
  spec.validate();
  const AnalysisConfig& cfg = spec.config;
  const int W = cfg.window_samples;
  const int M = cfg.bins;
  const int N = spec.frames;
  if (N < 1) throw InputError("istft: empty spectrogram");
  const std::vector<double> window = hann_window(W);
  Fft fft(static_cast<std::size_t>(W));

  const std::size_t out_len = synthesis_length(N, cfg);
  std::vector<double> num(out_len, 0.0);
  std::vector<double> den(out_len, 0.0);

  std::vector<std::complex<double>> frame(W);
  for (int n = 0; n < N; ++n) {
    const std::complex<double>* col = spec.coeffs.data() + static_cast<std::size_t>(n) * M;
    for (int m = 0; m < M; ++m) frame[m] = col[m];
    for (int q = M; q < W; ++q) frame[q] = std::conj(col[W - q]);
    fft.inverse(frame);
    const std::size_t off = static_cast<std::size_t>(n) * cfg.hop_samples;
    for (int t = 0; t < W; ++t) {
      num[off + t] += window[t] * frame[t].real();
      den[off + t] += window[t] * window[t];
    }
  }
  for (std::size_t s = 0; s < out_len; ++s) num[s] = den[s] > 1e-12 ? num[s] / den[s] : 0.0;
  return num;
}

inline MagSpectrogram magnitude(const ComplexSpectrogram& spec) {
  spec.validate();
  MagSpectrogram mag;
  mag.config = spec.config;
  mag.frames = spec.frames;
  mag.values.resize(spec.coeffs.size());
  for (std::size_t k = 0; k < spec.coeffs.size(); ++k) mag.values[k] = std::abs(spec.coeffs[k]);
  return mag;
}

// Scale to unit total mass; returns the distribution and the original total
// so amplitude can be restored later.
inline std::pair<TfDistribution, double> normalize(const MagSpectrogram& X) {
  X.validate();
  const double total = compensated_total(X.values);
  if (!(total > 0.0)) throw NumericalError("normalize: silent input cannot be normalized");
  TfDistribution dist;
  dist.grid = X.grid();
  dist.mass.resize(X.values.size());
  for (std::size_t k = 0; k < X.values.size(); ++k) dist.mass[k] = X.values[k] / total;
  return {std::move(dist), total};
}

}  // namespace otmorph

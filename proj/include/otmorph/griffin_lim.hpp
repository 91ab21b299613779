#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <vector>

#include "otmorph/analysis.hpp"
#include "otmorph/errors.hpp"
#include "otmorph/summation.hpp"

namespace otmorph {

// Classical Griffin-Lim phase retrieval: alternate between the least-squares
// signal for the current spectrogram and substituting the target magnitude.
// Because istft here is the exact least-squares inverse, the consistency
// error below never increases from one iteration to the next.

struct GriffinLimParams {
  int iterations = 100;
  enum class Init { zero_phase, seeded_random } init = Init::zero_phase;
  std::uint64_t seed = 0;  // used only for seeded_random
};

// || |stft(istft(S))| - X ||_F / ||X||_F
inline double consistency_error(const MagSpectrogram& X, const ComplexSpectrogram& S) {
  X.validate();
  S.validate();
  if (X.config != S.config || X.frames != S.frames)
    throw InputError("consistency_error: shapes do not match");
  CompensatedSum norm2;
  for (double v : X.values) norm2.add(v * v);
  if (!(norm2.value() > 0.0)) throw NumericalError("consistency_error: zero-norm magnitude");

  auto round_trip = stft(istft(S), S.config);
  CompensatedSum err2;
  for (std::size_t k = 0; k < X.values.size(); ++k) {
    double d = std::abs(round_trip.coeffs[k]) - X.values[k];
    err2.add(d * d);
  }
  return std::sqrt(err2.value() / norm2.value());
}

inline ComplexSpectrogram griffin_lim(const MagSpectrogram& X,
                                      const GriffinLimParams& params = {},
                                      std::ostream* telemetry = nullptr) {
  X.validate();
  if (params.iterations < 1) throw InputError("griffin_lim: iterations must be >= 1");
  for (double v : X.values)
    if (!std::isfinite(v)) throw InputError("griffin_lim: invalid magnitude");

  ComplexSpectrogram S;
  S.config = X.config;
  S.frames = X.frames;
  S.coeffs.resize(X.values.size());

  double norm = 0.0;
  for (double v : X.values) norm += v * v;
  if (norm == 0.0) {
    // Nothing to reconstruct; the all-zero spectrogram is already consistent.
    for (auto& c : S.coeffs) c = {0.0, 0.0};
    return S;
  }

  if (params.init == GriffinLimParams::Init::zero_phase) {
    for (std::size_t k = 0; k < X.values.size(); ++k) S.coeffs[k] = {X.values[k], 0.0};
  } else {
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < X.values.size(); ++k) {
      double phi = u(rng);
      S.coeffs[k] = std::polar(X.values[k], phi);
    }
  }

  char line[96];
  for (int it = 1; it <= params.iterations; ++it) {
    auto estimate = stft(istft(S), S.config);
    if (telemetry) {
      CompensatedSum err2;
      for (std::size_t k = 0; k < X.values.size(); ++k) {
        double d = std::abs(estimate.coeffs[k]) - X.values[k];
        err2.add(d * d);
      }
      int len = std::snprintf(line, sizeof line, "griffin_lim,%d,%.17g\n", it,
                              std::sqrt(err2.value() / norm));
      telemetry->write(line, len);
    }
    for (std::size_t k = 0; k < X.values.size(); ++k) {
      double r = std::abs(estimate.coeffs[k]);
      // angle(0) = 0 keeps silent cells real-valued
      S.coeffs[k] = r > 0.0 ? estimate.coeffs[k] * (X.values[k] / r)
                            : std::complex<double>(X.values[k], 0.0);
    }
  }
  return S;
}

}  // namespace otmorph

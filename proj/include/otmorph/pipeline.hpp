#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "otmorph/analysis.hpp"
#include "otmorph/barycenter.hpp"
#include "otmorph/errors.hpp"
#include "otmorph/exact_ot.hpp"
#include "otmorph/griffin_lim.hpp"
#include "otmorph/uot.hpp"
#include "otmorph/wav.hpp"

namespace otmorph {

enum class Method { euclidean, ot, uot };

struct PipelineConfig {
  std::string source_path;
  std::string target_path;
  std::string output_path;
  double alpha = 0.5;
  Method method = Method::uot;
  int band = 0;  // frame band p; BandedCost::kUnlimited lifts the limit
  double beta = 1.0;
  double window_ms = 40.0;
  double overlap_frac = 0.5;
  int griffin_lim_iters = 100;
  double rel_tol = 1e-7;
  int max_iters = 2000;
  bool export_spectrograms = false;
  bool export_images = false;
  bool export_plan = false;
  std::string telemetry_path;  // empty disables telemetry
};

struct PipelineArtifacts {
  std::string output_wav;
  std::vector<std::string> spectrogram_csvs;
  std::vector<std::string> spectrogram_images;
  std::string plan_path;
  std::string telemetry_path;
  bool solver_converged = true;
  int solver_iterations = 0;
  int clipped_samples = 0;
};

// Linear-magnitude dump, `m,n,value` per cell with a header row. Values keep
// 17 significant digits so a re-parse reproduces the array exactly.
inline void write_spectrogram_csv(const std::string& path, const MagSpectrogram& X) {
  std::ofstream out(path);
  if (!out) throw InputError("csv: cannot write " + path);
  out << "m,n,value\n";
  char line[96];
  for (int n = 0; n < X.frames; ++n)
    for (int m = 0; m < X.config.bins; ++m) {
      int len = std::snprintf(line, sizeof line, "%d,%d,%.17g\n", m, n, X.at(m, n));
      out.write(line, len);
    }
  if (!out) throw InputError("csv: write failed for " + path);
}

inline MagSpectrogram read_spectrogram_csv(const std::string& path, const AnalysisConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw InputError("csv: cannot open " + path);
  std::string header;
  std::getline(in, header);
  struct Cell {
    int m, n;
    double v;
  };
  std::vector<Cell> cells;
  int m, n;
  double v;
  char comma;
  while (in >> m >> comma >> n >> comma >> v) cells.push_back({m, n, v});
  int frames = 0;
  for (const auto& c : cells) frames = std::max(frames, c.n + 1);
  MagSpectrogram X;
  X.config = cfg;
  X.frames = frames;
  X.values.assign(static_cast<std::size_t>(cfg.bins) * frames, 0.0);
  for (const auto& c : cells) X.at(c.m, c.n) = c.v;
  return X;
}

// 8-bit grayscale PGM of the log magnitude with an 80 dB floor, frequency
// increasing upward. Display-only; numeric exports stay linear.
inline void write_spectrogram_pgm(const std::string& path, const MagSpectrogram& X) {
  double peak = 0.0;
  for (double v : X.values) peak = std::max(peak, v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("pgm: cannot write " + path);
  out << "P5\n" << X.frames << " " << X.config.bins << "\n255\n";
  const double floor_db = -80.0;
  for (int m = X.config.bins - 1; m >= 0; --m) {
    for (int n = 0; n < X.frames; ++n) {
      double v = X.at(m, n);
      double db = (peak > 0.0 && v > 0.0) ? 20.0 * std::log10(v / peak) : floor_db;
      db = std::max(db, floor_db);
      int level = static_cast<int>(std::lround(255.0 * (db - floor_db) / -floor_db));
      out.put(static_cast<char>(std::clamp(level, 0, 255)));
    }
  }
  if (!out) throw InputError("pgm: write failed for " + path);
}

namespace detail {

inline std::string output_stem(const std::string& output_path) {
  if (output_path.size() > 4 && output_path.substr(output_path.size() - 4) == ".wav")
    return output_path.substr(0, output_path.size() - 4);
  return output_path;
}

inline void pad_frames(MagSpectrogram& X, int frames) {
  if (X.frames >= frames) return;
  X.values.resize(static_cast<std::size_t>(X.config.bins) * frames, 0.0);
  X.frames = frames;
}

}  // namespace detail

inline PipelineArtifacts run_pipeline(const PipelineConfig& config) {
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0))
    throw InputError("pipeline: alpha must lie in [0, 1]");
  if (config.method == Method::uot && !(config.beta > 0.0))
    throw InputError("pipeline: beta must be positive");

  WavData source = read_wav(config.source_path);
  WavData target = read_wav(config.target_path);
  if (source.sample_rate_hz != target.sample_rate_hz)
    throw InputError("pipeline: sample-rate mismatch (" + std::to_string(source.sample_rate_hz) +
                     " vs " + std::to_string(target.sample_rate_hz) + ")");

  PipelineArtifacts artifacts;
  artifacts.output_wav = config.output_path;
  const std::string stem = detail::output_stem(config.output_path);

  std::ofstream telemetry_file;
  std::ostream* telemetry = nullptr;
  if (!config.telemetry_path.empty()) {
    telemetry_file.open(config.telemetry_path);
    if (!telemetry_file) throw InputError("pipeline: cannot write " + config.telemetry_path);
    telemetry = &telemetry_file;
    artifacts.telemetry_path = config.telemetry_path;
  }

  const AnalysisConfig cfg =
      make_analysis_config(source.sample_rate_hz, config.window_ms, config.overlap_frac);

  auto export_panels = [&](const MagSpectrogram& s, const MagSpectrogram& t,
                           const MagSpectrogram& interp) {
    struct Panel {
      const char* name;
      const MagSpectrogram* spec;
    };
    const Panel panels[] = {{"source", &s}, {"target", &t}, {"interpolant", &interp}};
    for (const Panel& panel : panels) {
      if (config.export_spectrograms) {
        std::string path = stem + "_" + panel.name + ".csv";
        write_spectrogram_csv(path, *panel.spec);
        artifacts.spectrogram_csvs.push_back(path);
      }
      if (config.export_images) {
        std::string path = stem + "_" + panel.name + ".pgm";
        write_spectrogram_pgm(path, *panel.spec);
        artifacts.spectrogram_images.push_back(path);
      }
    }
  };

  if (config.method == Method::euclidean) {
    auto a = source.samples;
    auto b = target.samples;
    const std::size_t len = std::max(a.size(), b.size());
    a.resize(len, 0.0);
    b.resize(len, 0.0);
    auto mixed = euclidean_interpolate(a, b, config.alpha);
    artifacts.clipped_samples = write_wav(config.output_path, mixed, source.sample_rate_hz);
    if (config.export_spectrograms || config.export_images)
      export_panels(magnitude(stft(a, cfg)), magnitude(stft(b, cfg)),
                    magnitude(stft(mixed, cfg)));
    return artifacts;
  }

  auto mag_s = magnitude(stft(source.samples, cfg));
  auto mag_t = magnitude(stft(target.samples, cfg));
  const int frames = std::max(mag_s.frames, mag_t.frames);
  detail::pad_frames(mag_s, frames);
  detail::pad_frames(mag_t, frames);

  auto [dist_s, mass_s] = normalize(mag_s);
  auto [dist_t, mass_t] = normalize(mag_t);
  const TfGrid& grid = dist_s.grid;
  const BandedCost cost = config.band == BandedCost::kUnlimited
                              ? build_cost_unlimited(grid)
                              : build_cost(grid, config.band);

  std::optional<TransportPlan> plan;
  if (config.method == Method::ot) {
    auto result = solve_ot(dist_s, dist_t, cost);
    plan.emplace(std::move(result.plan));
    artifacts.solver_iterations = 0;
  } else {
    UotParams params;
    params.beta = config.beta;
    params.max_iters = config.max_iters;
    params.rel_tol = config.rel_tol;
    auto result = solve_uot(dist_s, dist_t, cost, params, telemetry);
    artifacts.solver_converged = result.converged;
    artifacts.solver_iterations = result.iterations;
    plan.emplace(std::move(result.plan));
  }

  if (config.export_plan) {
    artifacts.plan_path = stem + "_plan.txt";
    std::ofstream plan_file(artifacts.plan_path);
    if (!plan_file) throw InputError("pipeline: cannot write " + artifacts.plan_path);
    plan->write_triplets(plan_file);
  }

  auto cloud = displacement_interpolate(*plan, config.alpha);
  auto interpolant = reassign_to_grid(cloud, grid, cfg);
  interpolant = restore_amplitude(interpolant, mass_s, mass_t, config.alpha);

  GriffinLimParams gl;
  gl.iterations = config.griffin_lim_iters;
  auto rebuilt = griffin_lim(interpolant, gl, telemetry);
  auto samples = istft(rebuilt);
  artifacts.clipped_samples = write_wav(config.output_path, samples, source.sample_rate_hz);

  export_panels(mag_s, mag_t, interpolant);
  return artifacts;
}

}  // namespace otmorph

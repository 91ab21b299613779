// Command-line driver for the spectrogram-transport audio interpolator.
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "otmorph/banded_cost.hpp"
#include "otmorph/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "otmorph: interpolate between two sounds by optimal transport of their spectrograms"};

  otmorph::PipelineConfig config;
  std::string method = "uot";
  std::string band = "0";

  app.add_option("-s,--source", config.source_path, "source WAV (mono, 16-bit PCM or float32)")
      ->required();
  app.add_option("-t,--target", config.target_path, "target WAV (same sample rate as source)")
      ->required();
  app.add_option("-o,--output", config.output_path, "output WAV (16-bit PCM)")->required();
  app.add_option("--alpha", config.alpha, "interpolation weight in [0, 1]")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--method", method, "euclidean | ot | uot")
      ->check(CLI::IsMember({"euclidean", "ot", "uot"}))
      ->capture_default_str();
  app.add_option("--p", band, "time band half-width in frames, or 'inf' for the dense cost")
      ->capture_default_str();
  app.add_option("--beta", config.beta, "marginal-relaxation weight (uot only)")
      ->capture_default_str();
  app.add_option("--window-ms", config.window_ms, "analysis window duration in ms")
      ->capture_default_str();
  app.add_option("--overlap", config.overlap_frac, "window overlap fraction in [0, 1)")
      ->capture_default_str();
  app.add_option("--gl-iters", config.griffin_lim_iters, "phase-reconstruction iterations")
      ->capture_default_str();
  app.add_option("--rel-tol", config.rel_tol, "solver relative objective-change tolerance")
      ->capture_default_str();
  app.add_option("--max-iters", config.max_iters, "solver iteration cap")->capture_default_str();
  app.add_flag("--export-spectrograms", config.export_spectrograms,
               "write source/target/interpolant magnitudes as CSV");
  app.add_flag("--export-images", config.export_images,
               "write grayscale PGM spectrogram images (log magnitude, 80 dB floor)");
  app.add_flag("--export-plan", config.export_plan, "dump the transport plan as triplets");
  app.add_option("--telemetry", config.telemetry_path,
                 "write per-iteration solver and phase-reconstruction telemetry CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (method == "euclidean")
    config.method = otmorph::Method::euclidean;
  else if (method == "ot")
    config.method = otmorph::Method::ot;
  else
    config.method = otmorph::Method::uot;

  if (band == "inf") {
    config.band = otmorph::BandedCost::kUnlimited;
  } else {
    try {
      std::size_t used = 0;
      config.band = std::stoi(band, &used);
      if (used != band.size() || config.band < 0) throw std::invalid_argument(band);
    } catch (const std::exception&) {
      std::cerr << "error: --p expects a nonnegative integer or 'inf'\n";
      return 1;
    }
  }

  try {
    auto artifacts = otmorph::run_pipeline(config);
    if (artifacts.clipped_samples > 0)
      std::cerr << "warning: " << artifacts.clipped_samples
                << " samples clipped during 16-bit conversion\n";
    if (!artifacts.solver_converged)
      std::cerr << "warning: solver stopped at the iteration cap before meeting its tolerance\n";
    std::cout << "wrote " << artifacts.output_wav << "\n";
    for (const auto& path : artifacts.spectrogram_csvs) std::cout << "wrote " << path << "\n";
    for (const auto& path : artifacts.spectrogram_images) std::cout << "wrote " << path << "\n";
    if (!artifacts.plan_path.empty()) std::cout << "wrote " << artifacts.plan_path << "\n";
    if (!artifacts.telemetry_path.empty())
      std::cout << "wrote " << artifacts.telemetry_path << "\n";
    return 0;
  } catch (const otmorph::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

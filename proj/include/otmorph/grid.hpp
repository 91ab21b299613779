#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "otmorph/errors.hpp"

namespace otmorph {

enum class CoordMode {
  dimensionless,  // freq coordinate = bin index, time coordinate = frame index
  physical,       // Hz and seconds, derived from sample rate and hop
};

// Regular M x N time-frequency lattice with a fixed flat-index mapping.
// Grid point (m, n) <-> flat index i = n * bins + m, everything zero-based.
struct TfGrid {
  int bins = 0;    // M, frequency rows
  int frames = 0;  // N, time columns
  double sample_rate_hz = 0.0;
  int hop_samples = 0;
  CoordMode mode = CoordMode::dimensionless;

  int size() const { return bins * frames; }

  int index_of(int m, int n) const { return n * bins + m; }
  std::pair<int, int> point_of(int i) const { return {i % bins, i / bins}; }

  // Spacing between adjacent coordinates; both axes are uniform, so any
  // coordinate is index * step.
  double freq_step() const {
    return mode == CoordMode::dimensionless ? 1.0 : sample_rate_hz / (2.0 * bins);
  }
  double time_step() const {
    return mode == CoordMode::dimensionless ? 1.0 : hop_samples / sample_rate_hz;
  }

  double freq_coord(int m) const { return m * freq_step(); }
  double time_coord(int n) const { return n * time_step(); }

  bool same_layout(const TfGrid& other) const {
    return bins == other.bins && frames == other.frames && mode == other.mode &&
           (mode == CoordMode::dimensionless ||
            (sample_rate_hz == other.sample_rate_hz && hop_samples == other.hop_samples));
  }
};

inline TfGrid build_grid(int bins, int frames, double sample_rate_hz, int hop_samples,
                         CoordMode mode = CoordMode::dimensionless) {
  if (bins < 1 || frames < 1) throw InputError("grid: bins and frames must be >= 1");
  if (mode == CoordMode::physical && (sample_rate_hz <= 0.0 || hop_samples < 1))
    throw InputError("grid: physical coordinates need a sample rate and hop");
  return TfGrid{bins, frames, sample_rate_hz, hop_samples, mode};
}

// Nonnegative mass vector over a grid; unit total when produced by normalize().
struct TfDistribution {
  TfGrid grid;
  std::vector<double> mass;  // length grid.size()

  void validate() const {
    if (static_cast<int>(mass.size()) != grid.size())
      throw InputError("distribution: mass length does not match grid");
    for (double x : mass)
      if (!(x >= 0.0)) throw InputError("distribution: masses must be nonnegative");
  }
};

}  // namespace otmorph

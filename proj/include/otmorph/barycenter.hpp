#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "otmorph/analysis.hpp"
#include "otmorph/errors.hpp"
#include "otmorph/grid.hpp"
#include "otmorph/summation.hpp"
#include "otmorph/transport_plan.hpp"

namespace otmorph {

// Displacement interpolation of a transport plan: each plan entry becomes a
// point mass at the convex combination of its endpoint coordinates. The plan
// is solved once; sweeping alpha only re-runs this cheap geometric step.

struct PointMass {
  double freq = 0.0;
  double time = 0.0;
  double mass = 0.0;
};

struct PointMassCloud {
  TfGrid grid;  // the native grid the cloud will be reassigned onto
  std::vector<PointMass> points;

  double total_mass() const {
    CompensatedSum acc;
    for (const auto& p : points) acc.add(p.mass);
    return acc.value();
  }

  // CSV rows `freq,time,mass` for plotting the irregular support.
  void write_csv(std::ostream& out) const {
    char line[128];
    out << "freq,time,mass\n";
    for (const auto& p : points) {
      int len = std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", p.freq, p.time, p.mass);
      out.write(line, len);
    }
  }
};

inline PointMassCloud displacement_interpolate(const TransportPlan& plan, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InputError("displacement: alpha must lie in [0, 1]");
  const TfGrid& grid = plan.grid();
  const int M = grid.bins;

  PointMassCloud cloud;
  cloud.grid = grid;
  cloud.points.reserve(plan.nonzero_count());
  for (std::size_t b = 0; b < plan.block_count(); ++b) {
    const auto [n, n2] = plan.frame_pair(b);
    const double t = (1.0 - alpha) * grid.time_coord(n) + alpha * grid.time_coord(n2);
    const double* data = plan.block(b).data();
    for (int m = 0; m < M; ++m) {
      const double fm = grid.freq_coord(m);
      const double* line = data + static_cast<std::size_t>(m) * M;
      for (int m2 = 0; m2 < M; ++m2) {
        if (line[m2] == 0.0) continue;
        cloud.points.push_back(
            {(1.0 - alpha) * fm + alpha * grid.freq_coord(m2), t, line[m2]});
      }
    }
  }
  return cloud;
}

// Snap every point mass to the nearest native grid cell. Equidistant points
// go to the smaller frequency index, then the smaller time index. Cells
// accumulate in plain double following the cloud's own (plan-lexicographic)
// order, so the result is deterministic and totals are conserved.
inline MagSpectrogram reassign_to_grid(const PointMassCloud& cloud, const TfGrid& grid,
                                       const AnalysisConfig& config) {
  if (!cloud.grid.same_layout(grid))
    throw InputError("reassign: cloud was built for a different grid");
  if (config.bins != grid.bins)
    throw InputError("reassign: analysis config does not match the grid");
  MagSpectrogram out;
  out.config = config;
  out.frames = grid.frames;
  out.values.assign(static_cast<std::size_t>(grid.bins) * grid.frames, 0.0);

  const double fstep = grid.freq_step();
  const double tstep = grid.time_step();
  for (const auto& p : cloud.points) {
    // ceil(x - 1/2) rounds to nearest and sends exact halves down
    long m = static_cast<long>(std::ceil(p.freq / fstep - 0.5));
    long n = static_cast<long>(std::ceil(p.time / tstep - 0.5));
    m = std::min<long>(std::max<long>(m, 0), grid.bins - 1);
    n = std::min<long>(std::max<long>(n, 0), grid.frames - 1);
    out.values[static_cast<std::size_t>(n) * grid.bins + m] += p.mass;
  }
  return out;
}

// Rescale a normalized-scale spectrogram so its total interpolates the source
// and target totals returned by normalize().
inline MagSpectrogram restore_amplitude(const MagSpectrogram& X, double mass_source,
                                        double mass_target, double alpha) {
  if (!(mass_source > 0.0 && mass_target > 0.0))
    throw InputError("restore_amplitude: totals must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InputError("restore_amplitude: alpha must lie in [0, 1]");
  const double current = compensated_total(X.values);
  if (!(current > 0.0)) throw NumericalError("restore_amplitude: zero total mass");
  const double scale = ((1.0 - alpha) * mass_source + alpha * mass_target) / current;
  MagSpectrogram out = X;
  for (double& v : out.values) v *= scale;
  return out;
}

// Sample-wise convex combination of two equally long signals.
inline std::vector<double> euclidean_interpolate(std::span<const double> source,
                                                 std::span<const double> target, double alpha) {
  if (source.size() != target.size())
    throw InputError("euclidean: signals must have equal length");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("euclidean: alpha must lie in [0, 1]");
  std::vector<double> out(source.size());
  for (std::size_t s = 0; s < source.size(); ++s)
    out[s] = (1.0 - alpha) * source[s] + alpha * target[s];
  return out;
}

}  // namespace otmorph

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "otmorph/errors.hpp"
#include "otmorph/grid.hpp"

namespace otmorph {

// Squared-Euclidean ground cost on the t-f grid, finite only inside the time
// band |n - n'| <= p. Out-of-band entries are never stored or returned; they
// are a structural absence, not floating +inf. Because both coordinate axes
// are uniform, the whole matrix is determined by two per-axis tables of
// squared coordinate differences.
class BandedCost {
public:
  static constexpr int kUnlimited = std::numeric_limits<int>::max();

  BandedCost(const TfGrid& grid, int band) : grid_(grid), band_(band) {
    if (band < 0) throw InputError("cost: band must be nonnegative");
    int reach = effective_band();
    freq_sq_.resize(grid.bins);
    for (int d = 0; d < grid.bins; ++d) {
      double df = d * grid.freq_step();
      freq_sq_[d] = df * df;
    }
    time_sq_.resize(reach + 1);
    for (int d = 0; d <= reach; ++d) {
      double dt = d * grid.time_step();
      time_sq_[d] = dt * dt;
    }
  }

  const TfGrid& grid() const { return grid_; }
  int band() const { return band_; }
  bool unlimited() const { return band_ >= grid_.frames - 1; }

  // Band width actually usable on this grid.
  int effective_band() const { return std::min<long long>(band_, grid_.frames - 1); }

  bool in_band(int n, int n2) const {
    int d = n >= n2 ? n - n2 : n2 - n;
    return d <= effective_band();
  }

  // Cost between grid points (m, n) and (m2, n2); throws outside the band.
  double at_mn(int m, int n, int m2, int n2) const {
    if (!in_band(n, n2)) throw NumericalError("cost: lookup outside band");
    return freq_sq_[m >= m2 ? m - m2 : m2 - m] + time_sq_[n >= n2 ? n - n2 : n2 - n];
  }

  double at(int i, int i2) const {
    auto [m, n] = grid_.point_of(i);
    auto [m2, n2] = grid_.point_of(i2);
    return at_mn(m, n, m2, n2);
  }

  // Number of finite entries, i.e. in-band index pairs.
  std::uint64_t finite_entry_count() const {
    std::uint64_t q = effective_band();
    std::uint64_t n = grid_.frames;
    std::uint64_t pairs = n * (2 * q + 1) - q * (q + 1);
    std::uint64_t m = grid_.bins;
    return pairs * m * m;
  }

  // Per-axis squared-difference tables, indexed by |index delta|. The time
  // table only extends through the band.
  const std::vector<double>& freq_sq() const { return freq_sq_; }
  const std::vector<double>& time_sq() const { return time_sq_; }

private:
  TfGrid grid_;
  int band_;
  std::vector<double> freq_sq_;
  std::vector<double> time_sq_;
};

inline BandedCost build_cost(const TfGrid& grid, int band) { return BandedCost(grid, band); }
inline BandedCost build_cost_unlimited(const TfGrid& grid) {
  return BandedCost(grid, BandedCost::kUnlimited);
}

}  // namespace otmorph

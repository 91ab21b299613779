#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "otmorph/banded_cost.hpp"
#include "otmorph/errors.hpp"
#include "otmorph/grid.hpp"
#include "otmorph/summation.hpp"

namespace otmorph {

// Sparse nonnegative transport plan supported inside a frame band. Storage is
// one dense M x M block per in-band frame pair (n, n2), kept in lexicographic
// (n, n2) order; solvers sweep every in-band entry each iteration, so the
// blocks stay contiguous. Entry block[m * M + m2] is the mass moved from grid
// point (m, n) to grid point (m2, n2).
class TransportPlan {
public:
  TransportPlan(const TfGrid& grid, int band) : grid_(grid), band_(band) {
    if (band < 0) throw InputError("plan: band must be nonnegative");
    const int reach = effective_band();
    const std::size_t block_len =
        static_cast<std::size_t>(grid.bins) * static_cast<std::size_t>(grid.bins);
    for (int n = 0; n < grid.frames; ++n) {
      for (int n2 = std::max(0, n - reach); n2 <= std::min(grid.frames - 1, n + reach); ++n2) {
        frame_pairs_.push_back({n, n2});
      }
    }
    block_of_pair_.assign(static_cast<std::size_t>(grid.frames) * grid.frames, -1);
    blocks_.resize(frame_pairs_.size());
    for (std::size_t b = 0; b < frame_pairs_.size(); ++b) {
      blocks_[b].assign(block_len, 0.0);
      block_of_pair_[pair_key(frame_pairs_[b].first, frame_pairs_[b].second)] =
          static_cast<std::int64_t>(b);
    }
    row_marginal_.assign(grid.size(), 0.0);
    col_marginal_.assign(grid.size(), 0.0);
  }

  const TfGrid& grid() const { return grid_; }
  int band() const { return band_; }
  int effective_band() const { return std::min<long long>(band_, grid_.frames - 1); }

  std::size_t block_count() const { return blocks_.size(); }
  const std::pair<int, int>& frame_pair(std::size_t b) const { return frame_pairs_[b]; }
  std::vector<double>& block(std::size_t b) { return blocks_[b]; }
  const std::vector<double>& block(std::size_t b) const { return blocks_[b]; }

  bool in_band(int n, int n2) const {
    int d = n >= n2 ? n - n2 : n2 - n;
    return d <= effective_band();
  }

  // Mass between flat indices; zero outside the band.
  double mass(int i, int i2) const {
    auto [m, n] = grid_.point_of(i);
    auto [m2, n2] = grid_.point_of(i2);
    if (!in_band(n, n2)) return 0.0;
    const auto& blk = blocks_[block_index(n, n2)];
    return blk[static_cast<std::size_t>(m) * grid_.bins + m2];
  }

  void set_mass(int i, int i2, double value) {
    if (!(value >= 0.0)) throw InputError("plan: masses must be nonnegative");
    auto [m, n] = grid_.point_of(i);
    auto [m2, n2] = grid_.point_of(i2);
    if (!in_band(n, n2)) throw NumericalError("plan: entry outside band");
    blocks_[block_index(n, n2)][static_cast<std::size_t>(m) * grid_.bins + m2] = value;
  }

  // Recompute and cache P*1 and P^T*1.
  void refresh_marginals() {
    std::fill(row_marginal_.begin(), row_marginal_.end(), 0.0);
    std::fill(col_marginal_.begin(), col_marginal_.end(), 0.0);
    const int M = grid_.bins;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto [n, n2] = frame_pairs_[b];
      const double* blk = blocks_[b].data();
      double* row = row_marginal_.data() + static_cast<std::size_t>(n) * M;
      double* col = col_marginal_.data() + static_cast<std::size_t>(n2) * M;
      for (int m = 0; m < M; ++m) {
        double acc = 0.0;
        const double* line = blk + static_cast<std::size_t>(m) * M;
        for (int m2 = 0; m2 < M; ++m2) {
          acc += line[m2];
          col[m2] += line[m2];
        }
        row[m] += acc;
      }
    }
  }

  const std::vector<double>& row_marginal() const { return row_marginal_; }
  const std::vector<double>& col_marginal() const { return col_marginal_; }

  double total_mass() const {
    CompensatedSum acc;
    for (const auto& blk : blocks_)
      for (double x : blk) acc.add(x);
    return acc.value();
  }

  std::uint64_t nonzero_count() const {
    std::uint64_t c = 0;
    for (const auto& blk : blocks_)
      for (double x : blk)
        if (x != 0.0) ++c;
    return c;
  }

  // Triplet dump `i i2 mass`, one nonzero entry per line, zero-based flat
  // indices, 17 significant digits.
  void write_triplets(std::ostream& out) const {
    const int M = grid_.bins;
    char line[96];
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto [n, n2] = frame_pairs_[b];
      const double* blk = blocks_[b].data();
      for (int m = 0; m < M; ++m) {
        for (int m2 = 0; m2 < M; ++m2) {
          double x = blk[static_cast<std::size_t>(m) * M + m2];
          if (x == 0.0) continue;
          int len = std::snprintf(line, sizeof line, "%d %d %.17g\n", grid_.index_of(m, n),
                                  grid_.index_of(m2, n2), x);
          out.write(line, len);
        }
      }
    }
  }

  void read_triplets(std::istream& in) {
    for (auto& blk : blocks_) std::fill(blk.begin(), blk.end(), 0.0);
    int i, i2;
    double x;
    while (in >> i >> i2 >> x) set_mass(i, i2, x);
    refresh_marginals();
  }

private:
  std::size_t pair_key(int n, int n2) const {
    return static_cast<std::size_t>(n) * grid_.frames + n2;
  }
  std::size_t block_index(int n, int n2) const {
    return static_cast<std::size_t>(block_of_pair_[pair_key(n, n2)]);
  }

  TfGrid grid_;
  int band_;
  std::vector<std::pair<int, int>> frame_pairs_;
  std::vector<std::vector<double>> blocks_;
  std::vector<std::int64_t> block_of_pair_;
  std::vector<double> row_marginal_;
  std::vector<double> col_marginal_;
};

// <C, P>. The plan's support must lie inside the cost's band.
inline double plan_cost(const TransportPlan& plan, const BandedCost& cost) {
  if (!plan.grid().same_layout(cost.grid()))
    throw InputError("plan_cost: plan and cost use different grids");
  if (plan.effective_band() > cost.effective_band())
    throw NumericalError("plan_cost: plan support exceeds cost band");
  const int M = plan.grid().bins;
  const auto& fsq = cost.freq_sq();
  const auto& tsq = cost.time_sq();
  CompensatedSum acc;
  for (std::size_t b = 0; b < plan.block_count(); ++b) {
    const auto [n, n2] = plan.frame_pair(b);
    const double tpart = tsq[n >= n2 ? n - n2 : n2 - n];
    const double* blk = plan.block(b).data();
    for (int m = 0; m < M; ++m) {
      double row = 0.0;
      const double* line = blk + static_cast<std::size_t>(m) * M;
      for (int m2 = 0; m2 < M; ++m2) {
        double x = line[m2];
        if (x == 0.0) continue;
        row += x * (fsq[m >= m2 ? m - m2 : m2 - m] + tpart);
      }
      acc.add(row);
    }
  }
  return acc.value();
}

}  // namespace otmorph

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include "otmorph/banded_cost.hpp"
#include "otmorph/errors.hpp"
#include "otmorph/grid.hpp"
#include "otmorph/summation.hpp"
#include "otmorph/transport_plan.hpp"

namespace otmorph {

// Unbalanced optimal transport with KL marginal relaxation,
//
//   min_{P >= 0 in band}  <C, P> + beta KL(P 1 | a) + beta KL(P^T 1 | b),
//
// solved by majorization-minimization. Jensen-majorizing both KL terms at the
// current iterate gives the closed-form multiplicative step
//
//   P_ij <- P_ij * sqrt(a_i / r_i) * sqrt(b_j / c_j) * exp(-C_ij / (2 beta)),
//
// with r = P 1, c = P^T 1, which decreases the objective at every step. The
// kernel exp(-C/(2 beta)) factorizes over the two grid axes, so each entry
// update is a handful of multiplies against precomputed per-axis tables.

struct UotParams {
  double beta = 1.0;
  int max_iters = 2000;
  double rel_tol = 1e-7;
  // Guards divisions when a marginal collapses toward zero; nothing else.
  double min_mass_floor = 1e-300;
};

// Pointwise KL divergence between nonnegative vectors,
// sum_i a_i log(a_i/b_i) - a_i + b_i, with 0 log 0 = 0.
inline double kl_divergence(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("kl: vectors must have equal length");
  CompensatedSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] >= 0.0)) throw InputError("kl: first argument must be nonnegative");
    if (a[i] == 0.0) {
      acc.add(b[i]);
    } else {
      if (b[i] <= 0.0) throw NumericalError("kl: KL undefined for zero reference mass");
      acc.add(a[i] * std::log(a[i] / b[i]) - a[i] + b[i]);
    }
  }
  return acc.value();
}

// Objective of the relaxed problem for an explicit plan. Marginals are
// recomputed from the plan's blocks, so the caller need not refresh caches.
inline double uot_objective(const TransportPlan& plan, std::span<const double> x_s,
                            std::span<const double> x_t, const BandedCost& cost, double beta) {
  if (!plan.grid().same_layout(cost.grid()))
    throw InputError("uot_objective: plan and cost use different grids");
  const int I = plan.grid().size();
  if (static_cast<int>(x_s.size()) != I || static_cast<int>(x_t.size()) != I)
    throw InputError("uot_objective: marginal length mismatch");
  const int M = plan.grid().bins;
  std::vector<double> row(I, 0.0), col(I, 0.0);
  for (std::size_t blk = 0; blk < plan.block_count(); ++blk) {
    const auto [n, n2] = plan.frame_pair(blk);
    const double* data = plan.block(blk).data();
    for (int m = 0; m < M; ++m) {
      const double* line = data + static_cast<std::size_t>(m) * M;
      double acc = 0.0;
      for (int m2 = 0; m2 < M; ++m2) {
        acc += line[m2];
        col[static_cast<std::size_t>(n2) * M + m2] += line[m2];
      }
      row[static_cast<std::size_t>(n) * M + m] += acc;
    }
  }
  return plan_cost(plan, cost) + beta * kl_divergence(row, x_s) + beta * kl_divergence(col, x_t);
}

struct UotResult {
  TransportPlan plan;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double stationarity_residual = 0.0;
  // Largest single-step objective increase seen during the solve; descent
  // means this stays at (or numerically indistinguishable from) zero.
  double max_objective_increase = 0.0;
  // Mass added to each marginal by the zero-bin clamp.
  double clamped_mass_source = 0.0;
  double clamped_mass_target = 0.0;
};

namespace detail {

struct UotWork {
  std::vector<double> a, b;        // clamped marginals
  std::vector<double> row, col;    // current plan marginals
  std::vector<double> u, v;        // sqrt ratio factors
  std::vector<double> ef, et;      // separable kernel tables per axis delta
  // Mirrored copies indexed by (M - 1) + (m2 - m), so the inner sweep reads
  // them forward-contiguously.
  std::vector<double> ef_mirror, fsq_mirror;
  std::vector<double> log_row, log_col;
};

inline void write_telemetry(std::ostream* out, int iteration, double objective, double row_err,
                            double col_err, double residual) {
  if (!out) return;
  char line[160];
  int len = std::snprintf(line, sizeof line, "uot,%d,%.17g,%.17g,%.17g,%.17g\n", iteration,
                          objective, row_err, col_err, residual);
  out->write(line, len);
}

}  // namespace detail

inline UotResult solve_uot(const TfDistribution& source, const TfDistribution& target,
                           const BandedCost& cost, const UotParams& params = {},
                           std::ostream* telemetry = nullptr,
                           const TransportPlan* initial = nullptr) {
  source.validate();
  target.validate();
  if (!source.grid.same_layout(target.grid) || !source.grid.same_layout(cost.grid()))
    throw InputError("solve_uot: distributions and cost must share one grid");
  if (!(params.beta > 0.0)) throw InputError("solve_uot: beta must be positive");
  if (params.max_iters < 1 || !(params.rel_tol > 0.0))
    throw InputError("solve_uot: invalid iteration controls");
  if (compensated_total(source.mass) <= 0.0 || compensated_total(target.mass) <= 0.0)
    throw NumericalError("solve_uot: all-zero marginal");

  const TfGrid& grid = source.grid;
  const int I = grid.size();
  const int M = grid.bins;
  const double beta = params.beta;
  const double floor = params.min_mass_floor;

  UotResult result{TransportPlan(grid, cost.effective_band())};

  detail::UotWork w;
  w.a = source.mass;
  w.b = target.mass;
  // Zero bins break the KL terms; clamp them to a fixed tiny mass and report
  // how much was added.
  constexpr double kClamp = 1e-12;
  for (double& x : w.a)
    if (x < kClamp) {
      result.clamped_mass_source += kClamp - x;
      x = kClamp;
    }
  for (double& x : w.b)
    if (x < kClamp) {
      result.clamped_mass_target += kClamp - x;
      x = kClamp;
    }

  TransportPlan& plan = result.plan;
  if (initial) {
    if (!initial->grid().same_layout(grid) || initial->effective_band() != plan.effective_band())
      throw InputError("solve_uot: initial plan does not match the problem");
    plan = *initial;
  } else {
    // Product of the marginals restricted to the band, scaled to unit mass.
    CompensatedSum total;
    for (std::size_t blk = 0; blk < plan.block_count(); ++blk) {
      const auto [n, n2] = plan.frame_pair(blk);
      double* data = plan.block(blk).data();
      for (int m = 0; m < M; ++m) {
        const double am = w.a[static_cast<std::size_t>(n) * M + m];
        double acc = 0.0;
        double* line = data + static_cast<std::size_t>(m) * M;
        const double* bline = w.b.data() + static_cast<std::size_t>(n2) * M;
        for (int m2 = 0; m2 < M; ++m2) {
          line[m2] = am * bline[m2];
          acc += line[m2];
        }
        total.add(acc);
      }
    }
    const double scale = 1.0 / total.value();
    for (std::size_t blk = 0; blk < plan.block_count(); ++blk)
      for (double& x : plan.block(blk)) x *= scale;
  }

  // Separable kernel tables. A table entry underflowing to exact zero kills
  // those plan entries permanently after one step, so from the second sweep
  // on the update only needs to visit the frequency window where the kernel
  // is nonzero, and blocks whose time factor is zero can be skipped outright.
  const auto& fsq = cost.freq_sq();
  const auto& tsq = cost.time_sq();
  w.ef.resize(fsq.size());
  for (std::size_t d = 0; d < fsq.size(); ++d) w.ef[d] = std::exp(-fsq[d] / (2.0 * beta));
  w.et.resize(tsq.size());
  for (std::size_t d = 0; d < tsq.size(); ++d) w.et[d] = std::exp(-tsq[d] / (2.0 * beta));
  int kernel_reach = 0;
  while (kernel_reach + 1 < M && w.ef[kernel_reach + 1] > 0.0) ++kernel_reach;
  w.ef_mirror.resize(2 * M - 1);
  w.fsq_mirror.resize(2 * M - 1);
  for (int t = -(M - 1); t <= M - 1; ++t) {
    w.ef_mirror[M - 1 + t] = w.ef[t >= 0 ? t : -t];
    w.fsq_mirror[M - 1 + t] = fsq[t >= 0 ? t : -t];
  }

  // Current marginals.
  plan.refresh_marginals();
  w.row = plan.row_marginal();
  w.col = plan.col_marginal();
  w.u.assign(I, 0.0);
  w.v.assign(I, 0.0);

  auto objective_of_current = [&]() -> double {
    return plan_cost(plan, cost) + beta * kl_divergence(w.row, w.a) +
           beta * kl_divergence(w.col, w.b);
  };

  auto marginal_errors = [&](double& row_err, double& col_err) {
    CompensatedSum re, ce;
    for (int i = 0; i < I; ++i) {
      re.add(std::abs(w.row[i] - w.a[i]));
      ce.add(std::abs(w.col[i] - w.b[i]));
    }
    row_err = re.value();
    col_err = ce.value();
  };

  // Largest stationarity violation |C + beta log(r/a) + beta log(c/b)| over
  // entries carrying at least 1e-8 of the peak mass. `windowed` is valid
  // once the first sweep has zeroed everything outside the kernel window.
  auto stationarity_residual = [&](bool windowed) -> double {
    double peak = 0.0;
    for (std::size_t blk = 0; blk < plan.block_count(); ++blk)
      for (double x : plan.block(blk)) peak = std::max(peak, x);
    const double threshold = 1e-8 * peak;
    w.log_row.resize(I);
    w.log_col.resize(I);
    for (int i = 0; i < I; ++i) {
      w.log_row[i] = std::log(std::max(w.row[i], floor) / w.a[i]);
      w.log_col[i] = std::log(std::max(w.col[i], floor) / w.b[i]);
    }
    double worst = 0.0;
    for (std::size_t blk = 0; blk < plan.block_count(); ++blk) {
      const auto [n, n2] = plan.frame_pair(blk);
      const double tpart = tsq[n >= n2 ? n - n2 : n2 - n];
      const double* data = plan.block(blk).data();
      for (int m = 0; m < M; ++m) {
        const double lr = w.log_row[static_cast<std::size_t>(n) * M + m];
        const double* line = data + static_cast<std::size_t>(m) * M;
        const double* lc = w.log_col.data() + static_cast<std::size_t>(n2) * M;
        const int lo = windowed ? std::max(0, m - kernel_reach) : 0;
        const int hi = windowed ? std::min(M - 1, m + kernel_reach) : M - 1;
        for (int m2 = lo; m2 <= hi; ++m2) {
          if (line[m2] < threshold || line[m2] == 0.0) continue;
          double g = fsq[m >= m2 ? m - m2 : m2 - m] + tpart + beta * (lr + lc[m2]);
          worst = std::max(worst, std::abs(g));
        }
      }
    }
    return worst;
  };

  double objective = objective_of_current();
  {
    double row_err, col_err;
    marginal_errors(row_err, col_err);
    detail::write_telemetry(telemetry, 0, objective,
                            row_err, col_err, telemetry ? stationarity_residual(false) : 0.0);
  }

  std::vector<double> row_new(I), col_new(I);
  bool converged = false;
  int iteration = 0;
  int stalled_checks = 0;

  while (iteration < params.max_iters) {
    ++iteration;
    for (int i = 0; i < I; ++i) w.u[i] = std::sqrt(w.a[i] / std::max(w.row[i], floor));
    for (int i = 0; i < I; ++i) w.v[i] = std::sqrt(w.b[i] / std::max(w.col[i], floor));

    std::fill(row_new.begin(), row_new.end(), 0.0);
    std::fill(col_new.begin(), col_new.end(), 0.0);
    CompensatedSum cost_acc;

    for (std::size_t blk = 0; blk < plan.block_count(); ++blk) {
      const auto [n, n2] = plan.frame_pair(blk);
      const int d = n >= n2 ? n - n2 : n2 - n;
      const double etd = w.et[d];
      double* data = plan.block(blk).data();
      if (etd == 0.0 && iteration > 1) continue;  // block died on the first sweep
      const double tpart = tsq[d];
      const double* vblk = w.v.data() + static_cast<std::size_t>(n2) * M;
      double* colblk = col_new.data() + static_cast<std::size_t>(n2) * M;
      for (int m = 0; m < M; ++m) {
        const double fac = w.u[static_cast<std::size_t>(n) * M + m] * etd;
        double* line = data + static_cast<std::size_t>(m) * M;
        // After the first sweep anything outside the kernel window is an
        // exact zero and stays that way.
        const int lo = iteration > 1 ? std::max(0, m - kernel_reach) : 0;
        const int hi = iteration > 1 ? std::min(M - 1, m + kernel_reach) : M - 1;
        double rsum = 0.0;
        double rcost = 0.0;
        for (int m2 = lo; m2 <= hi; ++m2) {
          double p = line[m2];
          if (p == 0.0) continue;
          p *= fac * w.ef[m >= m2 ? m - m2 : m2 - m] * vblk[m2];
          if (p < 1e-300) p = 0.0;  // keep denormals out of the hot loop
          line[m2] = p;
          if (p != 0.0) {
            rsum += p;
            colblk[m2] += p;
            rcost += p * (fsq[m >= m2 ? m - m2 : m2 - m] + tpart);
          }
        }
        row_new[static_cast<std::size_t>(n) * M + m] += rsum;
        cost_acc.add(rcost);
      }
    }

    w.row.swap(row_new);
    w.col.swap(col_new);

    const double next_objective = cost_acc.value() + beta * kl_divergence(w.row, w.a) +
                                  beta * kl_divergence(w.col, w.b);
    const double change = std::abs(next_objective - objective);
    const double rel_change = change / std::max(std::abs(objective), 1e-300);
    result.max_objective_increase =
        std::max(result.max_objective_increase, next_objective - objective);
    objective = next_objective;

    double residual = -1.0;
    if (telemetry) {
      residual = stationarity_residual(true);
      double row_err, col_err;
      marginal_errors(row_err, col_err);
      detail::write_telemetry(telemetry, iteration, objective, row_err, col_err, residual);
    }

    if (rel_change < params.rel_tol) {
      // The objective has plateaued; accept only once the first-order
      // conditions hold on the significant support.
      if (stalled_checks == 0 || stalled_checks % 25 == 0) {
        if (residual < 0.0) residual = stationarity_residual(true);
        if (residual <= 1e-6 * beta) {
          converged = true;
          result.stationarity_residual = residual;
          break;
        }
      }
      ++stalled_checks;
    } else {
      stalled_checks = 0;
    }
  }

  result.iterations = iteration;
  result.converged = converged;
  result.objective = objective;
  if (!converged) result.stationarity_residual = stationarity_residual(iteration > 0);
  plan.refresh_marginals();
  return result;
}

}  // namespace otmorph

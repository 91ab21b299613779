#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "otmorph/banded_cost.hpp"
#include "otmorph/errors.hpp"
#include "otmorph/grid.hpp"
#include "otmorph/summation.hpp"
#include "otmorph/transport_plan.hpp"

namespace otmorph {

namespace detail {

// Network simplex for the uncapacitated transportation problem on a bipartite
// graph. Artificial arcs tie every node to a root; their cost is handled as a
// separate lexicographic component rather than a floating big-M, so reduced
// costs involving artificials stay exact and feasibility detection is never a
// matter of magnitude tuning.
//
// Pivoting uses block search and falls back to Bland's rule (lowest eligible
// arc index) after a run of degenerate steps, which restores the termination
// guarantee.
class TransportSimplex {
public:
  TransportSimplex(int sources, int targets)
      : S_(sources), T_(targets), V_(sources + targets + 1), root_(sources + targets) {
    supply_.assign(V_, 0.0);
  }

  void set_supply(int source, double amount) { supply_[source] = amount; }
  void set_demand(int target, double amount) { supply_[S_ + target] = -amount; }

  int add_arc(int source, int target, double cost) {
    from_.push_back(source);
    to_.push_back(S_ + target);
    cost_.push_back(cost);
    return static_cast<int>(from_.size()) - 1;
  }

  // Returns true when a feasible (hence optimal) flow was found.
  bool run() {
    const int real_arcs = static_cast<int>(from_.size());
    // Artificial arcs carry initial supplies to/from the root. They get
    // lexicographic cost (1, 0); real arcs get (0, c).
    for (int v = 0; v < V_ - 1; ++v) {
      if (supply_[v] >= 0.0) {
        from_.push_back(v);
        to_.push_back(root_);
      } else {
        from_.push_back(root_);
        to_.push_back(v);
      }
      cost_.push_back(0.0);
    }
    const int A = static_cast<int>(from_.size());
    flow_.assign(A, 0.0);
    state_.assign(A, kLower);
    adjacency_.assign(V_, {});
    for (int a = real_arcs; a < A; ++a) {
      flow_[a] = std::abs(supply_[from_[a] == root_ ? to_[a] : from_[a]]);
      state_[a] = kTree;
      adjacency_[from_[a]].push_back(a);
      adjacency_[to_[a]].push_back(a);
    }
    parent_.assign(V_, -1);
    pred_.assign(V_, -1);
    depth_.assign(V_, 0);
    pi_big_.assign(V_, 0);
    pi_real_.assign(V_, 0.0);
    rebuild_tree();

    double max_cost = 0.0;
    for (int a = 0; a < real_arcs; ++a) max_cost = std::max(max_cost, std::abs(cost_[a]));
    tol_ = 1e-11 * (1.0 + max_cost);

    const int block = std::max(64, static_cast<int>(std::sqrt(static_cast<double>(A))) + 1);
    const long long pivot_cap = 1000ll + 60ll * A;
    long long pivots = 0;
    int degenerate_run = 0;
    bool bland = false;

    while (true) {
      int entering = bland ? find_entering_bland(A, real_arcs) : find_entering_block(A, real_arcs, block);
      if (entering < 0) break;
      double theta = pivot(entering);
      if (++pivots > pivot_cap) throw NumericalError("exact OT: simplex failed to terminate");
      if (theta <= 1e-15) {
        if (++degenerate_run > V_ + 16) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }

    // Any artificial arc still carrying real flow means the band disconnects
    // part of the mass.
    double stranded = 0.0;
    for (int a = real_arcs; a < A; ++a) stranded = std::max(stranded, flow_[a]);
    return stranded <= 1e-9;
  }

  double flow(int arc) const { return flow_[arc]; }

private:
  static constexpr int kLower = 0;
  static constexpr int kTree = 1;

  bool is_artificial(int a) const { return to_[a] == root_ || from_[a] == root_; }

  int big_cost(int a) const { return is_artificial(a) ? 1 : 0; }

  // Lexicographic reduced cost of a non-tree arc.
  void reduced(int a, int& big, double& real) const {
    big = big_cost(a) + pi_big_[from_[a]] - pi_big_[to_[a]];
    real = cost_[a] + pi_real_[from_[a]] - pi_real_[to_[a]];
  }

  bool is_entering(int big, double real) const { return big < 0 || (big == 0 && real < -tol_); }

  int find_entering_block(int A, int real_arcs, int block) {
    (void)real_arcs;
    int scanned = 0;
    int best = -1;
    int best_big = 0;
    double best_real = -tol_;
    int a = next_scan_;
    while (scanned < A) {
      for (int k = 0; k < block && scanned < A; ++k, ++scanned, ++a) {
        if (a >= A) a = 0;
        if (state_[a] != kLower) continue;
        int big;
        double real;
        reduced(a, big, real);
        if (big < best_big || (big == best_big && real < best_real)) {
          best = a;
          best_big = big;
          best_real = real;
        }
      }
      if (best >= 0 && is_entering(best_big, best_real)) {
        next_scan_ = a >= A ? 0 : a;
        return best;
      }
    }
    return -1;
  }

  int find_entering_bland(int A, int real_arcs) {
    (void)real_arcs;
    for (int a = 0; a < A; ++a) {
      if (state_[a] != kLower) continue;
      int big;
      double real;
      reduced(a, big, real);
      if (is_entering(big, real)) return a;
    }
    return -1;
  }

  // Push flow around the cycle closed by `entering`; returns the amount moved.
  double pivot(int entering) {
    const int u = from_[entering];
    const int v = to_[entering];
    int uu = u, vv = v;
    while (uu != vv) {
      if (depth_[uu] >= depth_[vv])
        uu = parent_[uu];
      else
        vv = parent_[vv];
    }
    const int join = uu;

    // The circulation runs u -> v through the entering arc, then returns
    // v..join..u through the tree. Walking the v side child-to-parent moves
    // with the circulation, so an arc pointing parent->child there loses flow;
    // on the u side the circulation descends, so arcs pointing child->parent
    // lose flow.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;

    for (int x = v; x != join; x = parent_[x]) {
      int a = pred_[x];
      if (to_[a] == x && flow_[a] < theta) {
        theta = flow_[a];
        leaving = a;
      }
    }
    for (int x = u; x != join; x = parent_[x]) {
      int a = pred_[x];
      if (from_[a] == x && flow_[a] < theta) {
        theta = flow_[a];
        leaving = a;
      }
    }
    if (leaving < 0) throw NumericalError("exact OT: unbounded pivot");

    flow_[entering] += theta;
    for (int x = v; x != join; x = parent_[x]) {
      int a = pred_[x];
      flow_[a] += (to_[a] == x) ? -theta : theta;
    }
    for (int x = u; x != join; x = parent_[x]) {
      int a = pred_[x];
      flow_[a] += (from_[a] == x) ? -theta : theta;
    }

    state_[entering] = kTree;
    adjacency_[u].push_back(entering);
    adjacency_[v].push_back(entering);
    state_[leaving] = kLower;
    drop_adjacency(from_[leaving], leaving);
    drop_adjacency(to_[leaving], leaving);
    flow_[leaving] = 0.0;
    rebuild_tree();
    return theta;
  }

  void drop_adjacency(int node, int arc) {
    auto& list = adjacency_[node];
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (list[k] == arc) {
        list[k] = list.back();
        list.pop_back();
        return;
      }
    }
  }

  // Recompute parent/pred/depth and potentials from the root via BFS over the
  // current tree arcs.
  void rebuild_tree() {
    std::fill(parent_.begin(), parent_.end(), -1);
    std::fill(pred_.begin(), pred_.end(), -1);
    bfs_order_.clear();
    bfs_order_.push_back(root_);
    depth_[root_] = 0;
    pi_big_[root_] = 0;
    pi_real_[root_] = 0.0;
    visited_.assign(V_, false);
    visited_[root_] = true;
    for (std::size_t head = 0; head < bfs_order_.size(); ++head) {
      int x = bfs_order_[head];
      for (int a : adjacency_[x]) {
        int y = from_[a] == x ? to_[a] : from_[a];
        if (visited_[y]) continue;
        visited_[y] = true;
        parent_[y] = x;
        pred_[y] = a;
        depth_[y] = depth_[x] + 1;
        if (from_[a] == x) {
          // zero reduced cost: c + pi[x] - pi[y] = 0
          pi_big_[y] = big_cost(a) + pi_big_[x];
          pi_real_[y] = cost_[a] + pi_real_[x];
        } else {
          pi_big_[y] = pi_big_[x] - big_cost(a);
          pi_real_[y] = pi_real_[x] - cost_[a];
        }
        bfs_order_.push_back(y);
      }
    }
  }

  int S_, T_, V_, root_;
  std::vector<double> supply_;
  std::vector<int> from_, to_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<char> state_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> parent_, pred_, depth_;
  std::vector<int> pi_big_;
  std::vector<double> pi_real_;
  std::vector<int> bfs_order_;
  std::vector<bool> visited_;
  double tol_ = 1e-11;
  int next_scan_ = 0;
};

}  // namespace detail

struct ExactOtResult {
  TransportPlan plan;
  double objective = 0.0;
};

// Balanced optimal transport between two unit-mass distributions under a
// banded cost, solved exactly by network simplex restricted to in-band arcs.
inline ExactOtResult solve_ot(const TfDistribution& source, const TfDistribution& target,
                              const BandedCost& cost) {
  source.validate();
  target.validate();
  if (!source.grid.same_layout(target.grid) || !source.grid.same_layout(cost.grid()))
    throw InputError("solve_ot: distributions and cost must share one grid");

  const double sum_s = compensated_total(source.mass);
  const double sum_t = compensated_total(target.mass);
  if (std::abs(sum_s - 1.0) > 1e-9 || std::abs(sum_t - 1.0) > 1e-9)
    throw InputError("solve_ot: marginals must sum to 1 within 1e-9");

  const TfGrid& grid = source.grid;
  const int M = grid.bins;

  std::vector<int> src_nodes, tgt_nodes;
  for (int i = 0; i < grid.size(); ++i)
    if (source.mass[i] > 0.0) src_nodes.push_back(i);
  for (int i = 0; i < grid.size(); ++i)
    if (target.mass[i] > 0.0) tgt_nodes.push_back(i);

  detail::TransportSimplex simplex(static_cast<int>(src_nodes.size()),
                                   static_cast<int>(tgt_nodes.size()));
  for (std::size_t s = 0; s < src_nodes.size(); ++s)
    simplex.set_supply(static_cast<int>(s), source.mass[src_nodes[s]] / sum_s);
  for (std::size_t t = 0; t < tgt_nodes.size(); ++t)
    simplex.set_demand(static_cast<int>(t), target.mass[tgt_nodes[t]] / sum_t);

  const auto& fsq = cost.freq_sq();
  const auto& tsq = cost.time_sq();
  struct ArcRef {
    int arc;
    int i, j;
  };
  std::vector<ArcRef> arcs;
  for (std::size_t s = 0; s < src_nodes.size(); ++s) {
    const auto [m, n] = grid.point_of(src_nodes[s]);
    for (std::size_t t = 0; t < tgt_nodes.size(); ++t) {
      const auto [m2, n2] = grid.point_of(tgt_nodes[t]);
      if (!cost.in_band(n, n2)) continue;
      double c = fsq[m >= m2 ? m - m2 : m2 - m] + tsq[n >= n2 ? n - n2 : n2 - n];
      int arc = simplex.add_arc(static_cast<int>(s), static_cast<int>(t), c);
      arcs.push_back({arc, src_nodes[s], tgt_nodes[t]});
    }
  }

  if (!simplex.run()) throw NumericalError("solve_ot: banded OT infeasible; use UOT");

  ExactOtResult result{TransportPlan(grid, cost.effective_band()), 0.0};
  for (const auto& ref : arcs) {
    double f = simplex.flow(ref.arc);
    if (f > 0.0) result.plan.set_mass(ref.i, ref.j, f);
  }
  result.plan.refresh_marginals();
  result.objective = plan_cost(result.plan, cost);
  return result;
}

}  // namespace otmorph

#pragma once

#include <cmath>

namespace otmorph {

// Double-double accumulator (TwoSum cascade). The residual term keeps the
// accumulated error at O(n * eps^2), so totals taken over the same values in
// different orders round to the same double for any realistic term count.
// Used wherever a total must be order-robust: mass bookkeeping, objective
// values, conservation checks.
class CompensatedSum {
public:
  CompensatedSum() = default;
  explicit CompensatedSum(double x) : hi_(x) {}

  void add(double x) {
    double s = hi_ + x;
    double bb = s - hi_;
    double err = (hi_ - (s - bb)) + (x - bb);
    hi_ = s;
    lo_ += err;
  }

  double value() const { return hi_ + lo_; }

private:
  double hi_ = 0.0;
  double lo_ = 0.0;
};

template <typename Range>
double compensated_total(const Range& xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

}  // namespace otmorph

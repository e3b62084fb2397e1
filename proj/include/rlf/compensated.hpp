#pragma once

#include <cmath>

namespace rlf {

/// Neumaier compensated sum: stays within an ulp of the exact sum of its
/// terms instead of drifting with the term count.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace rlf

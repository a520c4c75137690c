#pragma once

#include <cmath>
#include <span>

namespace gridcast {

/// Scalar z-score. A zero spread maps to a unit spread so constants standardize to 0.
struct ZScore {
  double mean = 0.0;
  double stddev = 1.0;

  static ZScore fit(std::span<const double> values) {
    ZScore z;
    if (values.empty()) return z;
    double s = 0.0;
    for (double v : values) s += v;
    z.mean = s / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - z.mean) * (v - z.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    z.stddev = sd > 0.0 ? sd : 1.0;
    return z;
  }

  double apply(double v) const noexcept { return (v - mean) / stddev; }
  double invert(double z) const noexcept { return z * stddev + mean; }
};

}  // namespace gridcast

#pragma once

#include <algorithm>
#include <cmath>

namespace monoidal {

/// (f(x + h) - f(x - h)) / 2h for a scalar function of one coordinate.
template <class F>
double central_difference(F&& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps components that are zero
/// up to rounding from producing meaningless ratios.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace monoidal

#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace nlarf::reference {

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double plain_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Within-child sum of squared deviations for a split at rank r of (x, y)
/// pairs sorted by x, computed two-pass from scratch.
inline double split_sse(const std::vector<std::pair<double, double>>& sorted_xy, std::size_t r) {
  auto sse = [](auto first, auto last) {
    const double n = static_cast<double>(last - first);
    double m = 0.0;
    for (auto it = first; it != last; ++it) m += it->second;
    m /= n;
    double s = 0.0;
    for (auto it = first; it != last; ++it) s += (it->second - m) * (it->second - m);
    return s;
  };
  return sse(sorted_xy.begin(), sorted_xy.begin() + static_cast<std::ptrdiff_t>(r)) +
         sse(sorted_xy.begin() + static_cast<std::ptrdiff_t>(r), sorted_xy.end());
}

}  // namespace nlarf::reference

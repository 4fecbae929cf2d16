#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <utility>

namespace nlarf {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_mean(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return xs.empty() ? 0.0 : s.value() / static_cast<double>(xs.size());
}

/// Golden-section maximisation of a unimodal function on [lo, hi].
/// Returns (argmax, max).
inline std::pair<double, double> golden_section_max(const std::function<double(double)>& fn,
                                                    double lo, double hi, double tol = 1e-12,
                                                    int max_iter = 300) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int i = 0; i < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  return fc >= fd ? std::pair{c, fc} : std::pair{d, fd};
}

/// Dense grid scan followed by golden-section refinement around the best
/// grid point. Good enough for smooth functions with well-separated maxima.
inline std::pair<double, double> grid_then_golden_max(const std::function<double(double)>& fn,
                                                      double lo, double hi, std::size_t n) {
  const double step = (hi - lo) / static_cast<double>(n);
  double best_x = lo, best_v = fn(lo);
  for (std::size_t i = 1; i <= n; ++i) {
    const double x = lo + step * static_cast<double>(i);
    const double v = fn(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  auto [x, v] = golden_section_max(fn, std::max(lo, best_x - step), std::min(hi, best_x + step));
  if (v >= best_v) return {x, v};
  return {best_x, best_v};
}

}  // namespace nlarf

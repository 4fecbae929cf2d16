#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlarf/errors.hpp"
#include "nlarf/noise_models.hpp"
#include "nlarf/numeric.hpp"
#include "nlarf/random.hpp"

namespace nlarf {

/// Bounded regression function f : R^p -> R of the autoregression.
struct RegressionFunction {
  std::string id;
  std::size_t p = 1;
  std::function<double(std::span<const double>)> evaluator;
  double bound_M = 0.0;                // sup |f|
  std::optional<double> lipschitz_C;   // w.r.t. the l1 norm on R^p

  double operator()(std::span<const double> x) const { return evaluator(x); }
};

namespace detail {

inline double f1(double x) { return 0.5 * std::copysign(std::min(std::abs(x), 10.0), x); }
inline double f2(double x) { return -2.0 * x * std::exp(-0.7 * x * x) + 3.0 * x * x * std::exp(-0.95 * x * x); }
inline double f2_prime(double x) {
  return -2.0 * std::exp(-0.7 * x * x) * (1.0 - 1.4 * x * x) +
         3.0 * std::exp(-0.95 * x * x) * (2.0 * x - 1.9 * x * x * x);
}
inline double f3(double x) { return std::cos(5.0 * x) * std::exp(-x * x); }
inline double f3_prime(double x) {
  return -std::exp(-x * x) * (5.0 * std::sin(5.0 * x) + 2.0 * x * std::cos(5.0 * x));
}
inline double f4(double x) {
  const double a = std::abs(x);
  return std::min(a, 0.75) * std::min(a, 10.0);
}
// f5(x1, x2) = g(x1) + f2(x2)
inline double f5_g(double x) { return x * std::exp(-0.6 * x * x) - 2.0 * x * x * std::exp(-0.3 * x * x); }
inline double f5_g_prime(double x) {
  return std::exp(-0.6 * x * x) * (1.0 - 1.2 * x * x) -
         2.0 * std::exp(-0.3 * x * x) * (2.0 * x - 0.6 * x * x * x);
}

// Supremum of a smooth 1-d function over [-50, 50] by dense grid plus
// golden-section refinement.
inline double grid_sup(const std::function<double(double)>& fn) {
  return grid_then_golden_max(fn, -50.0, 50.0, 2'000'000).second;
}

struct BuiltinConstants {
  double M2, C2, M3, C3, M5, C5;
};

inline const BuiltinConstants& builtin_constants() {
  static const BuiltinConstants constants = [] {
    BuiltinConstants c{};
    c.M2 = grid_sup([](double x) { return std::abs(f2(x)); });
    c.C2 = grid_sup([](double x) { return std::abs(f2_prime(x)); });
    c.M3 = grid_sup([](double x) { return std::abs(f3(x)); });
    c.C3 = grid_sup([](double x) { return std::abs(f3_prime(x)); });
    const double g_max = grid_sup(f5_g);
    const double g_min = -grid_sup([](double x) { return -f5_g(x); });
    const double h_max = grid_sup(f2);
    const double h_min = -grid_sup([](double x) { return -f2(x); });
    c.M5 = std::max(g_max + h_max, -(g_min + h_min));
    c.C5 = std::max(grid_sup([](double x) { return std::abs(f5_g_prime(x)); }), c.C2);
    return c;
  }();
  return constants;
}

}  // namespace detail

/// Identically-zero function on R^p. Its declared bound is a small positive
/// number because the mixture transform needs M > 0.
inline RegressionFunction zero_function(std::size_t p = 1, double declared_M = 1e-3) {
  return {"zero", p, [](std::span<const double>) { return 0.0; }, declared_M, 0.0};
}

/// The shipped regression functions. Accepts the short names f1..f5 and the
/// descriptive names (f1_clipped_linear, f2_expar, f3_cosine, f4_spline,
/// f5_twodim), plus "zero" / "zero2" for the null model.
inline RegressionFunction builtin_function(std::string_view name) {
  const auto is = [&](std::string_view a, std::string_view b) { return name == a || name == b; };
  if (is("f1", "f1_clipped_linear"))
    return {"f1", 1, [](std::span<const double> x) { return detail::f1(x[0]); }, 5.0, 0.5};
  if (is("f2", "f2_expar")) {
    const auto& c = detail::builtin_constants();
    return {"f2", 1, [](std::span<const double> x) { return detail::f2(x[0]); }, c.M2, c.C2};
  }
  if (is("f3", "f3_cosine")) {
    const auto& c = detail::builtin_constants();
    return {"f3", 1, [](std::span<const double> x) { return detail::f3(x[0]); }, c.M3, c.C3};
  }
  if (is("f4", "f4_spline"))
    return {"f4", 1, [](std::span<const double> x) { return detail::f4(x[0]); }, 7.5, 1.5};
  if (is("f5", "f5_twodim")) {
    const auto& c = detail::builtin_constants();
    return {"f5", 2,
            [](std::span<const double> x) { return detail::f5_g(x[0]) + detail::f2(x[1]); }, c.M5,
            c.C5};
  }
  if (name == "zero") return zero_function(1);
  if (name == "zero2") return zero_function(2);
  throw ConfigError("unknown regression function '" + std::string(name) + "'");
}

/// Probes |f| <= bound_M on `n_points` uniform points of [-50, 50]^p and
/// throws ConfigError on the first violation.
inline void validate_declared_bound(const RegressionFunction& f, std::size_t n_points = 100'000,
                                    std::uint64_t seed = 0x5eed) {
  if (!(f.bound_M > 0.0) || !std::isfinite(f.bound_M))
    throw ConfigError("function '" + f.id + "' must declare a positive finite bound_M");
  if (f.p == 0 || !f.evaluator) throw ConfigError("function '" + f.id + "' is incomplete");
  RandomStream rng(seed);
  std::vector<double> x(f.p);
  for (std::size_t i = 0; i < n_points; ++i) {
    for (auto& xi : x) xi = rng.uniform(-50.0, 50.0);
    const double v = f(x);
    if (!(std::abs(v) <= f.bound_M * (1.0 + 1e-12)))
      throw ConfigError("function '" + f.id + "' exceeds its declared bound " +
                        std::to_string(f.bound_M) + " (|f| = " + std::to_string(std::abs(v)) + ")");
  }
}

struct SimulationSpec {
  RegressionFunction f;
  NoiseModel noise = NoiseModel::laplace();
  std::size_t T = 0;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 0;
  std::vector<double> initial_data;  // (Y_0, Y_-1, ..., Y_{1-p}); empty means zeros

  void validate() const {
    if (f.p == 0 || !f.evaluator) throw ConfigError("simulation: regression function not set");
    if (T < f.p + 1) throw ConfigError("simulation: T must be at least p + 1");
    if (!initial_data.empty() && initial_data.size() != f.p)
      throw ConfigError("simulation: initial_data must have p entries");
  }
};

struct SimulationResult {
  std::vector<double> path;        // Y_1..Y_T
  std::vector<double> warm_start;  // (Y_0, Y_-1, ..., Y_{1-p}) preceding the path
  std::vector<double> noise;       // eps_1..eps_T, filled only when recorded
};

/// Iterates Y_t = f(Y_{t-1}, ..., Y_{t-p}) + eps_t for burn_in + T steps and
/// keeps the last T. Noise comes from RandomStream(spec.seed), one uniform per
/// step.
inline SimulationResult simulate(const SimulationSpec& spec, bool record_noise = false) {
  spec.validate();
  const std::size_t p = spec.f.p;
  // lags[0] is the most recent value.
  std::vector<double> lags = spec.initial_data.empty() ? std::vector<double>(p, 0.0) : spec.initial_data;
  RandomStream rng(spec.seed);
  SimulationResult out;
  out.path.reserve(spec.T);
  if (record_noise) out.noise.reserve(spec.T);
  const std::size_t total = spec.burn_in + spec.T;
  for (std::size_t step = 0; step < total; ++step) {
    if (step == spec.burn_in) out.warm_start = lags;
    const double eps = spec.noise.sample(rng);
    const double y = spec.f(lags) + eps;
    if (!std::isfinite(y))
      throw SimulationError("simulation produced a non-finite value at step " + std::to_string(step + 1) +
                            " (function '" + spec.f.id + "')");
    for (std::size_t j = p - 1; j > 0; --j) lags[j] = lags[j - 1];
    lags[0] = y;
    if (step >= spec.burn_in) {
      out.path.push_back(y);
      if (record_noise) out.noise.push_back(eps);
    }
  }
  return out;
}

/// Input-output pairs (X_t, Y_t), t = 1..T, with X_t = (Y_{t-1}, ..., Y_{t-p}).
/// Rows are stored contiguously; index t is 0-based in code.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t p, std::vector<double> x_rowmajor, std::vector<double> y,
          std::optional<SimulationSpec> source = std::nullopt)
      : p_(p), x_(std::move(x_rowmajor)), y_(std::move(y)), source_(std::move(source)) {
    if (p_ == 0) throw ShapeError("dataset: p must be positive");
    if (x_.size() != p_ * y_.size()) throw ShapeError("dataset: X has the wrong number of entries");
  }

  std::size_t p() const noexcept { return p_; }
  std::size_t size() const noexcept { return y_.size(); }
  bool empty() const noexcept { return y_.empty(); }

  std::span<const double> x(std::size_t t) const noexcept { return {x_.data() + t * p_, p_}; }
  double x(std::size_t t, std::size_t axis) const noexcept { return x_[t * p_ + axis]; }
  double y(std::size_t t) const noexcept { return y_[t]; }
  std::span<const double> ys() const noexcept { return y_; }
  std::span<const double> xs() const noexcept { return x_; }
  const std::optional<SimulationSpec>& source_spec() const noexcept { return source_; }
  void set_source_spec(SimulationSpec spec) { source_ = std::move(spec); }

  /// FNV-1a over p, T and the bit patterns of every stored value.
  std::uint64_t fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    };
    mix(p_);
    mix(y_.size());
    for (double v : x_) mix(std::bit_cast<std::uint64_t>(v));
    for (double v : y_) mix(std::bit_cast<std::uint64_t>(v));
    return h;
  }

 private:
  std::size_t p_ = 1;
  std::vector<double> x_;
  std::vector<double> y_;
  std::optional<SimulationSpec> source_;
};

/// Forms T = path.size() pairs; warm_start = (Y_0, Y_-1, ..., Y_{1-p}) supplies
/// the lags of the first p inputs.
inline Dataset make_dataset(std::span<const double> path, std::size_t p, std::span<const double> warm_start) {
  if (warm_start.size() != p)
    throw ShapeError("make_dataset: warm_start has " + std::to_string(warm_start.size()) +
                     " entries, expected p = " + std::to_string(p));
  if (path.empty()) throw ShapeError("make_dataset: path is empty");
  std::vector<double> lags(warm_start.begin(), warm_start.end());
  std::vector<double> x;
  x.reserve(path.size() * p);
  for (double y : path) {
    x.insert(x.end(), lags.begin(), lags.end());
    for (std::size_t j = p - 1; j > 0; --j) lags[j] = lags[j - 1];
    lags[0] = y;
  }
  return Dataset(p, std::move(x), std::vector<double>(path.begin(), path.end()));
}

inline Dataset simulate_dataset(const SimulationSpec& spec) {
  auto sim = simulate(spec);
  auto data = make_dataset(sim.path, spec.f.p, sim.warm_start);
  data.set_source_spec(spec);
  return data;
}

// ---------------------------------------------------------------------------
// CSV: header "t,y,x1,...,xp", t counted from 1, values printed with %.17g so
// every double round-trips exactly.

inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "nan" || s == "NaN") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline void write_dataset_csv(std::ostream& os, const Dataset& data) {
  os << "t,y";
  for (std::size_t j = 1; j <= data.p(); ++j) os << ",x" << j;
  os << '\n';
  for (std::size_t t = 0; t < data.size(); ++t) {
    os << (t + 1) << ',' << format_double(data.y(t));
    for (double v : data.x(t)) os << ',' << format_double(v);
    os << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "y")
    throw FormatError("dataset CSV header must be t,y,x1,...,xp");
  const std::size_t p = header.size() - 2;
  for (std::size_t j = 0; j < p; ++j)
    if (header[j + 2] != "x" + std::to_string(j + 1)) throw FormatError("dataset CSV header must be t,y,x1,...,xp");
  std::vector<double> x, y;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != p + 2) throw FormatError("dataset CSV row " + std::to_string(row + 1) + " has the wrong width");
    y.push_back(parse_double(fields[1]));
    for (std::size_t j = 0; j < p; ++j) x.push_back(parse_double(fields[j + 2]));
    ++row;
  }
  return Dataset(p, std::move(x), std::move(y));
}

}  // namespace nlarf

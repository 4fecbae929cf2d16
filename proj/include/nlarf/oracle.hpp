#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "nlarf/errors.hpp"
#include "nlarf/forest.hpp"
#include "nlarf/nlar.hpp"
#include "nlarf/noise_models.hpp"
#include "nlarf/numeric.hpp"
#include "nlarf/parallel.hpp"
#include "nlarf/partition.hpp"

namespace nlarf {

struct OracleConfig {
  std::size_t n_mc = 1'000'000;
  std::size_t burn_in = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_mc < 10'000) throw ConfigError("oracle: n_mc must be at least 10^4");
  }
};

/// Sufficient statistics of the Monte-Carlo Y-values falling in one region.
struct LeafMoments {
  std::size_t hits = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  double mean() const noexcept { return hits ? sum / static_cast<double>(hits) : std::nan(""); }
  double se() const noexcept {
    if (hits < 2) return std::nan("");
    const double n = static_cast<double>(hits);
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    return std::sqrt(var / n);
  }
};

/// A long path from the data-generating process, independent of the training
/// data, indexed for fast region queries. For p = 1 the inputs are sorted and
/// Y has prefix sums, so an interval query is two binary searches; for p > 1
/// region statistics are gathered by routing every point.
class OracleSample {
 public:
  explicit OracleSample(std::shared_ptr<const Dataset> data) : data_(std::move(data)) {
    if (!data_ || data_->empty()) throw ConfigError("oracle: empty Monte-Carlo sample");
    if (data_->p() == 1) index_1d();
  }

  /// Simulates n_mc fresh pairs from `sim` with the oracle's own seed and burn-in.
  static OracleSample simulate(const SimulationSpec& sim, const OracleConfig& ocfg) {
    ocfg.validate();
    SimulationSpec spec = sim;
    spec.T = ocfg.n_mc;
    spec.burn_in = ocfg.burn_in;
    spec.seed = ocfg.seed;
    return OracleSample(std::make_shared<const Dataset>(simulate_dataset(spec)));
  }

  const Dataset& data() const noexcept { return *data_; }
  std::size_t size() const noexcept { return data_->size(); }

  LeafMoments moments_in(const Box& region) const {
    if (data_->p() == 1) return interval_moments(region.lo[0], region.hi[0]);
    LeafMoments m;
    for (std::size_t t = 0; t < data_->size(); ++t) {
      if (!region.contains(data_->x(t))) continue;
      const double y = data_->y(t);
      ++m.hits;
      m.sum += y;
      m.sum_sq += y * y;
    }
    return m;
  }

  /// Moments for every node id of `tree` (meaningful on leaves).
  std::vector<LeafMoments> tree_moments(const Tree& tree) const {
    if (tree.p() != data_->p()) throw ShapeError("oracle: tree dimension does not match the Monte-Carlo sample");
    std::vector<LeafMoments> out(tree.nodes().size());
    if (data_->p() == 1) {
      for (auto id : tree.leaf_ids()) out[id] = moments_in(tree.node(id).region);
      return out;
    }
    for (std::size_t t = 0; t < data_->size(); ++t) {
      auto& m = out[tree.leaf_id(data_->x(t))];
      const double y = data_->y(t);
      ++m.hits;
      m.sum += y;
      m.sum_sq += y * y;
    }
    return out;
  }

 private:
  void index_1d() {
    const std::size_t n = data_->size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return data_->x(a, 0) < data_->x(b, 0); });
    sorted_x_.resize(n);
    prefix_.assign(n + 1, 0.0L);
    prefix_sq_.assign(n + 1, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
      const long double y = data_->y(order[i]);
      sorted_x_[i] = data_->x(order[i], 0);
      prefix_[i + 1] = prefix_[i] + y;
      prefix_sq_[i + 1] = prefix_sq_[i] + y * y;
    }
  }

  // Points with lo < x <= hi.
  LeafMoments interval_moments(double lo, double hi) const {
    const auto a = static_cast<std::size_t>(std::upper_bound(sorted_x_.begin(), sorted_x_.end(), lo) - sorted_x_.begin());
    const auto b = static_cast<std::size_t>(std::upper_bound(sorted_x_.begin(), sorted_x_.end(), hi) - sorted_x_.begin());
    LeafMoments m;
    if (b <= a) return m;
    m.hits = b - a;
    m.sum = static_cast<double>(prefix_[b] - prefix_[a]);
    m.sum_sq = static_cast<double>(prefix_sq_[b] - prefix_sq_[a]);
    return m;
  }

  std::shared_ptr<const Dataset> data_;
  std::vector<double> sorted_x_;
  std::vector<long double> prefix_;
  std::vector<long double> prefix_sq_;
};

inline std::string describe_region(const Box& box) {
  std::ostringstream os;
  for (std::size_t i = 0; i < box.lo.size(); ++i)
    os << (i ? " x " : "") << '(' << box.lo[i] << ", " << box.hi[i] << ']';
  return os.str();
}

struct OracleEstimate {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t hits = 0;
};

/// Monte-Carlo estimate of E[Y | X in leaf_of(tree, x)].
inline OracleEstimate oracle_tree_value(const Tree& tree, std::span<const double> x, const OracleSample& mc) {
  const Node& leaf = tree.leaf_of(x);
  const auto m = mc.moments_in(leaf.region);
  if (m.hits == 0)
    throw EstimationError("oracle: no Monte-Carlo points in leaf " + describe_region(leaf.region) +
                          "; increase n_mc");
  return {m.mean(), m.se(), m.hits};
}

inline OracleEstimate oracle_tree_value(const Tree& tree, std::span<const double> x, const SimulationSpec& sim,
                                        const OracleConfig& ocfg) {
  return oracle_tree_value(tree, x, OracleSample::simulate(sim, ocfg));
}

/// Mean of per-tree oracle values: the partition-optimal forest.
inline double oracle_forest_value(const Forest& forest, std::span<const double> x, const OracleSample& mc) {
  CompensatedSum s;
  for (const auto& tree : forest.trees) s.add(oracle_tree_value(tree, x, mc).estimate);
  return s.value() / static_cast<double>(forest.trees.size());
}

struct LeafReport {
  std::size_t tree_id = 0;
  std::size_t leaf_id = 0;
  std::size_t count = 0;
  double sample_mean = 0.0;
  std::optional<double> oracle_mean;
  std::size_t oracle_hits = 0;
  std::optional<double> oracle_se;
  std::optional<double> deviation;  // sample_mean - oracle_mean
};

inline constexpr const char* kSupApproximationNote =
    "sup taken over the leaves of the fitted trees only, not over every k-valid partition";

struct DeviationReport {
  std::vector<LeafReport> leaves;
  double sup_deviation = 0.0;
  std::size_t zero_hit_leaves = 0;
  std::string note = kSupApproximationNote;
};

/// Compares every leaf's sample mean with its Monte-Carlo conditional mean,
/// all leaves sharing one Monte-Carlo path. Leaves without Monte-Carlo hits
/// carry no oracle fields and are left out of the sup.
inline DeviationReport leaf_deviation_report(const Forest& forest, const OracleSample& mc, unsigned jobs = 1) {
  std::vector<std::vector<LeafReport>> per_tree(forest.trees.size());
  parallel_for(forest.trees.size(), jobs, [&](std::size_t b) {
    const Tree& tree = forest.trees[b];
    const auto moments = mc.tree_moments(tree);
    for (auto id : tree.leaf_ids()) {
      const Node& leaf = tree.node(id);
      LeafReport r;
      r.tree_id = b;
      r.leaf_id = id;
      r.count = leaf.count;
      r.sample_mean = leaf.leaf_mean;
      r.oracle_hits = moments[id].hits;
      if (r.oracle_hits > 0) {
        r.oracle_mean = moments[id].mean();
        r.deviation = r.sample_mean - *r.oracle_mean;
        if (r.oracle_hits >= 2) r.oracle_se = moments[id].se();
      }
      per_tree[b].push_back(r);
    }
  });
  DeviationReport report;
  for (auto& leaves : per_tree)
    for (auto& r : leaves) {
      if (r.deviation)
        report.sup_deviation = std::max(report.sup_deviation, std::abs(*r.deviation));
      else
        ++report.zero_hit_leaves;
      report.leaves.push_back(r);
    }
  return report;
}

inline DeviationReport leaf_deviation_report(const Forest& forest, const SimulationSpec& sim, const OracleConfig& ocfg,
                                             unsigned jobs = 1) {
  return leaf_deviation_report(forest, OracleSample::simulate(sim, ocfg), jobs);
}

// ---------------------------------------------------------------------------
// Concentration study.

struct ForestSettings {
  std::size_t B = 500;
  double alpha = 0.1;
  std::vector<double> rho;  // empty = uniform
  SplitRule split_rule = SplitRule::ExtraTrees;
  std::size_t m_factor = 2;  // m = m_factor * k
  unsigned jobs = 1;
};

struct ConcentrationRow {
  std::size_t T = 0;
  std::size_t k = 0;
  double sup_dev = 0.0;
  double ratio = 0.0;  // sup_dev * sqrt(k) / (ln T)^2
  std::uint64_t seed = 0;
  std::size_t zero_hit_leaves = 0;
};

inline double concentration_ratio(double sup_dev, std::size_t k, std::size_t T) {
  const double lt = std::log(static_cast<double>(T));
  return sup_dev * std::sqrt(static_cast<double>(k)) / (lt * lt);
}

/// Seeds: the training path uses `seed`, the forest derive_seed(seed, 1); the
/// Monte-Carlo path is simulated once from `ocfg` and shared across all T.
inline std::vector<ConcentrationRow> concentration_study(const std::vector<std::size_t>& Ts,
                                                         const std::function<std::size_t(std::size_t)>& k_of,
                                                         const SimulationSpec& sim, const ForestSettings& fs,
                                                         const OracleConfig& ocfg, std::uint64_t seed) {
  if (Ts.empty()) throw ConfigError("concentration: no sample sizes");
  if (!std::is_sorted(Ts.begin(), Ts.end())) throw ConfigError("concentration: Ts must be increasing");
  const auto mc = OracleSample::simulate(sim, ocfg);
  std::vector<ConcentrationRow> rows;
  for (auto T : Ts) {
    SimulationSpec spec = sim;
    spec.T = T;
    spec.seed = seed;
    auto data = std::make_shared<const Dataset>(simulate_dataset(spec));
    const std::size_t k = k_of(T);
    BuildConfig cfg{k, fs.m_factor * k, fs.alpha, fs.rho, fs.split_rule, 0};
    const auto forest = fit_forest(data, cfg, fs.B, derive_seed(seed, 1), fs.jobs);
    const auto report = leaf_deviation_report(forest, mc, fs.jobs);
    rows.push_back({T, k, report.sup_deviation, concentration_ratio(report.sup_deviation, k, T), seed,
                    report.zero_hit_leaves});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Input transform into [0,1]^p.

/// sup_x F(x + M) / F(x - M), the larger of a numeric maximum over a wide
/// bracket and the analytic left-tail limit. Throws ModelError when the left
/// tail makes the ratio unbounded.
inline double zeta_bar(const NoiseModel& noise, double M) {
  if (!(M > 0.0) || !std::isfinite(M)) throw DomainError("zeta_bar: M must be positive and finite");
  const double limit = noise.left_tail_ratio_limit(2.0 * M);
  if (!std::isfinite(limit))
    throw ModelError("zeta_bar: F(x + M) / F(x - M) is unbounded as x -> -inf for " +
                     std::string(to_string(noise.kind())) + " noise; the left-tail condition fails");
  const double reach = 60.0 * noise.scale() + M;
  const auto log_ratio = [&](double x) { return noise.log_cdf(x + M) - noise.log_cdf(x - M); };
  const double numeric = std::exp(grid_then_golden_max(log_ratio, -reach, reach, 20'000).second);
  if (!std::isfinite(numeric)) throw ModelError("zeta_bar: non-finite supremum");
  return std::max({limit, numeric, 1.0});
}

/// Two-component mixture w_minus h_eps(y + M) + w_plus h_eps(y - M) with
/// w_minus = 1 / (zeta_bar + 1), w_plus = zeta_bar / (zeta_bar + 1).
class MixtureDensity {
 public:
  MixtureDensity(NoiseModel noise, double M) : noise_(std::move(noise)), M_(M), zeta_bar_(nlarf::zeta_bar(noise_, M)) {
    w_minus_ = (1.0 - 1.0 / zeta_bar_) / (zeta_bar_ - 1.0 / zeta_bar_);
    w_plus_ = (zeta_bar_ - 1.0) / (zeta_bar_ - 1.0 / zeta_bar_);
    if (!std::isfinite(w_minus_) || !std::isfinite(w_plus_)) w_minus_ = w_plus_ = 0.5;  // zeta_bar == 1
  }

  double zeta_bar() const noexcept { return zeta_bar_; }
  double M() const noexcept { return M_; }
  double weight_minus() const noexcept { return w_minus_; }
  double weight_plus() const noexcept { return w_plus_; }
  const NoiseModel& noise() const noexcept { return noise_; }

  double density(double y) const noexcept { return w_minus_ * noise_.density(y + M_) + w_plus_ * noise_.density(y - M_); }
  double cdf(double x) const noexcept { return w_minus_ * noise_.cdf(x + M_) + w_plus_ * noise_.cdf(x - M_); }

  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("mixture quantile: u must lie in (0, 1)");
    // F_eps(x - M) <= F_h(x) <= F_eps(x + M) brackets the root.
    const double centre = noise_.quantile(u);
    double lo = centre - M_ - 1e-12 * (1.0 + std::abs(centre)), hi = centre + M_ + 1e-12 * (1.0 + std::abs(centre));
    boost::uintmax_t iters = 200;
    const auto fn = [&](double x) { return cdf(x) - u; };
    double flo = fn(lo), fhi = fn(hi);
    if (flo > 0.0) return lo;
    if (fhi < 0.0) return hi;
    const auto [a, b] = boost::math::tools::toms748_solve(fn, lo, hi, flo, fhi,
                                                         boost::math::tools::eps_tolerance<double>(50), iters);
    return std::midpoint(a, b);
  }

 private:
  NoiseModel noise_;
  double M_;
  double zeta_bar_;
  double w_minus_ = 0.5;
  double w_plus_ = 0.5;
};

inline MixtureDensity mixture_density(const NoiseModel& noise, double M) { return {noise, M}; }

/// Applies F_h coordinatewise to every input; Y is unchanged.
inline Dataset transform_inputs(const Dataset& data, const MixtureDensity& h) {
  std::vector<double> z(data.xs().begin(), data.xs().end());
  for (auto& v : z) v = h.cdf(v);
  return Dataset(data.p(), std::move(z), std::vector<double>(data.ys().begin(), data.ys().end()));
}

struct DensityBoundReport {
  double zeta_bar = 0.0;
  double zeta = 0.0;  // zeta_bar^p
  double lower = 0.0;  // 1 / (2 zeta)
  double upper = 0.0;  // 2 zeta
  double fraction_in_bounds = 0.0;
  double min_density = 0.0;
  double max_density = 0.0;
  std::size_t n_bins = 0;
  std::size_t n_samples = 0;
};

/// Histogram check of the transformed-input density against
/// [1 / (2 zeta), 2 zeta], zeta = zeta_bar^p, using the mixture built from the
/// noise law and the function's declared bound M.
inline DensityBoundReport density_bound_check(const SimulationSpec& sim, std::size_t n_samples,
                                              std::size_t n_bins_per_axis) {
  const std::size_t p = sim.f.p;
  if (p != 1 && p != 2) throw DomainError("density_bound_check: p must be 1 or 2");
  if (n_bins_per_axis == 0 || n_samples == 0) throw DomainError("density_bound_check: need samples and bins");
  SimulationSpec spec = sim;
  spec.T = n_samples;
  const Dataset data = simulate_dataset(spec);
  const MixtureDensity h(sim.noise, sim.f.bound_M);
  const std::size_t total_bins = p == 1 ? n_bins_per_axis : n_bins_per_axis * n_bins_per_axis;
  std::vector<std::size_t> counts(total_bins, 0);
  const auto bin = [&](double z) {
    const auto b = static_cast<std::size_t>(z * static_cast<double>(n_bins_per_axis));
    return std::min(b, n_bins_per_axis - 1);
  };
  for (std::size_t t = 0; t < data.size(); ++t) {
    std::size_t idx = bin(h.cdf(data.x(t, 0)));
    if (p == 2) idx = idx * n_bins_per_axis + bin(h.cdf(data.x(t, 1)));
    ++counts[idx];
  }
  DensityBoundReport r;
  r.zeta_bar = h.zeta_bar();
  r.zeta = std::pow(r.zeta_bar, static_cast<double>(p));
  r.lower = 1.0 / (2.0 * r.zeta);
  r.upper = 2.0 * r.zeta;
  r.n_bins = total_bins;
  r.n_samples = n_samples;
  r.min_density = INFINITY;
  r.max_density = 0.0;
  std::size_t inside = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) * static_cast<double>(total_bins) / static_cast<double>(n_samples);
    r.min_density = std::min(r.min_density, d);
    r.max_density = std::max(r.max_density, d);
    if (d >= r.lower && d <= r.upper) ++inside;
  }
  r.fraction_in_bounds = static_cast<double>(inside) / static_cast<double>(total_bins);
  return r;
}

}  // namespace nlarf

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "nlarf/errors.hpp"
#include "nlarf/nlar.hpp"
#include "nlarf/partition.hpp"
#include "nlarf/random.hpp"

namespace nlarf {

struct BuildConfig {
  std::size_t k = 1;
  std::size_t m = 2;
  double alpha = 0.1;
  std::vector<double> rho;  // split-direction probabilities; empty means uniform
  SplitRule split_rule = SplitRule::ExtraTrees;
  std::uint64_t seed = 0;

  /// Config with m = 2k and uniform rho over p axes.
  static BuildConfig with_k(std::size_t k, std::size_t p, double alpha = 0.1,
                            SplitRule rule = SplitRule::ExtraTrees) {
    return {k, 2 * k, alpha, std::vector<double>(p, 1.0 / static_cast<double>(p)), rule, 0};
  }

  std::vector<double> rho_for(std::size_t p) const {
    return rho.empty() ? std::vector<double>(p, 1.0 / static_cast<double>(p)) : rho;
  }

  void validate(std::size_t p) const {
    check_akm_parameters(alpha, k, m);
    const auto r = rho_for(p);
    if (r.size() != p) throw ConfigError("rho must have p = " + std::to_string(p) + " entries");
    double total = 0.0;
    for (double v : r) {
      if (!(v > 0.0)) throw ConfigError("every rho entry must be positive");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("rho must sum to 1");
  }

  BuildParams params() const { return {k, m, alpha, rho, split_rule, seed}; }
};

/// Admissible split band on one axis. A split at rank r puts the r smallest
/// coordinates left; every r in [rank_lo, rank_hi] leaves at least
/// max(k, ceil(alpha n)) points on each side. coord_lo / coord_hi are the
/// rank_lo-th and (rank_hi + 1)-th order statistics.
struct AdmissibleBand {
  std::size_t rank_lo = 0;
  std::size_t rank_hi = 0;
  double coord_lo = 0.0;
  double coord_hi = 0.0;
};

namespace detail {

inline void gather_axis(const Dataset& data, std::span<const std::uint32_t> indices, std::size_t axis,
                        std::vector<double>& out) {
  out.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = data.x(indices[i], axis);
}

inline double separating_threshold(double below, double above) {
  double mid = std::midpoint(below, above);
  if (!(mid < above)) mid = below;
  return mid;
}

}  // namespace detail

/// Absent when the band is empty or every coordinate in it is tied (no
/// threshold separates rank_lo from rank_hi + 1).
inline std::optional<AdmissibleBand> admissible_interval(std::span<const std::uint32_t> indices, std::size_t axis,
                                                         const Dataset& data, const BuildConfig& config,
                                                         std::vector<double>* scratch = nullptr) {
  const std::size_t n = indices.size();
  const std::size_t need = min_child_count(n, config.alpha, config.k);
  if (need == 0 || 2 * need > n) return std::nullopt;
  std::vector<double> local;
  std::vector<double>& coords = scratch ? *scratch : local;
  detail::gather_axis(data, indices, axis, coords);
  AdmissibleBand band{need, n - need, 0.0, 0.0};
  // 1-based rank r is index r - 1.
  std::nth_element(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(band.rank_lo - 1), coords.end());
  band.coord_lo = coords[band.rank_lo - 1];
  std::nth_element(coords.begin() + static_cast<std::ptrdiff_t>(band.rank_lo - 1),
                   coords.begin() + static_cast<std::ptrdiff_t>(band.rank_hi), coords.end());
  band.coord_hi = coords[band.rank_hi];
  if (!(band.coord_lo < band.coord_hi)) return std::nullopt;
  return band;
}

inline std::optional<AdmissibleBand> admissible_interval(const Node& node, std::size_t axis, const Dataset& data,
                                                         const BuildConfig& config) {
  return admissible_interval(node.sample_indices, axis, data, config);
}

namespace detail {

inline Split extra_trees_threshold(std::span<const std::uint32_t> indices, std::size_t axis, const Dataset& data,
                                   const AdmissibleBand& band, RandomStream& rng) {
  double u = rng.uniform(band.coord_lo, band.coord_hi);
  if (u >= band.coord_hi) u = std::nextafter(band.coord_hi, band.coord_lo);
  if (u < band.coord_lo) u = band.coord_lo;
  double below = -INFINITY, above = INFINITY;
  for (auto t : indices) {
    const double c = data.x(t, axis);
    if (c <= u)
      below = std::max(below, c);
    else
      above = std::min(above, c);
  }
  return {axis, separating_threshold(below, above)};
}

inline Split variance_threshold(std::span<const std::uint32_t> indices, std::size_t axis, const Dataset& data,
                                const AdmissibleBand& band) {
  const std::size_t n = indices.size();
  std::vector<std::pair<double, double>> xy(n);
  for (std::size_t i = 0; i < n; ++i) xy[i] = {data.x(indices[i], axis), data.y(indices[i])};
  std::sort(xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0.0, total_sq = 0.0;
  for (const auto& [x, y] : xy) {
    total += y;
    total_sq += y * y;
  }
  double left = 0.0, left_sq = 0.0;
  double best = INFINITY;
  std::size_t best_rank = 0;
  for (std::size_t r = 1; r <= band.rank_hi; ++r) {
    left += xy[r - 1].second;
    left_sq += xy[r - 1].second * xy[r - 1].second;
    if (r < band.rank_lo || !(xy[r - 1].first < xy[r].first)) continue;
    const double nl = static_cast<double>(r), nr = static_cast<double>(n - r);
    const double right = total - left, right_sq = total_sq - left_sq;
    const double sse = (left_sq - left * left / nl) + (right_sq - right * right / nr);
    if (sse < best) {
      best = sse;
      best_rank = r;
    }
  }
  return {axis, separating_threshold(xy[best_rank - 1].first, xy[best_rank].first)};
}

}  // namespace detail

/// Picks an axis from rho (resampling without replacement past axes whose
/// admissible band is empty) and a threshold on it. Absent when no axis admits
/// a split.
inline std::optional<Split> choose_split(std::span<const std::uint32_t> indices, const Dataset& data,
                                         const BuildConfig& config, RandomStream& rng) {
  auto weights = config.rho_for(data.p());
  std::vector<double> scratch;
  for (std::size_t tries = 0; tries < weights.size(); ++tries) {
    const std::size_t axis = rng.categorical(weights);
    const auto band = admissible_interval(indices, axis, data, config, &scratch);
    if (!band) {
      weights[axis] = 0.0;
      if (std::none_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; })) break;
      continue;
    }
    if (config.split_rule == SplitRule::ExtraTrees) return detail::extra_trees_threshold(indices, axis, data, *band, rng);
    return detail::variance_threshold(indices, axis, data, *band);
  }
  return std::nullopt;
}

inline std::optional<Split> choose_split(const Node& node, const Dataset& data, const BuildConfig& config,
                                         RandomStream& rng) {
  return choose_split(node.sample_indices, data, config, rng);
}

/// Grows one (alpha, k, m)-valid tree breadth-first. Nodes with at least m
/// points are split; those where choose_split finds nothing become leaves
/// flagged infeasible.
inline Tree grow_tree(const Dataset& data, const BuildConfig& config, RandomStream& rng) {
  config.validate(data.p());
  if (data.size() < config.k)
    throw ConfigError("T = " + std::to_string(data.size()) + " < k = " + std::to_string(config.k) +
                      ": even the root violates the minimum leaf size");
  Tree tree(data.p());
  tree.set_build_params(config.params());
  std::vector<std::uint32_t> all(data.size());
  std::iota(all.begin(), all.end(), 0u);

  struct Pending {
    std::size_t id;
    std::vector<std::uint32_t> indices;
  };
  std::deque<Pending> queue;
  queue.push_back({0, std::move(all)});
  while (!queue.empty()) {
    Pending item = std::move(queue.front());
    queue.pop_front();
    if (item.indices.size() < config.m) {
      tree.set_samples(item.id, std::move(item.indices), data);
      continue;
    }
    const auto split = choose_split(item.indices, data, config, rng);
    if (!split) {
      tree.set_samples(item.id, std::move(item.indices), data);
      tree.mark_infeasible(item.id);
      continue;
    }
    const std::size_t n = item.indices.size();
    const auto [left_id, right_id] = tree.split_leaf(item.id, *split);
    tree.set_count(item.id, n);
    std::vector<std::uint32_t> left, right;
    left.reserve(n);
    right.reserve(n);
    for (auto t : item.indices) (data.x(t, split->axis) <= split->threshold ? left : right).push_back(t);
    queue.push_back({left_id, std::move(left)});
    queue.push_back({right_id, std::move(right)});
  }
  return tree;
}

}  // namespace nlarf

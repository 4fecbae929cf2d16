#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlarf/errors.hpp"
#include "nlarf/nlar.hpp"
#include "nlarf/numeric.hpp"
#include "nlarf/parallel.hpp"
#include "nlarf/partition.hpp"
#include "nlarf/random.hpp"
#include "nlarf/tree_builder.hpp"

namespace nlarf {

/// B trees grown on the same full sample; prediction is the plain average.
struct Forest {
  std::vector<Tree> trees;
  std::shared_ptr<const Dataset> data;
  BuildConfig config;
  std::size_t B = 0;
  std::uint64_t master_seed = 0;

  std::size_t p() const noexcept { return data ? data->p() : 0; }
};

/// Prediction of one tree: the training-Y mean of the leaf containing x.
inline double tree_predict(const Tree& tree, std::span<const double> x) {
  const Node& leaf = tree.leaf_of(x);
  if (leaf.count == 0 || leaf.sample_indices.empty())
    throw InvariantError("tree_predict: reached an empty leaf");
  return leaf.leaf_mean;
}

/// Same as tree_predict(tree, x) but recomputes the leaf mean from `data`.
inline double tree_predict(const Tree& tree, const Dataset& data, std::span<const double> x) {
  const Node& leaf = tree.leaf_of(x);
  if (leaf.sample_indices.empty()) throw InvariantError("tree_predict: reached an empty leaf");
  return leaf_average(data, leaf.sample_indices);
}

/// Grows B trees; tree b draws from RandomStream::derived(master_seed, b), so
/// the result does not depend on `jobs`. Each tree is checked with
/// validate_akm before it is accepted.
inline Forest fit_forest(std::shared_ptr<const Dataset> data, const BuildConfig& config, std::size_t B,
                         std::uint64_t master_seed, unsigned jobs = 1) {
  if (!data || data->empty()) throw ConfigError("fit_forest: dataset is empty");
  if (B == 0) throw ConfigError("fit_forest: B must be positive");
  config.validate(data->p());
  Forest forest;
  forest.data = data;
  forest.config = config;
  forest.config.rho = config.rho_for(data->p());
  forest.B = B;
  forest.master_seed = master_seed;
  std::vector<std::optional<Tree>> grown(B);
  parallel_for(B, jobs, [&](std::size_t b) {
    BuildConfig cfg = forest.config;
    cfg.seed = derive_seed(master_seed, b);
    RandomStream rng(cfg.seed);
    Tree tree = grow_tree(*data, cfg, rng);
    const auto report = validate_akm(tree, *data, cfg.alpha, cfg.k, cfg.m);
    if (!report.ok) throw InvariantError("fit_forest: tree " + std::to_string(b) + " failed (alpha,k,m) validation");
    grown[b] = std::move(tree);
  });
  forest.trees.reserve(B);
  for (auto& t : grown) forest.trees.push_back(std::move(*t));
  return forest;
}

inline Forest fit_forest(const Dataset& data, const BuildConfig& config, std::size_t B, std::uint64_t master_seed,
                         unsigned jobs = 1) {
  return fit_forest(std::make_shared<const Dataset>(data), config, B, master_seed, jobs);
}

inline double forest_predict(const Forest& forest, std::span<const double> x) {
  CompensatedSum s;
  for (const auto& tree : forest.trees) s.add(tree_predict(tree, x));
  return s.value() / static_cast<double>(forest.trees.size());
}

/// Row-major batch of points (xs.size() must be a multiple of p). Output order
/// follows input order and does not depend on `jobs`.
inline std::vector<double> forest_predict_batch(const Forest& forest, std::span<const double> xs, unsigned jobs = 1) {
  const std::size_t p = forest.p();
  if (p == 0 || xs.size() % p != 0) throw ShapeError("forest_predict_batch: input size is not a multiple of p");
  const std::size_t n = xs.size() / p;
  std::vector<double> out(n);
  parallel_for(n, jobs, [&](std::size_t i) { out[i] = forest_predict(forest, xs.subspan(i * p, p)); });
  return out;
}

inline std::vector<double> forest_predict_batch(const Forest& forest, const std::vector<std::vector<double>>& xs,
                                                unsigned jobs = 1) {
  std::vector<double> flat;
  flat.reserve(xs.size() * forest.p());
  for (const auto& x : xs) {
    if (x.size() != forest.p()) throw ShapeError("forest_predict_batch: point has the wrong dimension");
    flat.insert(flat.end(), x.begin(), x.end());
  }
  return forest_predict_batch(forest, std::span<const double>(flat), jobs);
}

// ---------------------------------------------------------------------------
// Persistence: <dir>/forest.json holds the metadata, <dir>/trees/tree_NNNNN.txt
// one serialised tree each. Leaf samples are not stored; loading routes the
// training data again and checks every count.

inline std::string fingerprint_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json config_to_json(const BuildConfig& c) {
  return {{"k", c.k}, {"m", c.m}, {"alpha", c.alpha}, {"rho", c.rho}, {"split_rule", std::string(to_string(c.split_rule))}};
}

inline void save_forest(const Forest& forest, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "trees");
  nlohmann::json meta = {{"format", "nlarf-forest v1"},
                         {"B", forest.B},
                         {"master_seed", forest.master_seed},
                         {"p", forest.p()},
                         {"T", forest.data ? forest.data->size() : 0},
                         {"dataset_fingerprint", fingerprint_hex(forest.data ? forest.data->fingerprint() : 0)},
                         {"config", config_to_json(forest.config)}};
  {
    std::ofstream os(dir / "forest.json");
    os << meta.dump(2) << '\n';
    if (!os) throw Error("cannot write " + (dir / "forest.json").string());
  }
  for (std::size_t b = 0; b < forest.trees.size(); ++b) {
    char name[32];
    std::snprintf(name, sizeof name, "tree_%05zu.txt", b);
    std::ofstream os(dir / "trees" / name);
    write_tree(os, forest.trees[b]);
    if (!os) throw Error("cannot write tree file " + std::string(name));
  }
}

inline Forest load_forest(const std::filesystem::path& dir, std::shared_ptr<const Dataset> data) {
  namespace fs = std::filesystem;
  std::ifstream is(dir / "forest.json");
  if (!is) throw ConfigError("cannot open " + (dir / "forest.json").string());
  nlohmann::json meta;
  try {
    is >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("forest.json: ") + e.what());
  }
  if (meta.value("format", "") != "nlarf-forest v1") throw FormatError("forest.json: unknown format");
  if (!data) throw ConfigError("load_forest: training data required");
  if (meta.at("dataset_fingerprint").get<std::string>() != fingerprint_hex(data->fingerprint()))
    throw ConfigError("load_forest: dataset fingerprint does not match the forest");
  Forest forest;
  forest.data = data;
  forest.B = meta.at("B").get<std::size_t>();
  forest.master_seed = meta.at("master_seed").get<std::uint64_t>();
  const auto& c = meta.at("config");
  forest.config.k = c.at("k").get<std::size_t>();
  forest.config.m = c.at("m").get<std::size_t>();
  forest.config.alpha = c.at("alpha").get<double>();
  forest.config.rho = c.at("rho").get<std::vector<double>>();
  forest.config.split_rule = split_rule_from_string(c.at("split_rule").get<std::string>());
  forest.config.seed = forest.master_seed;
  for (std::size_t b = 0; b < forest.B; ++b) {
    char name[32];
    std::snprintf(name, sizeof name, "tree_%05zu.txt", b);
    std::ifstream ts(dir / "trees" / name);
    if (!ts) throw FormatError("missing tree file " + std::string(name));
    Tree tree = read_tree(ts);
    if (tree.p() != data->p()) throw FormatError("tree " + std::to_string(b) + " has the wrong dimension");
    const auto counts = route_counts(tree, *data);
    for (std::size_t id = 0; id < counts.size(); ++id)
      if (counts[id] != tree.node(id).count)
        throw FormatError("tree " + std::to_string(b) + ": node " + std::to_string(id) + " count does not match data");
    tree.attach_data(*data);
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace nlarf

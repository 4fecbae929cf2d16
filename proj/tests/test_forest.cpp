#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "nlarf/forest.hpp"

using namespace nlarf;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Dataset> f1_data(std::size_t T, std::uint64_t seed) {
  SimulationSpec s;
  s.f = builtin_function("f1");
  s.T = T;
  s.seed = seed;
  return std::make_shared<const Dataset>(simulate_dataset(s));
}

Tree split_at(const Dataset& d, double tau) {
  Tree t(1);
  t.split_leaf(0, {0, tau});
  t.attach_data(d);
  return t;
}

std::string serialize(const Tree& t) {
  std::ostringstream os;
  write_tree(os, t);
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nlarf_forest_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(TreePredict, ConstantResponse) {
  const Dataset d(1, {-1.0, 0.5, 2.0, 3.0}, {7.0, 7.0, 7.0, 7.0});
  const Tree t = split_at(d, 1.0);
  for (double x : {-5.0, 1.0, 9.0}) EXPECT_EQ(tree_predict(t, std::span(&x, 1)), 7.0);
}

TEST(TreePredict, RootOnlyGivesGlobalMean) {
  const Dataset d(1, {1.0, 2.0, 3.0}, {1.0, 2.0, 6.0});
  Tree t(1);
  t.attach_data(d);
  const double x = 0.0;
  EXPECT_EQ(tree_predict(t, std::span(&x, 1)), 3.0);
}

TEST(TreePredict, HandExample) {
  // Left indices {1, 3} (1-based) are the only points with X <= 0.
  const Dataset d(1, {-1.0, 1.0, -2.0, 1.0, 2.0, 3.0}, {2.0, 9.0, 4.0, 9.0, 9.0, 9.0});
  const Tree t = split_at(d, 0.0);
  EXPECT_EQ(t.node(1).sample_indices, (std::vector<std::uint32_t>{0, 2}));
  const double x = -1.0;
  EXPECT_EQ(tree_predict(t, std::span(&x, 1)), 3.0);
  EXPECT_EQ(tree_predict(t, d, std::span(&x, 1)), 3.0);
}

TEST(TreePredict, EmptyLeafIsAnInvariantError) {
  const Dataset d(1, {1.0, 2.0}, {0.0, 0.0});
  const Tree t = split_at(d, -5.0);
  const double x = -10.0;
  EXPECT_THROW(tree_predict(t, std::span(&x, 1)), InvariantError);
}

TEST(ForestPredict, AverageOfHandBuiltTrees) {
  auto d = std::make_shared<const Dataset>(1, std::vector<double>{-3, -2, -1, 1, 2, 3},
                                           std::vector<double>{1, 3, 14, 0, 0, 0});
  Forest f;
  f.data = d;
  for (double tau : {-2.5, -1.5, -0.5}) f.trees.push_back(split_at(*d, tau));
  f.B = 3;
  const double x = -3.0;
  EXPECT_EQ(tree_predict(f.trees[0], std::span(&x, 1)), 1.0);
  EXPECT_EQ(tree_predict(f.trees[1], std::span(&x, 1)), 2.0);
  EXPECT_EQ(tree_predict(f.trees[2], std::span(&x, 1)), 6.0);
  EXPECT_EQ(forest_predict(f, std::span(&x, 1)), 3.0);
}

TEST(FitForest, SingleTreeEqualsTreePrediction) {
  const auto d = f1_data(800, 1);
  const auto f = fit_forest(d, BuildConfig::with_k(40, 1), 1, 5);
  RandomStream rng(derive_seed(5, 0));
  auto cfg = BuildConfig::with_k(40, 1);
  cfg.seed = derive_seed(5, 0);
  const Tree t = grow_tree(*d, cfg, rng);
  EXPECT_EQ(serialize(f.trees[0]), serialize(t));
  for (double x = -8.0; x <= 8.0; x += 0.05) EXPECT_EQ(forest_predict(f, std::span(&x, 1)), tree_predict(t, std::span(&x, 1)));
}

TEST(FitForest, DifferentMasterSeedsGiveDifferentTrees) {
  const auto d = f1_data(800, 2);
  const auto a = fit_forest(d, BuildConfig::with_k(40, 1), 3, 1);
  const auto b = fit_forest(d, BuildConfig::with_k(40, 1), 3, 2);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NE(serialize(a.trees[i]), serialize(b.trees[i]));
  EXPECT_NE(serialize(a.trees[0]), serialize(a.trees[1]));
}

TEST(FitForest, ScheduleSizedForestValidates) {
  const auto d = f1_data(400, 3);
  const auto f = fit_forest(d, BuildConfig::with_k(92, 1), 500, 11);
  ASSERT_EQ(f.trees.size(), 500u);
  for (const auto& t : f.trees) EXPECT_TRUE(validate_akm(t, *d, 0.1, 92, 184).ok);
}

TEST(FitForest, ResultDoesNotDependOnJobs) {
  const auto d = f1_data(1000, 4);
  const auto a = fit_forest(d, BuildConfig::with_k(30, 1), 16, 9, 1);
  const auto b = fit_forest(d, BuildConfig::with_k(30, 1), 16, 9, 4);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(serialize(a.trees[i]), serialize(b.trees[i]));
}

TEST(FitForest, RejectsBadArguments) {
  const auto d = f1_data(100, 1);
  EXPECT_THROW(fit_forest(d, BuildConfig::with_k(10, 1), 0, 1), ConfigError);
  EXPECT_THROW(fit_forest(d, BuildConfig::with_k(200, 1), 2, 1), ConfigError);
  EXPECT_THROW(fit_forest(std::shared_ptr<const Dataset>{}, BuildConfig::with_k(10, 1), 2, 1), ConfigError);
}

TEST(ForestPredict, IdentityWithTreeAverage) {
  const auto d = f1_data(1600, 5);
  const auto f = fit_forest(d, BuildConfig::with_k(40, 1), 50, 3);
  for (double x = -9.0; x <= 9.0; x += 0.5) {
    double s = 0.0;
    for (const auto& t : f.trees) s += tree_predict(t, *d, std::span(&x, 1));
    EXPECT_NEAR(forest_predict(f, std::span(&x, 1)), s / 50.0, 1e-12);
  }
}

TEST(ForestPredict, BoundedByResponseRange) {
  const auto d = f1_data(1600, 6);
  const auto f = fit_forest(d, BuildConfig::with_k(40, 1), 20, 3);
  const auto [lo, hi] = std::minmax_element(d->ys().begin(), d->ys().end());
  for (double x = -50.0; x <= 50.0; x += 0.25) {
    const double v = forest_predict(f, std::span(&x, 1));
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
}

TEST(ForestPredictBatch, EmptySingletonAndThreads) {
  const auto d = f1_data(1600, 7);
  const auto f = fit_forest(d, BuildConfig::with_k(40, 1), 30, 3);
  EXPECT_TRUE(forest_predict_batch(f, std::vector<std::vector<double>>{}).empty());
  const std::vector<std::vector<double>> one{{0.3}};
  const auto single = forest_predict_batch(f, one);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0], forest_predict(f, one[0]));
  std::vector<double> grid(100);
  for (std::size_t i = 0; i < 100; ++i) grid[i] = -5.0 + 0.1 * static_cast<double>(i);
  const auto serial = forest_predict_batch(f, std::span<const double>(grid), 1);
  const auto threaded = forest_predict_batch(f, std::span<const double>(grid), 8);
  EXPECT_EQ(serial, threaded);
  EXPECT_THROW(forest_predict_batch(f, std::vector<std::vector<double>>{{1.0, 2.0}}), ShapeError);
}

TEST(Persistence, RoundTrip) {
  TempDir tmp;
  const auto d = f1_data(800, 8);
  const auto f = fit_forest(d, BuildConfig::with_k(40, 1), 12, 21);
  save_forest(f, tmp.path);
  EXPECT_TRUE(fs::exists(tmp.path / "forest.json"));
  EXPECT_TRUE(fs::exists(tmp.path / "trees" / "tree_00011.txt"));
  const auto g = load_forest(tmp.path, d);
  ASSERT_EQ(g.trees.size(), 12u);
  EXPECT_EQ(g.master_seed, 21u);
  EXPECT_EQ(g.config.k, 40u);
  for (double x = -6.0; x <= 6.0; x += 0.1) EXPECT_EQ(forest_predict(g, std::span(&x, 1)), forest_predict(f, std::span(&x, 1)));
}

TEST(Persistence, FingerprintMismatchIsRejected) {
  TempDir tmp;
  const auto d = f1_data(800, 8);
  save_forest(fit_forest(d, BuildConfig::with_k(40, 1), 2, 21), tmp.path);
  EXPECT_THROW(load_forest(tmp.path, f1_data(800, 9)), ConfigError);
  EXPECT_THROW(load_forest(tmp.path / "missing", d), ConfigError);
}

TEST(Persistence, CorruptedCountIsRejected) {
  TempDir tmp;
  const auto d = f1_data(800, 8);
  save_forest(fit_forest(d, BuildConfig::with_k(40, 1), 2, 21), tmp.path);
  const auto file = tmp.path / "trees" / "tree_00001.txt";
  std::ifstream is(file);
  std::stringstream ss;
  ss << is.rdbuf();
  is.close();
  std::string text = ss.str();
  const auto pos = text.find("\n1,0,");
  ASSERT_NE(pos, std::string::npos);
  const auto comma = text.rfind(',', text.find('\n', pos + 1));
  const auto field = text.rfind(',', comma - 1);
  text.replace(field + 1, comma - field - 1, "1");
  std::ofstream(file) << text;
  EXPECT_THROW(load_forest(tmp.path, d), FormatError);
}

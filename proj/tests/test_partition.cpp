#include <gtest/gtest.h>

#include <numeric>
#include <sstream>
#include <vector>

#include "nlarf/partition.hpp"
#include "nlarf/tree_builder.hpp"

using namespace nlarf;

namespace {

Dataset line_data(std::vector<double> x, std::vector<double> y = {}) {
  if (y.empty()) y.assign(x.size(), 0.0);
  return Dataset(1, std::move(x), std::move(y));
}

Dataset grid_1d(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) - static_cast<double>(n) / 2.0 + 0.5;
  return line_data(x);
}

// Parent of n points split at a threshold leaving `left` points on the left.
Tree two_leaf(const Dataset& d, std::size_t left) {
  Tree t(1);
  t.split_leaf(0, {0, d.x(left - 1, 0) + 0.5});
  t.attach_data(d);
  return t;
}

Tree three_leaf_2d() {
  Tree t(2);
  const auto [l, r] = t.split_leaf(0, {0, 0.0});
  (void)l;
  t.split_leaf(r, {1, 1.0});
  return t;
}

}  // namespace

TEST(LeafOf, RootOnly) {
  Tree t(1);
  for (double x : {-1e9, 0.0, 3.5}) EXPECT_EQ(t.leaf_id(std::span(&x, 1)), 0u);
}

TEST(LeafOf, ClosedLeft) {
  Tree t(1);
  const auto [l, r] = t.split_leaf(0, {0, 0.0});
  const double a = -1.0, b = 0.0, c = 1e-300;
  EXPECT_EQ(t.leaf_id(std::span(&a, 1)), l);
  EXPECT_EQ(t.leaf_id(std::span(&b, 1)), l);
  EXPECT_EQ(t.leaf_id(std::span(&c, 1)), r);
}

TEST(LeafOf, ThreeLeafTwoDimensional) {
  const Tree t = three_leaf_2d();
  const std::vector<double> x{0.5, 2.0};
  const Node& n = t.leaf_of(x);
  EXPECT_EQ(t.leaf_id(x), 4u);
  EXPECT_EQ(n.parent, 2u);
  EXPECT_EQ(t.node(2).right, 4u);
  EXPECT_EQ(t.leaf_id(std::vector<double>{0.5, 1.0}), 3u);
  EXPECT_EQ(t.leaf_id(std::vector<double>{0.0, 7.0}), 1u);
}

TEST(LeafOf, DimensionMismatch) {
  const Tree t = three_leaf_2d();
  EXPECT_THROW(t.leaf_id(std::vector<double>{1.0}), ShapeError);
  EXPECT_THROW(t.leaf_id(std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
}

TEST(LeafOf, LeavesTileTheSpace) {
  // Each of 10^4 random points lies in exactly one leaf region, and that leaf
  // is the one found by descending the tree.
  const auto sim = [] {
    SimulationSpec s;
    s.f = builtin_function("f5");
    s.T = 2000;
    s.seed = 3;
    return simulate_dataset(s);
  }();
  RandomStream rng(1);
  const Tree t = grow_tree(sim, BuildConfig::with_k(20, 2), rng);
  ASSERT_GT(t.leaf_count(), 10u);
  RandomStream probe(2);
  for (int i = 0; i < 10'000; ++i) {
    const std::vector<double> x{probe.uniform(-8, 8), probe.uniform(-8, 8)};
    std::size_t hits = 0, where = kNoNode;
    for (auto id : t.leaf_ids())
      if (t.node(id).region.contains(x)) ++hits, where = id;
    ASSERT_EQ(hits, 1u);
    EXPECT_EQ(where, t.leaf_id(x));
  }
}

TEST(KValid, RootOnlyCounts) {
  Tree t(1);
  EXPECT_TRUE(validate_k_valid(t, grid_1d(100), 100).ok);
  const auto bad = validate_k_valid(t, grid_1d(99), 100);
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.offending_leaves, std::vector<std::size_t>{0});
}

TEST(KValid, BuilderOutput) {
  SimulationSpec s;
  s.f = builtin_function("f1");
  s.T = 400;
  s.seed = 9;
  const auto d = simulate_dataset(s);
  RandomStream rng(5);
  EXPECT_TRUE(validate_k_valid(grow_tree(d, BuildConfig::with_k(30, 1), rng), d, 30).ok);
}

TEST(Akm, BalancedSplitPasses) {
  const auto d = grid_1d(100);
  const auto rep = validate_akm(two_leaf(d, 50), d, 0.3, 10, 20);
  EXPECT_EQ(rep.count(Rule::Balance), 0u);
  EXPECT_EQ(rep.count(Rule::MinLeaf), 0u);
  EXPECT_EQ(rep.count(Rule::Count), 0u);
  // Each leaf still holds 50 >= m points, so rule (i) flags both.
  EXPECT_EQ(rep.count(Rule::MaxLeaf), 2u);
  EXPECT_TRUE(validate_akm(two_leaf(d, 50), d, 0.3, 10, 60).ok);
}

TEST(Akm, UnbalancedSplitViolatesBalance) {
  const auto d = grid_1d(100);
  const auto rep = validate_akm(two_leaf(d, 10), d, 0.3, 10, 100);
  EXPECT_FALSE(rep.ok);
  ASSERT_EQ(rep.count(Rule::Balance), 1u);
  const auto it = std::find_if(rep.violations.begin(), rep.violations.end(),
                               [](const Violation& v) { return v.rule == Rule::Balance; });
  EXPECT_EQ(it->observed, 10u);
  EXPECT_EQ(it->required, 30u);
}

TEST(Akm, StoredCountMismatchIsReported) {
  const auto d = grid_1d(100);
  Tree t = two_leaf(d, 50);
  t.set_count(1, 49);
  EXPECT_EQ(validate_akm(t, d, 0.3, 10, 60).count(Rule::Count), 1u);
}

TEST(Akm, InfeasibleLeafWaivesMaxRule) {
  const auto d = line_data(std::vector<double>(50, 1.0));
  Tree t(1);
  t.attach_data(d);
  EXPECT_EQ(validate_akm(t, d, 0.1, 5, 10).count(Rule::MaxLeaf), 1u);
  t.mark_infeasible(0);
  const auto rep = validate_akm(t, d, 0.1, 5, 10);
  EXPECT_TRUE(rep.ok);
  EXPECT_EQ(rep.infeasible_leaves, 1u);
}

TEST(Akm, ParameterErrors) {
  const auto d = grid_1d(10);
  Tree t(1);
  EXPECT_THROW(validate_akm(t, d, 0.6, 1, 2), ConfigError);
  EXPECT_THROW(validate_akm(t, d, 0.0, 1, 2), ConfigError);
  EXPECT_THROW(validate_akm(t, d, 0.1, 5, 9), ConfigError);
  EXPECT_THROW(validate_akm(t, d, 0.1, 0, 9), ConfigError);
}

TEST(MinChildCount, Examples) {
  EXPECT_EQ(min_child_count(100, 0.3, 10), 30u);
  EXPECT_EQ(min_child_count(100, 0.1, 20), 20u);
  EXPECT_EQ(min_child_count(101, 0.3, 10), 31u);
}

TEST(Counts, ConservedAlongEverySplit) {
  SimulationSpec s;
  s.f = builtin_function("f2");
  s.T = 3000;
  s.seed = 17;
  const auto d = simulate_dataset(s);
  RandomStream rng(4);
  const Tree t = grow_tree(d, BuildConfig::with_k(25, 1), rng);
  EXPECT_EQ(t.root().count, d.size());
  std::size_t leaf_total = 0;
  for (std::size_t id = 0; id < t.nodes().size(); ++id) {
    const Node& n = t.node(id);
    if (n.is_leaf()) {
      leaf_total += n.count;
      EXPECT_EQ(n.count, n.sample_indices.size());
    } else {
      EXPECT_EQ(n.count, t.node(n.left).count + t.node(n.right).count);
      EXPECT_EQ(t.collect_indices(id).size(), n.count);
    }
  }
  EXPECT_EQ(leaf_total, d.size());
  EXPECT_EQ(route_counts(t, d)[0], d.size());
}

TEST(SplitLeaf, RejectsInvalidRequests) {
  Tree t(1);
  EXPECT_THROW(t.split_leaf(0, {1, 0.0}), ShapeError);
  t.split_leaf(0, {0, 0.0});
  EXPECT_THROW(t.split_leaf(0, {0, 1.0}), ShapeError);
  EXPECT_THROW(t.split_leaf(1, {0, 0.5}), ShapeError);  // outside (-inf, 0]
  EXPECT_THROW(t.split_leaf(2, {0, 0.0}), ShapeError);  // on the open boundary
  EXPECT_THROW(t.split_leaf(7, {0, 0.0}), std::out_of_range);
}

TEST(Serialization, RoundTripPreservesStructure) {
  SimulationSpec s;
  s.f = builtin_function("f5");
  s.T = 1500;
  s.seed = 23;
  const auto d = simulate_dataset(s);
  RandomStream rng(8);
  auto cfg = BuildConfig::with_k(30, 2);
  cfg.seed = 99;
  const Tree t = grow_tree(d, cfg, rng);
  std::stringstream ss;
  write_tree(ss, t);
  const std::string text = ss.str();
  Tree back = read_tree(ss);
  ASSERT_EQ(back.nodes().size(), t.nodes().size());
  for (std::size_t id = 0; id < t.nodes().size(); ++id) {
    EXPECT_EQ(back.node(id).split, t.node(id).split);
    EXPECT_EQ(back.node(id).count, t.node(id).count);
    EXPECT_EQ(back.node(id).region.lo, t.node(id).region.lo);
    EXPECT_EQ(back.node(id).region.hi, t.node(id).region.hi);
  }
  EXPECT_EQ(back.build_params().seed, 99u);
  EXPECT_EQ(back.build_params().k, 30u);
  back.attach_data(d);
  for (auto id : t.leaf_ids()) EXPECT_EQ(back.node(id).sample_indices, t.node(id).sample_indices);
  std::stringstream again;
  write_tree(again, back);
  EXPECT_EQ(again.str(), text);
}

TEST(Serialization, MalformedInputIsRejected) {
  const std::string head = "# nlarf-tree v1\n# p=1 k=1 m=2 alpha=0.1 split_rule=extratrees seed=0 rho=1\n"
                           "node_id,parent_id,axis,threshold,count,infeasible\n";
  for (const std::string body : {"", "0,-1,1,0.5,3,0\n", "0,-1,1,0.5,3,0\n1,0,-1,nan,1,0\n",
                                 "0,-1,x,nan,3,0\n", "0,-1,-1,nan\n", "0,-1,2,0.5,3,0\n1,0,-1,nan,1,0\n2,0,-1,nan,2,0\n",
                                 "1,-1,-1,nan,3,0\n", "0,-1,1,zz,3,0\n"}) {
    std::istringstream is(head + body);
    EXPECT_THROW(read_tree(is), FormatError) << body;
  }
  std::istringstream nohdr("0,-1,-1,nan,3,0\n");
  EXPECT_THROW(read_tree(nohdr), FormatError);
}

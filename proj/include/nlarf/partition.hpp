#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nlarf/errors.hpp"
#include "nlarf/nlar.hpp"
#include "nlarf/numeric.hpp"

namespace nlarf {

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

enum class SplitRule { ExtraTrees, VarianceReduction };

inline std::string_view to_string(SplitRule rule) {
  return rule == SplitRule::ExtraTrees ? "extratrees" : "variance";
}

inline SplitRule split_rule_from_string(std::string_view s) {
  if (s == "extratrees" || s == "ExtraTrees" || s == "extra_trees") return SplitRule::ExtraTrees;
  if (s == "variance" || s == "VarianceReduction" || s == "variance_reduction") return SplitRule::VarianceReduction;
  throw ConfigError("unknown split rule '" + std::string(s) + "'");
}

/// Left child receives {x : x[axis] <= threshold}, right child {x : x[axis] > threshold}.
struct Split {
  std::size_t axis = 0;  // 0-based
  double threshold = 0.0;
  bool operator==(const Split&) const = default;
};

/// Axis-aligned box {x : lo_i < x_i <= hi_i}, bounds may be infinite.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box whole_space(std::size_t p) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(p, -inf), std::vector<double>(p, inf)};
  }

  bool contains(std::span<const double> x) const noexcept {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] < x[i] && x[i] <= hi[i])) return false;
    return true;
  }
};

struct Node {
  Box region;
  std::optional<Split> split;
  std::size_t parent = kNoNode;
  std::size_t left = kNoNode;
  std::size_t right = kNoNode;
  std::size_t count = 0;
  std::vector<std::uint32_t> sample_indices;  // sorted; populated on leaves only
  double leaf_mean = std::nan("");
  bool infeasible = false;  // >= m points but no admissible split existed

  bool is_leaf() const noexcept { return !split.has_value(); }
};

struct BuildParams {
  std::size_t k = 1;
  std::size_t m = 2;
  double alpha = 0.1;
  std::vector<double> rho;
  SplitRule split_rule = SplitRule::ExtraTrees;
  std::uint64_t seed = 0;
};

/// Within-leaf mean of Y, summed in index order.
inline double leaf_average(const Dataset& data, std::span<const std::uint32_t> indices) {
  CompensatedSum s;
  for (auto t : indices) s.add(data.y(t));
  return s.value() / static_cast<double>(indices.size());
}

/// max(k, ceil(alpha * n)). Products that land within 1e-9 above an integer
/// are treated as that integer so 0.3 * 100 gives 30.
inline std::size_t min_child_count(std::size_t n, double alpha, std::size_t k) {
  const double v = alpha * static_cast<double>(n);
  double r = std::ceil(v);
  if (r - v > 1.0 - 1e-9) r -= 1.0;
  return std::max(k, static_cast<std::size_t>(std::max(0.0, r)));
}

/// Recursive axis-aligned partition of R^p. Node 0 is the root; node ids are
/// assigned in split order, so trees grown breadth-first number their nodes
/// breadth-first.
class Tree {
 public:
  explicit Tree(std::size_t p) : p_(p) {
    if (p == 0) throw ShapeError("tree: p must be positive");
    Node root;
    root.region = Box::whole_space(p);
    nodes_.push_back(std::move(root));
  }

  std::size_t p() const noexcept { return p_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  const Node& root() const noexcept { return nodes_.front(); }
  const BuildParams& build_params() const noexcept { return params_; }
  void set_build_params(BuildParams params) { params_ = std::move(params); }

  std::size_t leaf_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
  }

  std::vector<std::size_t> leaf_ids() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].is_leaf()) ids.push_back(i);
    return ids;
  }

  /// Id of the unique leaf whose region contains x.
  std::size_t leaf_id(std::span<const double> x) const {
    if (x.size() != p_)
      throw ShapeError("leaf_of: point has dimension " + std::to_string(x.size()) + ", tree has p = " + std::to_string(p_));
    std::size_t id = 0;
    while (const auto& s = nodes_[id].split) id = x[s->axis] <= s->threshold ? nodes_[id].left : nodes_[id].right;
    return id;
  }

  const Node& leaf_of(std::span<const double> x) const { return nodes_[leaf_id(x)]; }

  /// Turns leaf `id` into an internal node with two fresh leaf children.
  /// Returns (left id, right id). Sample bookkeeping of the new leaves is left
  /// to the caller (set_samples or attach_data).
  std::pair<std::size_t, std::size_t> split_leaf(std::size_t id, Split split) {
    Node& parent = nodes_.at(id);
    if (!parent.is_leaf()) throw ShapeError("split_leaf: node " + std::to_string(id) + " is already split");
    if (split.axis >= p_) throw ShapeError("split_leaf: axis out of range");
    const double lo = parent.region.lo[split.axis], hi = parent.region.hi[split.axis];
    if (!(lo < split.threshold && split.threshold < hi) || !std::isfinite(split.threshold))
      throw ShapeError("split_leaf: threshold must lie strictly inside the node's region");
    Node left, right;
    left.region = right.region = parent.region;
    left.region.hi[split.axis] = split.threshold;
    right.region.lo[split.axis] = split.threshold;
    left.parent = right.parent = id;
    parent.split = split;
    parent.sample_indices.clear();
    parent.sample_indices.shrink_to_fit();
    parent.leaf_mean = std::nan("");
    parent.infeasible = false;
    parent.left = nodes_.size();
    parent.right = nodes_.size() + 1;
    const auto ids = std::pair{parent.left, parent.right};
    nodes_.push_back(std::move(left));
    nodes_.push_back(std::move(right));
    return ids;
  }

  /// Records the training points of a node. Leaves keep the indices and their
  /// Y-average; internal nodes keep only the count.
  void set_samples(std::size_t id, std::vector<std::uint32_t> indices, const Dataset& data) {
    Node& n = nodes_.at(id);
    n.count = indices.size();
    if (n.is_leaf()) {
      std::sort(indices.begin(), indices.end());
      n.leaf_mean = indices.empty() ? std::nan("") : leaf_average(data, indices);
      n.sample_indices = std::move(indices);
    }
  }

  void set_count(std::size_t id, std::size_t n) { nodes_.at(id).count = n; }

  void mark_infeasible(std::size_t id) {
    if (!nodes_.at(id).is_leaf()) throw ShapeError("mark_infeasible: node is not a leaf");
    nodes_[id].infeasible = true;
  }

  /// Routes every training point through the tree and fills counts, leaf
  /// indices and leaf means from scratch.
  void attach_data(const Dataset& data) {
    if (data.p() != p_) throw ShapeError("attach_data: dataset dimension does not match tree");
    std::vector<std::vector<std::uint32_t>> per_leaf(nodes_.size());
    for (auto& n : nodes_) n.count = 0;
    for (std::size_t t = 0; t < data.size(); ++t) {
      const auto x = data.x(t);
      std::size_t id = 0;
      for (;;) {
        ++nodes_[id].count;
        const auto& s = nodes_[id].split;
        if (!s) break;
        id = x[s->axis] <= s->threshold ? nodes_[id].left : nodes_[id].right;
      }
      per_leaf[id].push_back(static_cast<std::uint32_t>(t));
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      if (!nodes_[id].is_leaf()) continue;
      nodes_[id].sample_indices = std::move(per_leaf[id]);
      nodes_[id].leaf_mean = nodes_[id].count ? leaf_average(data, nodes_[id].sample_indices) : std::nan("");
    }
  }

  /// Sorted training indices of any node (leaf indices of its subtree).
  std::vector<std::uint32_t> collect_indices(std::size_t id) const {
    std::vector<std::uint32_t> out;
    std::vector<std::size_t> stack{id};
    while (!stack.empty()) {
      const auto& n = nodes_.at(stack.back());
      stack.pop_back();
      if (n.is_leaf()) {
        out.insert(out.end(), n.sample_indices.begin(), n.sample_indices.end());
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Row of the text serialisation.
  struct Row {
    std::size_t node_id = 0;
    std::size_t parent_id = kNoNode;
    std::optional<Split> split;
    std::size_t count = 0;
    bool infeasible = false;
  };

  /// Rebuilds the structure (no samples) from rows listed in node-id order.
  /// For each parent the child with the smaller id is the left child.
  static Tree from_rows(std::size_t p, const std::vector<Row>& rows) {
    if (rows.empty()) throw FormatError("tree: no nodes");
    Tree tree(p);
    tree.nodes_.assign(rows.size(), Node{});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      if (r.node_id != i) throw FormatError("tree: node ids must be 0..n-1 in order");
      if ((i == 0) != (r.parent_id == kNoNode)) throw FormatError("tree: only node 0 may lack a parent");
      Node& n = tree.nodes_[i];
      n.split = r.split;
      n.count = r.count;
      n.infeasible = r.infeasible;
      n.parent = r.parent_id;
      if (r.split && r.split->axis >= p) throw FormatError("tree: axis out of range");
      if (r.split && !std::isfinite(r.split->threshold)) throw FormatError("tree: non-finite threshold");
      if (i > 0) {
        if (r.parent_id >= i) throw FormatError("tree: parent must precede child");
        Node& parent = tree.nodes_[r.parent_id];
        if (!parent.split) throw FormatError("tree: parent of node " + std::to_string(i) + " is a leaf");
        if (parent.left == kNoNode) parent.left = i;
        else if (parent.right == kNoNode) parent.right = i;
        else throw FormatError("tree: node " + std::to_string(r.parent_id) + " has more than two children");
      }
    }
    tree.nodes_[0].region = Box::whole_space(p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Node& n = tree.nodes_[i];
      if (!n.split) continue;
      if (n.left == kNoNode || n.right == kNoNode) throw FormatError("tree: internal node " + std::to_string(i) + " lacks children");
      Box l = n.region, r = n.region;
      l.hi[n.split->axis] = n.split->threshold;
      r.lo[n.split->axis] = n.split->threshold;
      tree.nodes_[n.left].region = std::move(l);
      tree.nodes_[n.right].region = std::move(r);
    }
    return tree;
  }

 private:
  std::size_t p_;
  std::vector<Node> nodes_;
  BuildParams params_;
};

/// The leaf of `tree` containing x.
inline const Node& leaf_of(const Tree& tree, std::span<const double> x) { return tree.leaf_of(x); }

// ---------------------------------------------------------------------------
// Validation. Validators route the dataset through the tree themselves and do
// not trust the counts stored by the builder.

inline std::vector<std::size_t> route_counts(const Tree& tree, const Dataset& data) {
  if (data.p() != tree.p()) throw ShapeError("validate: dataset dimension does not match tree");
  std::vector<std::size_t> counts(tree.nodes().size(), 0);
  const auto& nodes = tree.nodes();
  for (std::size_t t = 0; t < data.size(); ++t) {
    const auto x = data.x(t);
    std::size_t id = 0;
    for (;;) {
      ++counts[id];
      const auto& s = nodes[id].split;
      if (!s) break;
      id = x[s->axis] <= s->threshold ? nodes[id].left : nodes[id].right;
    }
  }
  return counts;
}

struct KValidReport {
  bool ok = true;
  std::vector<std::size_t> offending_leaves;
};

inline KValidReport validate_k_valid(const Tree& tree, const Dataset& data, std::size_t k) {
  const auto counts = route_counts(tree, data);
  KValidReport report;
  for (auto id : tree.leaf_ids())
    if (counts[id] < k) report.offending_leaves.push_back(id);
  report.ok = report.offending_leaves.empty();
  return report;
}

enum class Rule { MaxLeaf, Balance, MinLeaf, Count };

inline std::string_view to_string(Rule rule) {
  switch (rule) {
    case Rule::MaxLeaf: return "i";
    case Rule::Balance: return "iii";
    case Rule::MinLeaf: return "iv";
    case Rule::Count: return "count";
  }
  return "?";
}

struct Violation {
  std::size_t node_id = 0;
  Rule rule = Rule::Count;
  std::size_t observed = 0;
  std::size_t required = 0;
};

struct AkmReport {
  bool ok = true;
  std::vector<Violation> violations;
  std::size_t infeasible_leaves = 0;

  std::size_t count(Rule rule) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [rule](const Violation& v) { return v.rule == rule; }));
  }
};

inline void check_akm_parameters(double alpha, std::size_t k, std::size_t m) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("alpha must lie in (0, 1/2)");
  if (k == 0) throw ConfigError("k must be positive");
  if (m < 2 * k) throw ConfigError("m must be at least 2k");
}

/// Checks rules (i), (iii), (iv) on a tree. Rule (i) is waived for leaves the
/// builder flagged infeasible. Rule (ii) is a property of the split-direction
/// distribution and is checked on the configuration, not here. Also reports
/// any node whose stored count disagrees with the routed count.
inline AkmReport validate_akm(const Tree& tree, const Dataset& data, double alpha, std::size_t k, std::size_t m) {
  check_akm_parameters(alpha, k, m);
  const auto counts = route_counts(tree, data);
  const auto& nodes = tree.nodes();
  AkmReport report;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const Node& n = nodes[id];
    if (n.count != counts[id]) report.violations.push_back({id, Rule::Count, counts[id], n.count});
    if (n.is_leaf()) {
      if (n.infeasible) ++report.infeasible_leaves;
      if (counts[id] >= m && !n.infeasible) report.violations.push_back({id, Rule::MaxLeaf, counts[id], m});
      if (counts[id] < k) report.violations.push_back({id, Rule::MinLeaf, counts[id], k});
    } else {
      const std::size_t need = min_child_count(counts[id], alpha, 0);
      for (auto child : {n.left, n.right})
        if (counts[child] < need) report.violations.push_back({child, Rule::Balance, counts[child], need});
    }
  }
  report.ok = report.violations.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Text serialisation, one node per line:
//
//   # nlarf-tree v1
//   # p=<p> k=<k> m=<m> alpha=<a> split_rule=<rule> seed=<s> rho=<r1>;<r2>;...
//   node_id,parent_id,axis,threshold,count,infeasible
//   0,-1,1,0.25,400,0
//   1,0,-1,nan,200,0
//
// axis is 1-based (-1 on leaves), thresholds use %.17g so they reload exactly.

inline void write_tree(std::ostream& os, const Tree& tree) {
  const auto& bp = tree.build_params();
  os << "# nlarf-tree v1\n";
  os << "# p=" << tree.p() << " k=" << bp.k << " m=" << bp.m << " alpha=" << format_double(bp.alpha)
     << " split_rule=" << to_string(bp.split_rule) << " seed=" << bp.seed << " rho=";
  for (std::size_t i = 0; i < bp.rho.size(); ++i) os << (i ? ";" : "") << format_double(bp.rho[i]);
  os << "\nnode_id,parent_id,axis,threshold,count,infeasible\n";
  const auto& nodes = tree.nodes();
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const Node& n = nodes[id];
    os << id << ',' << (n.parent == kNoNode ? std::string("-1") : std::to_string(n.parent)) << ',';
    if (n.split)
      os << (n.split->axis + 1) << ',' << format_double(n.split->threshold);
    else
      os << "-1,nan";
    os << ',' << n.count << ',' << (n.infeasible ? 1 : 0) << '\n';
  }
}

namespace detail {
inline Tree read_tree_unchecked(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# nlarf-tree v1", 0) != 0) throw FormatError("tree: missing header");
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw FormatError("tree: missing parameter line");
  BuildParams bp;
  std::size_t p = 0;
  {
    std::istringstream ss(line.substr(2));
    std::string kv;
    while (ss >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw FormatError("tree: bad parameter '" + kv + "'");
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "p") p = std::stoul(val);
      else if (key == "k") bp.k = std::stoul(val);
      else if (key == "m") bp.m = std::stoul(val);
      else if (key == "alpha") bp.alpha = parse_double(val);
      else if (key == "split_rule") bp.split_rule = split_rule_from_string(val);
      else if (key == "seed") bp.seed = std::stoull(val);
      else if (key == "rho") {
        std::size_t start = 0;
        while (start < val.size()) {
          auto pos = val.find(';', start);
          if (pos == std::string::npos) pos = val.size();
          bp.rho.push_back(parse_double(std::string_view(val).substr(start, pos - start)));
          start = pos + 1;
        }
      }
    }
  }
  if (p == 0) throw FormatError("tree: p missing from parameter line");
  if (!std::getline(is, line) || line.rfind("node_id,parent_id,axis,threshold,count,infeasible", 0) != 0)
    throw FormatError("tree: missing column header");
  std::vector<Tree::Row> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw FormatError("tree: expected 6 fields in '" + line + "'");
    Tree::Row r;
    r.node_id = std::stoul(std::string(f[0]));
    r.parent_id = f[1] == "-1" ? kNoNode : std::stoul(std::string(f[1]));
    const long axis = std::stol(std::string(f[2]));
    if (axis > 0) r.split = Split{static_cast<std::size_t>(axis - 1), parse_double(f[3])};
    else if (axis != -1) throw FormatError("tree: bad axis in '" + line + "'");
    r.count = std::stoul(std::string(f[4]));
    r.infeasible = f[5] == "1";
    rows.push_back(r);
  }
  Tree tree = Tree::from_rows(p, rows);
  tree.set_build_params(std::move(bp));
  return tree;
}
}  // namespace detail

/// Parses the text form; malformed numbers surface as FormatError.
inline Tree read_tree(std::istream& is) {
  try {
    return detail::read_tree_unchecked(is);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("tree: malformed number (") + e.what() + ")");
  } catch (const std::out_of_range& e) {
    throw FormatError(std::string("tree: number out of range (") + e.what() + ")");
  } catch (const ConfigError& e) {
    throw FormatError(std::string("tree: ") + e.what());
  }
}

}  // namespace nlarf

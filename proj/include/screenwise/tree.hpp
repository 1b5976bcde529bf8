#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screenwise/bounds.hpp"
#include "screenwise/core.hpp"

namespace screenwise {

// ---------------------------------------------------------------------------
// Tree structure
// ---------------------------------------------------------------------------

/// A node is a leaf (no test, a label) or an internal test node with exactly
/// three children indexed by Bucket. Every node keeps the label counts of the
/// training records that reached it.
struct TreeNode {
  std::optional<TestId> test;
  int label = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::vector<TreeNode> children;

  bool is_leaf() const { return !test.has_value(); }
  std::size_t count() const { return positives + negatives; }
  int majority() const { return positives > negatives ? 1 : 0; }

  const TreeNode& child(Bucket b) const { return children[static_cast<std::size_t>(b)]; }
  TreeNode& child(Bucket b) { return children[static_cast<std::size_t>(b)]; }

  static TreeNode leaf(int label, std::size_t pos = 0, std::size_t neg = 0) {
    TreeNode n;
    n.label = label;
    n.positives = pos;
    n.negatives = neg;
    return n;
  }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  TreeNode root;

  std::size_t depth() const {
    std::function<std::size_t(const TreeNode&)> rec = [&](const TreeNode& n) -> std::size_t {
      if (n.is_leaf()) return 0;
      std::size_t d = 0;
      for (const auto& c : n.children) d = std::max(d, rec(c));
      return d + 1;
    };
    return rec(root);
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

inline void to_json(json& j, const TreeNode& n) {
  j = json{{"positives", n.positives}, {"negatives", n.negatives}};
  if (n.is_leaf()) {
    j["label"] = n.label;
    return;
  }
  j["test"] = std::string(to_string(*n.test));
  json children = json::object();
  for (std::size_t b = 0; b < kNumBuckets; ++b) children[std::string(to_string(static_cast<Bucket>(b)))] = n.children[b];
  j["children"] = std::move(children);
}

inline void from_json(const json& j, TreeNode& n) {
  n = TreeNode{};
  n.positives = j.value("positives", std::size_t{0});
  n.negatives = j.value("negatives", std::size_t{0});
  if (j.contains("test")) {
    auto t = parse_test(j.at("test").get<std::string>());
    if (!t) throw Error(ErrorCode::kConfig, "unknown test in tree: " + j.at("test").dump());
    n.test = *t;
    const auto& ch = j.at("children");
    n.children.resize(kNumBuckets);
    for (std::size_t b = 0; b < kNumBuckets; ++b)
      n.children[b] = ch.at(std::string(to_string(static_cast<Bucket>(b)))).get<TreeNode>();
  } else {
    n.label = j.at("label").get<int>();
    if (n.label != 0 && n.label != 1) throw Error(ErrorCode::kConfig, "leaf label must be 0 or 1");
  }
}

inline void to_json(json& j, const DecisionTree& t) { j = t.root; }
inline void from_json(const json& j, DecisionTree& t) { t.root = j.get<TreeNode>(); }

/// Checks structural invariants: three children per internal node, no test
/// repeated on a path.
inline bool tree_well_formed(const DecisionTree& tree) {
  std::function<bool(const TreeNode&, unsigned)> rec = [&](const TreeNode& n, unsigned used) {
    if (n.is_leaf()) return n.children.empty() && (n.label == 0 || n.label == 1);
    const unsigned bit = 1u << index_of(*n.test);
    if (used & bit) return false;
    if (n.children.size() != kNumBuckets) return false;
    for (const auto& c : n.children)
      if (!rec(c, used | bit)) return false;
    return true;
  };
  return rec(tree.root, 0);
}

// ---------------------------------------------------------------------------
// Classification and evaluation
// ---------------------------------------------------------------------------

struct Classification {
  int label = 0;
  double cost = 0.0;
  std::vector<TestId> path;
};

/// Walks the tree for one fully known observation.
inline Classification classify(const DecisionTree& tree, const ScreeningObservation& obs, const CostConfig& costs) {
  Classification out;
  const TreeNode* node = &tree.root;
  while (!node->is_leaf()) {
    const TestId t = *node->test;
    const auto& score = obs[t];
    if (!score)
      throw Error(ErrorCode::kMissingRequiredOutcome,
                  "tree queries " + std::string(to_string(t)) + " but its outcome is missing");
    out.cost += costs[t];
    out.path.push_back(t);
    node = &node->child(birads_bucket(*score));
  }
  out.label = node->label;
  return out;
}

/// Sum of normalized costs of the tests on the realized root-to-leaf path.
inline double path_cost(const DecisionTree& tree, const ScreeningObservation& obs, const CostConfig& costs) {
  return classify(tree, obs, costs).cost;
}

/// Empirical FNR, FPR, mean cost and their gamma-weighted combination.
struct TreeStats {
  double fnr = 0.0;
  double fpr = 0.0;
  double mean_cost = 0.0;
  double combined = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t false_negatives = 0;
  std::size_t false_positives = 0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // records missing an outcome the tree queries
  double total_cost = 0.0;

  void finalize(double gamma) {
    fnr = positives ? static_cast<double>(false_negatives) / static_cast<double>(positives) : 0.0;
    fpr = negatives ? static_cast<double>(false_positives) / static_cast<double>(negatives) : 0.0;
    mean_cost = evaluated ? total_cost / static_cast<double>(evaluated) : 0.0;
    combined = gamma * fpr + (1.0 - gamma) * mean_cost;
  }

  void add(int truth, int predicted, double cost) {
    ++evaluated;
    total_cost += cost;
    if (truth == 1) {
      ++positives;
      if (predicted == 0) ++false_negatives;
    } else {
      ++negatives;
      if (predicted == 1) ++false_positives;
    }
  }

  void merge(const TreeStats& o) {
    positives += o.positives;
    negatives += o.negatives;
    false_negatives += o.false_negatives;
    false_positives += o.false_positives;
    evaluated += o.evaluated;
    excluded += o.excluded;
    total_cost += o.total_cost;
  }
};

inline void to_json(json& j, const TreeStats& s) {
  j = json{{"fnr", s.fnr},
           {"fpr", s.fpr},
           {"mean_cost", s.mean_cost},
           {"combined", s.combined},
           {"positives", s.positives},
           {"negatives", s.negatives},
           {"false_negatives", s.false_negatives},
           {"false_positives", s.false_positives},
           {"evaluated", s.evaluated},
           {"excluded", s.excluded}};
}

inline void from_json(const json& j, TreeStats& s) {
  s.fnr = j.value("fnr", 0.0);
  s.fpr = j.value("fpr", 0.0);
  s.mean_cost = j.value("mean_cost", 0.0);
  s.combined = j.value("combined", 0.0);
  s.positives = j.value("positives", std::size_t{0});
  s.negatives = j.value("negatives", std::size_t{0});
  s.false_negatives = j.value("false_negatives", std::size_t{0});
  s.false_positives = j.value("false_positives", std::size_t{0});
  s.evaluated = j.value("evaluated", std::size_t{0});
  s.excluded = j.value("excluded", std::size_t{0});
  s.total_cost = s.mean_cost * static_cast<double>(s.evaluated);
}

/// Whether every test the tree would query for this observation is present.
inline bool routable(const DecisionTree& tree, const ScreeningObservation& obs) {
  const TreeNode* node = &tree.root;
  while (!node->is_leaf()) {
    const auto& score = obs[*node->test];
    if (!score) return false;
    node = &node->child(birads_bucket(*score));
  }
  return true;
}

inline TreeStats evaluate_tree(const DecisionTree& tree, std::span<const TrainingRecord> records,
                               const CostConfig& costs) {
  TreeStats stats;
  for (const auto& r : records) {
    if (!routable(tree, r.screening)) {
      ++stats.excluded;
      continue;
    }
    const auto c = classify(tree, r.screening, costs);
    stats.add(r.label, c.label, c.cost);
  }
  stats.finalize(costs.gamma);
  return stats;
}

// ---------------------------------------------------------------------------
// Induction primitives
// ---------------------------------------------------------------------------

/// Compact training example: bucket per test (-1 = missing) and label.
struct Example {
  std::array<std::int8_t, kNumTests> bucket{-1, -1, -1};
  std::int8_t label = 0;
};

inline Example to_example(const TrainingRecord& r) {
  Example e;
  for (auto t : kAllTests)
    if (const auto& s = r.screening[t]) e.bucket[index_of(t)] = static_cast<std::int8_t>(birads_bucket(*s));
  e.label = static_cast<std::int8_t>(r.label);
  return e;
}

inline std::vector<Example> to_examples(std::span<const TrainingRecord> records) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_example(r));
  return out;
}

struct BucketCounts {
  std::array<std::size_t, kNumBuckets> pos{};
  std::array<std::size_t, kNumBuckets> neg{};

  std::size_t positives() const { return pos[0] + pos[1] + pos[2]; }
  std::size_t negatives() const { return neg[0] + neg[1] + neg[2]; }
  std::size_t total() const { return positives() + negatives(); }
};

namespace detail {

inline double entropy2(double a, double b) {
  const double n = a + b;
  if (n <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : {a, b})
    if (c > 0.0) h -= (c / n) * std::log2(c / n);
  return h;
}

}  // namespace detail

/// Mutual information (bits) between the label and the bucket of one test.
inline double information_gain(const BucketCounts& c) {
  const double n = static_cast<double>(c.total());
  if (n <= 0.0) throw Error(ErrorCode::kInvalidArgument, "NoObservedOutcomes: no records observe this test");
  double cond = 0.0;
  for (std::size_t b = 0; b < kNumBuckets; ++b) {
    const double nb = static_cast<double>(c.pos[b] + c.neg[b]);
    cond += (nb / n) * detail::entropy2(static_cast<double>(c.pos[b]), static_cast<double>(c.neg[b]));
  }
  return std::max(0.0, detail::entropy2(static_cast<double>(c.positives()), static_cast<double>(c.negatives())) - cond);
}

inline BucketCounts bucket_counts(std::span<const Example> ex, std::span<const std::uint32_t> idx, TestId t) {
  BucketCounts c;
  const auto ti = index_of(t);
  for (auto i : idx) {
    const auto b = ex[i].bucket[ti];
    if (b < 0) continue;
    (ex[i].label ? c.pos : c.neg)[static_cast<std::size_t>(b)]++;
  }
  return c;
}

inline BucketCounts bucket_counts(std::span<const TrainingRecord> records, TestId t) {
  BucketCounts c;
  for (const auto& r : records) {
    const auto& s = r.screening[t];
    if (!s) continue;
    (r.label ? c.pos : c.neg)[static_cast<std::size_t>(birads_bucket(*s))]++;
  }
  return c;
}

inline double information_gain(std::span<const TrainingRecord> records, TestId t) {
  return information_gain(bucket_counts(records, t));
}

struct Labeling {
  std::array<int, kNumBuckets> labels{0, 0, 0};
  std::size_t false_negatives = 0;
  std::size_t false_positives = 0;
  double fpr = 0.0;  // false positives over the negatives at this node

  int ones() const { return labels[0] + labels[1] + labels[2]; }
};

/// Chooses the bucket labeling with the fewest false positives among those
/// whose false negatives stay within `fn_allowance`. Ties prefer more
/// buckets labeled 1, then the lexicographically larger (B1, B2, B3) tuple.
inline std::optional<Labeling> label_leaves(const BucketCounts& c, std::size_t fn_allowance) {
  std::optional<Labeling> best;
  const std::size_t negatives = c.negatives();
  for (unsigned mask = 0; mask < 8; ++mask) {
    Labeling l;
    for (std::size_t b = 0; b < kNumBuckets; ++b) {
      l.labels[b] = (mask >> (2 - b)) & 1u;
      if (l.labels[b]) l.false_positives += c.neg[b];
      else l.false_negatives += c.pos[b];
    }
    if (l.false_negatives > fn_allowance) continue;
    l.fpr = negatives ? static_cast<double>(l.false_positives) / static_cast<double>(negatives) : 0.0;
    const bool better = !best || l.false_positives < best->false_positives ||
                        (l.false_positives == best->false_positives &&
                         (l.ones() > best->ones() || (l.ones() == best->ones() && l.labels > best->labels)));
    if (better) best = l;
  }
  return best;
}

// ---------------------------------------------------------------------------
// FNR budget
// ---------------------------------------------------------------------------

/// Partition-level false-negative budget derived from the Wilson bound.
struct FnrBudget {
  bool feasible = false;
  bool vacuous = false;        // no positives: the FNR constraint holds trivially
  std::size_t positives = 0;
  double max_fnr = 0.0;        // largest admissible empirical FNR
  std::size_t allowance = 0;   // largest admissible false-negative count
  std::string reason;
};

inline FnrBudget fnr_budget(std::size_t positives, double eta, double delta,
                            std::optional<double> strict_target = std::nullopt) {
  FnrBudget b;
  b.positives = positives;
  if (positives == 0) {
    b.feasible = true;
    b.vacuous = true;
    return b;
  }
  const auto cap = max_empirical_fnr(eta, delta, static_cast<double>(positives));
  if (!cap) {
    b.reason = "only " + std::to_string(positives) + " positive records; the Wilson bound needs at least " +
               std::to_string(min_positives_for_bound(eta, delta)) + " to certify FNR <= eta";
    return b;
  }
  b.max_fnr = *cap;
  if (strict_target) {
    if (*strict_target < 0.0) {
      b.reason = "uniform-convergence slack exceeds eta";
      return b;
    }
    b.max_fnr = std::min(b.max_fnr, *strict_target);
  }
  b.allowance = static_cast<std::size_t>(std::floor(b.max_fnr * static_cast<double>(positives) + 1e-9));
  b.feasible = true;
  return b;
}

/// Record-level convenience: best labeling of one candidate test at the partition
/// root, with the budget computed from the partition's positive count.
inline std::optional<Labeling> label_leaves(std::span<const TrainingRecord> records, TestId t, double eta,
                                            double delta) {
  std::size_t positives = 0;
  for (const auto& r : records) positives += r.label == 1;
  const auto budget = fnr_budget(positives, eta, delta);
  if (!budget.feasible) return std::nullopt;
  return label_leaves(bucket_counts(records, t), budget.allowance);
}

// ---------------------------------------------------------------------------
// Tree growing
// ---------------------------------------------------------------------------

struct InductionConfig {
  double eta = 0.1;
  double delta = 0.05;
  CostConfig costs;
  std::vector<TestId> tests{kAllTests.begin(), kAllTests.end()};
  std::size_t min_samples = 10;
  // Strict mode: additional cap (eta minus the uniform-convergence slack).
  std::optional<double> strict_fnr_target;
};

struct FeasibilityVerdict {
  bool feasible = false;
  std::string limiting;
  double max_fnr = 0.0;
};

struct TreeInduction {
  std::optional<DecisionTree> tree;
  FeasibilityVerdict verdict;
  FnrBudget budget;
};

namespace detail {

using Index = std::vector<std::uint32_t>;

struct Built {
  TreeNode node;
  std::size_t fn = 0;
  std::size_t fp = 0;
  double cost_sum = 0.0;  // summed path cost over the node's records
};

class Grower {
 public:
  Grower(std::span<const Example> ex, const InductionConfig& cfg, std::size_t part_neg, std::size_t part_total)
      : ex_(ex), cfg_(cfg), part_neg_(part_neg), part_total_(part_total) {}

  /// Partition-level combined-cost contribution of a subtree.
  double contribution(std::size_t fp, double cost_sum) const {
    const double fpr_term = part_neg_ ? static_cast<double>(fp) / static_cast<double>(part_neg_) : 0.0;
    const double cost_term = part_total_ ? cost_sum / static_cast<double>(part_total_) : 0.0;
    return cfg_.costs.gamma * fpr_term + (1.0 - cfg_.costs.gamma) * cost_term;
  }

  std::pair<std::size_t, std::size_t> counts(const Index& idx) const {
    std::size_t p = 0;
    for (auto i : idx) p += ex_[i].label == 1;
    return {p, idx.size() - p};
  }

  bool any_test_left(unsigned used) const {
    for (auto t : cfg_.tests)
      if (!(used & (1u << index_of(t)))) return true;
    return false;
  }

  /// Best split at a node whose records may incur at most `allowance` false
  /// negatives, with children refined recursively. nullopt if no unused test
  /// observes any record here.
  std::optional<Built> expand(const Index& idx, std::size_t allowance, unsigned used) const {
    struct Candidate {
      TestId test;
      Labeling labeling;
      double score;
    };
    const auto [node_pos, node_neg] = counts(idx);
    std::optional<Candidate> best;
    for (auto t : cfg_.tests) {
      if (used & (1u << index_of(t))) continue;
      const auto bc = bucket_counts(ex_, idx, t);
      if (bc.total() == 0) continue;
      const auto lab = label_leaves(bc, allowance);
      if (!lab) continue;
      const double gain = information_gain(bc);
      const double local_fpr = bc.negatives() ? static_cast<double>(lab->false_positives) / static_cast<double>(bc.negatives()) : 0.0;
      const double denom = cfg_.costs.gamma * local_fpr + (1.0 - cfg_.costs.gamma) * cfg_.costs[t];
      const double score = denom > 0.0 ? gain / denom : (gain > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      bool better = !best;
      if (best) {
        if (score > best->score + 1e-12) better = true;
        else if (std::abs(score - best->score) <= 1e-12 && cfg_.costs[t] < cfg_.costs[best->test] - 1e-15) better = true;
      }
      if (better) best = Candidate{t, *lab, score};
    }
    if (!best) return std::nullopt;

    const TestId t = best->test;
    const auto ti = index_of(t);
    const unsigned child_used = used | (1u << ti);
    std::array<Index, kNumBuckets> parts;
    for (auto i : idx) {
      const auto b = ex_[i].bucket[ti];
      if (b >= 0) parts[static_cast<std::size_t>(b)].push_back(i);
    }

    Built out;
    out.node.test = t;
    out.node.positives = node_pos;
    out.node.negatives = node_neg;
    out.node.children.resize(kNumBuckets);
    out.fn = best->labeling.false_negatives;
    out.fp = best->labeling.false_positives;
    std::size_t routed = parts[0].size() + parts[1].size() + parts[2].size();
    out.cost_sum = cfg_.costs[t] * static_cast<double>(routed);
    const int parent_majority = node_pos > node_neg ? 1 : 0;

    for (std::size_t b = 0; b < kNumBuckets; ++b) {
      const auto [p, n] = counts(parts[b]);
      const int label = parts[b].empty() ? parent_majority : best->labeling.labels[b];
      out.node.children[b] = TreeNode::leaf(label, p, n);
      if (parts[b].size() < cfg_.min_samples || p == 0 || n == 0 || !any_test_left(child_used)) continue;
      const std::size_t leaf_fn = label == 0 ? p : 0;
      const std::size_t leaf_fp = label == 1 ? n : 0;
      const std::size_t child_allowance = allowance - (out.fn - leaf_fn);
      auto sub = expand(parts[b], child_allowance, child_used);
      if (!sub) continue;
      if (contribution(sub->fp, sub->cost_sum) < contribution(leaf_fp, 0.0) - 1e-12) {
        out.fn = out.fn - leaf_fn + sub->fn;
        out.fp = out.fp - leaf_fp + sub->fp;
        out.cost_sum += sub->cost_sum;
        out.node.children[b] = std::move(sub->node);
      }
    }
    return out;
  }

 private:
  std::span<const Example> ex_;
  const InductionConfig& cfg_;
  std::size_t part_neg_;
  std::size_t part_total_;
};

}  // namespace detail

/// Greedy cost-sensitive induction under a partition-level FNR budget.
///
/// Each node picks the unused test maximizing information gain divided by
/// gamma * FPR + (1 - gamma) * cost, where FPR comes from the cheapest leaf
/// labeling that keeps false negatives within budget. An impure root above
/// the min-samples floor always splits; a child leaf is replaced by a subtree
/// only when that strictly lowers the partition's combined cost. The result
/// satisfies the budget on its training records.
inline TreeInduction grow_tree(std::span<const Example> examples, const InductionConfig& cfg) {
  if (examples.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "cannot grow a tree on an empty training set");
  TreeInduction out;
  detail::Index idx(examples.size());
  for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::size_t pos = 0;
  for (const auto& e : examples) pos += e.label == 1;
  const std::size_t neg = examples.size() - pos;

  out.budget = fnr_budget(pos, cfg.eta, cfg.delta, cfg.strict_fnr_target);
  out.verdict.max_fnr = out.budget.max_fnr;
  if (!out.budget.feasible) {
    out.verdict.limiting = out.budget.reason;
    return out;
  }
  out.verdict.feasible = true;

  const detail::Grower grower(examples, cfg, neg, examples.size());
  const int leaf_label = pos <= out.budget.allowance ? 0 : 1;
  DecisionTree tree{TreeNode::leaf(leaf_label, pos, neg)};
  if (pos != 0 && neg != 0 && examples.size() >= cfg.min_samples && grower.any_test_left(0)) {
    if (auto built = grower.expand(idx, out.budget.allowance, 0)) tree.root = std::move(built->node);
  }
  out.tree = std::move(tree);
  return out;
}

inline TreeInduction grow_tree(std::span<const TrainingRecord> records, const InductionConfig& cfg) {
  const auto ex = to_examples(records);
  return grow_tree(std::span<const Example>(ex), cfg);
}

// ---------------------------------------------------------------------------
// Pruning
// ---------------------------------------------------------------------------

/// Refreshes per-node label counts from the given examples.
inline void annotate_counts(DecisionTree& tree, std::span<const Example> examples) {
  std::function<void(TreeNode&)> clear = [&](TreeNode& n) {
    n.positives = n.negatives = 0;
    for (auto& c : n.children) clear(c);
  };
  clear(tree.root);
  for (const auto& e : examples) {
    TreeNode* node = &tree.root;
    while (true) {
      (e.label ? node->positives : node->negatives)++;
      if (node->is_leaf()) break;
      const auto b = e.bucket[index_of(*node->test)];
      if (b < 0) break;
      node = &node->children[static_cast<std::size_t>(b)];
    }
  }
}

/// Leaf-count false negatives (positives reaching 0-labeled leaves).
inline std::size_t leaf_false_negatives(const TreeNode& n) {
  if (n.is_leaf()) return n.label == 0 ? n.positives : 0;
  std::size_t s = 0;
  for (const auto& c : n.children) s += leaf_false_negatives(c);
  return s;
}

inline double leaf_pessimistic_error(std::size_t errors, std::size_t n, double delta) {
  if (n == 0) return 0.0;
  const double nn = static_cast<double>(n);
  return nn * wilson_upper(static_cast<double>(errors) / nn, nn, delta);
}

/// Sum over leaves of n_leaf times the Wilson upper limit on the leaf's
/// error proportion.
inline double pessimistic_error(const TreeNode& n, double delta) {
  if (n.is_leaf()) return leaf_pessimistic_error(n.label == 1 ? n.negatives : n.positives, n.count(), delta);
  double s = 0.0;
  for (const auto& c : n.children) s += pessimistic_error(c, delta);
  return s;
}

inline double pessimistic_error(const DecisionTree& t, double delta) { return pessimistic_error(t.root, delta); }

/// Collapses every internal node whose leaves all predict the same label.
/// Predictions are unchanged.
inline void collapse_uniform(TreeNode& n) {
  if (n.is_leaf()) return;
  for (auto& c : n.children) collapse_uniform(c);
  const bool uniform = std::all_of(n.children.begin(), n.children.end(), [&](const TreeNode& c) {
    return c.is_leaf() && c.label == n.children[0].label;
  });
  if (uniform) {
    const int label = n.children[0].label;
    n.test.reset();
    n.children.clear();
    n.label = label;
  }
}

struct PruneConfig {
  double delta = 0.05;
  // Partition FN budget the pruned tree must keep; nullopt disables the guard.
  std::optional<std::size_t> fn_allowance;
};

/// Bottom-up pessimistic-error pruning. A subtree becomes a majority leaf when
/// the leaf's Wilson-bounded error is no worse than the subtree's, unless the
/// collapse would push the partition over its false-negative budget.
inline DecisionTree prune(DecisionTree tree, std::span<const Example> examples, const PruneConfig& cfg) {
  annotate_counts(tree, examples);
  collapse_uniform(tree.root);
  std::size_t total_fn = leaf_false_negatives(tree.root);
  std::function<void(TreeNode&)> rec = [&](TreeNode& n) {
    if (n.is_leaf()) return;
    for (auto& c : n.children) rec(c);
    const int label = n.majority();
    const double leaf_err = leaf_pessimistic_error(label == 1 ? n.negatives : n.positives, n.count(), cfg.delta);
    const double sub_err = pessimistic_error(n, cfg.delta);
    if (leaf_err > sub_err + 1e-12) return;
    const std::size_t sub_fn = leaf_false_negatives(n);
    const std::size_t new_fn = total_fn - sub_fn + (label == 0 ? n.positives : 0);
    if (cfg.fn_allowance && new_fn > *cfg.fn_allowance) return;
    total_fn = new_fn;
    n.test.reset();
    n.children.clear();
    n.label = label;
  };
  rec(tree.root);
  return tree;
}

inline DecisionTree prune(DecisionTree tree, std::span<const TrainingRecord> records, const PruneConfig& cfg) {
  const auto ex = to_examples(records);
  return prune(std::move(tree), std::span<const Example>(ex), cfg);
}

/// Grow followed by budget-guarded pruning: the per-partition learner.
inline TreeInduction confident_tree(std::span<const Example> examples, const InductionConfig& cfg) {
  auto out = grow_tree(examples, cfg);
  if (out.tree) out.tree = prune(std::move(*out.tree), examples, PruneConfig{cfg.delta, out.budget.allowance});
  return out;
}

}  // namespace screenwise

#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.
// Nothing here calls the library's classification, budget or bound code.

#include <cmath>
#include <optional>
#include <vector>

#include "screenwise/core.hpp"
#include "screenwise/tree.hpp"

namespace oracle {

using namespace screenwise;

inline constexpr double z05 = 1.6448536269514727;  // mpmath erfinv quantile at 0.05

/// All trees over the given tests: binary leaves, three-way internal nodes,
/// no test repeated on a path.
inline std::vector<TreeNode> enumerate_trees(const std::vector<TestId>& tests) {
  std::vector<TreeNode> out{TreeNode::leaf(0), TreeNode::leaf(1)};
  for (std::size_t k = 0; k < tests.size(); ++k) {
    std::vector<TestId> rest;
    for (std::size_t j = 0; j < tests.size(); ++j)
      if (j != k) rest.push_back(tests[j]);
    const auto sub = enumerate_trees(rest);
    for (const auto& a : sub)
      for (const auto& b : sub)
        for (const auto& c : sub) {
          TreeNode n;
          n.test = tests[k];
          n.children = {a, b, c};
          out.push_back(std::move(n));
        }
  }
  return out;
}

inline int bucket_of(BiRadsScore s) {
  switch (s) {
    case BiRadsScore::k1:
    case BiRadsScore::k2: return 0;
    case BiRadsScore::k5:
    case BiRadsScore::k6: return 2;
    default: return 1;
  }
}

struct Tally {
  std::size_t pos = 0, neg = 0, fn = 0, fp = 0, routed = 0;
  double cost = 0.0;

  double fnr() const { return pos ? static_cast<double>(fn) / static_cast<double>(pos) : 0.0; }
  double fpr() const { return neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0; }
  double combined(double gamma) const {
    return gamma * fpr() + (1.0 - gamma) * (routed ? cost / static_cast<double>(routed) : 0.0);
  }
};

/// Walks each complete record through the tree by hand.
inline Tally tally(const TreeNode& root, const std::vector<TrainingRecord>& records, const CostConfig& costs) {
  Tally t;
  for (const auto& r : records) {
    const TreeNode* n = &root;
    double c = 0.0;
    bool ok = true;
    while (n->test) {
      const auto& s = r.screening[*n->test];
      if (!s) {
        ok = false;
        break;
      }
      c += costs.cost[static_cast<std::size_t>(*n->test)];
      n = &n->children[static_cast<std::size_t>(bucket_of(*s))];
    }
    if (!ok) continue;
    ++t.routed;
    t.cost += c;
    if (r.label == 1) {
      ++t.pos;
      t.fn += n->label == 0;
    } else {
      ++t.neg;
      t.fp += n->label == 1;
    }
  }
  return t;
}

/// Textbook Wilson upper limit with a frozen quantile.
inline double wilson_upper(double p, double n, double z = z05) {
  return (p + z * z / (2 * n) + z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n))) / (1 + z * z / n);
}

/// Largest false-negative count over n positives whose Wilson upper limit is
/// still at most eta, found by direct search.
inline std::optional<std::size_t> fn_allowance(std::size_t n, double eta, double z = z05) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k <= n; ++k) {
    if (wilson_upper(static_cast<double>(k) / static_cast<double>(n), static_cast<double>(n), z) <= eta + 1e-12) best = k;
    else break;
  }
  return best;
}

struct Optimum {
  std::size_t feasible = 0;
  double best = 0.0;
};

/// Exhaustive search for the lowest combined cost among trees meeting the
/// training FN allowance.
inline std::optional<Optimum> exhaustive_optimum(const std::vector<TreeNode>& trees,
                                                 const std::vector<TrainingRecord>& records, const CostConfig& costs,
                                                 std::size_t allowance) {
  Optimum o;
  bool any = false;
  for (const auto& t : trees) {
    const auto s = tally(t, records, costs);
    if (s.fn > allowance) continue;
    ++o.feasible;
    const double v = s.combined(costs.gamma);
    if (!any || v < o.best) o.best = v;
    any = true;
  }
  if (!any) return std::nullopt;
  return o;
}

}  // namespace oracle

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "screenwise/policy.hpp"
#include "screenwise/synth.hpp"

namespace screenwise {

/// How one record fares under a policy.
struct RecordOutcome {
  std::size_t partition = 0;
  bool routable = false;
  int label = 0;
  double cost = 0.0;
};

inline RecordOutcome route_record(const TrainingRecord& r, const PartitionedPolicy& policy) {
  RecordOutcome o;
  o.partition = match_partition(r.personal, policy);
  const auto& tree = policy.partitions[o.partition].tree;
  o.routable = routable(tree, r.screening);
  if (o.routable) {
    const auto c = classify(tree, r.screening, policy.config.costs);
    o.label = c.label;
    o.cost = c.cost;
  }
  return o;
}

struct EvaluationReport {
  std::size_t partition_count = 0;
  std::vector<TreeStats> per_partition;
  TreeStats overall;
};

inline void to_json(json& j, const EvaluationReport& r) {
  json parts = json::array();
  for (std::size_t i = 0; i < r.per_partition.size(); ++i) {
    json p = r.per_partition[i];
    p["id"] = i;
    parts.push_back(p);
  }
  j = json{{"partition_count", r.partition_count}, {"overall", r.overall}, {"partitions", parts}};
}

/// Routes every record to its partition and evaluates that partition's tree.
/// Records missing an outcome their path needs are counted as excluded.
inline EvaluationReport evaluate_policy(const PartitionedPolicy& policy, std::span<const TrainingRecord> records) {
  EvaluationReport rep;
  rep.partition_count = policy.size();
  rep.per_partition.resize(policy.size());
  for (const auto& r : records) {
    const auto o = route_record(r, policy);
    auto& s = rep.per_partition[o.partition];
    if (!o.routable) {
      ++s.excluded;
      continue;
    }
    s.add(r.label, o.label, o.cost);
  }
  for (auto& s : rep.per_partition) {
    s.finalize(policy.config.costs.gamma);
    rep.overall.merge(s);
  }
  rep.overall.finalize(policy.config.costs.gamma);
  return rep;
}

// ---------------------------------------------------------------------------
// Confidence trial
// ---------------------------------------------------------------------------

/// Offset between a run's training seed and its held-out seed.
inline constexpr std::uint64_t kHeldOutSeedOffset = 0x5bd1e995ull;

struct TrialRun {
  std::uint64_t seed = 0;
  bool feasible = false;
  bool violated = false;
  std::size_t partitions = 0;
  std::size_t partitions_over_eta = 0;
  double worst_fnr = 0.0;
  double overall_fnr = 0.0;
  double overall_fpr = 0.0;
};

struct TrialSummary {
  std::size_t runs = 0;
  std::size_t violations = 0;
  std::size_t infeasible = 0;
  double violation_fraction = 0.0;
  std::vector<TrialRun> detail;
};

inline void to_json(json& j, const TrialSummary& s) {
  json runs = json::array();
  for (const auto& r : s.detail)
    runs.push_back(json{{"seed", r.seed},
                        {"feasible", r.feasible},
                        {"violated", r.violated},
                        {"partitions", r.partitions},
                        {"partitions_over_eta", r.partitions_over_eta},
                        {"worst_partition_fnr", r.worst_fnr},
                        {"fnr", r.overall_fnr},
                        {"fpr", r.overall_fpr}});
  j = json{{"runs", s.runs},
           {"violations", s.violations},
           {"infeasible", s.infeasible},
           {"violation_fraction", s.violation_fraction},
           {"detail", runs}};
}

struct TrialConfig {
  std::size_t runs = 100;
  std::uint64_t base_seed = 0;
  std::size_t train_size = 5000;
  std::size_t test_size = 20000;
};

/// For r = 1..R: train on seed base+r, test on a fresh draw, and flag the run
/// if any partition's held-out FNR exceeds eta. Infeasible builds are
/// counted apart and never as violations.
inline TrialSummary confidence_trial(const GeneratorConfig& gen, const PolicyConfig& cfg, const TrialConfig& trial,
                                     const FeatureSchema& schema = FeatureSchema::defaults()) {
  if (trial.runs < 1) throw Error(ErrorCode::kInvalidArgument, "run count must be >= 1");
  TrialSummary out;
  out.runs = trial.runs;
  GeneratorConfig g = gen;
  for (std::size_t r = 1; r <= trial.runs; ++r) {
    TrialRun run;
    run.seed = trial.base_seed + r;
    g.size = trial.train_size;
    const auto train = generate(g, run.seed, schema);
    g.size = trial.test_size;
    const auto test = generate(g, run.seed + kHeldOutSeedOffset, schema);
    try {
      const auto policy = build_policy(train, cfg, schema);
      run.feasible = true;
      const auto rep = evaluate_policy(policy, test);
      run.partitions = policy.size();
      for (const auto& s : rep.per_partition) {
        run.worst_fnr = std::max(run.worst_fnr, s.fnr);
        run.partitions_over_eta += s.fnr > cfg.eta;
      }
      run.violated = run.worst_fnr > cfg.eta;
      run.overall_fnr = rep.overall.fnr;
      run.overall_fpr = rep.overall.fpr;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kPolicyInfeasible) throw;
      ++out.infeasible;
    }
    if (run.violated) ++out.violations;
    out.detail.push_back(run);
  }
  out.violation_fraction = static_cast<double>(out.violations) / static_cast<double>(out.runs);
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct BetaPoint {
  double beta = 0.0;
  double mean_fnr = 0.0;
  double mean_fpr = 0.0;
  double mean_partitions = 0.0;
  std::size_t feasible_runs = 0;
};

struct BetaSweep {
  std::vector<BetaPoint> curve;
  double best_beta = 0.0;
};

/// Mean held-out FNR/FPR per beta. The chosen beta has the lowest mean FPR
/// among those with mean FNR <= eta (ties to the smaller beta); if none
/// qualifies, the lowest mean FNR wins.
inline BetaSweep sweep_beta(std::span<const double> grid, const GeneratorConfig& gen, const PolicyConfig& cfg,
                            std::span<const std::uint64_t> seeds, std::size_t train_size, std::size_t test_size,
                            const FeatureSchema& schema = FeatureSchema::defaults()) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "beta grid is empty");
  std::vector<double> betas(grid.begin(), grid.end());
  for (double b : betas)
    if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "beta grid must lie in [0,1]");
  std::vector<std::uint64_t> sorted_seeds(seeds.begin(), seeds.end());
  std::sort(sorted_seeds.begin(), sorted_seeds.end());

  BetaSweep out;
  GeneratorConfig g = gen;
  for (double beta : betas) {
    BetaPoint pt;
    pt.beta = beta;
    PolicyConfig c = cfg;
    c.beta = beta;
    for (auto seed : sorted_seeds) {
      g.size = train_size;
      const auto train = generate(g, seed, schema);
      g.size = test_size;
      const auto test = generate(g, seed + kHeldOutSeedOffset, schema);
      try {
        const auto policy = build_policy(train, c, schema);
        const auto rep = evaluate_policy(policy, test);
        pt.mean_fnr += rep.overall.fnr;
        pt.mean_fpr += rep.overall.fpr;
        pt.mean_partitions += static_cast<double>(policy.size());
        ++pt.feasible_runs;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kPolicyInfeasible) throw;
      }
    }
    if (pt.feasible_runs) {
      const auto n = static_cast<double>(pt.feasible_runs);
      pt.mean_fnr /= n;
      pt.mean_fpr /= n;
      pt.mean_partitions /= n;
    }
    out.curve.push_back(pt);
  }
  std::vector<BetaPoint> ordered = out.curve;
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.beta < b.beta; });
  const BetaPoint* best = nullptr;
  for (const auto& pt : ordered)
    if (pt.feasible_runs && pt.mean_fnr <= cfg.eta && (!best || pt.mean_fpr < best->mean_fpr)) best = &pt;
  if (!best)
    for (const auto& pt : ordered)
      if (pt.feasible_runs && (!best || pt.mean_fnr < best->mean_fnr)) best = &pt;
  out.best_beta = best ? best->beta : ordered.front().beta;
  return out;
}

struct SizePoint {
  std::size_t m = 0;
  double eta = 0.0;
  double mean_partitions = 0.0;  // infeasible runs count as 0
  double stderr_partitions = 0.0;
  std::size_t feasible_runs = 0;
  std::size_t infeasible_runs = 0;
  long long personalization_bound = 0;
  std::size_t bound_violations = 0;  // strict mode only
  std::vector<std::size_t> partitions;
};

/// Partition count per training size, averaged over seeds.
inline std::vector<SizePoint> sweep_m(std::span<const std::size_t> grid, const GeneratorConfig& gen,
                                      const PolicyConfig& cfg, std::span<const std::uint64_t> seeds,
                                      const FeatureSchema& schema = FeatureSchema::defaults()) {
  std::vector<std::uint64_t> sorted_seeds(seeds.begin(), seeds.end());
  std::sort(sorted_seeds.begin(), sorted_seeds.end());
  const auto terms = strict_terms(cfg);
  std::vector<SizePoint> out;
  GeneratorConfig g = gen;
  for (auto m : grid) {
    SizePoint pt;
    pt.m = m;
    pt.eta = cfg.eta;
    pt.personalization_bound = personalization_bound(static_cast<long long>(m), terms.n_star);
    g.size = m;
    for (auto seed : sorted_seeds) {
      const auto train = generate(g, seed, schema);
      std::size_t count = 0;
      try {
        count = build_policy(train, cfg, schema).size();
        ++pt.feasible_runs;
        if (cfg.strict && static_cast<long long>(count) > pt.personalization_bound) ++pt.bound_violations;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kPolicyInfeasible) throw;
        ++pt.infeasible_runs;
      }
      pt.partitions.push_back(count);
    }
    const auto n = static_cast<double>(pt.partitions.size());
    if (n > 0) {
      double sum = 0.0, sq = 0.0;
      for (auto c : pt.partitions) sum += static_cast<double>(c);
      pt.mean_partitions = sum / n;
      for (auto c : pt.partitions) sq += (static_cast<double>(c) - pt.mean_partitions) * (static_cast<double>(c) - pt.mean_partitions);
      pt.stderr_partitions = n > 1 ? std::sqrt(sq / (n - 1.0) / n) : 0.0;
    }
    out.push_back(std::move(pt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost by risk level
// ---------------------------------------------------------------------------

struct QuantilePoint {
  std::size_t bucket = 0;
  double risk_lo = 0.0;
  double risk_hi = 0.0;
  std::size_t count = 0;
  double mean_cost = 0.0;
};

inline void to_json(json& j, const QuantilePoint& p) {
  j = json{{"bucket", p.bucket}, {"risk_lo", p.risk_lo}, {"risk_hi", p.risk_hi}, {"count", p.count},
           {"mean_cost", p.mean_cost}};
}

/// Equal-count risk buckets by rank (ties broken by input order); each
/// bucket reports the mean of `values`. Entries with `use[i] == false` are
/// ranked but not averaged.
inline std::vector<QuantilePoint> quantile_means(std::span<const double> risk, std::span<const double> values,
                                                 std::span<const char> use, std::size_t buckets) {
  if (buckets < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one risk bucket");
  const std::size_t n = risk.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return risk[a] < risk[b]; });
  std::vector<QuantilePoint> out(buckets);
  std::vector<double> sums(buckets, 0.0);
  std::vector<char> seen(buckets, 0);
  for (std::size_t q = 0; q < buckets; ++q) out[q].bucket = q;
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t i = order[rank];
    const std::size_t q = rank * buckets / n;
    auto& pt = out[q];
    if (!seen[q]) pt.risk_lo = risk[i];
    seen[q] = 1;
    pt.risk_hi = risk[i];
    if (!use.empty() && !use[i]) continue;
    ++pt.count;
    sums[q] += values[i];
  }
  for (std::size_t q = 0; q < buckets; ++q) out[q].mean_cost = out[q].count ? sums[q] / static_cast<double>(out[q].count) : 0.0;
  return out;
}

/// Mean session cost per risk quintile of G, computed on the data's own risk
/// distribution.
inline std::vector<QuantilePoint> cost_vs_risk(const PartitionedPolicy& policy, std::span<const TrainingRecord> records,
                                               std::size_t buckets = 5) {
  std::vector<double> risk, cost;
  std::vector<char> use;
  for (const auto& r : records) {
    risk.push_back(assess_risk(r.personal, policy.config.risk));
    const auto o = route_record(r, policy);
    cost.push_back(o.cost);
    use.push_back(o.routable);
  }
  return quantile_means(risk, cost, use, buckets);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct BaselineConfig {
  double delta = 0.05;
  CostConfig costs;
  std::vector<TestId> tests{kAllTests.begin(), kAllTests.end()};
  std::size_t min_samples = 10;
};

struct BaselineResult {
  DecisionTree tree;
  TreeStats stats;
};

namespace detail {

/// One-size-fits-all tree: information gain only, leaves labeled by the
/// class-weighted majority (each class weighted by the inverse of its
/// training prior), C4.5 pessimistic pruning on the weighted errors.
class BaselineGrower {
 public:
  BaselineGrower(std::span<const Example> ex, const BaselineConfig& cfg) : ex_(ex), cfg_(cfg) {
    std::size_t pos = 0;
    for (const auto& e : ex) pos += static_cast<std::size_t>(e.label);
    const double n = static_cast<double>(ex.size());
    const double pi1 = pos ? static_cast<double>(pos) / n : 0.5;
    const double pi0 = pos < ex.size() ? 1.0 - pi1 : 0.5;
    w1_ = 0.5 / pi1;
    w0_ = 0.5 / pi0;
  }

  int label(std::size_t pos, std::size_t neg) const {
    return w1_ * static_cast<double>(pos) > w0_ * static_cast<double>(neg) ? 1 : 0;
  }

  double weighted_error(std::size_t pos, std::size_t neg) const {
    return label(pos, neg) == 1 ? w0_ * static_cast<double>(neg) : w1_ * static_cast<double>(pos);
  }

  double pessimistic(std::size_t pos, std::size_t neg) const {
    const std::size_t n = pos + neg;
    if (n == 0) return 0.0;
    const double total = w1_ * static_cast<double>(pos) + w0_ * static_cast<double>(neg);
    const double p = weighted_error(pos, neg) / total;
    return wilson_upper(std::clamp(p, 0.0, 1.0), static_cast<double>(n), cfg_.delta) * total;
  }

  TreeNode grow(const std::vector<std::uint32_t>& idx, unsigned used, int parent_label) const {
    std::size_t pos = 0;
    for (auto i : idx) pos += static_cast<std::size_t>(ex_[i].label);
    const std::size_t neg = idx.size() - pos;
    const int lab = idx.empty() ? parent_label : label(pos, neg);
    TreeNode leaf = TreeNode::leaf(lab, pos, neg);
    if (pos == 0 || neg == 0 || idx.size() < cfg_.min_samples) return leaf;
    std::optional<TestId> best;
    double best_gain = 0.0;
    for (auto t : cfg_.tests) {
      if (used & (1u << index_of(t))) continue;
      const auto counts = bucket_counts(ex_, idx, t);
      std::size_t observed = 0;
      for (std::size_t b = 0; b < kNumBuckets; ++b) observed += counts.pos[b] + counts.neg[b];
      if (observed == 0) continue;
      const double g = information_gain(counts);
      if (g > best_gain + 1e-12) {
        best_gain = g;
        best = t;
      }
    }
    if (!best) return leaf;
    std::array<std::vector<std::uint32_t>, kNumBuckets> parts;
    for (auto i : idx) {
      const auto b = ex_[i].bucket[index_of(*best)];
      if (b >= 0) parts[static_cast<std::size_t>(b)].push_back(i);
    }
    TreeNode node;
    node.test = best;
    node.label = lab;
    node.positives = pos;
    node.negatives = neg;
    for (std::size_t b = 0; b < kNumBuckets; ++b)
      node.children.push_back(grow(parts[b], used | (1u << index_of(*best)), lab));
    return node;
  }

  /// Returns the subtree's pessimistic weighted error after pruning it.
  double prune(TreeNode& n) const {
    const double as_leaf = pessimistic(n.positives, n.negatives);
    if (n.is_leaf()) return as_leaf;
    double sub = 0.0;
    for (auto& c : n.children) sub += prune(c);
    if (as_leaf <= sub) {
      n = TreeNode::leaf(label(n.positives, n.negatives), n.positives, n.negatives);
      return as_leaf;
    }
    return sub;
  }

 private:
  std::span<const Example> ex_;
  const BaselineConfig& cfg_;
  double w0_ = 1.0, w1_ = 1.0;
};

}  // namespace detail

inline BaselineResult baseline_single_tree(std::span<const TrainingRecord> records, const BaselineConfig& cfg) {
  if (records.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "training set is empty");
  const auto ex = to_examples(records);
  detail::BaselineGrower grower(ex, cfg);
  std::vector<std::uint32_t> idx(ex.size());
  std::iota(idx.begin(), idx.end(), 0u);
  BaselineResult out;
  out.tree.root = grower.grow(idx, 0, 0);
  grower.prune(out.tree.root);
  annotate_counts(out.tree, ex);
  out.stats = evaluate_tree(out.tree, records, cfg.costs);
  return out;
}

/// Evaluates one tree separately on the records each policy partition owns.
inline std::vector<TreeStats> per_partition_stats(const DecisionTree& tree, const PartitionedPolicy& policy,
                                                  std::span<const TrainingRecord> records) {
  std::vector<std::vector<TrainingRecord>> groups(policy.size());
  for (const auto& r : records) groups[match_partition(r.personal, policy)].push_back(r);
  std::vector<TreeStats> out;
  for (const auto& g : groups) out.push_back(evaluate_tree(tree, g, policy.config.costs));
  return out;
}

struct GuidelineRule {
  std::string name;
  double age_min = 18;
  double age_max = 100;
  double risk_threshold = 0.0;  // matches when G >= threshold
  std::vector<TestId> tests;

  friend bool operator==(const GuidelineRule&, const GuidelineRule&) = default;
};

/// Ordered risk-tier rules; the first matching rule prescribes the tests.
/// A stand-in for published screening guidelines, not clinical advice.
struct GuidelineRules {
  std::vector<GuidelineRule> rules;

  void validate() const {
    for (const auto& r : rules)
      if (!(r.age_min <= r.age_max)) throw Error(ErrorCode::kConfig, "rule " + r.name + ": empty age range");
    for (int age = 18; age <= 100; ++age) {
      const bool covered = std::any_of(rules.begin(), rules.end(), [&](const GuidelineRule& r) {
        return r.age_min <= age && age <= r.age_max && r.risk_threshold <= 0.0;
      });
      if (!covered) throw Error(ErrorCode::kConfig, "guideline rules leave age " + std::to_string(age) + " uncovered");
    }
  }

  const GuidelineRule& match(double age, double risk) const {
    for (const auto& r : rules)
      if (r.age_min <= age && age <= r.age_max && risk >= r.risk_threshold) return r;
    throw Error(ErrorCode::kConfig, "no guideline rule matches age " + detail::format_double(age));
  }

  static GuidelineRules defaults() {
    GuidelineRules g;
    g.rules = {
        {"high-risk", 18, 100, 0.03, {TestId::kMG, TestId::kMRI}},
        {"under-40", 18, 39.999, 0.0, {}},
        {"elevated-risk", 40, 100, 0.0167, {TestId::kMG, TestId::kUS}},
        {"average-risk", 40, 100, 0.0, {TestId::kMG}},
    };
    return g;
  }

  friend bool operator==(const GuidelineRules&, const GuidelineRules&) = default;
};

inline void to_json(json& j, const GuidelineRule& r) {
  std::vector<std::string> tests;
  for (auto t : r.tests) tests.emplace_back(to_string(t));
  j = json{{"name", r.name}, {"age_min", r.age_min}, {"age_max", r.age_max}, {"risk_threshold", r.risk_threshold},
           {"tests", tests}};
}

inline void from_json(const json& j, GuidelineRule& r) {
  r.name = j.value("name", std::string{});
  r.age_min = j.at("age_min").get<double>();
  r.age_max = j.at("age_max").get<double>();
  r.risk_threshold = j.value("risk_threshold", 0.0);
  r.tests.clear();
  for (const auto& s : j.at("tests")) {
    auto t = parse_test(s.get<std::string>());
    if (!t) throw Error(ErrorCode::kConfig, "unknown test " + s.dump());
    r.tests.push_back(*t);
  }
}

inline void to_json(json& j, const GuidelineRules& g) { j = json{{"rules", g.rules}}; }
inline void from_json(const json& j, GuidelineRules& g) { g.rules = j.at("rules").get<std::vector<GuidelineRule>>(); }

struct GuidelineResult {
  TreeStats stats;
  std::vector<double> cost;  // per record
  std::vector<int> label;
  std::vector<char> evaluated;
};

/// Applies the rules to each record: cost of the prescribed set, positive iff
/// any prescribed test lands in bucket B3. Records missing a prescribed
/// outcome are excluded.
inline GuidelineResult baseline_guideline(const GuidelineRules& rules, std::span<const TrainingRecord> records,
                                          const RiskParameters& risk, const CostConfig& costs,
                                          const FeatureSchema& schema = FeatureSchema::defaults()) {
  rules.validate();
  const auto age_idx = schema.index_of("age");
  if (!age_idx) throw Error(ErrorCode::kSchemaMismatch, "guideline rules need an 'age' feature");
  GuidelineResult out;
  for (const auto& r : records) {
    const double age = denormalize_numeric(schema.features[*age_idx], r.personal[*age_idx]);
    const auto& rule = rules.match(age, assess_risk(r.personal, risk));
    double cost = 0.0;
    int label = 0;
    bool ok = true;
    for (auto t : rule.tests) {
      const auto& s = r.screening[t];
      if (!s) {
        ok = false;
        break;
      }
      cost += costs[t];
      if (birads_bucket(*s) == Bucket::kB3) label = 1;
    }
    out.cost.push_back(ok ? cost : 0.0);
    out.label.push_back(label);
    out.evaluated.push_back(ok);
    if (ok)
      out.stats.add(r.label, label, cost);
    else
      ++out.stats.excluded;
  }
  out.stats.finalize(costs.gamma);
  return out;
}

inline std::vector<QuantilePoint> guideline_cost_vs_risk(const GuidelineResult& g, std::span<const TrainingRecord> records,
                                                         const RiskParameters& risk, std::size_t buckets = 5) {
  std::vector<double> rk;
  for (const auto& r : records) rk.push_back(assess_risk(r.personal, risk));
  return quantile_means(rk, g.cost, g.evaluated, buckets);
}

// ---------------------------------------------------------------------------
// CSV emission for curves
// ---------------------------------------------------------------------------

inline void write_beta_csv(const BetaSweep& s, std::ostream& out) {
  out << "beta,mean_fnr,mean_fpr,mean_partitions,feasible_runs,selected\n";
  for (const auto& p : s.curve)
    out << detail::format_double(p.beta) << ',' << detail::format_double(p.mean_fnr) << ','
        << detail::format_double(p.mean_fpr) << ',' << detail::format_double(p.mean_partitions) << ','
        << p.feasible_runs << ',' << (p.beta == s.best_beta ? 1 : 0) << '\n';
}

inline void write_size_csv(std::span<const SizePoint> pts, std::ostream& out) {
  out << "m,eta,mean_partitions,stderr_partitions,feasible_runs,infeasible_runs,personalization_bound\n";
  for (const auto& p : pts)
    out << p.m << ',' << detail::format_double(p.eta) << ',' << detail::format_double(p.mean_partitions) << ','
        << detail::format_double(p.stderr_partitions) << ',' << p.feasible_runs << ',' << p.infeasible_runs << ','
        << p.personalization_bound << '\n';
}

inline void write_quantile_csv(std::span<const QuantilePoint> pts, std::ostream& out) {
  out << "bucket,risk_lo,risk_hi,count,mean_cost\n";
  for (const auto& p : pts)
    out << p.bucket << ',' << detail::format_double(p.risk_lo) << ',' << detail::format_double(p.risk_hi) << ','
        << p.count << ',' << detail::format_double(p.mean_cost) << '\n';
}

}  // namespace screenwise

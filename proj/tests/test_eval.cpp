#include <gtest/gtest.h>

#include <sstream>

#include "screenwise/eval.hpp"
#include "support.hpp"

using namespace screenwise;

namespace {

Dataset cohort(std::uint64_t seed, std::size_t n) {
  auto g = GeneratorConfig::defaults();
  g.size = n;
  return generate(g, seed);
}

}  // namespace

TEST(Evaluate, AggregatesEqualPerRecordRecount) {
  const auto p = build_policy(cohort(1, 5000), PolicyConfig{}, FeatureSchema::defaults());
  const auto test = cohort(2, 4000);
  const auto rep = evaluate_policy(p, test);
  std::vector<oracle::Tally> per(p.size());
  oracle::Tally all;
  for (const auto& r : test) {
    const auto k = match_partition(r.personal, p);
    const auto t = oracle::tally(p.partitions[k].tree.root, {r}, p.config.costs);
    for (auto* dst : {&per[k], &all}) {
      dst->pos += t.pos;
      dst->neg += t.neg;
      dst->fn += t.fn;
      dst->fp += t.fp;
      dst->routed += t.routed;
      dst->cost += t.cost;
    }
  }
  ASSERT_EQ(rep.per_partition.size(), p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_EQ(rep.per_partition[k].false_negatives, per[k].fn);
    EXPECT_EQ(rep.per_partition[k].false_positives, per[k].fp);
    EXPECT_DOUBLE_EQ(rep.per_partition[k].fnr, per[k].fnr());
  }
  EXPECT_EQ(rep.overall.positives, all.pos);
  EXPECT_DOUBLE_EQ(rep.overall.fpr, all.fpr());
  EXPECT_NEAR(rep.overall.mean_cost, all.cost / static_cast<double>(all.routed), 1e-12);
}

TEST(ConfidenceTrial, EtaOneNeverViolates) {
  PolicyConfig cfg;
  cfg.eta = 1.0;
  TrialConfig t;
  t.runs = 3;
  t.train_size = 2000;
  t.test_size = 2000;
  const auto s = confidence_trial(GeneratorConfig::defaults(), cfg, t);
  EXPECT_EQ(s.violations, 0u);
  EXPECT_EQ(s.violation_fraction, 0.0);
}

TEST(ConfidenceTrial, InfeasibleRunsAreCountedApart) {
  PolicyConfig cfg;
  cfg.strict = true;
  cfg.eta = 0.02;
  TrialConfig t;
  t.runs = 2;
  t.train_size = 3000;
  t.test_size = 1000;
  const auto s = confidence_trial(GeneratorConfig::defaults(), cfg, t);
  EXPECT_EQ(s.infeasible, 2u);
  EXPECT_EQ(s.violations, 0u);
}

TEST(SweepBeta, ConstantRiskCannotSplitAtBetaZero) {
  PolicyConfig cfg;
  cfg.risk = RiskParameters::constant(0.01);
  const std::vector<double> grid{0.0, 1.0};
  const std::vector<std::uint64_t> seeds{1, 2};
  auto gen = GeneratorConfig::defaults();
  gen.label_risk = RiskParameters{};
  const auto res = sweep_beta(grid, gen, cfg, seeds, 3000, 3000);
  ASSERT_EQ(res.curve.size(), 2u);
  // Every point is at distance zero from every centroid when only risk counts.
  EXPECT_EQ(res.curve[0].mean_partitions, 1.0);
  const BetaPoint* best = nullptr;
  for (const auto& pt : res.curve)
    if (pt.feasible_runs && pt.mean_fnr <= cfg.eta && (!best || pt.mean_fpr < best->mean_fpr)) best = &pt;
  ASSERT_NE(best, nullptr);
  EXPECT_EQ(res.best_beta, best->beta);
}

TEST(SweepBeta, ReproduciblePerSeedSet) {
  const std::vector<double> grid{0.25, 0.75};
  const std::vector<std::uint64_t> seeds{3, 1};
  const auto a = sweep_beta(grid, GeneratorConfig::defaults(), PolicyConfig{}, seeds, 2000, 2000);
  const std::vector<std::uint64_t> reordered{1, 3};
  const auto b = sweep_beta(grid, GeneratorConfig::defaults(), PolicyConfig{}, reordered, 2000, 2000);
  std::stringstream sa, sb;
  write_beta_csv(a, sa);
  write_beta_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(SweepM, StrictTinyEtaIsAlwaysInfeasible) {
  PolicyConfig cfg;
  cfg.strict = true;
  cfg.eta = 0.02;
  const std::vector<std::size_t> grid{1000, 5000};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto pts = sweep_m(grid, GeneratorConfig::defaults(), cfg, seeds);
  for (const auto& p : pts) {
    EXPECT_EQ(p.mean_partitions, 0.0);
    EXPECT_EQ(p.infeasible_runs, 2u);
  }
}

TEST(QuantileMeans, EqualCountBucketsByRank) {
  const std::vector<double> risk{0.5, 0.1, 0.3, 0.2, 0.4, 0.6, 0.9, 0.8, 0.7, 1.0};
  std::vector<double> values(risk.begin(), risk.end());
  const auto q = quantile_means(risk, values, {}, 5);
  ASSERT_EQ(q.size(), 5u);
  EXPECT_DOUBLE_EQ(q[0].mean_cost, 0.15);
  EXPECT_DOUBLE_EQ(q[4].mean_cost, 0.95);
  EXPECT_DOUBLE_EQ(q[2].risk_lo, 0.5);
  EXPECT_DOUBLE_EQ(q[2].risk_hi, 0.6);
  for (const auto& p : q) EXPECT_EQ(p.count, 2u);
}

TEST(CostVsRisk, BareLeafPolicyIsFlatZero) {
  auto data = cohort(3, 800);
  for (auto& r : data) r.label = 0;
  const auto p = build_policy(data, PolicyConfig{}, FeatureSchema::defaults());
  for (const auto& q : cost_vs_risk(p, cohort(4, 1000))) EXPECT_EQ(q.mean_cost, 0.0);
}

TEST(BaselineTree, PerfectSeparatorAtRootAndFeasibleFnr) {
  auto data = cohort(5, 3000);
  for (auto& r : data) {
    r.screening = ScreeningObservation{};
    r.screening.observe(TestId::kMG, BiRadsScore::k2);
    r.screening.observe(TestId::kUS, r.label ? BiRadsScore::k5 : BiRadsScore::k1);
    r.screening.observe(TestId::kMRI, BiRadsScore::k3);
  }
  const auto b = baseline_single_tree(data, BaselineConfig{});
  ASSERT_FALSE(b.tree.root.is_leaf());
  EXPECT_EQ(*b.tree.root.test, TestId::kUS);
  EXPECT_EQ(b.stats.false_negatives, 0u);
  EXPECT_EQ(b.stats.false_positives, 0u);
}

TEST(BaselineTree, PerPartitionStatsCoverAllRecords) {
  const auto train = cohort(6, 5000);
  const auto p = build_policy(train, PolicyConfig{}, FeatureSchema::defaults());
  const auto b = baseline_single_tree(train, BaselineConfig{});
  const auto test = cohort(7, 3000);
  const auto per = per_partition_stats(b.tree, p, test);
  ASSERT_EQ(per.size(), p.size());
  std::size_t n = 0;
  for (const auto& s : per) n += s.evaluated + s.excluded;
  EXPECT_EQ(n, test.size());
}

TEST(Guideline, NoTestsAndAllTestsExtremes) {
  const auto data = cohort(8, 2000);
  const RiskParameters risk;
  GuidelineRules none{{{"none", 18, 100, 0.0, {}}}};
  const auto a = baseline_guideline(none, data, risk, CostConfig{});
  for (double c : a.cost) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(a.stats.fnr, 1.0);
  GuidelineRules all{{{"all", 18, 100, 0.0, {TestId::kMG, TestId::kUS, TestId::kMRI}}}};
  const auto b = baseline_guideline(all, data, risk, CostConfig{});
  for (double c : b.cost) EXPECT_NEAR(c, 1.0, 1e-12);
}

TEST(Guideline, DefaultsAreValidAndFollowTiers) {
  const auto g = GuidelineRules::defaults();
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(g.match(35, 0.01).name, "under-40");
  EXPECT_EQ(g.match(35, 0.05).name, "high-risk");
  EXPECT_EQ(g.match(55, 0.02).name, "elevated-risk");
  EXPECT_EQ(g.match(55, 0.01).name, "average-risk");
  GuidelineRules gap{{{"old", 50, 100, 0.0, {}}}};
  EXPECT_THROW(gap.validate(), Error);
}

TEST(Csv, CurveOutputsAreByteStable) {
  PolicyConfig cfg;
  const std::vector<std::size_t> grid{1000, 2000};
  const std::vector<std::uint64_t> seeds{1, 2};
  std::stringstream a, b;
  write_size_csv(sweep_m(grid, GeneratorConfig::defaults(), cfg, seeds), a);
  write_size_csv(sweep_m(grid, GeneratorConfig::defaults(), cfg, seeds), b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "m,eta,mean_partitions,stderr_partitions,feasible_runs,infeasible_runs,personalization_bound");
}

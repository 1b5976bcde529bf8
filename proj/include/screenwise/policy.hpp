#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "screenwise/bounds.hpp"
#include "screenwise/clustering.hpp"
#include "screenwise/tree.hpp"

namespace screenwise {

inline constexpr int kPolicyVersion = 1;

struct PolicyConfig {
  double eta = 0.1;
  double delta = 0.05;
  double beta = 0.75;
  double split_precision = 1e-4;
  double epsilon = 0.1;
  double epsilon_cost = 0.1;
  bool strict = false;
  std::size_t min_samples = 10;
  std::uint64_t seed = 0;
  CostConfig costs;
  std::vector<TestId> tests{kAllTests.begin(), kAllTests.end()};
  RiskParameters risk;  // risk.horizon_years is tau

  int tau() const { return risk.horizon_years; }

  MetricConfig metric() const { return MetricConfig{beta, risk, risk.horizon_years}; }

  void validate(const FeatureSchema& schema) const {
    auto in_open = [](double v) { return v > 0.0 && v < 1.0; };
    if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::kConfig, "eta must lie in (0,1]");
    if (!in_open(delta)) throw Error(ErrorCode::kConfig, "delta must lie in (0,1)");
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorCode::kConfig, "beta must lie in [0,1]");
    if (!(split_precision > 0.0)) throw Error(ErrorCode::kConfig, "split precision must be positive");
    if (!in_open(epsilon) || !in_open(epsilon_cost)) throw Error(ErrorCode::kConfig, "epsilon values must lie in (0,1)");
    if (min_samples < 1) throw Error(ErrorCode::kConfig, "min_samples must be >= 1");
    if (tests.empty()) throw Error(ErrorCode::kConfig, "at least one test must be available");
    costs.validate();
    risk.validate(schema.size());
  }

  InductionConfig induction() const {
    InductionConfig c;
    c.eta = eta;
    c.delta = delta;
    c.costs = costs;
    c.tests = tests;
    c.min_samples = min_samples;
    return c;
  }

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

inline void to_json(json& j, const PolicyConfig& c) {
  std::vector<std::string> tests;
  for (auto t : c.tests) tests.emplace_back(to_string(t));
  j = json{{"eta", c.eta},
           {"delta", c.delta},
           {"beta", c.beta},
           {"tau", c.risk.horizon_years},
           {"split_precision", c.split_precision},
           {"epsilon", c.epsilon},
           {"epsilon_cost", c.epsilon_cost},
           {"strict", c.strict},
           {"min_samples", c.min_samples},
           {"seed", c.seed},
           {"costs", c.costs},
           {"tests", tests},
           {"risk", c.risk}};
}

/// Reads any subset of keys; missing keys keep their current value, so
/// file values layer over defaults.
inline void from_json(const json& j, PolicyConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "policy config must be a JSON object");
  static const std::vector<std::string> known{"eta",     "delta",       "beta",  "tau",    "split_precision",
                                              "epsilon", "epsilon_cost", "strict", "min_samples", "seed",
                                              "costs",   "tests",       "risk",  "gamma"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
  }
  try {
    c.eta = j.value("eta", c.eta);
    c.delta = j.value("delta", c.delta);
    c.beta = j.value("beta", c.beta);
    c.split_precision = j.value("split_precision", c.split_precision);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.epsilon_cost = j.value("epsilon_cost", c.epsilon_cost);
    c.strict = j.value("strict", c.strict);
    c.min_samples = j.value("min_samples", c.min_samples);
    c.seed = j.value("seed", c.seed);
    if (j.contains("risk")) from_json(j.at("risk"), c.risk);
    if (j.contains("tau")) c.risk.horizon_years = j.at("tau").get<int>();
    if (j.contains("costs")) from_json(j.at("costs"), c.costs);
    if (j.contains("gamma")) c.costs.gamma = j.at("gamma").get<double>();
    if (j.contains("tests")) {
      c.tests.clear();
      for (const auto& s : j.at("tests")) {
        auto t = parse_test(s.get<std::string>());
        if (!t) throw Error(ErrorCode::kConfig, "unknown test " + s.dump());
        c.tests.push_back(*t);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
}

struct Partition {
  std::size_t id = 0;
  Centroid centroid;
  std::size_t m = 0;
  DecisionTree tree;
  TreeStats stats;
  FnrBudget budget;
};

struct PolicyDiagnostics {
  std::string hypothesis_count;  // decimal, may exceed 64 bits
  long long sample_complexity = 0;
  long long personalization_bound = 0;
  std::size_t training_size = 0;
  std::size_t split_attempts = 0;
  std::size_t splits_accepted = 0;
};

struct PartitionedPolicy {
  int version = kPolicyVersion;
  PolicyConfig config;
  FeatureSchema schema;
  std::vector<Partition> partitions;
  PolicyDiagnostics diagnostics;

  std::size_t size() const { return partitions.size(); }

  std::vector<Centroid> centroids() const {
    std::vector<Centroid> out;
    for (const auto& p : partitions) out.push_back(p.centroid);
    return out;
  }
};

/// FNV-1a over a canonical JSON dump of the schema and risk parameters.
inline std::string fingerprint(const FeatureSchema& schema, const RiskParameters& risk) {
  const std::string text = json{{"schema", schema}, {"risk", risk}}.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

/// Upper bound on the number of partitions: floor(m / N*).
inline long long personalization_bound(long long m, long long n_star) {
  if (m < 1 || n_star < 1) throw Error(ErrorCode::kInvalidArgument, "m and N* must be >= 1");
  return m / n_star;
}

/// Uniform-convergence quantities for a policy config.
struct StrictTerms {
  BigInt hypotheses;
  long long n_star = 0;
};

inline StrictTerms strict_terms(const PolicyConfig& cfg) {
  StrictTerms s;
  s.hypotheses = count_hypotheses(static_cast<int>(cfg.tests.size()));
  s.n_star = sample_complexity(cfg.epsilon, cfg.epsilon_cost, cfg.delta, s.hypotheses);
  return s;
}

namespace detail {

struct PartitionLearner {
  const PolicyConfig& cfg;
  StrictTerms strict;
  InductionConfig induction;

  /// Learns the tree for one partition. Strict mode caps the training FNR at
  /// eta minus the slack and requires m_j >= N*.
  TreeInduction learn(std::span<const Example> ex) const {
    InductionConfig ic = induction;
    if (cfg.strict) {
      const double slack = uniform_slack(strict.hypotheses, cfg.delta, static_cast<double>(ex.size()));
      if (static_cast<long long>(ex.size()) < strict.n_star) {
        TreeInduction out;
        out.verdict.limiting = "partition size " + std::to_string(ex.size()) + " below sample complexity N* = " +
                               std::to_string(strict.n_star);
        return out;
      }
      if (cfg.eta - slack < 0.0) {
        TreeInduction out;
        std::ostringstream os;
        os << "strict mode: uniform-convergence slack " << slack << " at m=" << ex.size() << " exceeds eta=" << cfg.eta
           << "; partitions need at least " << strict_infeasible_below(strict.hypotheses, cfg.delta, cfg.eta)
           << " records";
        out.verdict.limiting = os.str();
        return out;
      }
      ic.strict_fnr_target = cfg.eta - slack;
    }
    return confident_tree(ex, ic);
  }
};

}  // namespace detail

/// Offline stage: divide-and-conquer partitioning with per-partition trees.
///
/// Partitions are the nearest-centroid cells of the current centroid set.
/// An active partition is split by 2-means; the split is kept only if every
/// cell whose membership changes (the two children and any neighbor that
/// lost records to them) still yields a feasible tree with at least one
/// positive and `min_samples` records. Rejected partitions are frozen with
/// the tree they already have.
inline PartitionedPolicy build_policy(std::span<const TrainingRecord> data, const PolicyConfig& cfg,
                                      const FeatureSchema& schema) {
  if (data.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "training set is empty");
  cfg.validate(schema);
  for (const auto& r : data) check_features(r.personal, schema);

  const auto metric = cfg.metric();
  const std::vector<Example> ex = to_examples(data);
  const std::size_t m = data.size();
  std::vector<double> risk(m);
  for (std::size_t i = 0; i < m; ++i) risk[i] = assess_risk(data[i].personal, metric.tau, metric.risk);

  detail::PartitionLearner learner{cfg, strict_terms(cfg), cfg.induction()};

  struct Cell {
    std::size_t id;
    FeatureVector centroid;
    double centroid_risk;
    std::vector<std::uint32_t> members;
    TreeInduction learned;
  };
  auto gather = [&](const std::vector<std::uint32_t>& members) {
    std::vector<Example> out;
    out.reserve(members.size());
    for (auto i : members) out.push_back(ex[i]);
    return out;
  };

  PartitionedPolicy policy;
  policy.config = cfg;
  policy.schema = schema;
  policy.diagnostics.hypothesis_count = learner.strict.hypotheses.str();
  policy.diagnostics.sample_complexity = learner.strict.n_star;
  policy.diagnostics.personalization_bound = static_cast<long long>(m) / learner.strict.n_star;
  policy.diagnostics.training_size = m;

  std::vector<Cell> cells;
  {
    Cell root;
    root.id = 0;
    root.centroid.assign(schema.size(), 0.0);
    for (const auto& r : data)
      for (std::size_t k = 0; k < schema.size(); ++k) root.centroid[k] += r.personal[k];
    for (auto& v : root.centroid) v /= static_cast<double>(m);
    root.centroid_risk = assess_risk(root.centroid, metric.tau, metric.risk);
    root.members.resize(m);
    for (std::uint32_t i = 0; i < m; ++i) root.members[i] = i;
    const auto root_ex = gather(root.members);
    root.learned = learner.learn(root_ex);
    if (!root.learned.tree)
      throw Error(ErrorCode::kPolicyInfeasible, "no feasible screening tree for the full training set: " +
                                                    root.learned.verdict.limiting);
    cells.push_back(std::move(root));
  }
  std::size_t next_id = 1;
  std::vector<std::uint32_t> owner(m, 0);  // index into `cells`
  std::vector<double> owner_dist(m);
  for (std::size_t i = 0; i < m; ++i)
    owner_dist[i] = blended_distance(data[i].personal, risk[i], cells[0].centroid, cells[0].centroid_risk, metric.beta);

  std::deque<std::size_t> active{0};  // cell ids
  auto cell_index = [&](std::size_t id) {
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (cells[k].id == id) return k;
    return cells.size();
  };

  while (!active.empty()) {
    const std::size_t id = active.front();
    active.pop_front();
    const std::size_t j = cell_index(id);
    if (j == cells.size()) continue;
    const Cell& parent = cells[j];
    if (parent.members.size() < 2 * cfg.min_samples) continue;
    ++policy.diagnostics.split_attempts;

    std::vector<FeatureVector> pts;
    std::vector<double> pts_risk;
    pts.reserve(parent.members.size());
    for (auto i : parent.members) {
      pts.push_back(data[i].personal);
      pts_risk.push_back(risk[i]);
    }
    const SplitResult sr = split(pts, metric, cfg.split_precision, 100, pts_risk);
    if (sr.degenerate) continue;

    // Candidate centroid list: parent removed, children appended (largest ids).
    std::vector<Cell> trial;
    trial.reserve(cells.size() + 1);
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (k != j) trial.push_back(Cell{cells[k].id, cells[k].centroid, cells[k].centroid_risk, {}, {}});
    const std::size_t a = trial.size();
    for (int c = 0; c < 2; ++c) {
      const auto& mu = sr.centroids[static_cast<std::size_t>(c)].position;
      trial.push_back(Cell{next_id + static_cast<std::size_t>(c), mu, assess_risk(mu, metric.tau, metric.risk), {}, {}});
    }
    std::vector<std::uint32_t> trial_owner(m);
    std::vector<double> trial_dist(m);
    // Map old cell index -> trial index.
    std::vector<std::size_t> remap(cells.size());
    for (std::size_t k = 0, t = 0; k < cells.size(); ++k) remap[k] = k == j ? a : t++;
    for (std::size_t i = 0; i < m; ++i) {
      if (owner[i] == j) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < trial.size(); ++k) {
          const double d = blended_distance(data[i].personal, risk[i], trial[k].centroid, trial[k].centroid_risk, metric.beta);
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        trial_owner[i] = static_cast<std::uint32_t>(best);
        trial_dist[i] = best_d;
      } else {
        std::size_t best = remap[owner[i]];
        double best_d = owner_dist[i];
        for (std::size_t k = a; k < a + 2; ++k) {
          const double d = blended_distance(data[i].personal, risk[i], trial[k].centroid, trial[k].centroid_risk, metric.beta);
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        trial_owner[i] = static_cast<std::uint32_t>(best);
        trial_dist[i] = best_d;
      }
      trial[trial_owner[i]].members.push_back(static_cast<std::uint32_t>(i));
    }

    bool accepted = true;
    std::vector<bool> changed(trial.size(), false);
    for (std::size_t k = 0; k < trial.size() && accepted; ++k) {
      if (k >= a) {
        changed[k] = true;
      } else {
        const std::size_t old = k < j ? k : k + 1;
        changed[k] = trial[k].members != cells[old].members;
        if (!changed[k]) trial[k].learned = cells[old].learned;
      }
      if (!changed[k]) continue;
      if (trial[k].members.size() < cfg.min_samples) {
        accepted = false;
        break;
      }
      const auto cell_ex = gather(trial[k].members);
      trial[k].learned = learner.learn(cell_ex);
      if (!trial[k].learned.tree || trial[k].learned.budget.vacuous) accepted = false;
    }
    if (!accepted) continue;

    ++policy.diagnostics.splits_accepted;
    cells = std::move(trial);
    owner = std::move(trial_owner);
    owner_dist = std::move(trial_dist);
    active.push_back(next_id);
    active.push_back(next_id + 1);
    next_id += 2;
  }

  policy.partitions.reserve(cells.size());
  std::size_t pid = 0;
  for (auto& cell : cells) {
    Partition p;
    p.id = pid++;
    p.centroid = Centroid{cell.centroid, cell.members.size()};
    p.m = cell.members.size();
    p.tree = std::move(*cell.learned.tree);
    p.budget = cell.learned.budget;
    std::vector<TrainingRecord> members;
    members.reserve(cell.members.size());
    for (auto i : cell.members) members.push_back(data[i]);
    p.stats = evaluate_tree(p.tree, members, cfg.costs);
    policy.partitions.push_back(std::move(p));
  }
  return policy;
}

/// Execution stage: nearest stored centroid, ties to the lowest id.
inline std::size_t match_partition(std::span<const double> x, const PartitionedPolicy& policy) {
  check_features(x, policy.schema);
  const auto cs = policy.centroids();
  return assign(x, cs, policy.config.metric());
}

// ---------------------------------------------------------------------------
// Policy file
// ---------------------------------------------------------------------------

inline void to_json(json& j, const FnrBudget& b) {
  j = json{{"feasible", b.feasible}, {"vacuous", b.vacuous}, {"positives", b.positives},
           {"max_fnr", b.max_fnr},   {"allowance", b.allowance}};
}

inline json policy_to_json(const PartitionedPolicy& p) {
  json parts = json::array();
  for (const auto& part : p.partitions) {
    parts.push_back(json{{"id", part.id},
                         {"centroid", part.centroid.position},
                         {"m", part.m},
                         {"stats", part.stats},
                         {"budget", part.budget},
                         {"tree", part.tree}});
  }
  return json{{"version", p.version},
              {"config", p.config},
              {"schema", p.schema},
              {"risk", p.config.risk},
              {"fingerprint", fingerprint(p.schema, p.config.risk)},
              {"diagnostics",
               {{"hypothesis_count", p.diagnostics.hypothesis_count},
                {"sample_complexity", p.diagnostics.sample_complexity},
                {"personalization_bound", p.diagnostics.personalization_bound},
                {"training_size", p.diagnostics.training_size},
                {"split_attempts", p.diagnostics.split_attempts},
                {"splits_accepted", p.diagnostics.splits_accepted}}},
              {"partition_count", p.partitions.size()},
              {"partitions", parts}};
}

inline std::string serialize_policy(const PartitionedPolicy& p) { return policy_to_json(p).dump(2) + "\n"; }

/// Parses and verifies a policy document: fingerprint, tree structure and
/// every partition's training FNR against its Wilson budget.
inline PartitionedPolicy policy_from_json(const json& j) {
  PartitionedPolicy p;
  try {
    p.version = j.at("version").get<int>();
    if (p.version != kPolicyVersion)
      throw Error(ErrorCode::kConfig, "unsupported policy version " + std::to_string(p.version));
    from_json(j.at("config"), p.config);
    p.schema = j.at("schema").get<FeatureSchema>();
    p.config.risk = j.at("risk").get<RiskParameters>();
    if (j.at("fingerprint").get<std::string>() != fingerprint(p.schema, p.config.risk))
      throw Error(ErrorCode::kFingerprintMismatch, "policy fingerprint does not match its schema and risk parameters");
    p.config.validate(p.schema);
    const auto& d = j.at("diagnostics");
    p.diagnostics.hypothesis_count = d.value("hypothesis_count", std::string{});
    p.diagnostics.sample_complexity = d.value("sample_complexity", 0LL);
    p.diagnostics.personalization_bound = d.value("personalization_bound", 0LL);
    p.diagnostics.training_size = d.value("training_size", std::size_t{0});
    p.diagnostics.split_attempts = d.value("split_attempts", std::size_t{0});
    p.diagnostics.splits_accepted = d.value("splits_accepted", std::size_t{0});
    const auto strict = strict_terms(p.config);
    for (const auto& jp : j.at("partitions")) {
      Partition part;
      part.id = jp.at("id").get<std::size_t>();
      part.m = jp.at("m").get<std::size_t>();
      part.centroid = Centroid{jp.at("centroid").get<FeatureVector>(), part.m};
      check_features(part.centroid.position, p.schema);
      part.stats = jp.at("stats").get<TreeStats>();
      part.tree = jp.at("tree").get<DecisionTree>();
      if (!tree_well_formed(part.tree))
        throw Error(ErrorCode::kConfig, "partition " + std::to_string(part.id) + ": malformed tree");
      const auto pos = part.tree.root.positives;
      std::optional<double> target;
      if (p.config.strict)
        target = p.config.eta - uniform_slack(strict.hypotheses, p.config.delta, static_cast<double>(std::max<std::size_t>(part.m, 1)));
      part.budget = fnr_budget(pos, p.config.eta, p.config.delta, target);
      if (!part.budget.feasible || leaf_false_negatives(part.tree.root) > part.budget.allowance)
        throw Error(ErrorCode::kConfig,
                    "partition " + std::to_string(part.id) + ": stored counts violate the training FNR bound");
      if (part.id != p.partitions.size())
        throw Error(ErrorCode::kConfig, "partition ids must be consecutive from 0");
      p.partitions.push_back(std::move(part));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed policy file: ") + e.what());
  }
  if (p.partitions.empty()) throw Error(ErrorCode::kConfig, "policy has no partitions");
  return p;
}

inline PartitionedPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot read policy file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, "policy file " + path + " is not valid JSON: " + e.what());
  }
  return policy_from_json(j);
}

inline void save_policy(const PartitionedPolicy& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write policy file " + path);
  out << serialize_policy(p);
}

}  // namespace screenwise

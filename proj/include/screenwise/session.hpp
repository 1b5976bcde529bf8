#pragma once

#include <string>
#include <vector>

#include "screenwise/policy.hpp"

namespace screenwise {

/// Majority label at a tree node and a two-sided Wilson interval, at level
/// 1 - delta, on the training error of predicting that label there.
struct IntermediateDiagnosis {
  int label = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double error = 0.0;
  double lower = 0.0;
  double upper = 1.0;

  friend bool operator==(const IntermediateDiagnosis&, const IntermediateDiagnosis&) = default;
};

inline IntermediateDiagnosis diagnose(const TreeNode& node, double delta) {
  IntermediateDiagnosis d;
  d.positives = node.positives;
  d.negatives = node.negatives;
  d.label = node.is_leaf() ? node.label : node.majority();
  const std::size_t n = node.count();
  if (n == 0) return d;  // no training support: [0, 1]
  const std::size_t wrong = d.label == 1 ? node.negatives : node.positives;
  d.error = static_cast<double>(wrong) / static_cast<double>(n);
  d.lower = wilson_lower(d.error, static_cast<double>(n), delta / 2.0);
  d.upper = wilson_upper(d.error, static_cast<double>(n), delta / 2.0);
  return d;
}

enum class SessionStatus { kAwaitingOutcome, kFinal };

inline const char* to_string(SessionStatus s) { return s == SessionStatus::kFinal ? "final" : "awaiting_outcome"; }

inline const char* recommendation_text(int label) { return label == 1 ? "biopsy" : "regular followup"; }

struct SessionStep {
  TestId test;
  BiRadsScore score;

  friend bool operator==(const SessionStep&, const SessionStep&) = default;
};

/// Execution state for one patient. The path is stored as bucket indices
/// from the root, so a session stays valid as long as its policy lives.
struct Session {
  std::string id;
  FeatureVector features;
  std::size_t partition = 0;
  std::vector<SessionStep> history;
  std::vector<Bucket> path;
  SessionStatus status = SessionStatus::kAwaitingOutcome;
  std::optional<TestId> awaiting;
  int label = 0;  // meaningful once Final
  IntermediateDiagnosis diagnosis;
  double cost = 0.0;

  bool final() const { return status == SessionStatus::kFinal; }
};

namespace detail {

inline const TreeNode& node_at(const DecisionTree& tree, const std::vector<Bucket>& path) {
  const TreeNode* n = &tree.root;
  for (auto b : path) n = &n->child(b);
  return *n;
}

inline void settle(Session& s, const TreeNode& node, double delta) {
  s.diagnosis = diagnose(node, delta);
  if (node.is_leaf()) {
    s.status = SessionStatus::kFinal;
    s.awaiting.reset();
    s.label = node.label;
  } else {
    s.status = SessionStatus::kAwaitingOutcome;
    s.awaiting = node.test;
  }
}

}  // namespace detail

inline Session start_session(std::span<const double> x, const PartitionedPolicy& policy, std::string id = {}) {
  Session s;
  s.id = std::move(id);
  s.features.assign(x.begin(), x.end());
  s.partition = match_partition(x, policy);
  detail::settle(s, policy.partitions[s.partition].tree.root, policy.config.delta);
  return s;
}

inline Session advance_session(Session s, TestId test, BiRadsScore score, const PartitionedPolicy& policy) {
  if (s.final()) throw Error(ErrorCode::kSessionFinal, "session already has a final recommendation");
  if (!s.awaiting || *s.awaiting != test)
    throw Error(ErrorCode::kWrongTest, "session awaits " + std::string(s.awaiting ? to_string(*s.awaiting) : "nothing") +
                                           ", not " + std::string(to_string(test)));
  const auto& tree = policy.partitions.at(s.partition).tree;
  s.history.push_back({test, score});
  s.cost += policy.config.costs[test];
  s.path.push_back(birads_bucket(score));
  detail::settle(s, detail::node_at(tree, s.path), policy.config.delta);
  return s;
}

inline json session_to_json(const Session& s) {
  json hist = json::array();
  for (const auto& h : s.history) hist.push_back({{"test", to_string(h.test)}, {"birads", to_string(h.score)}});
  json j{{"session_id", s.id},
         {"partition_id", s.partition},
         {"status", to_string(s.status)},
         {"history", hist},
         {"accumulated_cost", s.cost},
         {"intermediate_diagnosis",
          {{"label", s.diagnosis.label},
           {"recommendation", recommendation_text(s.diagnosis.label)},
           {"error", s.diagnosis.error},
           {"interval", {s.diagnosis.lower, s.diagnosis.upper}},
           {"positives", s.diagnosis.positives},
           {"negatives", s.diagnosis.negatives}}}};
  if (s.final()) {
    j["label"] = s.label;
    j["recommendation"] = recommendation_text(s.label);
  } else {
    j["recommended_test"] = to_string(*s.awaiting);
    j["recommendation"] = "perform " + std::string(to_string(*s.awaiting));
  }
  return j;
}

/// One human-readable line per session view. The CLI and any service client
/// render the same JSON view, so their transcripts are comparable verbatim.
inline std::string transcript_line(const json& view) {
  const auto& d = view.at("intermediate_diagnosis");
  const auto& iv = d.at("interval");
  std::string out = "partition " + std::to_string(view.at("partition_id").get<std::size_t>());
  if (!view.at("history").empty()) {
    const auto& last = view.at("history").back();
    out += " | " + last.at("test").get<std::string>() + "=" + last.at("birads").get<std::string>();
  }
  out += " | cost " + detail::format_double(view.at("accumulated_cost").get<double>());
  out += " | diagnosis " + d.at("recommendation").get<std::string>() + " error " +
         detail::format_double(d.at("error").get<double>()) + " [" + detail::format_double(iv[0].get<double>()) +
         ", " + detail::format_double(iv[1].get<double>()) + "]";
  if (view.at("status") == "final")
    out += " | Final(" + std::to_string(view.at("label").get<int>()) + "): " +
           view.at("recommendation").get<std::string>();
  else
    out += " | next " + view.at("recommended_test").get<std::string>();
  return out;
}

}  // namespace screenwise

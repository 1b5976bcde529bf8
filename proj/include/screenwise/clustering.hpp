#pragma once

#include <limits>
#include <span>
#include <vector>

#include "screenwise/risk.hpp"

namespace screenwise {

struct Centroid {
  FeatureVector position;
  std::size_t members = 0;

  friend bool operator==(const Centroid&, const Centroid&) = default;
};

/// Settings shared by splitting, assignment and the objective.
struct MetricConfig {
  double beta = 0.75;
  RiskParameters risk;
  int tau = 5;
};

struct SplitResult {
  std::array<Centroid, 2> centroids;
  std::vector<int> assignments;  // 0 or 1 per input point
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_history;
  bool degenerate = false;
};

/// Index of the nearest centroid; ties go to the lowest index.
inline std::size_t assign(std::span<const double> point, std::span<const Centroid> centroids,
                          const MetricConfig& metric) {
  if (centroids.empty()) throw Error(ErrorCode::kInvalidArgument, "assign needs at least one centroid");
  const double risk_point = assess_risk(point, metric.tau, metric.risk);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const auto& c = centroids[j].position;
    const double d = blended_distance(point, risk_point, c, assess_risk(c, metric.tau, metric.risk), metric.beta);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

/// Mean distance from each point to its assigned centroid.
inline double objective(std::span<const FeatureVector> points, std::span<const int> assignments,
                        std::span<const Centroid> centroids, const MetricConfig& metric) {
  if (points.size() != assignments.size())
    throw Error(ErrorCode::kInvalidArgument, "points and assignments differ in length");
  if (points.empty()) return 0.0;
  std::vector<double> centroid_risk;
  for (const auto& c : centroids) centroid_risk.push_back(assess_risk(c.position, metric.tau, metric.risk));
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto j = static_cast<std::size_t>(assignments[i]);
    total += blended_distance(points[i], assess_risk(points[i], metric.tau, metric.risk),
                              centroids[j].position, centroid_risk[j], metric.beta);
  }
  return total / static_cast<double>(points.size());
}

namespace detail {

struct SplitState {
  std::array<FeatureVector, 2> mu;
  std::array<double, 2> mu_risk{};
  std::vector<int> assign;
  double objective = 0.0;
};

}  // namespace detail

/// Risk-initialized 2-means under the blended metric.
///
/// Starts from the minimum- and maximum-risk input points, then alternates
/// nearest-centroid assignment with coordinate-mean updates until the
/// relative objective decrease falls to `precision` or `max_iterations` is
/// hit. An iteration that would raise the objective is rolled back and ends
/// the loop, so the recorded objective never increases.
inline SplitResult split(std::span<const FeatureVector> points, const MetricConfig& metric,
                         double precision = 1e-4, int max_iterations = 100,
                         std::span<const double> precomputed_risk = {}) {
  const std::size_t n = points.size();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "split needs at least two points");
  if (!(precision > 0.0)) throw Error(ErrorCode::kInvalidArgument, "split precision must be positive");
  const std::size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw Error(ErrorCode::kSchemaMismatch, "points differ in dimension");

  std::vector<double> risk;
  if (precomputed_risk.size() == n) {
    risk.assign(precomputed_risk.begin(), precomputed_risk.end());
  } else {
    risk.reserve(n);
    for (const auto& p : points) risk.push_back(assess_risk(p, metric.tau, metric.risk));
  }
  auto risk_of = [&](const FeatureVector& v) { return assess_risk(v, metric.tau, metric.risk); };
  auto dist_to = [&](std::size_t i, const FeatureVector& c, double c_risk) {
    return blended_distance(points[i], risk[i], c, c_risk, metric.beta);
  };

  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (risk[i] < risk[lo]) lo = i;
    if (risk[i] > risk[hi]) hi = i;
  }

  SplitResult result;
  auto degenerate_result = [&]() {
    result.degenerate = true;
    result.centroids[0] = {points[lo], n};
    result.centroids[1] = {points[lo], 0};
    result.assignments.assign(n, 0);
    std::array<Centroid, 2> cs{result.centroids};
    result.objective = objective(points, result.assignments, cs, metric);
    result.objective_history = {result.objective};
    return result;
  };

  detail::SplitState state;
  state.mu = {points[lo], points[hi]};
  state.mu_risk = {risk[lo], risk[hi]};
  state.assign.assign(n, 0);
  bool have_state = false;
  double previous = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iterations; ++iter) {
    detail::SplitState next;
    next.assign.resize(n);
    std::array<std::size_t, 2> count{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const double d0 = dist_to(i, state.mu[0], state.mu_risk[0]);
      const double d1 = dist_to(i, state.mu[1], state.mu_risk[1]);
      next.assign[i] = d1 < d0 ? 1 : 0;
      ++count[static_cast<std::size_t>(next.assign[i])];
    }
    // Empty-cluster repair: move the point farthest from the occupied centroid.
    for (int empty = 0; empty < 2; ++empty) {
      if (count[static_cast<std::size_t>(empty)] != 0) continue;
      const int other = 1 - empty;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = dist_to(i, state.mu[static_cast<std::size_t>(other)], state.mu_risk[static_cast<std::size_t>(other)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d <= 0.0) return degenerate_result();
      next.assign[far] = empty;
      count[static_cast<std::size_t>(empty)] = 1;
      count[static_cast<std::size_t>(other)] -= 1;
    }
    for (int j = 0; j < 2; ++j) next.mu[static_cast<std::size_t>(j)].assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& mu = next.mu[static_cast<std::size_t>(next.assign[i])];
      for (std::size_t k = 0; k < dim; ++k) mu[k] += points[i][k];
    }
    for (std::size_t j = 0; j < 2; ++j) {
      for (auto& v : next.mu[j]) v /= static_cast<double>(count[j]);
      next.mu_risk[j] = risk_of(next.mu[j]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(next.assign[i]);
      total += dist_to(i, next.mu[j], next.mu_risk[j]);
    }
    next.objective = total / static_cast<double>(n);

    if (have_state && next.objective > previous) break;  // rollback: keep `state`
    state = std::move(next);
    have_state = true;
    result.iterations = iter + 1;
    result.objective_history.push_back(state.objective);
    const double d = state.objective;
    if (d <= 0.0 || (previous - d) / d <= precision) break;
    previous = d;
  }

  if (state.objective <= 0.0 && state.mu[0] == state.mu[1]) return degenerate_result();
  // Final assignment step against the returned centroids.
  std::vector<int> nearest(n);
  std::array<std::size_t, 2> members{0, 0};
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d0 = dist_to(i, state.mu[0], state.mu_risk[0]);
    const double d1 = dist_to(i, state.mu[1], state.mu_risk[1]);
    nearest[i] = d1 < d0 ? 1 : 0;
    ++members[static_cast<std::size_t>(nearest[i])];
    total += std::min(d0, d1);
  }
  if (members[0] && members[1] && nearest != state.assign) {
    state.assign = std::move(nearest);
    state.objective = total / static_cast<double>(n);
    result.objective_history.push_back(state.objective);
  }
  result.assignments = state.assign;
  result.objective = state.objective;
  members = {0, 0};
  for (int a : state.assign) ++members[static_cast<std::size_t>(a)];
  result.centroids[0] = {state.mu[0], members[0]};
  result.centroids[1] = {state.mu[1], members[1]};
  return result;
}

}  // namespace screenwise

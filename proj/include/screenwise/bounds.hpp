#pragma once

// Confidence bounds on error proportions and the hypothesis-counting /
// sample-complexity formulas used by tree induction and the policy builder.

#include <cmath>
#include <optional>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "screenwise/error.hpp"

namespace screenwise {

using BigInt = boost::multiprecision::cpp_int;

/// Upper-tail standard-normal quantile: z with Q(z) = delta.
inline double q_inverse(double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "confidence parameter must lie in (0,1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(boost::math::complement(standard, delta));
}

namespace detail {

inline void check_proportion(double p_hat, double n) {
  if (!(p_hat >= 0.0 && p_hat <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "InvalidProportion: proportion must lie in [0,1]");
  if (!(n > 0.0)) throw Error(ErrorCode::kInvalidArgument, "NonPositiveN: n must be positive");
}

inline double wilson_bound(double p_hat, double n, double z, double sign) {
  const double z2 = z * z;
  const double radicand = std::max(0.0, p_hat / n - p_hat * p_hat / n + z2 / (4.0 * n * n));
  return (p_hat + z2 / (2.0 * n) + sign * z * std::sqrt(radicand)) / (1.0 + z2 / n);
}

}  // namespace detail

/// Wilson score upper limit for an observed proportion p_hat over n trials at
/// one-sided confidence 1 - delta.
inline double wilson_upper(double p_hat, double n, double delta) {
  detail::check_proportion(p_hat, n);
  return std::min(1.0, detail::wilson_bound(p_hat, n, q_inverse(delta), +1.0));
}

inline double wilson_lower(double p_hat, double n, double delta) {
  detail::check_proportion(p_hat, n);
  return std::max(0.0, detail::wilson_bound(p_hat, n, q_inverse(delta), -1.0));
}

/// Largest empirical FNR whose Wilson upper limit over n positives stays at
/// eta. Closed form of the inverse: eta - z*sqrt(eta(1-eta)/n).
///
/// Returns nullopt when even a zero empirical rate is too uncertain, which
/// happens exactly when n < z^2 (1 - eta) / eta.
inline std::optional<double> max_empirical_fnr(double eta, double delta, double n) {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "eta must lie in (0,1]");
  if (!(n > 0.0)) throw Error(ErrorCode::kInvalidArgument, "NonPositiveN: n must be positive");
  const double z = q_inverse(delta);
  if (eta >= 1.0) return 1.0;
  if (n < z * z * (1.0 - eta) / eta) return std::nullopt;
  return std::max(0.0, eta - z * std::sqrt(eta * (1.0 - eta) / n));
}

/// Smallest positive count for which max_empirical_fnr is defined.
inline long min_positives_for_bound(double eta, double delta) {
  const double z = q_inverse(delta);
  if (eta >= 1.0) return 1;
  return static_cast<long>(std::ceil(z * z * (1.0 - eta) / eta));
}

/// Number of distinct trees with binary leaves, three-way branching and no
/// test repeated on a path, over s test kinds: T(0)=2, T(k)=2+k*T(k-1)^3.
inline BigInt count_hypotheses(int s) {
  if (s < 0) throw Error(ErrorCode::kInvalidArgument, "test count must be nonnegative");
  BigInt t = 2;
  for (int k = 1; k <= s; ++k) t = 2 + BigInt(k) * t * t * t;
  return t;
}

/// Natural log of a positive big integer without overflowing double.
inline double log_big(const BigInt& v) {
  if (v <= 0) throw Error(ErrorCode::kInvalidArgument, "log of nonpositive integer");
  const auto bits = boost::multiprecision::msb(v);
  if (bits < 1000) return std::log(v.convert_to<double>());
  const unsigned shift = static_cast<unsigned>(bits) - 60;
  const BigInt top = v >> shift;
  return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::log(2.0);
}

/// Training-set size that uniformly bounds FNR and cost estimates over a
/// finite hypothesis class: ceil(ln(4|H|/delta) / (2 min(eps^2, eps_c^2))).
inline long long sample_complexity(double eps, double eps_cost, double delta, const BigInt& hypotheses) {
  if (!(eps > 0 && eps < 1 && eps_cost > 0 && eps_cost < 1 && delta > 0 && delta < 1))
    throw Error(ErrorCode::kInvalidArgument, "epsilon, epsilon_c and delta must lie in (0,1)");
  if (hypotheses < 1) throw Error(ErrorCode::kInvalidArgument, "hypothesis count must be >= 1");
  const double e2 = std::min(eps * eps, eps_cost * eps_cost);
  const double numer = std::log(4.0) + log_big(hypotheses) - std::log(delta);
  return static_cast<long long>(std::ceil(numer / (2.0 * e2)));
}

/// Uniform-convergence slack subtracted from eta in strict mode:
/// sqrt((ln|H| + ln(4/delta)) / (2 m)).
inline double uniform_slack(const BigInt& hypotheses, double delta, double m) {
  if (!(m >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "partition size must be >= 1");
  if (!(delta > 0 && delta < 1)) throw Error(ErrorCode::kInvalidArgument, "delta must lie in (0,1)");
  return std::sqrt((log_big(hypotheses) + std::log(4.0 / delta)) / (2.0 * m));
}

/// Largest partition size for which uniform_slack still reaches eta.
inline long long strict_infeasible_below(const BigInt& hypotheses, double delta, double eta) {
  const double need = (log_big(hypotheses) + std::log(4.0 / delta)) / (2.0 * eta * eta);
  return static_cast<long long>(std::floor(need)) + 1;
}

}  // namespace screenwise

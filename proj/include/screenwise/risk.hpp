#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "screenwise/core.hpp"

namespace screenwise {

/// Parameters of the pluggable risk model G(x, tau).
///
/// "logistic-surrogate": annual probability h0 * sigmoid(b0 + w.x), turned
/// into a tau-year risk by 1 - (1 - p)^tau. This is a stand-in, not the
/// published Gail tables; any model honoring assess_risk's contract can be
/// selected through `model`.
///
/// "constant": annual probability h0 for every patient.
struct RiskParameters {
  std::string model = "logistic-surrogate";
  double baseline_hazard = 0.05;
  double intercept = -4.0;
  // Aligned with FeatureSchema::defaults(): age, density, family history,
  // menarche age, first-birth age, biopsies, hormonal history.
  std::vector<double> coefficients{2.0, 1.2, 2.5, -0.8, 0.6, 1.5, 0.5};
  int horizon_years = 5;

  void validate(std::size_t feature_count) const {
    if (model != "logistic-surrogate" && model != "constant")
      throw Error(ErrorCode::kConfig, "unknown risk model '" + model + "'");
    if (!(baseline_hazard > 0.0 && baseline_hazard <= 0.2))
      throw Error(ErrorCode::kConfig, "baseline hazard must lie in (0, 0.2]");
    if (!std::isfinite(intercept)) throw Error(ErrorCode::kConfig, "intercept must be finite");
    for (double c : coefficients)
      if (!std::isfinite(c)) throw Error(ErrorCode::kConfig, "risk coefficients must be finite");
    if (model == "logistic-surrogate" && coefficients.size() != feature_count)
      throw Error(ErrorCode::kSchemaMismatch, "risk coefficients do not match the feature schema");
    if (horizon_years < 1) throw Error(ErrorCode::kConfig, "risk horizon must be >= 1 year");
  }

  static RiskParameters constant(double annual) {
    RiskParameters p;
    p.model = "constant";
    p.baseline_hazard = annual;
    p.coefficients.clear();
    return p;
  }

  friend bool operator==(const RiskParameters&, const RiskParameters&) = default;
};

inline void to_json(json& j, const RiskParameters& p) {
  j = json{{"model", p.model},
           {"baseline_hazard", p.baseline_hazard},
           {"intercept", p.intercept},
           {"coefficients", p.coefficients},
           {"horizon_years", p.horizon_years}};
}

inline void from_json(const json& j, RiskParameters& p) {
  p.model = j.value("model", p.model);
  p.baseline_hazard = j.value("baseline_hazard", p.baseline_hazard);
  p.intercept = j.value("intercept", p.intercept);
  p.coefficients = j.value("coefficients", p.coefficients);
  p.horizon_years = j.value("horizon_years", p.horizon_years);
}

inline double annual_risk(std::span<const double> x, const RiskParameters& params) {
  if (params.model == "constant") return params.baseline_hazard;
  double score = params.intercept;
  const std::size_t n = std::min(x.size(), params.coefficients.size());
  for (std::size_t i = 0; i < n; ++i) score += params.coefficients[i] * x[i];
  return params.baseline_hazard / (1.0 + std::exp(-score));
}

/// Probability of developing the disease within `tau` years.
inline double assess_risk(std::span<const double> x, int tau, const RiskParameters& params) {
  if (tau < 0) throw Error(ErrorCode::kInvalidArgument, "risk horizon must be nonnegative");
  if (tau == 0) return 0.0;
  const double p = annual_risk(x, params);
  return std::clamp(1.0 - std::pow(1.0 - p, tau), 0.0, 1.0);
}

inline double assess_risk(std::span<const double> x, const RiskParameters& params) {
  return assess_risk(x, params.horizon_years, params);
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Blended distance when both risks are already known.
inline double blended_distance(std::span<const double> x, double risk_x, std::span<const double> y,
                               double risk_y, double beta) {
  return beta * euclidean(x, y) + (1.0 - beta) * std::abs(risk_x - risk_y);
}

/// d(x, x') = beta * ||x - x'|| + (1 - beta) * |G(x) - G(x')|.
inline double distance(std::span<const double> x, std::span<const double> y, double beta,
                       const RiskParameters& risk, int tau) {
  if (x.size() != y.size()) throw Error(ErrorCode::kSchemaMismatch, "feature vectors differ in length");
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "beta must lie in [0,1]");
  return blended_distance(x, assess_risk(x, tau, risk), y, assess_risk(y, tau, risk), beta);
}

}  // namespace screenwise

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "screenwise/error.hpp"

namespace screenwise {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Screening tests and BI-RADS scores
// ---------------------------------------------------------------------------

/// Imaging tests, in the fixed order used for deterministic tie-breaking.
enum class TestId : std::uint8_t { kMG = 0, kUS = 1, kMRI = 2 };

inline constexpr std::size_t kNumTests = 3;
inline constexpr std::array<TestId, kNumTests> kAllTests{TestId::kMG, TestId::kUS, TestId::kMRI};

inline std::size_t index_of(TestId t) { return static_cast<std::size_t>(t); }

inline std::string_view to_string(TestId t) {
  switch (t) {
    case TestId::kMG: return "MG";
    case TestId::kUS: return "US";
    case TestId::kMRI: return "MRI";
  }
  return "?";
}

inline std::optional<TestId> parse_test(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "MG") return TestId::kMG;
  if (up == "US") return TestId::kUS;
  if (up == "MRI") return TestId::kMRI;
  return std::nullopt;
}

enum class BiRadsScore : std::uint8_t { k1, k2, k3, k4A, k4B, k4C, k5, k6 };

inline constexpr std::size_t kNumScores = 8;
inline constexpr std::array<BiRadsScore, kNumScores> kAllScores{
    BiRadsScore::k1,  BiRadsScore::k2,  BiRadsScore::k3, BiRadsScore::k4A,
    BiRadsScore::k4B, BiRadsScore::k4C, BiRadsScore::k5, BiRadsScore::k6};

inline std::string_view to_string(BiRadsScore s) {
  static constexpr std::array<std::string_view, kNumScores> names{"1",  "2",  "3", "4A",
                                                                  "4B", "4C", "5", "6"};
  return names[static_cast<std::size_t>(s)];
}

/// Outcome of parsing a BI-RADS cell: "0" (incomplete study) and blanks are
/// representable only as Missing.
struct ParsedScore {
  std::optional<BiRadsScore> score;
  bool was_incomplete = false;  // token "0"
  bool valid = true;
};

inline ParsedScore parse_birads(std::string_view token) {
  std::string t;
  for (char c : token)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (t.empty()) return {};
  if (t == "0") return {std::nullopt, true, true};
  for (auto s : kAllScores)
    if (to_string(s) == t) return {s, false, true};
  return {std::nullopt, false, false};
}

/// Numeric BI-RADS level; the three level-4 subcategories share level 4.
inline int birads_level(BiRadsScore s) {
  switch (s) {
    case BiRadsScore::k1: return 1;
    case BiRadsScore::k2: return 2;
    case BiRadsScore::k3: return 3;
    case BiRadsScore::k4A:
    case BiRadsScore::k4B:
    case BiRadsScore::k4C: return 4;
    case BiRadsScore::k5: return 5;
    case BiRadsScore::k6: return 6;
  }
  return 0;
}

enum class Bucket : std::uint8_t { kB1 = 0, kB2 = 1, kB3 = 2 };

inline constexpr std::size_t kNumBuckets = 3;

inline std::string_view to_string(Bucket b) {
  switch (b) {
    case Bucket::kB1: return "B1";
    case Bucket::kB2: return "B2";
    case Bucket::kB3: return "B3";
  }
  return "?";
}

inline std::optional<Bucket> parse_bucket(std::string_view s) {
  if (s == "B1") return Bucket::kB1;
  if (s == "B2") return Bucket::kB2;
  if (s == "B3") return Bucket::kB3;
  return std::nullopt;
}

/// B1: level < 3, B2: level in {3, 4}, B3: level > 4.
inline Bucket birads_bucket(BiRadsScore s) {
  const int level = birads_level(s);
  if (level < 3) return Bucket::kB1;
  if (level <= 4) return Bucket::kB2;
  return Bucket::kB3;
}

/// One slot per configured test. Slots move Missing -> Observed only.
class ScreeningObservation {
 public:
  ScreeningObservation() = default;

  const std::optional<BiRadsScore>& operator[](TestId t) const { return slots_[index_of(t)]; }

  bool observed(TestId t) const { return slots_[index_of(t)].has_value(); }

  bool any_observed() const {
    return std::any_of(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); });
  }

  void observe(TestId t, BiRadsScore s) {
    auto& slot = slots_[index_of(t)];
    if (slot && *slot != s)
      throw Error(ErrorCode::kInvalidArgument,
                  "screening slot " + std::string(to_string(t)) + " already observed");
    slot = s;
  }

  friend bool operator==(const ScreeningObservation&, const ScreeningObservation&) = default;

 private:
  std::array<std::optional<BiRadsScore>, kNumTests> slots_{};
};

// ---------------------------------------------------------------------------
// Costs
// ---------------------------------------------------------------------------

/// Normalized per-test monetary costs (summing to one) and the weight gamma
/// that trades false positives against monetary cost.
struct CostConfig {
  std::array<double, kNumTests> cost{0.1, 0.2, 0.7};
  double gamma = 0.5;

  double operator[](TestId t) const { return cost[index_of(t)]; }

  void validate() const {
    double sum = 0.0;
    for (double c : cost) {
      if (!(c >= 0.0) || !std::isfinite(c))
        throw Error(ErrorCode::kConfig, "test costs must be finite and nonnegative");
      sum += c;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error(ErrorCode::kConfig, "normalized test costs must sum to 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::kConfig, "gamma must lie in [0,1]");
  }

  /// Builds a config from raw monetary costs by dividing by their total.
  static CostConfig from_monetary(const std::array<double, kNumTests>& monetary, double gamma) {
    double total = 0.0;
    for (double c : monetary) total += c;
    if (!(total > 0.0)) throw Error(ErrorCode::kConfig, "total monetary cost must be positive");
    CostConfig out;
    for (std::size_t i = 0; i < kNumTests; ++i) out.cost[i] = monetary[i] / total;
    out.gamma = gamma;
    out.validate();
    return out;
  }

  friend bool operator==(const CostConfig&, const CostConfig&) = default;
};

inline void to_json(json& j, const CostConfig& c) {
  j = json{{"MG", c.cost[0]}, {"US", c.cost[1]}, {"MRI", c.cost[2]}, {"gamma", c.gamma}};
}

inline void from_json(const json& j, CostConfig& c) {
  c.cost[0] = j.value("MG", c.cost[0]);
  c.cost[1] = j.value("US", c.cost[1]);
  c.cost[2] = j.value("MRI", c.cost[2]);
  c.gamma = j.value("gamma", c.gamma);
  c.validate();
}

// ---------------------------------------------------------------------------
// Personal features
// ---------------------------------------------------------------------------

using FeatureVector = std::vector<double>;

enum class FeatureKind { kNumeric, kCategorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  double min = 0.0;  // numeric range
  double max = 1.0;
  // Categorical: ordered levels, each a list of accepted tokens; level i of
  // L levels normalizes to i / (L - 1).
  std::vector<std::vector<std::string>> levels;
  std::optional<std::string> default_value;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Ordered personal-feature schema. Ranges come from here, never from data.
struct FeatureSchema {
  std::vector<FeatureSpec> features;
  // Raw columns that are accepted on input but excluded from the vector.
  std::vector<std::string> ignored;

  std::size_t size() const { return features.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return i;
    return std::nullopt;
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

  static FeatureSchema defaults() {
    FeatureSchema s;
    auto numeric = [](std::string name, double lo, double hi, std::optional<std::string> def = {}) {
      FeatureSpec f;
      f.name = std::move(name);
      f.min = lo;
      f.max = hi;
      f.default_value = std::move(def);
      return f;
    };
    s.features.push_back(numeric("age", 25, 80));
    FeatureSpec density;
    density.name = "breast_density";
    density.kind = FeatureKind::kCategorical;
    density.levels = {{"1", "Category 1", "almost entirely fat"},
                      {"2", "Category 2", "scattered fibroglandular"},
                      {"3", "Category 3", "heterogeneously dense"},
                      {"4", "Category 4", "extremely dense"}};
    s.features.push_back(density);
    s.features.push_back(numeric("family_history", 0, 3, "0"));
    s.features.push_back(numeric("age_menarche", 9, 17, "13"));
    s.features.push_back(numeric("age_first_birth", 15, 45, "30"));
    s.features.push_back(numeric("num_biopsies", 0, 3, "0"));
    FeatureSpec hormonal;
    hormonal.name = "hormonal_history";
    hormonal.kind = FeatureKind::kCategorical;
    hormonal.levels = {{"0", "-", "none", "no"}, {"1", "estrogen", "tamoxifen", "progesterone", "yes"}};
    hormonal.default_value = "0";
    s.features.push_back(hormonal);
    s.ignored = {"ethnicity", "gender"};
    return s;
  }
};

inline void to_json(json& j, const FeatureSpec& f) {
  j = json{{"name", f.name}};
  if (f.kind == FeatureKind::kNumeric) {
    j["kind"] = "numeric";
    j["min"] = f.min;
    j["max"] = f.max;
  } else {
    j["kind"] = "categorical";
    j["levels"] = f.levels;
  }
  if (f.default_value) j["default"] = *f.default_value;
}

inline void from_json(const json& j, FeatureSpec& f) {
  f.name = j.at("name").get<std::string>();
  const auto kind = j.value("kind", std::string("numeric"));
  if (kind == "numeric") {
    f.kind = FeatureKind::kNumeric;
    f.min = j.at("min").get<double>();
    f.max = j.at("max").get<double>();
    if (!(f.min < f.max)) throw Error(ErrorCode::kConfig, "feature " + f.name + ": min must be < max");
  } else if (kind == "categorical") {
    f.kind = FeatureKind::kCategorical;
    f.levels = j.at("levels").get<std::vector<std::vector<std::string>>>();
    if (f.levels.size() < 2)
      throw Error(ErrorCode::kConfig, "feature " + f.name + ": need at least two levels");
  } else {
    throw Error(ErrorCode::kConfig, "feature " + f.name + ": unknown kind " + kind);
  }
  if (j.contains("default")) f.default_value = j.at("default").get<std::string>();
}

inline void to_json(json& j, const FeatureSchema& s) {
  j = json{{"features", s.features}, {"ignored", s.ignored}};
}

inline void from_json(const json& j, FeatureSchema& s) {
  s.features = j.at("features").get<std::vector<FeatureSpec>>();
  s.ignored = j.value("ignored", std::vector<std::string>{});
}

namespace detail {

inline std::string trim_lower(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  std::string t = trim_lower(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

/// Normalizes one feature's raw token against its spec.
inline double normalize_value(const FeatureSpec& f, std::string_view raw) {
  if (f.kind == FeatureKind::kNumeric) {
    auto v = detail::parse_double(raw);
    if (!v) throw Error(ErrorCode::kNonNumericValue, "feature " + f.name + ": non-numeric value '" + std::string(raw) + "'");
    return std::clamp((*v - f.min) / (f.max - f.min), 0.0, 1.0);
  }
  const std::string token = detail::trim_lower(raw);
  for (std::size_t i = 0; i < f.levels.size(); ++i)
    for (const auto& alias : f.levels[i])
      if (detail::trim_lower(alias) == token)
        return static_cast<double>(i) / static_cast<double>(f.levels.size() - 1);
  throw Error(ErrorCode::kNonNumericValue, "feature " + f.name + ": unknown category '" + std::string(raw) + "'");
}

/// Maps named raw values onto the schema's [0,1] feature vector. Blank or
/// absent values fall back to the schema default when one exists.
inline FeatureVector normalize_features(const std::map<std::string, std::string>& raw,
                                        const FeatureSchema& schema) {
  for (const auto& [name, value] : raw) {
    (void)value;
    if (!schema.index_of(name) &&
        std::find(schema.ignored.begin(), schema.ignored.end(), name) == schema.ignored.end())
      throw Error(ErrorCode::kUnknownFeature, "unknown feature '" + name + "'");
  }
  FeatureVector out;
  out.reserve(schema.size());
  for (const auto& f : schema.features) {
    auto it = raw.find(f.name);
    std::string_view value;
    if (it != raw.end() && !detail::trim_lower(it->second).empty()) {
      value = it->second;
    } else if (f.default_value) {
      value = *f.default_value;
    } else {
      throw Error(ErrorCode::kSchemaMismatch, "feature '" + f.name + "' missing and has no default");
    }
    out.push_back(normalize_value(f, value));
  }
  return out;
}

/// Inverse of normalize_value for display and rule evaluation. Categorical
/// entries map to the nearest level's first token.
inline std::string denormalize_value(const FeatureSpec& f, double v) {
  if (f.kind == FeatureKind::kNumeric) return detail::format_double(f.min + v * (f.max - f.min));
  const auto n = f.levels.size();
  auto idx = static_cast<std::size_t>(std::lround(std::clamp(v, 0.0, 1.0) * static_cast<double>(n - 1)));
  return f.levels[idx].front();
}

inline double denormalize_numeric(const FeatureSpec& f, double v) {
  return f.kind == FeatureKind::kNumeric ? f.min + v * (f.max - f.min) : v;
}

inline void check_features(std::span<const double> x, const FeatureSchema& schema) {
  if (x.size() != schema.size())
    throw Error(ErrorCode::kSchemaMismatch, "feature vector length " + std::to_string(x.size()) +
                                                " does not match schema length " + std::to_string(schema.size()));
  for (double v : x)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw Error(ErrorCode::kSchemaMismatch, "feature values must be finite and within [0,1]");
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct TrainingRecord {
  std::string id;
  // Raw personal columns as ingested (used for lossless CSV emission).
  std::map<std::string, std::string> raw;
  FeatureVector personal;
  ScreeningObservation screening;
  int label = 0;
  bool features_only = false;

  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

using Dataset = std::vector<TrainingRecord>;

}  // namespace screenwise

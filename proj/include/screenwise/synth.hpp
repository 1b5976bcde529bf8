#pragma once

// Seeded synthetic screening population and CSV ingestion/emission.
//
// Every table here is an artifact choice: no conditional BI-RADS
// distributions are published for the original cohort, so the defaults only
// encode qualitative facts (mammography degrades with breast density, MRI
// does not; prevalence around 8.3%).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "screenwise/risk.hpp"

namespace screenwise {

/// mt19937_64 wrapped with hand-written transforms, so a seed yields the
/// same draws with any standard library.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal(double mean, double sd) {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return mean + sd * z;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    return mean + sd * r * std::cos(theta);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct NormalSpec {
  double mean = 0.0;
  double sd = 1.0;

  friend bool operator==(const NormalSpec&, const NormalSpec&) = default;
};

inline void to_json(json& j, const NormalSpec& n) { j = json{{"mean", n.mean}, {"sd", n.sd}}; }
inline void from_json(const json& j, NormalSpec& n) {
  n.mean = j.at("mean").get<double>();
  n.sd = j.at("sd").get<double>();
}

/// One latent subpopulation of personal features.
struct ClusterSpec {
  std::string name;
  double weight = 1.0;
  NormalSpec age;
  std::vector<double> density;         // categories 1..4
  std::vector<double> family_history;  // 0..3 affected relatives
  NormalSpec age_menarche;
  NormalSpec age_first_birth;
  std::vector<double> biopsies;  // 0..3
  double hormonal = 0.0;

  friend bool operator==(const ClusterSpec&, const ClusterSpec&) = default;
};

inline void to_json(json& j, const ClusterSpec& c) {
  j = json{{"name", c.name},
           {"weight", c.weight},
           {"age", c.age},
           {"density", c.density},
           {"family_history", c.family_history},
           {"age_menarche", c.age_menarche},
           {"age_first_birth", c.age_first_birth},
           {"biopsies", c.biopsies},
           {"hormonal", c.hormonal}};
}

inline void from_json(const json& j, ClusterSpec& c) {
  c.name = j.at("name").get<std::string>();
  c.weight = j.at("weight").get<double>();
  c.age = j.at("age").get<NormalSpec>();
  c.density = j.at("density").get<std::vector<double>>();
  c.family_history = j.at("family_history").get<std::vector<double>>();
  c.age_menarche = j.at("age_menarche").get<NormalSpec>();
  c.age_first_birth = j.at("age_first_birth").get<NormalSpec>();
  c.biopsies = j.at("biopsies").get<std::vector<double>>();
  c.hormonal = j.at("hormonal").get<double>();
}

/// P(score | test, density category, label), scores ordered as kAllScores.
using BiRadsTable = std::array<std::array<std::array<std::array<double, kNumScores>, 2>, 4>, kNumTests>;

struct GeneratorConfig {
  std::size_t size = 5000;
  std::uint64_t seed = 1;
  double prevalence = 0.0833;
  std::vector<ClusterSpec> clusters;
  std::vector<std::string> ethnicities{"W", "B", "A", "H", "U"};
  std::vector<double> ethnicity_weights{0.6, 0.12, 0.15, 0.1, 0.03};
  // Labels follow this model when set; otherwise the engine's default risk.
  std::optional<RiskParameters> label_risk;
  BiRadsTable birads{};
  // Probability that each test's outcome is observed; nullopt = complete.
  std::optional<std::array<double, kNumTests>> observation_rate;

  void validate() const {
    auto check_dist = [](std::span<const double> p, std::size_t n, const std::string& what) {
      if (p.size() != n) throw Error(ErrorCode::kConfig, what + ": expected " + std::to_string(n) + " probabilities");
      double s = 0.0;
      for (double v : p) {
        if (!(v >= 0.0)) throw Error(ErrorCode::kConfig, what + ": negative probability");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::kConfig, what + ": probabilities must sum to 1");
    };
    if (!(prevalence > 0.0 && prevalence < 1.0)) throw Error(ErrorCode::kConfig, "prevalence must lie in (0,1)");
    if (clusters.empty()) throw Error(ErrorCode::kConfig, "generator needs at least one cluster");
    std::vector<double> w;
    for (const auto& c : clusters) {
      w.push_back(c.weight);
      check_dist(c.density, 4, "cluster " + c.name + " density");
      check_dist(c.family_history, 4, "cluster " + c.name + " family_history");
      check_dist(c.biopsies, 4, "cluster " + c.name + " biopsies");
      if (!(c.hormonal >= 0.0 && c.hormonal <= 1.0)) throw Error(ErrorCode::kConfig, "hormonal rate must lie in [0,1]");
      if (!(c.age.sd > 0 && c.age_menarche.sd > 0 && c.age_first_birth.sd > 0))
        throw Error(ErrorCode::kConfig, "cluster " + c.name + ": standard deviations must be positive");
    }
    check_dist(w, clusters.size(), "cluster weights");
    if (ethnicities.size() != ethnicity_weights.size() || ethnicities.empty())
      throw Error(ErrorCode::kConfig, "ethnicity labels and weights differ in length");
    check_dist(ethnicity_weights, ethnicities.size(), "ethnicity weights");
    for (std::size_t t = 0; t < kNumTests; ++t)
      for (std::size_t d = 0; d < 4; ++d)
        for (std::size_t y = 0; y < 2; ++y)
          check_dist(birads[t][d][y], kNumScores,
                     "birads " + std::string(to_string(kAllTests[t])) + " density " + std::to_string(d + 1) +
                         " label " + std::to_string(y));
    if (observation_rate)
      for (double r : *observation_rate)
        if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorCode::kConfig, "observation rates must lie in [0,1]");
    if (label_risk) label_risk->validate(FeatureSchema::defaults().size());
  }

  static GeneratorConfig defaults();

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

inline void to_json(json& j, const GeneratorConfig& g) {
  json tables = json::object();
  for (std::size_t t = 0; t < kNumTests; ++t) {
    json per_density = json::array();
    for (std::size_t d = 0; d < 4; ++d)
      per_density.push_back(json{{"negative", g.birads[t][d][0]}, {"positive", g.birads[t][d][1]}});
    tables[std::string(to_string(kAllTests[t]))] = per_density;
  }
  j = json{{"size", g.size},
           {"seed", g.seed},
           {"prevalence", g.prevalence},
           {"clusters", g.clusters},
           {"ethnicities", g.ethnicities},
           {"ethnicity_weights", g.ethnicity_weights},
           {"birads", tables}};
  if (g.label_risk) j["label_risk"] = *g.label_risk;
  if (g.observation_rate) {
    const auto& r = *g.observation_rate;
    j["observation_rate"] = json{{"MG", r[0]}, {"US", r[1]}, {"MRI", r[2]}};
  }
}

inline void from_json(const json& j, GeneratorConfig& g) {
  try {
    g.size = j.value("size", g.size);
    g.seed = j.value("seed", g.seed);
    g.prevalence = j.value("prevalence", g.prevalence);
    if (j.contains("clusters")) g.clusters = j.at("clusters").get<std::vector<ClusterSpec>>();
    g.ethnicities = j.value("ethnicities", g.ethnicities);
    g.ethnicity_weights = j.value("ethnicity_weights", g.ethnicity_weights);
    if (j.contains("birads")) {
      const auto& tables = j.at("birads");
      for (std::size_t t = 0; t < kNumTests; ++t) {
        const auto& per_density = tables.at(std::string(to_string(kAllTests[t])));
        if (per_density.size() != 4) throw Error(ErrorCode::kConfig, "birads tables need four density rows");
        for (std::size_t d = 0; d < 4; ++d) {
          g.birads[t][d][0] = per_density[d].at("negative").get<std::array<double, kNumScores>>();
          g.birads[t][d][1] = per_density[d].at("positive").get<std::array<double, kNumScores>>();
        }
      }
    }
    if (j.contains("label_risk")) {
      RiskParameters r;
      from_json(j.at("label_risk"), r);
      g.label_risk = r;
    }
    if (j.contains("observation_rate")) {
      const auto& r = j.at("observation_rate");
      g.observation_rate = std::array<double, kNumTests>{r.at("MG").get<double>(), r.at("US").get<double>(),
                                                         r.at("MRI").get<double>()};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad generator config: ") + e.what());
  }
}

inline GeneratorConfig GeneratorConfig::defaults() {
  GeneratorConfig g;
  g.clusters = {
      ClusterSpec{"young-dense", 0.25, {44, 5}, {0.02, 0.13, 0.5, 0.35}, {0.8, 0.15, 0.04, 0.01}, {12, 1.2},
                  {31, 4}, {0.85, 0.12, 0.02, 0.01}, 0.1},
      ClusterSpec{"young-low-density", 0.25, {46, 5}, {0.35, 0.5, 0.13, 0.02}, {0.85, 0.12, 0.02, 0.01},
                  {13, 1.2}, {26, 4}, {0.9, 0.08, 0.015, 0.005}, 0.1},
      ClusterSpec{"older-high-risk", 0.2, {62, 7}, {0.1, 0.35, 0.4, 0.15}, {0.3, 0.4, 0.2, 0.1}, {11.5, 1.2},
                  {32, 5}, {0.45, 0.3, 0.15, 0.1}, 0.45},
      ClusterSpec{"older-low-risk", 0.3, {64, 7}, {0.3, 0.5, 0.17, 0.03}, {0.9, 0.08, 0.015, 0.005}, {13.5, 1.2},
                  {24, 4}, {0.92, 0.06, 0.015, 0.005}, 0.15},
  };
  // Score order: 1, 2, 3, 4A, 4B, 4C, 5, 6. Score 6 (known malignancy) only
  // occurs for positives.
  using Row = std::array<double, kNumScores>;
  auto& mg = g.birads[index_of(TestId::kMG)];
  mg[0] = {Row{0.72, 0.20, 0.05, 0.02, 0.007, 0.003, 0.0, 0.0}, Row{0.04, 0.06, 0.10, 0.20, 0.20, 0.15, 0.20, 0.05}};
  mg[1] = {Row{0.66, 0.22, 0.07, 0.03, 0.01, 0.006, 0.004, 0.0}, Row{0.07, 0.08, 0.12, 0.20, 0.18, 0.13, 0.17, 0.05}};
  mg[2] = {Row{0.52, 0.25, 0.12, 0.06, 0.03, 0.012, 0.008, 0.0}, Row{0.16, 0.12, 0.14, 0.18, 0.14, 0.10, 0.12, 0.04}};
  mg[3] = {Row{0.42, 0.25, 0.17, 0.08, 0.045, 0.02, 0.015, 0.0}, Row{0.27, 0.15, 0.15, 0.14, 0.11, 0.07, 0.08, 0.03}};
  auto& us = g.birads[index_of(TestId::kUS)];
  for (std::size_t d = 0; d < 4; ++d)
    us[d] = {Row{0.62, 0.26, 0.08, 0.025, 0.01, 0.005, 0.0, 0.0}, Row{0.06, 0.06, 0.14, 0.18, 0.16, 0.12, 0.23, 0.05}};
  auto& mri = g.birads[index_of(TestId::kMRI)];
  for (std::size_t d = 0; d < 4; ++d)
    mri[d] = {Row{0.60, 0.25, 0.11, 0.025, 0.01, 0.005, 0.0, 0.0}, Row{0.01, 0.01, 0.04, 0.12, 0.16, 0.18, 0.38, 0.10}};
  return g;
}

/// Observation rates matching the historical cohort (MG 93.39%, MRI 2.75%,
/// US 9.21%).
inline std::array<double, kNumTests> cohort_observation_rates() { return {0.9339, 0.0921, 0.0275}; }

namespace detail {

inline long round_clamp(double v, long lo, long hi) { return std::clamp(std::lround(v), lo, hi); }

/// Solves mean(min(1, k * g_i)) = target for k by bisection.
inline double prevalence_scale(const std::vector<double>& g, double target) {
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  if (!(mean > 0.0)) throw Error(ErrorCode::kDegenerateInput, "risk is zero for the whole population");
  auto realized = [&](double k) {
    double s = 0.0;
    for (double v : g) s += std::min(1.0, k * v);
    return s / static_cast<double>(g.size());
  };
  double lo = target / mean, hi = lo;
  while (realized(hi) < target && hi < 1e12) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (realized(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Draws a population: personal features from the latent clusters, labels
/// from the risk model rescaled to the prevalence target, BI-RADS scores from
/// the label- and density-conditioned tables.
inline Dataset generate(const GeneratorConfig& cfg, std::uint64_t seed, const FeatureSchema& schema) {
  cfg.validate();
  Sampler rng(seed);
  std::vector<double> weights;
  for (const auto& c : cfg.clusters) weights.push_back(c.weight);
  const RiskParameters label_model = cfg.label_risk.value_or(RiskParameters{});

  Dataset out;
  out.reserve(cfg.size);
  std::vector<std::size_t> density(cfg.size);
  std::vector<double> risk(cfg.size);
  for (std::size_t i = 0; i < cfg.size; ++i) {
    const auto& c = cfg.clusters[rng.categorical(weights)];
    TrainingRecord r;
    r.id = "P" + std::to_string(i + 1);
    const long age = detail::round_clamp(rng.normal(c.age.mean, c.age.sd), 25, 80);
    density[i] = rng.categorical(c.density);
    const auto family = rng.categorical(c.family_history);
    const long menarche = detail::round_clamp(rng.normal(c.age_menarche.mean, c.age_menarche.sd), 9, 17);
    const long first_birth = detail::round_clamp(rng.normal(c.age_first_birth.mean, c.age_first_birth.sd), 15, 45);
    const auto biopsies = rng.categorical(c.biopsies);
    const bool hormonal = rng.bernoulli(c.hormonal);
    r.raw = {{"age", std::to_string(age)},
             {"breast_density", std::to_string(density[i] + 1)},
             {"ethnicity", cfg.ethnicities[rng.categorical(cfg.ethnicity_weights)]},
             {"gender", "F"},
             {"family_history", std::to_string(family)},
             {"age_menarche", std::to_string(menarche)},
             {"age_first_birth", std::to_string(first_birth)},
             {"num_biopsies", std::to_string(biopsies)},
             {"hormonal_history", hormonal ? "1" : "0"}};
    r.personal = normalize_features(r.raw, schema);
    risk[i] = assess_risk(r.personal, label_model);
    out.push_back(std::move(r));
  }
  if (out.empty()) return out;

  const double k = detail::prevalence_scale(risk, cfg.prevalence);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& r = out[i];
    r.label = rng.bernoulli(std::min(1.0, k * risk[i])) ? 1 : 0;
    for (std::size_t t = 0; t < kNumTests; ++t) {
      const auto& probs = cfg.birads[t][density[i]][static_cast<std::size_t>(r.label)];
      const auto score = kAllScores[rng.categorical(probs)];
      const bool seen = !cfg.observation_rate || rng.bernoulli((*cfg.observation_rate)[t]);
      if (seen) r.screening.observe(kAllTests[t], score);
    }
  }
  return out;
}

inline Dataset generate(const GeneratorConfig& cfg, std::uint64_t seed) {
  return generate(cfg, seed, FeatureSchema::defaults());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> h{
      "patient_id",   "age",          "breast_density", "ethnicity",       "gender",
      "family_history", "age_menarche", "age_first_birth", "num_biopsies", "hormonal_history",
      "mg_birads",    "mri_birads",   "us_birads",      "label"};
  return h;
}

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;

  friend bool operator==(const RejectedRow&, const RejectedRow&) = default;
};

struct CsvLoad {
  Dataset records;
  std::vector<RejectedRow> rejected;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace detail

/// Reads records in the documented column layout; header order may vary.
/// Malformed rows are skipped and reported with their 1-based line number.
inline CsvLoad load_csv(std::istream& in, const FeatureSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kMissingHeader, "CSV input is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[detail::trim_lower(header[i])] = i;
  for (const auto& name : {"patient_id", "mg_birads", "mri_birads", "us_birads", "label"})
    if (!col.count(name)) throw Error(ErrorCode::kMissingHeader, std::string("CSV header lacks column '") + name + "'");

  static const std::array<std::pair<const char*, TestId>, kNumTests> test_cols{
      {{"mg_birads", TestId::kMG}, {"us_birads", TestId::kUS}, {"mri_birads", TestId::kMRI}}};
  CsvLoad out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      out.rejected.push_back({lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(cells.size())});
      continue;
    }
    TrainingRecord r;
    r.id = cells[col["patient_id"]];
    std::string reason;
    const std::string label = detail::trim_lower(cells[col["label"]]);
    if (label == "0" || label == "1") {
      r.label = label == "1" ? 1 : 0;
    } else if (label.empty()) {
      reason = "missing label";
    } else {
      reason = "label outside {0,1}";
    }
    for (const auto& [name, t] : test_cols) {
      if (!reason.empty()) break;
      const auto parsed = parse_birads(cells[col[name]]);
      if (!parsed.valid)
        reason = std::string("invalid BI-RADS token '") + cells[col[name]] + "' in " + name;
      else if (parsed.score)
        r.screening.observe(t, *parsed.score);
    }
    if (reason.empty()) {
      for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = detail::trim_lower(header[i]);
        if (name == "patient_id" || name == "label" || name == "mg_birads" || name == "us_birads" || name == "mri_birads")
          continue;
        r.raw[name] = cells[i];
      }
      try {
        r.personal = normalize_features(r.raw, schema);
      } catch (const Error& e) {
        reason = e.what();
      }
    }
    if (!reason.empty()) {
      out.rejected.push_back({lineno, reason});
      continue;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

inline CsvLoad load_csv(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot read " + path);
  return load_csv(in, schema);
}

/// Writes records in the documented column order. Personal values come from
/// the raw columns when present, else from the schema's inverse mapping.
inline void write_csv(std::span<const TrainingRecord> records, std::ostream& out, const FeatureSchema& schema) {
  const auto& h = csv_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (const auto& r : records) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      const auto& name = h[i];
      std::string cell;
      if (name == "patient_id") {
        cell = r.id;
      } else if (name == "label") {
        cell = std::to_string(r.label);
      } else if (name == "mg_birads" || name == "us_birads" || name == "mri_birads") {
        const TestId t = name == "mg_birads" ? TestId::kMG : name == "us_birads" ? TestId::kUS : TestId::kMRI;
        if (const auto& s = r.screening[t]) cell = std::string(to_string(*s));
      } else if (auto it = r.raw.find(name); it != r.raw.end()) {
        cell = it->second;
      } else if (auto idx = schema.index_of(name); idx && *idx < r.personal.size()) {
        cell = denormalize_value(schema.features[*idx], r.personal[*idx]);
      }
      out << (i ? "," : "") << detail::csv_escape(cell);
    }
    out << '\n';
  }
}

inline void write_csv(std::span<const TrainingRecord> records, const std::string& path, const FeatureSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path);
  write_csv(records, out, schema);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "write failed for " + path);
}

}  // namespace screenwise

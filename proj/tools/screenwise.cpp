#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "screenwise/screenwise.hpp"
#include "screenwise/service.hpp"

namespace sw = screenwise;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

// Everything a run can be configured with. One file may carry all of it:
// policy keys at top level plus optional "generator", "guideline" and
// "schema" sections.
struct Experiment {
  sw::PolicyConfig policy;
  sw::GeneratorConfig generator = sw::GeneratorConfig::defaults();
  sw::GuidelineRules guideline = sw::GuidelineRules::defaults();
  sw::FeatureSchema schema = sw::FeatureSchema::defaults();
};

sw::json read_json(const std::string& path, sw::ErrorCode code) {
  std::ifstream in(path);
  if (!in) throw sw::Error(code, "cannot read " + path);
  sw::json j = sw::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw sw::Error(code, path + " is not valid JSON");
  return j;
}

struct Overrides {
  std::string config;
  std::string generator;
  std::optional<std::uint64_t> seed;
  std::optional<double> eta, delta, gamma, beta;
  bool strict = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Experiment config JSON (policy keys, optional generator/guideline/schema)")
        ->envname("SCREENWISE_CONFIG");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--eta", eta, "FNR threshold eta");
    app->add_option("--delta", delta, "Confidence parameter delta");
    app->add_option("--gamma", gamma, "FPR vs monetary cost weight gamma");
    app->add_option("--beta", beta, "Distance blend weight beta");
    app->add_flag("--strict", strict, "Enforce the uniform-convergence slack and sample complexity");
  }

  Experiment resolve() const {
    Experiment e;
    if (!config.empty()) {
      sw::json j = read_json(config, sw::ErrorCode::kConfig);
      if (!j.is_object()) throw sw::Error(sw::ErrorCode::kConfig, config + ": expected a JSON object");
      try {
        if (j.contains("generator")) sw::from_json(j["generator"], e.generator);
        if (j.contains("guideline")) e.guideline = j["guideline"].get<sw::GuidelineRules>();
        if (j.contains("schema")) e.schema = j["schema"].get<sw::FeatureSchema>();
      } catch (const sw::json::exception& ex) {
        throw sw::Error(sw::ErrorCode::kConfig, config + ": " + ex.what());
      }
      j.erase("generator");
      j.erase("guideline");
      j.erase("schema");
      sw::from_json(j, e.policy);
    }
    if (!generator.empty()) sw::from_json(read_json(generator, sw::ErrorCode::kConfig), e.generator);
    if (seed) {
      e.policy.seed = *seed;
      e.generator.seed = *seed;
    }
    if (eta) e.policy.eta = *eta;
    if (delta) e.policy.delta = *delta;
    if (gamma) e.policy.costs.gamma = *gamma;
    if (beta) e.policy.beta = *beta;
    if (strict) e.policy.strict = true;
    e.policy.validate(e.schema);
    e.generator.validate();
    return e;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw sw::Error(sw::ErrorCode::kUnreadableFile, "cannot write " + path);
}

sw::CsvLoad load_data(const std::string& path, const sw::FeatureSchema& schema) {
  auto load = sw::load_csv(path, schema);
  for (const auto& r : load.rejected) std::cerr << path << ":" << r.line << ": skipped: " << r.reason << "\n";
  return load;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto v = sw::detail::parse_double(tok);
    if (!v) throw sw::Error(sw::ErrorCode::kConfig, "bad number '" + tok + "' in list '" + s + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw sw::Error(sw::ErrorCode::kConfig, "empty list");
  return out;
}

int exit_code(sw::ErrorCode c) {
  switch (c) {
    case sw::ErrorCode::kPolicyInfeasible: return kExitInfeasible;
    case sw::ErrorCode::kConfig:
    case sw::ErrorCode::kInvalidArgument: return kExitConfig;
    default: return kExitOther;
  }
}

// -- execute ---------------------------------------------------------------

std::optional<std::string> prompt(std::istream& in, const std::string& text) {
  std::cerr << text << std::flush;
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

int run_execute(const std::string& policy_path, const std::vector<std::string>& assignments, std::istream& in) {
  const auto policy = sw::load_policy(policy_path);
  std::map<std::string, std::string> raw;
  for (const auto& a : assignments) {
    auto eq = a.find('=');
    if (eq == std::string::npos) throw sw::Error(sw::ErrorCode::kConfig, "--feature expects name=value, got '" + a + "'");
    raw[a.substr(0, eq)] = a.substr(eq + 1);
  }
  if (assignments.empty()) {
    for (const auto& f : policy.schema.features) {
      std::string hint = f.default_value ? " [" + *f.default_value + "]" : "";
      auto v = prompt(in, f.name + hint + ": ");
      if (!v) throw sw::Error(sw::ErrorCode::kInvalidArgument, "input ended while reading features");
      raw[f.name] = *v;
    }
  }
  auto s = sw::start_session(sw::normalize_features(raw, policy.schema), policy);
  std::cout << sw::transcript_line(sw::session_to_json(s)) << std::endl;
  while (!s.final()) {
    const auto test = *s.awaiting;
    auto line = prompt(in, std::string(sw::to_string(test)) + " BI-RADS (1,2,3,4A,4B,4C,5,6): ");
    if (!line) throw sw::Error(sw::ErrorCode::kInvalidArgument, "input ended before a final recommendation");
    const auto parsed = sw::parse_birads(*line);
    if (!parsed.score) {
      std::cerr << "'" << *line << "' is not a recorded BI-RADS score; try again\n";
      continue;
    }
    s = sw::advance_session(std::move(s), test, *parsed.score, policy);
    std::cout << sw::transcript_line(sw::session_to_json(s)) << std::endl;
  }
  return kExitOk;
}

// -- serve -----------------------------------------------------------------

httplib::Server* g_server = nullptr;

int run_serve(const std::string& policy_path, const std::string& host, int port, double ttl_hours,
              const std::string& static_dir) {
  auto policy = std::make_shared<const sw::PartitionedPolicy>(sw::load_policy(policy_path));
  sw::Service service(policy, std::chrono::seconds(static_cast<long long>(ttl_hours * 3600.0)));
  httplib::Server server;
  sw::mount(server, service);
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
    throw sw::Error(sw::ErrorCode::kConfig, "static directory " + static_dir + " does not exist");
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  if (port == 0) port = server.bind_to_any_port(host);
  else if (!server.bind_to_port(host, port))
    throw sw::Error(sw::ErrorCode::kConfig, "cannot bind " + host + ":" + std::to_string(port));
  std::cerr << "serving " << policy->size() << " partitions on http://" << host << ":" << port << "/api/v1\n";
  server.listen_after_bind();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized screening policies with confidence guarantees", "screenwise"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic cohort as CSV");
  Overrides gen_o;
  gen_o.attach(gen);
  std::string gen_out;
  std::optional<std::size_t> gen_size;
  gen->add_option("--generator", gen_o.generator, "Generator config JSON (overrides the config's generator section)");
  gen->add_option("--size", gen_size, "Number of records");
  gen->add_option("--out", gen_out, "Output CSV")->required();

  // train
  auto* train = app.add_subcommand("train", "Build a partitioned policy from a CSV cohort");
  Overrides train_o;
  train_o.attach(train);
  std::string train_data, train_out;
  train->add_option("--data", train_data, "Training CSV")->required();
  train->add_option("--out", train_out, "Output policy JSON")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Evaluate a policy on a CSV cohort");
  Overrides eval_o;
  eval_o.attach(eval);
  std::string eval_policy, eval_data, eval_out;
  eval->add_option("--policy", eval_policy, "Policy JSON")->required();
  eval->add_option("--data", eval_data, "Evaluation CSV")->required();
  eval->add_option("--out", eval_out, "Report JSON (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweeps over beta or training size");
  Overrides sweep_o;
  sweep_o.attach(sweep);
  std::string sweep_kind, sweep_out, sweep_grid, sweep_etas;
  std::size_t sweep_runs = 10, train_size = 5000, test_size = 20000;
  sweep->add_option("--kind", sweep_kind, "beta or m")->required()->check(CLI::IsMember({"beta", "m"}));
  sweep->add_option("--runs", sweep_runs, "Seeds per grid point (seed+1 .. seed+runs)")->check(CLI::PositiveNumber);
  sweep->add_option("--grid", sweep_grid, "Comma-separated grid (default 0,0.25,0.5,0.75,1 or 1000,5000,20000)");
  sweep->add_option("--etas", sweep_etas, "Comma-separated eta values for --kind m (default: --eta)");
  sweep->add_option("--generator", sweep_o.generator, "Generator config JSON");
  sweep->add_option("--train-size", train_size, "Training size for --kind beta");
  sweep->add_option("--test-size", test_size, "Held-out size for --kind beta");
  sweep->add_option("--out", sweep_out, "Output CSV (default stdout)");

  // execute
  auto* exec = app.add_subcommand("execute", "Run one screening session interactively");
  std::string exec_policy;
  std::vector<std::string> exec_features;
  exec->add_option("--policy", exec_policy, "Policy JSON")->required();
  exec->add_option("--feature", exec_features, "Personal feature as name=value (repeatable; prompts when absent)");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the /api/v1 HTTP interface");
  std::string serve_policy, serve_host = "127.0.0.1", serve_static;
  int serve_port = 8080;
  double serve_ttl = 24.0;
  serve->add_option("--policy", serve_policy, "Policy JSON")->required();
  serve->add_option("--port", serve_port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--ttl-hours", serve_ttl, "Session lifetime in hours")->check(CLI::PositiveNumber);
  serve->add_option("--static", serve_static, "Directory served at / (console assets)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      auto e = gen_o.resolve();
      if (gen_size) e.generator.size = *gen_size;
      const auto data = sw::generate(e.generator, e.generator.seed, e.schema);
      std::ostringstream os;
      sw::write_csv(data, os, e.schema);
      write_text(gen_out, os.str());
    } else if (train->parsed()) {
      const auto e = train_o.resolve();
      const auto load = load_data(train_data, e.schema);
      const auto policy = sw::build_policy(load.records, e.policy, e.schema);
      write_text(train_out, sw::serialize_policy(policy));
      std::cout << "trained " << policy.size() << " partitions on " << load.records.size() << " records\n";
    } else if (eval->parsed()) {
      const auto e = eval_o.resolve();
      const auto policy = sw::load_policy(eval_policy);
      const auto load = load_data(eval_data, policy.schema);
      const auto rep = sw::evaluate_policy(policy, load.records);
      const auto guide =
          sw::baseline_guideline(e.guideline, load.records, policy.config.risk, policy.config.costs, policy.schema);
      sw::json out{{"fingerprint", sw::fingerprint(policy.schema, policy.config.risk)},
                   {"records", load.records.size()},
                   {"rejected_rows", load.rejected.size()},
                   {"policy", rep},
                   {"cost_by_risk_quintile", sw::cost_vs_risk(policy, load.records)},
                   {"guideline",
                    {{"stats", guide.stats},
                     {"cost_by_risk_quintile", sw::guideline_cost_vs_risk(guide, load.records, policy.config.risk)}}}};
      write_text(eval_out, out.dump(2) + "\n");
    } else if (sweep->parsed()) {
      const auto e = sweep_o.resolve();
      std::vector<std::uint64_t> seeds;
      for (std::size_t r = 1; r <= sweep_runs; ++r) seeds.push_back(e.policy.seed + r);
      std::ostringstream os;
      if (sweep_kind == "beta") {
        const auto grid = sweep_grid.empty() ? std::vector<double>{0, 0.25, 0.5, 0.75, 1} : parse_list(sweep_grid);
        const auto res = sw::sweep_beta(grid, e.generator, e.policy, seeds, train_size, test_size, e.schema);
        sw::write_beta_csv(res, os);
        std::cerr << "selected beta " << sw::detail::format_double(res.best_beta) << "\n";
      } else {
        std::vector<std::size_t> grid{1000, 5000, 20000};
        if (!sweep_grid.empty()) {
          grid.clear();
          for (double v : parse_list(sweep_grid)) {
            if (!(v >= 1) || v != std::floor(v)) throw sw::Error(sw::ErrorCode::kConfig, "m grid needs positive integers");
            grid.push_back(static_cast<std::size_t>(v));
          }
        }
        const auto etas = sweep_etas.empty() ? std::vector<double>{e.policy.eta} : parse_list(sweep_etas);
        std::vector<sw::SizePoint> pts;
        for (double eta : etas) {
          auto c = e.policy;
          c.eta = eta;
          c.validate(e.schema);
          auto curve = sw::sweep_m(grid, e.generator, c, seeds, e.schema);
          pts.insert(pts.end(), curve.begin(), curve.end());
        }
        sw::write_size_csv(pts, os);
      }
      write_text(sweep_out, os.str());
    } else if (exec->parsed()) {
      return run_execute(exec_policy, exec_features, std::cin);
    } else if (serve->parsed()) {
      return run_serve(serve_policy, serve_host, serve_port, serve_ttl, serve_static);
    }
  } catch (const sw::Error& e) {
    std::cerr << "error (" << sw::to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOk;
}

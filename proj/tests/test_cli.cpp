#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "screenwise/screenwise.hpp"
#include "screenwise/service.hpp"

namespace fs = std::filesystem;
using namespace screenwise;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("screenwise_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  Outcome run(const std::string& args, const std::string& input = {}, const std::string& env = {}) const {
    spit(path("stdin"), input);
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" SCREENWISE_CLI "' " + args + " < '" +
                            path("stdin").string() + "' > '" + path("stdout").string() + "' 2> '" +
                            path("stderr").string() + "'";
    const int raw = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(path("stdout"));
    r.err = slurp(path("stderr"));
    return r;
  }

  std::string q(const std::string& name) const { return "'" + path(name).string() + "'"; }

  fs::path dir_;
};

PartitionedPolicy walkthrough_policy() {
  PartitionedPolicy p;
  p.schema = FeatureSchema::defaults();
  Partition part;
  part.centroid = Centroid{FeatureVector(p.schema.size(), 0.5), 130};
  part.m = 130;
  part.tree.root.test = TestId::kMG;
  part.tree.root.positives = 40;
  part.tree.root.negatives = 90;
  TreeNode us;
  us.test = TestId::kUS;
  us.positives = 26;
  us.negatives = 24;
  us.children = {TreeNode::leaf(0, 0, 10), TreeNode::leaf(1, 6, 10), TreeNode::leaf(1, 20, 4)};
  part.tree.root.children = {TreeNode::leaf(0, 0, 60), us, TreeNode::leaf(1, 14, 6)};
  p.partitions.push_back(part);
  return p;
}

const std::string kFeatures =
    "--feature age=52 --feature breast_density=3 --feature family_history=1 --feature num_biopsies=0";

}  // namespace

TEST_F(Cli, HelpMatchesGolden) {
  const fs::path golden = fs::path(SCREENWISE_SOURCE_DIR) / "tests" / "golden";
  for (const std::string sub : {"", "generate", "train", "evaluate", "sweep", "execute", "serve"}) {
    const auto r = run(sub + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_EQ(r.out, slurp(golden / ("help" + (sub.empty() ? "" : "_" + sub) + ".txt"))) << sub;
  }
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train --bogus").code, 2);
  EXPECT_EQ(run("train --data x.csv").code, 2);
  EXPECT_EQ(run("sweep --kind gamma").code, 2);
  const auto bad = run("generate --out " + q("d.csv") + " --eta 1.5");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("error (ConfigError)"), std::string::npos) << bad.err;
}

TEST_F(Cli, GenerateTrainEvaluate) {
  ASSERT_EQ(run("generate --seed 5 --size 3000 --out " + q("d.csv")).code, 0);
  const auto load = load_csv(path("d.csv").string(), FeatureSchema::defaults());
  ASSERT_EQ(load.records.size(), 3000u);
  EXPECT_TRUE(load.rejected.empty());
  auto g = GeneratorConfig::defaults();
  g.size = 3000;
  const auto direct = generate(g, 5);
  for (std::size_t i = 0; i < direct.size(); ++i) {
    ASSERT_EQ(load.records[i].label, direct[i].label);
    ASSERT_EQ(load.records[i].screening, direct[i].screening);
    ASSERT_EQ(load.records[i].personal, direct[i].personal);
  }

  const auto a = run("train --data " + q("d.csv") + " --out " + q("a.json"));
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("partitions on 3000 records"), std::string::npos);
  ASSERT_EQ(run("train --data " + q("d.csv") + " --out " + q("b.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a.json")), serialize_policy(build_policy(load.records, PolicyConfig{}, FeatureSchema::defaults())));

  const auto ev = run("evaluate --policy " + q("a.json") + " --data " + q("d.csv"));
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto rep = json::parse(ev.out);
  EXPECT_EQ(rep["records"], 3000);
  EXPECT_EQ(rep["cost_by_risk_quintile"].size(), 5u);
  EXPECT_TRUE(rep["guideline"].contains("stats"));
}

TEST_F(Cli, AllNegativeCohortGivesOnePartition) {
  auto g = GeneratorConfig::defaults();
  g.size = 500;
  auto data = generate(g, 6);
  for (auto& r : data) r.label = 0;
  write_csv(data, path("neg.csv").string(), FeatureSchema::defaults());
  const auto r = run("train --data " + q("neg.csv") + " --out " + q("p.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_policy(path("p.json").string()).size(), 1u);
}

TEST_F(Cli, StrictInfeasibleExitsThree) {
  ASSERT_EQ(run("generate --size 20000 --out " + q("d.csv")).code, 0);
  const auto r = run("train --strict --eta 0.02 --data " + q("d.csv") + " --out " + q("p.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("PolicyInfeasible"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("35358"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("p.json")));
}

TEST_F(Cli, ConfigFromEnvironment) {
  spit(path("cfg.json"), R"({"eta": 1.7})");
  const std::string env = "SCREENWISE_CONFIG='" + path("cfg.json").string() + "'";
  EXPECT_EQ(run("generate --size 10 --out " + q("d.csv"), "", env).code, 2);
  spit(path("cfg.json"), R"({"seed": 9, "generator": {"size": 40}})");
  ASSERT_EQ(run("generate --out " + q("d.csv"), "", env).code, 0);
  EXPECT_EQ(load_csv(path("d.csv").string(), FeatureSchema::defaults()).records.size(), 40u);
}

TEST_F(Cli, ExecuteWalkthroughWithReprompt) {
  save_policy(walkthrough_policy(), path("p.json").string());
  const auto r = run("execute --policy " + q("p.json") + " " + kFeatures, "4Z\n0\n3\n\n2\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("'4Z' is not a recorded BI-RADS score; try again"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("'0' is not a recorded BI-RADS score"), std::string::npos);
  std::vector<std::string> lines;
  std::istringstream is(r.out);
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 3u) << r.out;
  EXPECT_NE(lines[0].find("| next MG"), std::string::npos);
  EXPECT_NE(lines[1].find("| MG=3 | cost 0.1 |"), std::string::npos) << lines[1];
  EXPECT_NE(lines[1].find("| next US"), std::string::npos);
  EXPECT_NE(lines[2].find("| US=2 |"), std::string::npos) << lines[2];
  EXPECT_NE(lines[2].find("Final(0): regular followup"), std::string::npos) << lines[2];
}

TEST_F(Cli, ExecutePromptsForFeatures) {
  save_policy(walkthrough_policy(), path("p.json").string());
  std::string input;
  for (const auto& f : FeatureSchema::defaults().features)
    input += f.name == "age" ? "61\n" : f.name == "breast_density" ? "2\n" : "\n";
  const auto r = run("execute --policy " + q("p.json"), input + "5\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("age"), std::string::npos);
  EXPECT_NE(r.out.find("Final(1): biopsy"), std::string::npos) << r.out;
  EXPECT_EQ(run("execute --policy " + q("p.json") + " " + kFeatures, "3\n").code, 2);
}

TEST_F(Cli, ExecuteTranscriptMatchesService) {
  auto g = GeneratorConfig::defaults();
  g.size = 4000;
  const auto train = generate(g, 8);
  auto policy = std::make_shared<const PartitionedPolicy>(build_policy(train, PolicyConfig{}, FeatureSchema::defaults()));
  save_policy(*policy, path("p.json").string());
  Service service(policy);
  g.size = 12;
  for (const auto& rec : generate(g, 9)) {
    std::string flags;
    json features = json::object();
    for (const auto& [k, v] : rec.raw) {
      if (!v.empty()) flags += " --feature '" + k + "=" + v + "'";
      features[k] = v;
    }
    auto view = service.create_session(json{{"features", features}}.dump());
    ASSERT_EQ(view.status, 201) << view.body.dump();
    std::string expected = transcript_line(view.body) + "\n", input;
    const auto id = view.body["session_id"].get<std::string>();
    while (view.body["status"] == "awaiting_outcome") {
      const auto t = *parse_test(view.body["recommended_test"].get<std::string>());
      const std::string score(to_string(*rec.screening[t]));
      input += score + "\n";
      view = service.post_outcome(id, json{{"test", to_string(t)}, {"birads", score}}.dump());
      ASSERT_EQ(view.status, 200);
      expected += transcript_line(view.body) + "\n";
    }
    const auto r = run("execute --policy " + q("p.json") + flags, input);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, expected);
  }
}

TEST_F(Cli, SweepWritesCsv) {
  const auto r = run("sweep --kind m --runs 2 --grid 500,1000 --etas 0.2");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream is(r.out);
  std::string header;
  std::getline(is, header);
  EXPECT_FALSE(header.empty());
  std::size_t rows = 0;
  for (std::string l; std::getline(is, l);) rows += !l.empty();
  EXPECT_EQ(rows, 2u);
}
